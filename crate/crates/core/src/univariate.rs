//! Exact univariate LTAD by scanning contiguous windows of the sorted sample.
//!
//! For a fixed location the best `h` points are the `h` nearest ones, which
//! form a contiguous run in sorted order, so the optimum is the best of the
//! `n − h + 1` windows `{x_(s), …, x_(s+h−1)}`. Each window is scored in O(1)
//! from prefix sums: with `k = ⌊h/2⌋`, the sum of absolute deviations from any
//! median of the window equals (sum of its top `k`) − (sum of its bottom `k`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Selection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSolution {
    /// 0-based rank of the window's first order statistic.
    pub start_rank: usize,
    pub m: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSolution {
    pub m: f64,
    pub selection: Selection,
    pub objective: f64,
}

struct SortedSample {
    /// `(value, original index)` sorted by value, then index.
    order: Vec<(f64, usize)>,
    prefix: Vec<f64>,
}

impl SortedSample {
    fn new(x: &[f64], h: usize) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if h == 0 || h > n {
            return Err(Error::InvalidCoverage { h, n });
        }
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        let mut order: Vec<(f64, usize)> = x.iter().copied().zip(0..).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &(v, _) in &order {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { order, prefix })
    }

    fn value(&self, rank: usize) -> f64 {
        self.order[rank].0
    }

    fn window_median(&self, s: usize, h: usize) -> f64 {
        if h % 2 == 1 {
            self.value(s + h / 2)
        } else {
            0.5 * (self.value(s + h / 2 - 1) + self.value(s + h / 2))
        }
    }

    fn window_cost(&self, s: usize, h: usize) -> f64 {
        let k = h / 2;
        let top = self.prefix[s + h] - self.prefix[s + h - k];
        let bottom = self.prefix[s + k] - self.prefix[s];
        (top - bottom).max(0.0)
    }

    /// Direct `Σ |x − m|` over the window, used for the reported objective.
    fn window_cost_direct(&self, s: usize, h: usize, m: f64) -> f64 {
        self.order[s..s + h].iter().map(|(v, _)| (v - m).abs()).sum()
    }
}

/// Every window of `h` consecutive order statistics with its median and cost.
pub fn enumerate_windows(x: &[f64], h: usize) -> Result<Vec<WindowSolution>> {
    let sample = SortedSample::new(x, h)?;
    Ok((0..=x.len() - h)
        .map(|s| {
            let m = sample.window_median(s, h);
            WindowSolution {
                start_rank: s,
                m,
                objective: sample.window_cost_direct(s, h, m),
            }
        })
        .collect())
}

/// Exact univariate LTAD. Ties between windows go to the smallest start rank.
pub fn solve_univariate(x: &[f64], h: usize) -> Result<UnivariateSolution> {
    let sample = SortedSample::new(x, h)?;
    let n = x.len();
    let mut best = (0usize, f64::INFINITY);
    for s in 0..=n - h {
        let cost = sample.window_cost(s, h);
        if cost < best.1 {
            best = (s, cost);
        }
    }
    let s = best.0;
    let m = sample.window_median(s, h);
    let indices = sample.order[s..s + h].iter().map(|&(_, i)| i).collect();
    Ok(UnivariateSolution {
        m,
        selection: Selection::new(indices, n)?,
        objective: sample.window_cost_direct(s, h, m),
    })
}
