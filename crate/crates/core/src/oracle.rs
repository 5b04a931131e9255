//! Exact solvers by enumerating every `h`-subset. Small instances only.
//!
//! For a fixed subset both objectives separate by coordinate, so the inner
//! minimization over `m` is a median:
//!
//! * trimmed L1 cost: median of the selected values;
//! * MILP cost: median of the selected values padded with `n − h` zeros,
//!   which minimizes `Σ_{i∈T}|x_ij − m_j| + (n − h)|m_j|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, median_in_place, DataMatrix, Selection};

/// Largest number of subsets the oracle will enumerate.
pub const ORACLE_SUBSET_LIMIT: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OracleModel {
    Minlp,
    Milp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub selection: Selection,
    pub m: Vec<f64>,
    pub objective: f64,
    pub model: OracleModel,
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn oracle_fits(n: usize, h: usize) -> bool {
    binomial(n, h) <= ORACLE_SUBSET_LIMIT
}

fn guard(x: &DataMatrix, h: usize) -> Result<()> {
    let n = x.n();
    if h == 0 || h > n {
        return Err(Error::InvalidCoverage { h, n });
    }
    if !oracle_fits(n, h) {
        return Err(Error::OracleSizeGuard {
            n,
            h,
            limit: ORACLE_SUBSET_LIMIT,
        });
    }
    Ok(())
}

/// Visits every `h`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, h: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..h).collect();
    loop {
        visit(&idx);
        let mut i = h;
        while i > 0 && idx[i - 1] == n - h + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for k in i..h {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

fn enumerate(x: &DataMatrix, h: usize, zero_pad: usize, model: OracleModel) -> Result<OracleResult> {
    guard(x, h)?;
    let (n, p) = (x.n(), x.p());
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut buf = Vec::with_capacity(h + zero_pad);
    let mut m = vec![0.0; p];
    for_each_subset(n, h, |subset| {
        for (j, mj) in m.iter_mut().enumerate() {
            buf.clear();
            buf.extend(subset.iter().map(|&i| x.get(i, j)));
            buf.extend(std::iter::repeat_n(0.0, zero_pad));
            *mj = median_in_place(&mut buf);
        }
        let mut cost: f64 = subset.iter().map(|&i| model::l1_distance(x.row(i), &m)).sum();
        if zero_pad > 0 {
            cost += zero_pad as f64 * model::l1_norm(&m);
        }
        // Strict improvement keeps the lexicographically first optimum.
        if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
            best = Some((cost, subset.to_vec(), m.clone()));
        }
    });
    let (objective, subset, m) = best.expect("at least one subset");
    Ok(OracleResult {
        selection: Selection::new(subset, n)?,
        m,
        objective,
        model,
    })
}

/// Global optimum of the trimmed L1 problem.
pub fn oracle_minlp(x: &DataMatrix, h: usize) -> Result<OracleResult> {
    enumerate(x, h, 0, OracleModel::Minlp)
}

/// Global optimum of the MILP (integral weights, zero-shrunk trimmed rows).
pub fn oracle_milp(x: &DataMatrix, h: usize) -> Result<OracleResult> {
    let pad = x.n().saturating_sub(h);
    enumerate(x, h, pad, OracleModel::Milp)
}
