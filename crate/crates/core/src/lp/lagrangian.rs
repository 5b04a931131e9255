//! Warm start for the relaxed problem by alternating between the weights
//! and the location.
//!
//! For fixed `m`, the weight problem `min Σ_i ‖w_i x_i − m‖₁` over the capped
//! simplex has a single coupling constraint `Σw = h`. Dualizing it with a
//! multiplier `δ` splits the problem into `n` one-dimensional problems
//! `min_{w∈[0,1]} g_i(w) = ‖w x_i − m‖₁ − δw`, each piecewise linear with
//! kinks at `m_j / x_ij`. The dual is concave in `δ` with supergradient
//! `h − Σ_i w_i(δ)`, which is monotone, so the outer problem is a bisection.

use crate::error::{Error, Result};
use crate::lp::projection::project_capped_simplex;
use crate::lp::solver::SolverConfig;
use crate::model::{self, l1_norm, DataMatrix, WeightVector};

/// Rounds of the alternating scheme before giving up on convergence.
pub const WARM_START_ROUNDS: usize = 50;
const MAX_BRACKET_WIDENINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// Minimizes `‖w·x − m‖₁ − δw` over `w ∈ [0, 1]`; returns `(w, value)`.
///
/// Ties between candidate points go to the larger `w`.
pub fn lagrangian_inner_w(x: &[f64], m: &[f64], delta: f64) -> (f64, f64) {
    let pieces = RowPieces::new(x, m);
    let (w, value) = pieces.argmin(delta);
    (w, value)
}

/// Candidate points of one row and their δ-independent costs.
struct RowPieces {
    w: Vec<f64>,
    cost: Vec<f64>,
}

impl RowPieces {
    fn new(x: &[f64], m: &[f64]) -> Self {
        let mut w = vec![0.0, 1.0];
        w.extend(x.iter().zip(m).filter_map(|(&xj, &mj)| {
            if xj == 0.0 {
                return None;
            }
            let t = mj / xj;
            (t > 0.0 && t < 1.0).then_some(t)
        }));
        let cost = w
            .iter()
            .map(|&t| x.iter().zip(m).map(|(xj, mj)| (t * xj - mj).abs()).sum())
            .collect();
        Self { w, cost }
    }

    fn argmin(&self, delta: f64) -> (f64, f64) {
        let mut best_w = self.w[0];
        let mut best = self.cost[0] - delta * best_w;
        for (&w, &c) in self.w.iter().zip(&self.cost).skip(1) {
            let v = c - delta * w;
            let tol = 1e-12 * v.abs().max(best.abs()).max(1.0);
            if v < best - tol || (v <= best + tol && w > best_w) {
                best = best.min(v);
                best_w = w;
            }
        }
        (best_w, best)
    }
}

fn weights_at(rows: &[RowPieces], delta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (r, o) in rows.iter().zip(out.iter_mut()) {
        *o = r.argmin(delta).0;
        sum += *o;
    }
    sum
}

/// Weights minimizing `Σ_i ‖w_i x_i − m‖₁` over the capped simplex, via the
/// Lagrangian dual of the sum constraint.
pub fn lagrangian_dual_w(x: &DataMatrix, m: &[f64], h: usize) -> Result<WeightVector> {
    let n = x.n();
    if m.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: m.len(),
        });
    }
    if h == 0 || h > n {
        return Err(Error::InvalidCoverage { h, n });
    }
    if h == n {
        return WeightVector::new(vec![1.0; n], h);
    }
    let target = h as f64;
    let rows: Vec<RowPieces> = x.rows().map(|r| RowPieces::new(r, m)).collect();

    // Row slopes are bounded by ‖x_i‖₁, so this bracket already separates
    // all-zero from all-one weights; widening covers rounding surprises.
    let radius = x.rows().map(l1_norm).fold(0.0, f64::max) + 1.0;
    let (mut lo, mut hi) = (-radius, radius);
    let mut w_lo = vec![0.0; n];
    let mut w_hi = vec![0.0; n];
    let mut s_lo = weights_at(&rows, lo, &mut w_lo);
    let mut s_hi = weights_at(&rows, hi, &mut w_hi);
    let mut widenings = 0;
    while !(s_lo <= target && s_hi >= target) {
        if widenings == MAX_BRACKET_WIDENINGS || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DualBracket);
        }
        widenings += 1;
        if s_lo > target {
            lo *= 2.0;
            s_lo = weights_at(&rows, lo, &mut w_lo);
        }
        if s_hi < target {
            hi *= 2.0;
            s_hi = weights_at(&rows, hi, &mut w_hi);
        }
    }

    let mut w_mid = vec![0.0; n];
    for _ in 0..MAX_BISECTIONS {
        if s_lo == target {
            w_hi.copy_from_slice(&w_lo);
            s_hi = s_lo;
            break;
        }
        if s_hi == target {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s_mid = weights_at(&rows, mid, &mut w_mid);
        if s_mid <= target {
            lo = mid;
            s_lo = s_mid;
            std::mem::swap(&mut w_lo, &mut w_mid);
        } else {
            hi = mid;
            s_hi = s_mid;
            std::mem::swap(&mut w_hi, &mut w_mid);
        }
    }

    // Both endpoint allocations minimize the inner problems at the crossing
    // multiplier, so any convex combination does too; pick the one with the
    // right total, then let the projection clean up rounding.
    let t = if s_hi > s_lo {
        (target - s_lo) / (s_hi - s_lo)
    } else {
        1.0
    };
    let blend: Vec<f64> = w_lo
        .iter()
        .zip(&w_hi)
        .map(|(a, b)| a + t * (b - a))
        .collect();
    project_capped_simplex(&blend, h)
}

/// Alternates exact weight and location updates from the uniform start and
/// returns the best weights seen, never worse than the uniform start.
pub fn warm_start(x: &DataMatrix, h: usize, cfg: &SolverConfig) -> Result<WeightVector> {
    let n = x.n();
    let uniform = WeightVector::uniform(n, h)?;
    if h == n {
        return Ok(uniform);
    }
    let mut best_f = model::lp_objective_f(x, uniform.as_slice())?;
    let mut best = uniform.clone();

    let mut w = uniform;
    let mut m = model::weighted_median_vector(x, w.as_slice())?;
    for _ in 0..WARM_START_ROUNDS {
        let next = match lagrangian_dual_w(x, &m, h) {
            Ok(next) => next,
            Err(_) => break,
        };
        m = model::weighted_median_vector(x, next.as_slice())?;
        let f = model::objective_at(x, next.as_slice(), &m);
        if f < best_f {
            best_f = f;
            best = next.clone();
        }
        let step: f64 = w
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        w = next;
        if step < cfg.w_tolerance {
            break;
        }
    }
    Ok(best)
}
