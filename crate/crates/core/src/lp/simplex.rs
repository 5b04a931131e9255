use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::lp::projection::project_capped_simplex;
use crate::lp::solver::{LpSolution, SolveTrace};
use crate::model::{self, DataMatrix, WeightVector};

/// Weights this close to 0 or 1 are snapped onto the bound.
const SNAP: f64 = 1e-9;

/// Solves the relaxation exactly with a simplex method, using the
/// split `w_i x_ij − m_j = u_ij − v_ij`, `u, v ≥ 0`, and minimizing `Σ(u + v)`.
pub fn solve_lp_simplex(x: &DataMatrix, h: usize) -> Result<LpSolution> {
    let (n, p) = (x.n(), x.p());
    if h == 0 || h > n {
        return Err(Error::InvalidCoverage { h, n });
    }
    let mut pr = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = (0..n).map(|_| pr.add_var(0.0, (0.0, 1.0))).collect();
    let m: Vec<_> = (0..p).map(|_| pr.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    pr.add_constraint(w.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, h as f64);
    for (i, row) in x.rows().enumerate() {
        for (j, &xij) in row.iter().enumerate() {
            let u = pr.add_var(1.0, (0.0, f64::INFINITY));
            let v = pr.add_var(1.0, (0.0, f64::INFINITY));
            pr.add_constraint([(w[i], xij), (m[j], -1.0), (u, -1.0), (v, 1.0)], ComparisonOp::Eq, 0.0);
        }
    }
    let sol = pr
        .solve()
        .map_err(|e| Error::LpSolver(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::LpSolver("interrupted".into()))?;

    let mut weights: Vec<f64> = w
        .iter()
        .map(|&v| {
            let a = sol[v].clamp(0.0, 1.0);
            if a < SNAP {
                0.0
            } else if a > 1.0 - SNAP {
                1.0
            } else {
                a
            }
        })
        .collect();
    if (weights.iter().sum::<f64>() - h as f64).abs() > 1e-12 {
        weights = project_capped_simplex(&weights, h)?.into_vec();
    }
    let mut buf = Vec::with_capacity(n);
    let m = model::weighted_medians(x, &weights, &mut buf);
    let objective = model::objective_at(x, &weights, &m);
    Ok(LpSolution {
        weights: WeightVector::from_projection(weights, h),
        m,
        objective,
        trace: SolveTrace {
            iterations: 1,
            objective_history: vec![objective],
            final_step_norm: 0.0,
            converged: true,
        },
    })
}
