use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::lagrangian::{lagrangian_dual_w, warm_start};
use crate::lp::projection::{project_capped_simplex_into, project_two_step};
use crate::lp::simplex::solve_lp_simplex;
use crate::model::{self, DataMatrix, WeightVector, WEIGHT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `α` at every iteration.
    Constant,
    /// `α / √k` at iteration `k ≥ 1`.
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    ExactCappedSimplex,
    /// Hyperplane projection then clipping; may leave `Σw ≠ h`.
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpBackend {
    /// Simplex up to [`SIMPLEX_MAX_CELLS`] data cells, subgradient above.
    Auto,
    Simplex,
    Subgradient,
}

/// Largest `n·p` that `LpBackend::Auto` hands to the simplex.
pub const SIMPLEX_MAX_CELLS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    AlternatingLagrangian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: LpBackend,
    pub step_alpha: f64,
    pub step_schedule: StepSchedule,
    /// Stop once `‖w^{k+1} − w^k‖₂` drops below this.
    pub w_tolerance: f64,
    pub max_iterations: usize,
    pub projection_mode: ProjectionMode,
    pub init_mode: InitMode,
    /// Residuals `|w_i x_ij − m_j|` at or below this count as ties (sign 0).
    pub tie_tolerance: f64,
    /// Rounds of exact weight updates at the final location, each kept only
    /// if it does not raise the objective. Pulls the iterate onto a vertex.
    pub polish_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: LpBackend::Auto,
            step_alpha: 1.0,
            step_schedule: StepSchedule::Diminishing,
            w_tolerance: 1e-6,
            max_iterations: 5000,
            projection_mode: ProjectionMode::ExactCappedSimplex,
            init_mode: InitMode::AlternatingLagrangian,
            tie_tolerance: 1e-12,
            polish_rounds: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step_alpha", self.step_alpha)?;
        positive("w_tolerance", self.w_tolerance)?;
        positive("tie_tolerance", self.tie_tolerance)?;
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: usize,
    /// Best objective seen after each iteration (non-increasing).
    pub objective_history: Vec<f64>,
    pub final_step_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub weights: WeightVector,
    /// `m(w)` at the returned weights.
    pub m: Vec<f64>,
    pub objective: f64,
    pub trace: SolveTrace,
}

/// Minimizes `f(w)` over the capped simplex with the configured backend.
/// Under `Auto`, a simplex failure falls back to the subgradient method.
pub fn solve_lp_ltad(x: &DataMatrix, h: usize, cfg: &SolverConfig) -> Result<LpSolution> {
    cfg.validate()?;
    let n = x.n();
    if h == 0 || h > n {
        return Err(Error::InvalidCoverage { h, n });
    }
    match cfg.backend {
        LpBackend::Simplex => solve_lp_simplex(x, h),
        LpBackend::Subgradient => solve_subgradient(x, h, cfg),
        LpBackend::Auto if n * x.p() <= SIMPLEX_MAX_CELLS => {
            solve_lp_simplex(x, h).or_else(|_| solve_subgradient(x, h, cfg))
        }
        LpBackend::Auto => solve_subgradient(x, h, cfg),
    }
}

/// Projected subgradient descent on `f(w)` over the capped simplex.
///
/// Subgradient steps are not monotone, so the best iterate is returned; it is
/// never worse than the starting point.
fn solve_subgradient(x: &DataMatrix, h: usize, cfg: &SolverConfig) -> Result<LpSolution> {
    let n = x.n();
    let start = match cfg.init_mode {
        InitMode::AlternatingLagrangian => warm_start(x, h, cfg)?,
        InitMode::Uniform => WeightVector::uniform(n, h)?,
    };

    let mut buf = Vec::with_capacity(n);
    let mut g = vec![0.0; n];
    let mut w = start.into_vec();
    let mut m = model::weighted_medians(x, &w, &mut buf);
    let mut f = model::subgradient_at(x, &w, &m, cfg.tie_tolerance, &mut g);
    let mut best = (w.clone(), m.clone(), f);

    let mut history = Vec::new();
    let mut converged = false;
    let mut step_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut next = vec![0.0; n];

    if h == n {
        converged = true;
        step_norm = 0.0;
    }

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let alpha = match cfg.step_schedule {
            StepSchedule::Constant => cfg.step_alpha,
            StepSchedule::Diminishing => cfg.step_alpha / (iterations as f64).sqrt(),
        };
        for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&g) {
            *t = wi - alpha * gi;
        }
        match cfg.projection_mode {
            ProjectionMode::ExactCappedSimplex => project_capped_simplex_into(&trial, h, &mut next)?,
            ProjectionMode::TwoStep => next.copy_from_slice(&project_two_step(&trial, h)),
        }
        step_norm = w
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut w, &mut next);
        model::weighted_medians_into(x, &w, &mut buf, &mut m);
        f = model::subgradient_at(x, &w, &m, cfg.tie_tolerance, &mut g);

        let feasible = (w.iter().sum::<f64>() - h as f64).abs() <= WEIGHT_TOLERANCE;
        if feasible && f < best.2 {
            best.0.copy_from_slice(&w);
            best.1.copy_from_slice(&m);
            best.2 = f;
        }
        history.push(best.2);
        if step_norm < cfg.w_tolerance {
            converged = true;
        }
    }
    if history.is_empty() {
        history.push(best.2);
    }

    if h < n {
        polish(x, h, cfg.polish_rounds, &mut best)?;
    }

    let (w, m, objective) = best;
    Ok(LpSolution {
        weights: WeightVector::from_projection(w, h),
        m,
        objective,
        trace: SolveTrace {
            iterations,
            objective_history: history,
            final_step_norm: step_norm,
            converged,
        },
    })
}

fn polish(x: &DataMatrix, h: usize, rounds: usize, best: &mut (Vec<f64>, Vec<f64>, f64)) -> Result<()> {
    for _ in 0..rounds {
        let Ok(next) = lagrangian_dual_w(x, &best.1, h) else {
            break;
        };
        if next.as_slice() == best.0.as_slice() {
            break;
        }
        let m = model::weighted_median_vector(x, next.as_slice())?;
        let f = model::objective_at(x, next.as_slice(), &m);
        if f > best.2 {
            break;
        }
        let improved = f < best.2;
        *best = (next.into_vec(), m, f);
        if !improved {
            break;
        }
    }
    Ok(())
}
