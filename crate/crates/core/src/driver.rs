//! Recentering loop around the relaxed problem, weight rounding, and the
//! concentration-step heuristic used as a comparator.
//!
//! The relaxation is exact when its optimal location is the origin: trimmed
//! rows then cost nothing and the optimal weights are the indicator of the
//! `h` rows with the smallest L1 norm. The driver therefore re-solves on data
//! translated by the running location until the relaxed location vanishes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp_ltad, SolverConfig};
use crate::model::{
    self, l1_distance, l2_norm, ltad_objective, median_in_place, selection_median, DataMatrix,
    LocationEstimate, Selection, WeightVector,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    /// Stop once the relaxed location has Euclidean norm below this.
    pub m_tolerance: f64,
    pub max_outer_iterations: usize,
    pub solver: SolverConfig,
    /// Report the coordinate-wise median of the selected rows instead of
    /// the accumulated shift.
    pub refit_median: bool,
    /// Divide each column by its MAD before solving (MAD = 0 columns untouched).
    pub standardize: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            m_tolerance: 1e-6,
            max_outer_iterations: 100,
            solver: SolverConfig::default(),
            refit_median: true,
            standardize: false,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_tolerance > 0.0 && self.m_tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "m_tolerance must be positive, got {}",
                self.m_tolerance
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig("max_outer_iterations must be at least 1".into()));
        }
        self.solver.validate()
    }
}

/// One pass of the recentering loop, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    /// Translation in effect when this relaxation was solved.
    pub shift: Vec<f64>,
    /// Relaxed location on the translated data.
    pub lp_location: Vec<f64>,
    pub lp_objective: f64,
    pub lp_iterations: usize,
    pub lp_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimate: LocationEstimate,
    /// `cumulative_shift + m*`, the location implied by the recentering alone.
    pub shift_estimate: Vec<f64>,
    pub selection: Selection,
    /// Final fractional weights, before rounding.
    pub weights: WeightVector,
    pub integrality_gap: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Relaxed location `m*` of the reported pass, in original units.
    pub final_lp_location: Vec<f64>,
    pub m_tolerance: f64,
    pub trace: Vec<OuterStep>,
}

/// `true` when the weights are integral within `tol` and the relaxed
/// location vanished, the regime where the relaxation solves the MILP.
pub fn check_integrality(result: &EstimationResult, tol: f64) -> bool {
    result.integrality_gap <= tol && l2_norm(&result.final_lp_location) <= result.m_tolerance
}

/// The `h` rows with the largest weights; ties by smaller `‖x_i − m‖₁`, then index.
pub fn round_weights(w: &WeightVector, x: &DataMatrix, m: &[f64]) -> Result<Selection> {
    if w.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: w.len(),
        });
    }
    if m.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: m.len(),
        });
    }
    let ws = w.as_slice();
    let dist: Vec<f64> = x.rows().map(|r| l1_distance(r, m)).collect();
    let mut order: Vec<usize> = (0..x.n()).collect();
    order.sort_by(|&a, &b| {
        ws[b]
            .total_cmp(&ws[a])
            .then(dist[a].total_cmp(&dist[b]))
            .then(a.cmp(&b))
    });
    order.truncate(w.h());
    Selection::new(order, x.n())
}

/// Per-column median absolute deviation, with zero replaced by one.
pub fn mad_scale(x: &DataMatrix) -> Vec<f64> {
    let mut buf = Vec::with_capacity(x.n());
    (0..x.p())
        .map(|j| {
            buf.clear();
            buf.extend(x.rows().map(|r| r[j]));
            let med = median_in_place(&mut buf);
            for v in buf.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = median_in_place(&mut buf);
            if mad > 0.0 {
                mad
            } else {
                1.0
            }
        })
        .collect()
}

fn check_coverage(x: &DataMatrix, h: usize) -> Result<()> {
    if h == 0 || h > x.n() {
        return Err(Error::InvalidCoverage { h, n: x.n() });
    }
    Ok(())
}

/// Trimmed L1 location by repeatedly solving the relaxation and recentering.
pub fn estimate_ltad(x: &DataMatrix, h: usize, cfg: &DriverConfig) -> Result<EstimationResult> {
    check_coverage(x, h)?;
    cfg.validate()?;
    let p = x.p();
    let scale = if cfg.standardize {
        mad_scale(x)
    } else {
        vec![1.0; p]
    };
    let unscale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&scale).map(|(a, s)| a * s).collect() };
    let base = if cfg.standardize { x.scaled(&scale) } else { x.clone() };

    let mut shift = vec![0.0; p];
    let mut trace = Vec::new();
    let mut best: Option<EstimationResult> = None;

    for outer in 1..=cfg.max_outer_iterations {
        let working = base.translated(&shift);
        let sol = solve_lp_ltad(&working, h, &cfg.solver)?;
        let m_star = sol.m.clone();

        let selection = round_weights(&sol.weights, &working, &m_star)?;
        let located: Vec<f64> = shift.iter().zip(&m_star).map(|(s, m)| s + m).collect();
        let shift_estimate = unscale(&located);
        let cumulative_shift = unscale(&shift);
        let m = if cfg.refit_median {
            selection_median(x, &selection)
        } else {
            shift_estimate.clone()
        };
        let objective = ltad_objective(x, &selection, &m)?;

        trace.push(OuterStep {
            shift: cumulative_shift.clone(),
            lp_location: unscale(&m_star),
            lp_objective: sol.objective,
            lp_iterations: sol.trace.iterations,
            lp_converged: sol.trace.converged,
        });

        let converged = l2_norm(&m_star) < cfg.m_tolerance;
        let result = EstimationResult {
            estimate: LocationEstimate {
                m,
                cumulative_shift,
                refit: cfg.refit_median,
                objective,
            },
            shift_estimate,
            selection,
            integrality_gap: sol.weights.integrality_gap(),
            weights: sol.weights,
            outer_iterations: outer,
            converged,
            final_lp_location: unscale(&m_star),
            m_tolerance: cfg.m_tolerance,
            trace: Vec::new(),
        };
        if converged {
            return Ok(EstimationResult { trace, ..result });
        }
        if best
            .as_ref()
            .is_none_or(|b| result.estimate.objective < b.estimate.objective)
        {
            best = Some(result);
        }
        for (s, m) in shift.iter_mut().zip(&m_star) {
            *s += m;
        }
    }
    let best = best.expect("at least one outer iteration");
    Ok(EstimationResult {
        trace,
        outer_iterations: cfg.max_outer_iterations,
        ..best
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub max_steps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            max_steps: 100,
            restarts: 10,
            seed: 0,
        }
    }
}

/// Outcome of concentration steps from one start.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRun {
    pub selection: Selection,
    pub m: Vec<f64>,
    /// Objective after each step; the first entry is the start.
    pub objective_history: Vec<f64>,
    pub steps: usize,
    pub stable: bool,
}

fn nearest_rows(x: &DataMatrix, m: &[f64], h: usize) -> Result<Selection> {
    let dist: Vec<f64> = x.rows().map(|r| l1_distance(r, m)).collect();
    let mut order: Vec<usize> = (0..x.n()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order.truncate(h);
    Selection::new(order, x.n())
}

/// Alternates "median of the selected rows" and "the `h` rows nearest to
/// that median" until the selection stops changing.
pub fn concentrate(x: &DataMatrix, start: &Selection, max_steps: usize) -> Result<ConcentrationRun> {
    let h = start.len();
    check_coverage(x, h)?;
    let mut selection = start.clone();
    let mut m = selection_median(x, &selection);
    let mut history = vec![ltad_objective(x, &selection, &m)?];
    let mut steps = 0;
    let mut stable = false;
    while steps < max_steps {
        steps += 1;
        let next = nearest_rows(x, &m, h)?;
        if next == selection {
            stable = true;
            break;
        }
        selection = next;
        m = selection_median(x, &selection);
        history.push(ltad_objective(x, &selection, &m)?);
    }
    Ok(ConcentrationRun {
        selection,
        m,
        objective_history: history,
        steps,
        stable,
    })
}

/// Seed for restart `r`, decorrelated from neighbouring seeds.
pub(crate) fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const RESTART_STREAM: u64 = 0x6865_7572;

/// Best of `restarts` concentration runs from random `h`-subsets.
pub fn heuristic_ltad(x: &DataMatrix, h: usize, cfg: &HeuristicConfig) -> Result<EstimationResult> {
    check_coverage(x, h)?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let n = x.n();
    let runs: Vec<ConcentrationRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, RESTART_STREAM, r as u64));
            let start = rand::seq::index::sample(&mut rng, n, h).into_vec();
            concentrate(x, &Selection::new(start, n)?, cfg.max_steps)
        })
        .collect::<Result<_>>()?;
    // First restart wins ties, so the merge is independent of scheduling.
    let best = runs
        .into_iter()
        .reduce(|a, b| {
            let (fa, fb) = (
                *a.objective_history.last().unwrap(),
                *b.objective_history.last().unwrap(),
            );
            if fb < fa {
                b
            } else {
                a
            }
        })
        .expect("restarts >= 1");

    let objective = *best.objective_history.last().unwrap();
    let weights = WeightVector::indicator(n, &best.selection);
    Ok(EstimationResult {
        estimate: LocationEstimate {
            m: best.m.clone(),
            cumulative_shift: vec![0.0; x.p()],
            refit: true,
            objective,
        },
        shift_estimate: best.m.clone(),
        selection: best.selection,
        integrality_gap: 0.0,
        weights,
        outer_iterations: best.steps,
        converged: best.stable,
        final_lp_location: vec![0.0; x.p()],
        m_tolerance: 0.0,
        trace: Vec::new(),
    })
}

/// Plain coordinate-wise mean; the non-robust baseline.
pub fn sample_mean(x: &DataMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; x.p()];
    for r in x.rows() {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / x.n() as f64).collect()
}

/// Coordinate-wise median of all rows.
pub fn sample_median(x: &DataMatrix) -> Vec<f64> {
    model::multivariate_median(x)
}
