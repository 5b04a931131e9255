//! Seeded contamination experiments and the mean-squared-error criterion.
//!
//! Clean rows are `N_p(0, Σ)` with `Σ = I` or the equicorrelation matrix
//! (ones on the diagonal, `ρ` elsewhere). The first `⌈εn⌉` rows are then
//! replaced by outliers:
//!
//! | kind         | law                         |
//! |--------------|-----------------------------|
//! | strong       | `N_p(3.3·1, 0.3²·I)`        |
//! | intermediate | `N_p(0.75·1, 0.5·I)`        |
//!
//! Every row draws from its own ChaCha stream keyed by `(seed, replication,
//! row)`, so a replication can be regenerated alone and replications can be
//! run in any order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{
    derive_seed, estimate_ltad, heuristic_ltad, sample_mean, sample_median, DriverConfig, EstimationResult,
    HeuristicConfig,
};
use crate::error::{Error, Result};
use crate::model::{DataMatrix, Selection};
use crate::oracle::{oracle_fits, oracle_minlp};

pub const STRONG_MEAN: f64 = 3.3;
pub const STRONG_SD: f64 = 0.3;
pub const INTERMEDIATE_MEAN: f64 = 0.75;
pub const INTERMEDIATE_VARIANCE: f64 = 0.5;

const CLEAN_STREAM: u64 = 1;
const OUTLIER_STREAM: u64 = 2;
const HEURISTIC_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationKind {
    None,
    Strong,
    Intermediate,
}

impl fmt::Display for ContaminationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContaminationKind::None => "none",
            ContaminationKind::Strong => "strong",
            ContaminationKind::Intermediate => "intermediate",
        })
    }
}

impl FromStr for ContaminationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "strong" => Ok(Self::Strong),
            "intermediate" => Ok(Self::Intermediate),
            _ => Err(Error::InvalidScenario(format!("unknown contamination kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub contamination_fraction: f64,
    pub contamination_kind: ContaminationKind,
    /// Off-diagonal correlation of the clean law; 0 for the identity.
    pub correlation_rho: f64,
    /// Coverage `h / n` used by estimators that do not override it.
    pub coverage_fraction: f64,
    pub replications: usize,
    pub seed: u64,
}

/// `round(fraction · n)` clamped to `[1, n]`.
pub fn coverage_from_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.max(1))
}

impl ScenarioSpec {
    pub fn contaminated_rows(&self) -> usize {
        if self.contamination_kind == ContaminationKind::None {
            return 0;
        }
        // Guard against 0.4 * 50 landing a hair above 20.
        (self.contamination_fraction * self.n as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn coverage(&self) -> usize {
        coverage_from_fraction(self.coverage_fraction, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if !(0.0..1.0).contains(&self.contamination_fraction) {
            return bad(format!("contamination fraction {} outside [0, 1)", self.contamination_fraction));
        }
        if self.contamination_kind == ContaminationKind::None && self.contamination_fraction > 0.0 {
            return bad("positive contamination fraction needs a contamination kind".into());
        }
        if self.contaminated_rows() + 1 > self.n {
            return bad(format!("{} contaminated rows leave no clean row", self.contaminated_rows()));
        }
        if !(0.0..1.0).contains(&self.correlation_rho) {
            return bad(format!("correlation {} outside [0, 1)", self.correlation_rho));
        }
        if !(self.coverage_fraction > 0.0 && self.coverage_fraction <= 1.0) {
            return bad(format!("coverage fraction {} outside (0, 1]", self.coverage_fraction));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub data: DataMatrix,
    /// Ground-truth labels: `true` for replaced rows.
    pub outlier: Vec<bool>,
}

/// Lower Cholesky factor of the equicorrelation matrix, row-major.
fn correlation_factor(p: usize, rho: f64) -> Result<Vec<f64>> {
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma.cholesky().ok_or(Error::NotPositiveDefinite { rho })?;
    let l = chol.l();
    Ok((0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect())
}

fn standard_normals(seed: u64, stream: u64, replication: usize, row: usize, out: &mut [f64]) {
    let key = derive_seed(derive_seed(seed, stream, replication as u64), stream, row as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

pub fn generate_dataset(spec: &ScenarioSpec, replication: usize) -> Result<SimulatedSample> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let factor = if spec.correlation_rho == 0.0 {
        None
    } else {
        Some(correlation_factor(p, spec.correlation_rho)?)
    };
    let k = spec.contaminated_rows();
    let mut values = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    for (i, row) in values.chunks_exact_mut(p).enumerate() {
        if i < k {
            standard_normals(spec.seed, OUTLIER_STREAM, replication, i, &mut z);
            let (mean, sd) = match spec.contamination_kind {
                ContaminationKind::Strong => (STRONG_MEAN, STRONG_SD),
                ContaminationKind::Intermediate => (INTERMEDIATE_MEAN, INTERMEDIATE_VARIANCE.sqrt()),
                ContaminationKind::None => unreachable!("no rows replaced without a kind"),
            };
            for (r, zj) in row.iter_mut().zip(&z) {
                *r = mean + sd * zj;
            }
        } else {
            standard_normals(spec.seed, CLEAN_STREAM, replication, i, &mut z);
            match &factor {
                None => row.copy_from_slice(&z),
                Some(l) => {
                    for (a, r) in row.iter_mut().enumerate() {
                        *r = (0..=a).map(|b| l[a * p + b] * z[b]).sum();
                    }
                }
            }
        }
    }
    Ok(SimulatedSample {
        data: DataMatrix::new(n, p, values)?,
        outlier: (0..n).map(|i| i < k).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Recentering driver, refit median location.
    LpLtad,
    /// Recentering driver, accumulated-shift location.
    LpLtadShift,
    /// Concentration-step heuristic.
    Heuristic,
    /// Exact enumeration; skipped when the instance is too large.
    Oracle,
    Mean,
    Median,
}

impl EstimatorKind {
    fn name(self) -> &'static str {
        match self {
            EstimatorKind::LpLtad => "lp-ltad",
            EstimatorKind::LpLtadShift => "lp-ltad-shift",
            EstimatorKind::Heuristic => "heuristic",
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::Mean => "mean",
            EstimatorKind::Median => "median",
        }
    }

    fn uses_coverage(self) -> bool {
        !matches!(self, EstimatorKind::Mean | EstimatorKind::Median)
    }
}

/// An estimator with an optional coverage override, written `name` or
/// `name@fraction` (e.g. `lp-ltad@0.2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub coverage_fraction: Option<f64>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            coverage_fraction: None,
        }
    }

    pub fn with_coverage(kind: EstimatorKind, fraction: f64) -> Self {
        Self {
            kind,
            coverage_fraction: Some(fraction),
        }
    }

    pub fn label(&self) -> String {
        match self.coverage_fraction {
            Some(c) if self.kind.uses_coverage() => format!("{}@{}", self.kind.name(), c),
            _ => self.kind.name().to_string(),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, coverage) = match s.split_once('@') {
            Some((name, c)) => {
                let c: f64 = c.parse().map_err(|_| Error::UnknownEstimator(s.to_string()))?;
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::UnknownEstimator(s.to_string()));
                }
                (name, Some(c))
            }
            None => (s, None),
        };
        let kind = match name {
            "lp-ltad" | "lp" => EstimatorKind::LpLtad,
            "lp-ltad-shift" => EstimatorKind::LpLtadShift,
            "heuristic" | "ltad" => EstimatorKind::Heuristic,
            "oracle" => EstimatorKind::Oracle,
            "mean" => EstimatorKind::Mean,
            "median" => EstimatorKind::Median,
            _ => return Err(Error::UnknownEstimator(s.to_string())),
        };
        Ok(Self {
            kind,
            coverage_fraction: coverage,
        })
    }
}

/// Knobs shared by every estimator in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub driver: DriverConfig,
    pub heuristic_restarts: usize,
    pub heuristic_max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        let h = HeuristicConfig::default();
        Self {
            driver: DriverConfig::default(),
            heuristic_restarts: h.restarts,
            heuristic_max_steps: h.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    /// `Σ_r ‖m̂_r‖² / R`; `None` when skipped.
    pub mse: Option<f64>,
    /// Average Euclidean norm `Σ_r ‖m̂_r‖ / R`.
    pub mean_norm: Option<f64>,
    /// Coordinate-wise average of the estimates.
    pub mean_estimate: Option<Vec<f64>>,
    /// Share of replaced rows left out of the selection, per replication.
    pub outliers_excluded: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub skipped: Option<String>,
}

impl EstimatorSummary {
    fn skipped(reason: String) -> Self {
        Self {
            mse: None,
            mean_norm: None,
            mean_estimate: None,
            outliers_excluded: Vec::new(),
            estimates: Vec::new(),
            skipped: Some(reason),
        }
    }

    fn from_estimates(estimates: Vec<Vec<f64>>, outliers_excluded: Vec<f64>) -> Self {
        let r = estimates.len() as f64;
        let p = estimates.first().map_or(0, Vec::len);
        let sq: Vec<f64> = estimates.iter().map(|m| m.iter().map(|v| v * v).sum()).collect();
        let mse = sq.iter().sum::<f64>() / r;
        let mean_norm = sq.iter().map(|s| s.sqrt()).sum::<f64>() / r;
        let mut mean = vec![0.0; p];
        for m in &estimates {
            for (a, v) in mean.iter_mut().zip(m) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= r);
        Self {
            mse: Some(mse),
            mean_norm: Some(mean_norm),
            mean_estimate: Some(mean),
            outliers_excluded,
            estimates,
            skipped: None,
        }
    }

    /// Mean over replications of the excluded-outlier share.
    pub fn mean_outliers_excluded(&self) -> Option<f64> {
        (!self.outliers_excluded.is_empty())
            .then(|| self.outliers_excluded.iter().sum::<f64>() / self.outliers_excluded.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub scenario: ScenarioSpec,
    pub replications: usize,
    /// Keyed by estimator label, in the order given.
    pub per_estimator: BTreeMap<String, EstimatorSummary>,
    pub estimator_order: Vec<String>,
}

impl MseReport {
    pub fn mse(&self, label: &str) -> Option<f64> {
        self.per_estimator.get(label).and_then(|s| s.mse)
    }

    pub fn summary(&self, label: &str) -> Option<&EstimatorSummary> {
        self.per_estimator.get(label)
    }
}

struct Fit {
    m: Vec<f64>,
    selection: Option<Selection>,
}

/// Driver runs keyed by coverage, so the refit and shift readings of one
/// solve are not computed twice.
type DriverCache = Vec<(usize, EstimationResult)>;

fn fit(
    est: &EstimatorSpec,
    spec: &ScenarioSpec,
    sample: &SimulatedSample,
    replication: usize,
    opts: &RunOptions,
    cache: &mut DriverCache,
) -> Result<Fit> {
    let x = &sample.data;
    let h = est
        .coverage_fraction
        .map_or_else(|| spec.coverage(), |c| coverage_from_fraction(c, x.n()));
    Ok(match est.kind {
        EstimatorKind::LpLtad | EstimatorKind::LpLtadShift => {
            let pos = match cache.iter().position(|(k, _)| *k == h) {
                Some(pos) => pos,
                None => {
                    cache.push((h, estimate_ltad(x, h, &opts.driver)?));
                    cache.len() - 1
                }
            };
            let r = &cache[pos].1;
            let m = if est.kind == EstimatorKind::LpLtad {
                r.estimate.m.clone()
            } else {
                r.shift_estimate.clone()
            };
            Fit {
                m,
                selection: Some(r.selection.clone()),
            }
        }
        EstimatorKind::Heuristic => {
            let cfg = HeuristicConfig {
                max_steps: opts.heuristic_max_steps,
                restarts: opts.heuristic_restarts,
                seed: derive_seed(spec.seed, HEURISTIC_STREAM, replication as u64),
            };
            let r = heuristic_ltad(x, h, &cfg)?;
            Fit {
                m: r.estimate.m,
                selection: Some(r.selection),
            }
        }
        EstimatorKind::Oracle => {
            let r = oracle_minlp(x, h)?;
            Fit {
                m: r.m,
                selection: Some(r.selection),
            }
        }
        EstimatorKind::Mean => Fit {
            m: sample_mean(x),
            selection: None,
        },
        EstimatorKind::Median => Fit {
            m: sample_median(x),
            selection: None,
        },
    })
}

fn excluded_share(sample: &SimulatedSample, selection: &Selection) -> Option<f64> {
    let total = sample.outlier.iter().filter(|&&o| o).count();
    if total == 0 {
        return None;
    }
    let kept = selection.indices().iter().filter(|&&i| sample.outlier[i]).count();
    Some((total - kept) as f64 / total as f64)
}

/// Runs every estimator on every replication and reduces to MSE.
///
/// The report depends only on the arguments: replications are generated
/// independently and reduced in replication order.
pub fn run_scenario(spec: &ScenarioSpec, estimators: &[EstimatorSpec], opts: &RunOptions) -> Result<MseReport> {
    spec.validate()?;
    let order: Vec<String> = estimators.iter().map(EstimatorSpec::label).collect();

    let active: Vec<&EstimatorSpec> = estimators
        .iter()
        .filter(|e| {
            e.kind != EstimatorKind::Oracle || {
                let h = e.coverage_fraction.map_or_else(|| spec.coverage(), |c| coverage_from_fraction(c, spec.n));
                oracle_fits(spec.n, h)
            }
        })
        .collect();

    let per_rep: Vec<Vec<(Vec<f64>, Option<f64>)>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let sample = generate_dataset(spec, rep)?;
            let mut cache = DriverCache::new();
            active
                .iter()
                .map(|est| {
                    let f = fit(est, spec, &sample, rep, opts, &mut cache)?;
                    let excl = f.selection.as_ref().and_then(|s| excluded_share(&sample, s));
                    Ok((f.m, excl))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut per_estimator = BTreeMap::new();
    for (k, est) in active.iter().enumerate() {
        let estimates = per_rep.iter().map(|r| r[k].0.clone()).collect();
        let excluded = per_rep.iter().filter_map(|r| r[k].1).collect();
        per_estimator.insert(est.label(), EstimatorSummary::from_estimates(estimates, excluded));
    }
    for est in estimators {
        per_estimator
            .entry(est.label())
            .or_insert_with(|| EstimatorSummary::skipped("oracle size guard".into()));
    }
    Ok(MseReport {
        scenario: spec.clone(),
        replications: spec.replications,
        per_estimator,
        estimator_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p: usize, eps: f64, kind: ContaminationKind, rho: f64) -> ScenarioSpec {
        ScenarioSpec {
            n,
            p,
            contamination_fraction: eps,
            contamination_kind: kind,
            correlation_rho: rho,
            coverage_fraction: 0.5,
            replications: 1,
            seed: 42,
        }
    }

    #[test]
    fn clean_rows_are_centered() {
        let s = spec(1000, 2, 0.0, ContaminationKind::None, 0.0);
        let mut sum = [0.0; 2];
        let mut count = 0.0;
        for rep in 0..100 {
            let d = generate_dataset(&s, rep).unwrap();
            assert!(d.outlier.iter().all(|o| !o));
            for r in d.data.rows() {
                sum[0] += r[0];
                sum[1] += r[1];
                count += 1.0;
            }
        }
        for v in sum {
            assert!((v / count).abs() < 0.02, "{}", v / count);
        }
    }

    #[test]
    fn strong_outliers_replace_leading_rows() {
        let s = spec(50, 3, 0.4, ContaminationKind::Strong, 0.0);
        assert_eq!(s.contaminated_rows(), 20);
        let d = generate_dataset(&s, 0).unwrap();
        assert_eq!(d.outlier.iter().filter(|&&o| o).count(), 20);
        assert!(d.outlier[..20].iter().all(|&o| o));
        for j in 0..3 {
            let mean: f64 = (0..20).map(|i| d.data.get(i, j)).sum::<f64>() / 20.0;
            assert!((mean - STRONG_MEAN).abs() < 0.3, "{mean}");
        }
    }

    #[test]
    fn equicorrelation_is_reproduced() {
        let s = spec(1000, 2, 0.0, ContaminationKind::None, 0.7);
        let (mut sxy, mut sxx, mut syy, mut sx, mut sy, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for rep in 0..100 {
            let d = generate_dataset(&s, rep).unwrap();
            for r in d.data.rows() {
                sx += r[0];
                sy += r[1];
                sxx += r[0] * r[0];
                syy += r[1] * r[1];
                sxy += r[0] * r[1];
                k += 1.0;
            }
        }
        let cov = sxy / k - (sx / k) * (sy / k);
        let corr = cov / ((sxx / k - (sx / k).powi(2)) * (syy / k - (sy / k).powi(2))).sqrt();
        assert!((corr - 0.7).abs() < 0.02, "{corr}");
    }

    #[test]
    fn generation_is_deterministic_and_keyed_by_replication() {
        let s = spec(20, 3, 0.2, ContaminationKind::Intermediate, 0.7);
        assert_eq!(generate_dataset(&s, 3).unwrap(), generate_dataset(&s, 3).unwrap());
        assert_ne!(generate_dataset(&s, 3).unwrap(), generate_dataset(&s, 4).unwrap());
    }

    #[test]
    fn scenario_validation() {
        assert!(spec(10, 1, 0.0, ContaminationKind::None, 0.0).validate().is_ok());
        assert!(spec(10, 1, 0.4, ContaminationKind::None, 0.0).validate().is_err());
        assert!(spec(10, 1, 0.0, ContaminationKind::None, 1.0).validate().is_err());
        assert!(spec(1, 1, 0.5, ContaminationKind::Strong, 0.0).validate().is_err());
        let mut s = spec(10, 1, 0.0, ContaminationKind::None, 0.0);
        s.coverage_fraction = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn non_positive_definite_factor() {
        assert!(matches!(correlation_factor(3, -0.9), Err(Error::NotPositiveDefinite { .. })));
        assert!(correlation_factor(3, 0.7).is_ok());
    }

    #[test]
    fn estimator_names() {
        let e: EstimatorSpec = "lp-ltad@0.2".parse().unwrap();
        assert_eq!(e, EstimatorSpec::with_coverage(EstimatorKind::LpLtad, 0.2));
        assert_eq!(e.label(), "lp-ltad@0.2");
        assert_eq!("mean".parse::<EstimatorSpec>().unwrap().label(), "mean");
        assert!("lp-ltad@1.5".parse::<EstimatorSpec>().is_err());
        assert!("simplex".parse::<EstimatorSpec>().is_err());
    }

    #[test]
    fn coverage_rounding() {
        assert_eq!(coverage_from_fraction(0.5, 4), 2);
        assert_eq!(coverage_from_fraction(0.2, 50), 10);
        assert_eq!(coverage_from_fraction(0.01, 10), 1);
        assert_eq!(coverage_from_fraction(1.0, 7), 7);
    }

    #[test]
    fn oversized_oracle_is_skipped() {
        let mut s = spec(40, 1, 0.0, ContaminationKind::None, 0.0);
        s.replications = 2;
        let est = ["oracle", "mean"].map(|e| e.parse().unwrap());
        let r = run_scenario(&s, &est, &RunOptions::default()).unwrap();
        assert!(r.summary("oracle").unwrap().skipped.is_some());
        assert!(r.mse("mean").is_some());
    }

    #[test]
    fn mse_is_recomputable() {
        let mut s = spec(30, 2, 0.2, ContaminationKind::Strong, 0.0);
        s.replications = 5;
        let est = ["lp-ltad", "heuristic", "mean"].map(|e| e.parse().unwrap());
        let r = run_scenario(&s, &est, &RunOptions::default()).unwrap();
        for label in ["lp-ltad", "heuristic", "mean"] {
            let sum = r.summary(label).unwrap();
            let again: f64 = sum.estimates.iter().map(|m| m.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 5.0;
            assert!((again - sum.mse.unwrap()).abs() <= 1e-12 * again.max(1e-300));
        }
        assert_eq!(r, run_scenario(&s, &est, &RunOptions::default()).unwrap());
    }
}
