//! The full simulation grid, written as one CSV per table group plus a JSON
//! manifest. Output bytes depend only on the seed and options.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::driver::derive_seed;
use crate::error::{Error, Result};
use crate::sim::{run_scenario, ContaminationKind, EstimatorKind, EstimatorSpec, MseReport, RunOptions, ScenarioSpec};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableGroup {
    pub name: &'static str,
    pub n: usize,
    pub ps: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub contamination_kind: ContaminationKind,
    pub correlation_rho: f64,
    pub estimators: Vec<EstimatorSpec>,
}

impl TableGroup {
    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    fn scenarios(&self, seed: u64, group_index: usize, replications: usize) -> Vec<ScenarioSpec> {
        let mut out = Vec::new();
        for &p in &self.ps {
            for &eps in &self.epsilons {
                let cell = out.len() as u64;
                out.push(ScenarioSpec {
                    n: self.n,
                    p,
                    contamination_fraction: eps,
                    contamination_kind: if eps == 0.0 {
                        ContaminationKind::None
                    } else {
                        self.contamination_kind
                    },
                    correlation_rho: self.correlation_rho,
                    coverage_fraction: 0.5,
                    replications,
                    seed: derive_seed(seed, group_index as u64, cell),
                });
            }
        }
        out
    }
}

fn lp_pair(coverage: f64) -> [EstimatorSpec; 2] {
    [
        EstimatorSpec::with_coverage(EstimatorKind::LpLtad, coverage),
        EstimatorSpec::with_coverage(EstimatorKind::LpLtadShift, coverage),
    ]
}

fn comparators() -> [EstimatorSpec; 2] {
    [
        EstimatorSpec::with_coverage(EstimatorKind::Heuristic, 0.5),
        EstimatorSpec::new(EstimatorKind::Mean),
    ]
}

fn low_coverage_set() -> Vec<EstimatorSpec> {
    lp_pair(0.2).into_iter().chain(comparators()).collect()
}

fn two_coverage_set() -> Vec<EstimatorSpec> {
    lp_pair(0.5).into_iter().chain(lp_pair(0.2)).chain(comparators()).collect()
}

const EPSILONS: [f64; 3] = [0.0, 0.2, 0.4];

/// The eight table groups, in output order.
pub fn table_grid() -> Vec<TableGroup> {
    let efficiency = [0.5, 0.6, 0.7, 0.8]
        .into_iter()
        .flat_map(|h| {
            let [a, b] = lp_pair(h);
            [a, b, EstimatorSpec::with_coverage(EstimatorKind::Heuristic, h)]
        })
        .collect();
    let group = |name, n, ps: &[usize], kind, rho, estimators| TableGroup {
        name,
        n,
        ps: ps.to_vec(),
        epsilons: EPSILONS.to_vec(),
        contamination_kind: kind,
        correlation_rho: rho,
        estimators,
    };
    use ContaminationKind::{Intermediate, Strong};
    vec![
        TableGroup {
            name: "efficiency_clean_n100",
            n: 100,
            ps: vec![1],
            epsilons: vec![0.0],
            contamination_kind: ContaminationKind::None,
            correlation_rho: 0.0,
            estimators: efficiency,
        },
        group("strong_n50", 50, &[1, 2, 3], Strong, 0.0, two_coverage_set()),
        group("strong_n100", 100, &[1, 3, 5], Strong, 0.0, low_coverage_set()),
        group("correlated_n50", 50, &[2, 3], Strong, 0.7, two_coverage_set()),
        group("correlated_n100", 100, &[3, 5], Strong, 0.7, low_coverage_set()),
        group("intermediate_n50", 50, &[1, 2, 3], Intermediate, 0.0, low_coverage_set()),
        group("intermediate_n100", 100, &[1, 3, 5], Intermediate, 0.0, low_coverage_set()),
        group("large_n500", 500, &[10, 20], Strong, 0.0, low_coverage_set()),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub replications: usize,
    pub run: RunOptions,
    /// Restrict to these group names; `None` runs everything.
    pub only: Option<Vec<String>>,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            replications: DEFAULT_REPLICATIONS,
            run: RunOptions::default(),
            only: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableOutput {
    pub group: TableGroup,
    pub path: PathBuf,
    pub reports: Vec<MseReport>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub tables: Vec<TableOutput>,
    pub manifest: PathBuf,
}

impl SuiteOutput {
    pub fn files(&self) -> Vec<PathBuf> {
        self.tables.iter().map(|t| t.path.clone()).collect()
    }
}

/// Six significant digits, fixed notation.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn table_csv(group: &TableGroup, reports: &[MseReport]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["p", "epsilon", "estimator", "MSE"])?;
    for r in reports {
        for est in &group.estimators {
            let label = est.label();
            let mse = r.mse(&label).map(format_sig6).unwrap_or_default();
            w.write_record([
                r.scenario.p.to_string(),
                r.scenario.contamination_fraction.to_string(),
                label,
                mse,
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::io("table buffer", e.into_error()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    replications: usize,
    spec_grid: &'a [TableGroup],
    config: &'a RunOptions,
    files: Vec<String>,
    version: &'static str,
    timestamp_omitted_for_determinism: bool,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Runs the grid and writes the tables and manifest into `out_dir`.
pub fn run_table_suite(out_dir: &Path, opts: &SuiteOptions) -> Result<SuiteOutput> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let grid: Vec<(usize, TableGroup)> = table_grid()
        .into_iter()
        .enumerate()
        .filter(|(_, g)| opts.only.as_ref().is_none_or(|only| only.iter().any(|o| o == g.name)))
        .collect();
    if let Some(only) = &opts.only {
        if let Some(bad) = only.iter().find(|o| !grid.iter().any(|(_, g)| g.name == o.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown table group `{bad}`")));
        }
    }

    let mut tables = Vec::new();
    for (idx, group) in &grid {
        let reports = group
            .scenarios(opts.seed, *idx, opts.replications)
            .iter()
            .map(|s| run_scenario(s, &group.estimators, &opts.run))
            .collect::<Result<Vec<_>>>()?;
        let path = out_dir.join(group.file_name());
        write_file(&path, &table_csv(group, &reports)?)?;
        tables.push(TableOutput {
            group: group.clone(),
            path,
            reports,
        });
    }

    let groups: Vec<TableGroup> = grid.into_iter().map(|(_, g)| g).collect();
    let manifest = Manifest {
        seed: opts.seed,
        replications: opts.replications,
        spec_grid: &groups,
        config: &opts.run,
        files: groups.iter().map(TableGroup::file_name).collect(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_omitted_for_determinism: true,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_file(&manifest_path, &bytes)?;
    Ok(SuiteOutput {
        tables,
        manifest: manifest_path,
    })
}

/// Full grid at the default replication count.
pub fn default_table_suite(out_dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    Ok(run_table_suite(out_dir, &SuiteOptions::new(seed))?.files())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let grid = table_grid();
        assert_eq!(grid.len(), 8);
        let cells: usize = grid.iter().map(|g| g.ps.len() * g.epsilons.len()).sum();
        assert_eq!(cells, 1 + 9 + 9 + 6 + 6 + 9 + 9 + 6);
        for g in &grid {
            for s in g.scenarios(1, 0, 3) {
                s.validate().unwrap();
            }
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig6(0.0039012345), "0.00390123");
        assert_eq!(format_sig6(1.7554), "1.75540");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn small_suite_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = SuiteOptions {
            replications: 2,
            only: Some(vec!["intermediate_n50".into()]),
            ..SuiteOptions::new(9)
        };
        let out = run_table_suite(a.path(), &opts).unwrap();
        run_table_suite(b.path(), &opts).unwrap();
        for name in ["intermediate_n50.csv", MANIFEST_FILE] {
            let x = fs::read(a.path().join(name)).unwrap();
            assert_eq!(x, fs::read(b.path().join(name)).unwrap());
            assert!(!x.contains(&b'\r'));
        }
        let text = fs::read_to_string(&out.tables[0].path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("p,epsilon,estimator,MSE"));
        assert_eq!(lines.count(), 9 * 4);
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&out.manifest).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 9);
        assert_eq!(manifest["timestamp_omitted_for_determinism"], true);
    }

    #[test]
    fn unknown_group_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SuiteOptions {
            only: Some(vec!["no_such_group".into()]),
            ..SuiteOptions::new(1)
        };
        assert!(run_table_suite(dir.path(), &opts).is_err());
    }
}
