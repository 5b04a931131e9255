//! CSV ingestion and emission, coverage strings and `key=value` overrides.
//!
//! Row numbers in errors are 1-based lines of the input, counting the header
//! when there is one.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::driver::{DriverConfig, HeuristicConfig};
use crate::error::{Error, Result};
use crate::lp::{InitMode, LpBackend, ProjectionMode, StepSchedule};
use crate::model::DataMatrix;

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes)
}

fn parse_cell(s: &str) -> Option<f64> {
    // `str::parse` is locale independent; reject the spellings it accepts
    // for non-finite values so they surface as non-finite errors instead.
    s.trim().parse::<f64>().ok()
}

/// Parses a numeric table with an optional header row.
///
/// The first record is a header when any of its cells is non-numeric.
pub fn parse_csv(bytes: &[u8]) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if record.len() == 1 && record[0].is_empty() {
            // Blank line.
            continue;
        }
        if idx == 0 && record.iter().any(|c| parse_cell(c).is_none()) {
            continue;
        }
        match p {
            None => p = Some(record.len()),
            Some(expected) if expected != record.len() => {
                return Err(Error::RaggedRow {
                    row: line,
                    expected,
                    got: record.len(),
                });
            }
            Some(_) => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::NonNumeric {
                row: line,
                col: col + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: line, col: col + 1 });
            }
            values.push(v);
        }
        n += 1;
    }
    let p = p.ok_or(Error::EmptyInput)?;
    DataMatrix::new(n, p, values)
}

/// Writes `x` without a header; `f64` display is shortest round-trip.
pub fn write_matrix_csv(x: &DataMatrix, mut out: impl Write) -> std::io::Result<()> {
    let mut line = String::new();
    for row in x.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// A coverage given either as a count (`"25"`) or a fraction (`"0.5"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageSpec {
    Count(usize),
    Fraction(f64),
}

impl CoverageSpec {
    /// Resolves against `n`. Fractions use `round(f·n)` clamped to `[1, n]`.
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            CoverageSpec::Count(h) if h >= 1 && h <= n => Ok(h),
            CoverageSpec::Count(h) => Err(Error::InvalidCoverage { h, n }),
            CoverageSpec::Fraction(f) => Ok(crate::sim::coverage_from_fraction(f, n)),
        }
    }
}

pub fn parse_coverage(s: &str) -> Result<CoverageSpec> {
    let s = s.trim();
    let bad = || Error::InvalidConfig(format!("coverage `{s}` is neither a count nor a fraction in (0, 1]"));
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().map(CoverageSpec::Count).map_err(|_| bad());
    }
    let f: f64 = s.parse().map_err(|_| bad())?;
    if f > 0.0 && f <= 1.0 {
        Ok(CoverageSpec::Fraction(f))
    } else {
        Err(bad())
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(&str, &str)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{s}` is not key=value")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(Error::InvalidConfig(format!("override `{s}` has an empty key")));
    }
    Ok((k, v))
}

/// Driver and heuristic settings that `--set` can reach.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub driver: DriverConfig,
    pub heuristic: HeuristicConfig,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl Settings {
    /// Applies one override. Solver keys may be written bare or with a
    /// `solver.` prefix; heuristic keys need the `heuristic.` prefix.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.driver;
        let bare = key.strip_prefix("solver.").or_else(|| key.strip_prefix("driver.")).unwrap_or(key);
        match bare {
            "m_tolerance" => d.m_tolerance = num(key, value)?,
            "max_outer_iterations" => d.max_outer_iterations = num(key, value)?,
            "refit_median" => d.refit_median = num(key, value)?,
            "standardize" => d.standardize = num(key, value)?,
            "step_alpha" => d.solver.step_alpha = num(key, value)?,
            "w_tolerance" => d.solver.w_tolerance = num(key, value)?,
            "max_iterations" => d.solver.max_iterations = num(key, value)?,
            "tie_tolerance" => d.solver.tie_tolerance = num(key, value)?,
            "polish_rounds" => d.solver.polish_rounds = num(key, value)?,
            "backend" => {
                d.solver.backend = match value {
                    "auto" => LpBackend::Auto,
                    "simplex" => LpBackend::Simplex,
                    "subgradient" => LpBackend::Subgradient,
                    _ => return Err(Error::InvalidConfig(format!("bad value `{value}` for `{key}`"))),
                }
            }
            "step_schedule" => {
                d.solver.step_schedule = match value {
                    "constant" => StepSchedule::Constant,
                    "diminishing" => StepSchedule::Diminishing,
                    _ => return Err(Error::InvalidConfig(format!("bad value `{value}` for `{key}`"))),
                }
            }
            "projection_mode" => {
                d.solver.projection_mode = match value {
                    "exact_capped_simplex" => ProjectionMode::ExactCappedSimplex,
                    "two_step" => ProjectionMode::TwoStep,
                    _ => return Err(Error::InvalidConfig(format!("bad value `{value}` for `{key}`"))),
                }
            }
            "init_mode" => {
                d.solver.init_mode = match value {
                    "alternating_lagrangian" => InitMode::AlternatingLagrangian,
                    "uniform" => InitMode::Uniform,
                    _ => return Err(Error::InvalidConfig(format!("bad value `{value}` for `{key}`"))),
                }
            }
            "heuristic.max_steps" => self.heuristic.max_steps = num(key, value)?,
            "heuristic.restarts" => self.heuristic.restarts = num(key, value)?,
            "heuristic.seed" => self.heuristic.seed = num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for s in overrides {
            let (k, v) = parse_override(s)?;
            self.apply(k, v)?;
        }
        self.driver.validate()?;
        if self.heuristic.restarts == 0 {
            return Err(Error::InvalidConfig("heuristic.restarts must be at least 1".into()));
        }
        Ok(())
    }
}
