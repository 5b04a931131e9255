//! Shared data types, L1 geometry and the trimmed objectives.
//!
//! Three objectives live here:
//!
//! * [`ltad_objective`]: the trimmed L1 cost `Σ_{i∈T} ‖x_i − m‖₁`,
//! * [`milp_objective`]: the same cost plus the `(n − h)‖m‖₁` penalty that
//!   trimmed rows pay once they are shrunk to the origin,
//! * [`lp_objective_f`]: the relaxed cost `f(w) = Σ_i ‖w_i x_i − m(w)‖₁` where
//!   `m(w)` is the coordinate-wise median of the scaled rows.
//!
//! `f` is convex and piecewise linear on the capped simplex; [`lp_subgradient`]
//! returns one element of its subdifferential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating weight vectors.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Dense row-major `n × p` observation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / p,
                col: k % p,
            });
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let p = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), p, values)
    }

    /// Single-column matrix.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Returns `x_i − shift` for every row.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.p);
        let values = self
            .rows()
            .flat_map(|r| r.iter().zip(shift).map(|(x, s)| x - s))
            .collect();
        Self {
            n: self.n,
            p: self.p,
            values,
        }
    }

    /// Divides column `j` by `scale[j]`.
    pub fn scaled(&self, scale: &[f64]) -> Self {
        assert_eq!(scale.len(), self.p);
        let values = self
            .rows()
            .flat_map(|r| r.iter().zip(scale).map(|(x, s)| x / s))
            .collect();
        Self {
            n: self.n,
            p: self.p,
            values,
        }
    }

    /// Sub-matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            p: self.p,
            values,
        }
    }
}

/// Trimming weights on the capped simplex `{w : Σw = h, 0 ≤ w ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
    h: usize,
}

impl WeightVector {
    pub fn new(w: Vec<f64>, h: usize) -> Result<Self> {
        if h == 0 || h > w.len() {
            return Err(Error::InvalidCoverage { h, n: w.len() });
        }
        if let Some((i, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= -WEIGHT_TOLERANCE && **v <= 1.0 + WEIGHT_TOLERANCE))
        {
            return Err(Error::InvalidWeights(format!("w[{i}] = {v} outside [0, 1]")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - h as f64).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights(format!("sum {sum} differs from h = {h}")));
        }
        Ok(Self { w, h })
    }

    /// The uniform interior point `w_i = h / n`.
    pub fn uniform(n: usize, h: usize) -> Result<Self> {
        if n == 0 || h == 0 || h > n {
            return Err(Error::InvalidCoverage { h, n });
        }
        Ok(Self {
            w: vec![h as f64 / n as f64; n],
            h,
        })
    }

    /// Indicator vector of a selection.
    pub fn indicator(n: usize, selection: &Selection) -> Self {
        let mut w = vec![0.0; n];
        for &i in selection.indices() {
            w[i] = 1.0;
        }
        Self {
            w,
            h: selection.len(),
        }
    }

    pub(crate) fn from_projection(w: Vec<f64>, h: usize) -> Self {
        Self { w, h }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `Σ_i min(w_i, 1 − w_i)`; zero iff every weight is 0 or 1.
    pub fn integrality_gap(&self) -> f64 {
        integrality_gap(&self.w)
    }
}

pub fn integrality_gap(w: &[f64]) -> f64 {
    w.iter().map(|&v| v.min(1.0 - v).max(0.0)).sum()
}

/// A set of `h` distinct 0-based row indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection {
    indices: Vec<usize>,
}

impl Selection {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSelection("empty selection".into()));
        }
        indices.sort_unstable();
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidSelection(format!("index {i} out of range for n = {n}")));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSelection("duplicate index".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Indices shifted to the 1-based convention used in reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// A location estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub m: Vec<f64>,
    /// Total translation applied by the recentering loop.
    pub cumulative_shift: Vec<f64>,
    /// Whether `m` is the coordinate-wise median of the selected rows.
    pub refit: bool,
    /// Trimmed L1 objective at `(selection, m)` on the original data.
    pub objective: f64,
}

/// Median of a scratch buffer. Reorders `buf`.
///
/// Odd length takes the middle order statistic, even length averages the
/// two middle ones.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub fn coordinate_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, col: 0 });
    }
    Ok(median_in_place(&mut values.to_vec()))
}

/// Coordinate-wise median of a set of rows.
pub fn multivariate_median(x: &DataMatrix) -> Vec<f64> {
    let mut buf = Vec::with_capacity(x.n());
    (0..x.p())
        .map(|j| {
            buf.clear();
            buf.extend(x.rows().map(|r| r[j]));
            median_in_place(&mut buf)
        })
        .collect()
}

/// Coordinate-wise median of the selected rows.
pub fn selection_median(x: &DataMatrix, selection: &Selection) -> Vec<f64> {
    let mut buf = Vec::with_capacity(selection.len());
    (0..x.p())
        .map(|j| {
            buf.clear();
            buf.extend(selection.indices().iter().map(|&i| x.get(i, j)));
            median_in_place(&mut buf)
        })
        .collect()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_weights(x: &DataMatrix, w: &[f64]) -> Result<()> {
    if w.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: w.len(),
        });
    }
    Ok(())
}

fn check_location(x: &DataMatrix, m: &[f64]) -> Result<()> {
    if m.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            got: m.len(),
        });
    }
    Ok(())
}

fn check_selection(x: &DataMatrix, t: &Selection) -> Result<()> {
    match t.indices().last() {
        Some(&i) if i >= x.n() => Err(Error::InvalidSelection(format!(
            "index {i} out of range for n = {}",
            x.n()
        ))),
        _ => Ok(()),
    }
}

/// `m_j(w) = median{w_i x_ij : i = 1..n}` for every column.
pub fn weighted_median_vector(x: &DataMatrix, w: &[f64]) -> Result<Vec<f64>> {
    check_weights(x, w)?;
    let mut buf = Vec::with_capacity(x.n());
    Ok(weighted_medians(x, w, &mut buf))
}

pub(crate) fn weighted_medians(x: &DataMatrix, w: &[f64], buf: &mut Vec<f64>) -> Vec<f64> {
    let mut m = vec![0.0; x.p()];
    weighted_medians_into(x, w, buf, &mut m);
    m
}

pub(crate) fn weighted_medians_into(x: &DataMatrix, w: &[f64], buf: &mut Vec<f64>, m: &mut [f64]) {
    let p = x.p();
    for (j, mj) in m.iter_mut().enumerate() {
        buf.clear();
        buf.extend(x.values().iter().skip(j).step_by(p).zip(w).map(|(xij, wi)| wi * xij));
        *mj = median_in_place(buf);
    }
}

/// `Σ_{i∈T} ‖x_i − m‖₁`.
pub fn ltad_objective(x: &DataMatrix, t: &Selection, m: &[f64]) -> Result<f64> {
    check_location(x, m)?;
    check_selection(x, t)?;
    Ok(t.indices().iter().map(|&i| l1_distance(x.row(i), m)).sum())
}

/// `Σ_{i∈T} ‖x_i − m‖₁ + (n − h)‖m‖₁`, the MILP cost of an integral `w`.
pub fn milp_objective(x: &DataMatrix, t: &Selection, m: &[f64]) -> Result<f64> {
    let trimmed = (x.n() - t.len()) as f64;
    Ok(ltad_objective(x, t, m)? + trimmed * l1_norm(m))
}

/// `f(w) = Σ_j Σ_i |w_i x_ij − m_j(w)|`.
pub fn lp_objective_f(x: &DataMatrix, w: &[f64]) -> Result<f64> {
    let m = weighted_median_vector(x, w)?;
    Ok(objective_at(x, w, &m))
}

/// `Σ_i ‖w_i x_i − m‖₁` for an arbitrary `m`.
pub(crate) fn objective_at(x: &DataMatrix, w: &[f64], m: &[f64]) -> f64 {
    x.rows()
        .zip(w)
        .map(|(r, &wi)| r.iter().zip(m).map(|(xij, mj)| (wi * xij - mj).abs()).sum::<f64>())
        .sum()
}

/// `∂f/∂w_k = Σ_j x_kj · sign(w_k x_kj − m_j(w))` with `sign(0) = 0`.
pub fn lp_subgradient(x: &DataMatrix, w: &[f64]) -> Result<Vec<f64>> {
    check_weights(x, w)?;
    let mut buf = Vec::with_capacity(x.n());
    let m = weighted_medians(x, w, &mut buf);
    let mut g = vec![0.0; x.n()];
    subgradient_at(x, w, &m, 0.0, &mut g);
    Ok(g)
}

/// Fills `g` with the subgradient at `w` given `m = m(w)`, and returns `f(w)`.
/// Residuals with magnitude at most `tie_tolerance` count as ties.
pub(crate) fn subgradient_at(
    x: &DataMatrix,
    w: &[f64],
    m: &[f64],
    tie_tolerance: f64,
    g: &mut [f64],
) -> f64 {
    let mut f = 0.0;
    for ((r, &wi), gk) in x.rows().zip(w).zip(g.iter_mut()) {
        let mut acc = 0.0;
        for (xij, mj) in r.iter().zip(m) {
            let resid = wi * xij - mj;
            f += resid.abs();
            if resid > tie_tolerance {
                acc += xij;
            } else if resid < -tie_tolerance {
                acc -= xij;
            }
        }
        *gk = acc;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DataMatrix {
        DataMatrix::from_column(v).unwrap()
    }

    fn sel(idx: &[usize], n: usize) -> Selection {
        Selection::new(idx.to_vec(), n).unwrap()
    }

    #[test]
    fn median_conventions() {
        assert_eq!(coordinate_median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(coordinate_median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(coordinate_median(&[0.0, 1.0, 2.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(coordinate_median(&[]), Err(Error::EmptyInput)));
        assert!(coordinate_median(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn weighted_median_examples() {
        let x = col(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(weighted_median_vector(&x, &[1.0, 1.0, 1.0, 0.0]).unwrap(), vec![0.5]);
        let x = col(&[1.0, 2.0, 3.0]);
        assert_eq!(weighted_median_vector(&x, &[1.0; 3]).unwrap(), vec![2.0]);
        let x = col(&[5.0; 4]);
        assert_eq!(weighted_median_vector(&x, &[1.0, 1.0, 0.0, 0.0]).unwrap(), vec![2.5]);
        assert!(weighted_median_vector(&x, &[1.0]).is_err());
    }

    #[test]
    fn ltad_objective_examples() {
        let x = col(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(ltad_objective(&x, &sel(&[0, 1, 2], 4), &[1.0]).unwrap(), 2.0);
        assert_eq!(ltad_objective(&x, &sel(&[3], 4), &[10.0]).unwrap(), 0.0);
        let x = DataMatrix::from_rows(&[[1.0, 1.0], [3.0, 3.0]]).unwrap();
        assert_eq!(ltad_objective(&x, &sel(&[0, 1], 2), &[2.0, 2.0]).unwrap(), 4.0);
    }

    #[test]
    fn lp_objective_examples() {
        let x = col(&[0.0; 3]);
        assert_eq!(lp_objective_f(&x, &[1.0; 3]).unwrap(), 0.0);
        let x = col(&[0.0, 1.0, 2.0, 10.0]);
        assert_relative_eq!(lp_objective_f(&x, &[1.0, 1.0, 1.0, 0.0]).unwrap(), 3.0);
        assert_relative_eq!(lp_objective_f(&x, &[1.0, 1.0, 0.0, 1.0]).unwrap(), 11.0);
    }

    #[test]
    fn subgradient_examples() {
        let x = col(&[0.0, 1.0, 2.0, 10.0]);
        let g = lp_subgradient(&x, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g[3], -10.0);
        let zeros = DataMatrix::new(4, 2, vec![0.0; 8]).unwrap();
        assert_eq!(lp_subgradient(&zeros, &[0.5; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn milp_objective_examples() {
        let x = col(&[0.0, 1.0, 2.0, 10.0]);
        let t = sel(&[0, 1, 2], 4);
        assert_eq!(milp_objective(&x, &t, &[1.0]).unwrap(), 3.0);
        assert_eq!(
            milp_objective(&x, &t, &[0.0]).unwrap(),
            ltad_objective(&x, &t, &[0.0]).unwrap()
        );
        let x = DataMatrix::from_rows(&[[2.0, 0.0], [7.0, 7.0]]).unwrap();
        assert_eq!(milp_objective(&x, &sel(&[0], 2), &[1.0, 1.0]).unwrap(), 4.0);
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5, 1.0], 2).is_ok());
        assert!(WeightVector::new(vec![1.5, 0.5, 0.0], 2).is_err());
        assert!(WeightVector::new(vec![0.5, 0.5, 0.5], 2).is_err());
        assert!(WeightVector::new(vec![1.0], 2).is_err());
        assert_relative_eq!(
            WeightVector::new(vec![0.5, 0.5, 1.0], 2).unwrap().integrality_gap(),
            1.0
        );
    }

    #[test]
    fn selection_validation() {
        assert!(Selection::new(vec![0, 0], 3).is_err());
        assert!(Selection::new(vec![3], 3).is_err());
        assert_eq!(Selection::new(vec![2, 0], 3).unwrap().one_based(), vec![1, 3]);
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(matches!(
            DataMatrix::new(1, 2, vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    /// Even-n cross-check against `Σ_i v_i − 2 min_{|S| = n/2} Σ_{k∈S} v_k`.
    #[test]
    fn half_sum_identity_for_even_n() {
        let x = DataMatrix::from_rows(&[[0.3, -1.0], [2.0, 0.5], [-0.7, 4.0], [1.1, 1.2], [5.0, -2.0], [0.0, 0.1]])
            .unwrap();
        let w = [0.9, 0.2, 0.4, 1.0, 0.0, 0.5];
        let direct = lp_objective_f(&x, &w).unwrap();
        let mut identity = 0.0;
        for j in 0..x.p() {
            let mut v: Vec<f64> = (0..x.n()).map(|i| w[i] * x.get(i, j)).collect();
            v.sort_by(f64::total_cmp);
            let total: f64 = v.iter().sum();
            let smallest_half: f64 = v[..x.n() / 2].iter().sum();
            identity += total - 2.0 * smallest_half;
        }
        assert_relative_eq!(direct, identity, epsilon = 1e-12);
    }

    fn small_matrix() -> impl Strategy<Value = DataMatrix> {
        (1usize..8, 1usize..4).prop_flat_map(|(n, p)| {
            prop::collection::vec(-10.0f64..10.0, n * p).prop_map(move |v| DataMatrix::new(n, p, v).unwrap())
        })
    }

    fn feasible_weights(n: usize, h: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..3.0, n)
            .prop_map(move |raw| crate::lp::project_capped_simplex(&raw, h).unwrap().into_vec())
    }

    proptest! {
        #[test]
        fn median_is_optimal(v in prop::collection::vec(-100.0f64..100.0, 1..30), c in -150.0f64..150.0) {
            let med = coordinate_median(&v).unwrap();
            let at_med: f64 = v.iter().map(|x| (x - med).abs()).sum();
            let at_c: f64 = v.iter().map(|x| (x - c).abs()).sum();
            prop_assert!(at_med <= at_c + 1e-9);
        }

        #[test]
        fn milp_minus_minlp_is_penalty(
            x in small_matrix(),
            seed_idx in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
            m in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let n = x.n();
            let mut idx: Vec<usize> = seed_idx.iter().map(|s| s.index(n)).collect();
            idx.sort_unstable();
            idx.dedup();
            let t = Selection::new(idx, n).unwrap();
            let m = &m[..x.p().min(3)];
            prop_assume!(m.len() == x.p());
            let milp = milp_objective(&x, &t, m).unwrap();
            let minlp = ltad_objective(&x, &t, m).unwrap();
            let penalty = (n - t.len()) as f64 * l1_norm(m);
            prop_assert!((milp - minlp - penalty).abs() <= 1e-12 * milp.max(1.0));
        }

        #[test]
        fn f_matches_milp_at_integral_points(
            x in small_matrix(),
            pick in prop::collection::vec(any::<bool>(), 8),
        ) {
            let n = x.n();
            let idx: Vec<usize> = (0..n).filter(|&i| pick[i]).collect();
            prop_assume!(!idx.is_empty());
            let t = Selection::new(idx, n).unwrap();
            let w = WeightVector::indicator(n, &t);
            let m = weighted_median_vector(&x, w.as_slice()).unwrap();
            let f = lp_objective_f(&x, w.as_slice()).unwrap();
            let milp = milp_objective(&x, &t, &m).unwrap();
            prop_assert!((f - milp).abs() <= 1e-12 * f.max(1.0));
        }

        #[test]
        fn f_is_convex_on_segments(
            (x, w1, w2) in small_matrix().prop_flat_map(|x| {
                let n = x.n();
                let h = (n + 1) / 2;
                (Just(x), feasible_weights(n, h), feasible_weights(n, h))
            }),
            lambda in 0.0f64..=1.0,
        ) {
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let lhs = lp_objective_f(&x, &mix).unwrap();
            let rhs = lambda * lp_objective_f(&x, &w1).unwrap() + (1.0 - lambda) * lp_objective_f(&x, &w2).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
