//! Reference solvers written independently of the library code.
#![allow(dead_code)]

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trimmed_l1::model::DataMatrix;

pub struct LpOptimum {
    pub w: Vec<f64>,
    pub m: Vec<f64>,
    pub objective: f64,
}

/// Simplex solve of the relaxation with variables `(w, m, d)`:
/// `min Σ d_ij` s.t. `Σw = h`, `|w_i x_ij − m_j| ≤ d_ij`, `0 ≤ w ≤ 1`.
/// With `fixed_m`, `m` is pinned.
pub fn exact_lp(x: &DataMatrix, h: usize, fixed_m: Option<&[f64]>) -> LpOptimum {
    let (n, p) = (x.n(), x.p());
    let mut pr = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = (0..n).map(|_| pr.add_var(0.0, (0.0, 1.0))).collect();
    let m: Vec<_> = (0..p)
        .map(|j| match fixed_m {
            Some(v) => pr.add_var(0.0, (v[j], v[j])),
            None => pr.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)),
        })
        .collect();
    pr.add_constraint(w.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, h as f64);
    for i in 0..n {
        for j in 0..p {
            let d = pr.add_var(1.0, (0.0, f64::INFINITY));
            let xij = x.get(i, j);
            pr.add_constraint([(w[i], xij), (m[j], -1.0), (d, -1.0)], ComparisonOp::Le, 0.0);
            pr.add_constraint([(w[i], -xij), (m[j], 1.0), (d, -1.0)], ComparisonOp::Le, 0.0);
        }
    }
    let sol = pr.solve().unwrap().into_solution().unwrap();
    LpOptimum {
        w: w.iter().map(|&v| sol.var_value(v)).collect(),
        m: m.iter().map(|&v| sol.var_value(v)).collect(),
        objective: sol.objective(),
    }
}

/// Euclidean projection onto `{Σw = h, 0 ≤ w ≤ 1}` by trying every
/// assignment of coordinates to {at 0, at 1, free} and keeping the nearest
/// KKT-consistent candidate. Exponential; `n ≤ 8`.
pub fn qp_projection(v: &[f64], h: usize) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pattern = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 2).collect();
        let ones = pattern.iter().filter(|&&s| s == 1).count() as f64;
        let mut cand = vec![0.0; n];
        let feasible = if free.is_empty() {
            (ones - h as f64).abs() < 1e-12
        } else {
            let lambda = (free.iter().map(|&i| v[i]).sum::<f64>() + ones - h as f64) / free.len() as f64;
            let mut ok = true;
            for i in 0..n {
                cand[i] = match pattern[i] {
                    0 => 0.0,
                    1 => 1.0,
                    _ => v[i] - lambda,
                };
                ok &= (-1e-12..=1.0 + 1e-12).contains(&cand[i]);
            }
            ok
        };
        if feasible {
            for i in 0..n {
                if pattern[i] == 1 {
                    cand[i] = 1.0;
                }
            }
            let dist: f64 = cand.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, cand));
            }
        }
        // Next pattern in base 3.
        let mut k = 0;
        while k < n && pattern[k] == 2 {
            pattern[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
        pattern[k] += 1;
    }
    best.expect("feasible pattern").1
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataMatrix {
    let v = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    DataMatrix::new(n, p, v).unwrap()
}

/// Standard normal rows, with probability one half a third of them moved
/// to a tight cluster at 3.3.
pub fn contaminated_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataMatrix {
    let mut v: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    if rng.random_bool(0.5) {
        for x in v.iter_mut().take((n / 3) * p) {
            *x = 3.3 + 0.3 * *x;
        }
    }
    DataMatrix::new(n, p, v).unwrap()
}

/// Brute force minimum over all `h`-subsets of `Σ_{i∈T} ‖x_i − med(T)‖₁`.
pub fn brute_force_ltad(x: &DataMatrix, h: usize) -> f64 {
    let n = x.n();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != h {
            continue;
        }
        let rows: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut cost = 0.0;
        for j in 0..x.p() {
            let mut col: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
            col.sort_by(f64::total_cmp);
            // Any point between the middle order statistics is a median.
            let med = col[(col.len() - 1) / 2];
            cost += col.iter().map(|v| (v - med).abs()).sum::<f64>();
        }
        best = best.min(cost);
    }
    best
}
