//! Euclidean projections onto `{w : Σw = h}`, the box `[0,1]ⁿ`, and their
//! intersection (the capped simplex).

use crate::error::{Error, Result};
use crate::model::WeightVector;

/// Projection onto the hyperplane `Σw = h`: `w̄ + ((h − Σw̄)/n)·1`.
pub fn project_hyperplane(w: &[f64], h: usize) -> Vec<f64> {
    if w.is_empty() {
        return Vec::new();
    }
    let shift = (h as f64 - w.iter().sum::<f64>()) / w.len() as f64;
    w.iter().map(|v| v + shift).collect()
}

/// Hyperplane projection followed by clipping to `[0, 1]`.
///
/// This is not the projection onto the capped simplex: clipping can break
/// the sum constraint, e.g. `(2,0,0,0)` with `h = 2` maps to `(1,0,0,0)`.
pub fn project_two_step(w: &[f64], h: usize) -> Vec<f64> {
    project_hyperplane(w, h)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect()
}

const MAX_NEWTON_STEPS: usize = 200;

/// Exact Euclidean projection onto `{w : Σw = h, 0 ≤ w ≤ 1}`.
///
/// The multiplier `λ` in `w_i = clip(w̄_i − λ, 0, 1)` is found by Newton
/// steps on the piecewise-linear sum, safeguarded by bisection. Once the
/// free set is right the Newton step is exact, so this terminates after a
/// handful of passes in practice.
pub fn project_capped_simplex(w: &[f64], h: usize) -> Result<WeightVector> {
    let mut out = vec![0.0; w.len()];
    project_capped_simplex_into(w, h, &mut out)?;
    Ok(WeightVector::from_projection(out, h))
}

pub(crate) fn project_capped_simplex_into(w: &[f64], h: usize, out: &mut [f64]) -> Result<()> {
    let n = w.len();
    debug_assert_eq!(out.len(), n);
    if h > n {
        return Err(Error::InfeasibleCoverage { h, n });
    }
    if let Some(row) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, col: 0 });
    }
    if h == n || h == 0 {
        out.fill(if h == n { 1.0 } else { 0.0 });
        return Ok(());
    }
    let target = h as f64;
    let (min, max) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    // Sum is n at lo and 0 at hi.
    let (mut lo, mut hi) = (min - 1.0, max);
    let mut lambda = (w.iter().sum::<f64>() - target) / n as f64;
    if !(lambda > lo && lambda < hi) {
        lambda = 0.5 * (lo + hi);
    }
    let tol = 1e-13 * target.max(1.0);
    for _ in 0..MAX_NEWTON_STEPS {
        let (mut sum, mut free) = (0.0, 0usize);
        for &v in w {
            let t = v - lambda;
            if t >= 1.0 {
                sum += 1.0;
            } else if t > 0.0 {
                sum += t;
                free += 1;
            }
        }
        let excess = sum - target;
        if excess.abs() <= tol {
            break;
        }
        if excess > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = if free > 0 { lambda + excess / free as f64 } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == lambda || hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }

    for (o, v) in out.iter_mut().zip(w) {
        *o = (v - lambda).clamp(0.0, 1.0);
    }
    // Spread the last rounding error over the free coordinates.
    let residue = target - out.iter().sum::<f64>();
    if residue != 0.0 {
        let free = out.iter().filter(|&&v| v > 0.0 && v < 1.0).count();
        if free > 0 {
            let share = residue / free as f64;
            for o in out.iter_mut().filter(|v| **v > 0.0 && **v < 1.0) {
                *o = (*o + share).clamp(0.0, 1.0);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn hyperplane_examples() {
        assert_eq!(project_hyperplane(&[1.0; 4], 2), vec![0.5; 4]);
        assert_eq!(project_hyperplane(&[0.5, 1.0, 0.5], 2), vec![0.5, 1.0, 0.5]);
        assert_eq!(project_hyperplane(&[0.0; 3], 3), vec![1.0; 3]);
    }

    #[test]
    fn capped_simplex_examples() {
        let p = project_capped_simplex(&[2.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert!(close(p.as_slice(), &[1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1e-12));

        let feasible = [0.25, 0.75, 1.0, 0.0];
        let p = project_capped_simplex(&feasible, 2).unwrap();
        assert!(close(p.as_slice(), &feasible, 1e-12));

        let p = project_capped_simplex(&[10.0, 10.0, -10.0, -10.0], 2).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(p.as_slice().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn capped_simplex_rejects_large_h() {
        assert!(matches!(
            project_capped_simplex(&[0.0, 0.0], 3),
            Err(Error::InfeasibleCoverage { h: 3, n: 2 })
        ));
    }

    #[test]
    fn two_step_examples() {
        assert_eq!(project_two_step(&[1.0; 4], 2), vec![0.5; 4]);
        let p = project_two_step(&[2.0, 0.0, 0.0, 0.0], 2);
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
        let w = [0.4, 0.9, 0.3, 0.6];
        let exact = project_capped_simplex(&w, 2).unwrap();
        assert!(close(&project_two_step(&w, 2), exact.as_slice(), 1e-12));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, usize)> {
        prop::collection::vec(-3.0f64..4.0, 1..20)
            .prop_flat_map(|w| {
                let n = w.len();
                (Just(w), 0..=n)
            })
    }

    proptest! {
        #[test]
        fn output_is_feasible_and_idempotent((w, h) in instance()) {
            let p = project_capped_simplex(&w, h).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - h as f64).abs() <= 1e-9);
            prop_assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let again = project_capped_simplex(p.as_slice(), h).unwrap();
            prop_assert!(close(again.as_slice(), p.as_slice(), 1e-12));
        }

        #[test]
        fn nonexpansive((a, h) in instance(), noise in prop::collection::vec(-2.0f64..2.0, 20)) {
            let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
            let pa = project_capped_simplex(&a, h).unwrap();
            let pb = project_capped_simplex(&b, h).unwrap();
            let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let d_out: f64 = pa.as_slice().iter().zip(pb.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn two_step_agrees_when_no_clipping(w in prop::collection::vec(0.3f64..0.7, 1..20)) {
            let h = (w.iter().sum::<f64>().round() as usize).max(1);
            let plane = project_hyperplane(&w, h);
            prop_assume!(plane.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let exact = project_capped_simplex(&w, h).unwrap();
            prop_assert!(close(&project_two_step(&w, h), exact.as_slice(), 1e-12));
        }
    }
}
