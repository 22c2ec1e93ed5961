//! Projection of an approximately feasible plan onto the transportation
//! polytope: shrink each axis to fit under its target marginal, then add back
//! the missing mass as a single rank-one tensor.

use serde::{Deserialize, Serialize};

use crate::error::{MotError, Result};
use crate::regmot::check_simplex;
use crate::scalar::Real;
use crate::tensor::DenseTensor;

/// Below this `||err_1||_1` the rank-one correction is the zero tensor.
pub const CORRECTION_THRESHOLD: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    /// Mass removed by the rescaling of each axis, in order.
    pub mass_removed: Vec<f64>,
    /// `||err_k||_1` per axis; all equal `1 - ||X^(m)||_1`.
    pub err_norms: Vec<f64>,
    /// `||Y - X||_1`.
    pub l1_move: f64,
    pub correction_applied: bool,
}

/// Round `x` onto `{Y >= 0 : r_k(Y) = marginals[k]}`.
pub fn round<T: Real>(x: &DenseTensor<T>, marginals: &[Vec<T>]) -> Result<(DenseTensor<T>, RoundingReport)> {
    let m = x.order();
    if marginals.len() != m {
        return Err(MotError::Shape(format!("{} marginals for a {m}-way plan", marginals.len())));
    }
    for (k, r) in marginals.iter().enumerate() {
        if r.len() != x.shape().size(k) {
            return Err(MotError::Shape(format!(
                "marginal {k} has length {}, axis has size {}",
                r.len(),
                x.shape().size(k)
            )));
        }
        check_simplex(r, &format!("marginal {k}"))?;
    }
    if x.data().iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(MotError::Domain("rounding needs a finite nonnegative tensor".into()));
    }

    let mut y = x.clone();
    let mut mass_removed = Vec::with_capacity(m);
    for (k, r) in marginals.iter().enumerate() {
        let current = y.marginal(k)?;
        let z: Vec<T> = r
            .iter()
            .zip(&current)
            .map(|(&target, &have)| if have > T::zero() { T::one().min(target / have) } else { T::one() })
            .collect();
        let before = y.sum();
        y.scale_axis(k, &z)?;
        mass_removed.push((before - y.sum()).to_f64_lossy());
    }

    let errs: Vec<Vec<T>> = marginals
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let have = y.marginal(k).expect("axis in range");
            r.iter().zip(have).map(|(&a, b)| (a - b).max(T::zero())).collect()
        })
        .collect();
    let err_norms: Vec<T> = errs.iter().map(|e| e.iter().copied().sum()).collect();

    let scale = err_norms[0];
    let correction_applied = scale >= T::lit(CORRECTION_THRESHOLD);
    if correction_applied {
        let denom = scale.powi(m as i32 - 1);
        let rank_one = DenseTensor::outer_product(&errs)?;
        for (v, &c) in y.data_mut().iter_mut().zip(rank_one.data()) {
            *v = (*v + c / denom).max(T::zero());
        }
    }

    let mut l1_move = T::zero();
    for (&a, &b) in y.data().iter().zip(x.data()) {
        l1_move = l1_move + (a - b).abs();
    }
    let report = RoundingReport {
        mass_removed,
        err_norms: err_norms.iter().map(|e| e.to_f64_lossy()).collect(),
        l1_move: l1_move.to_f64_lossy(),
        correction_applied,
    };
    Ok((y, report))
}

/// `Σ_k ||r_k(X) - r_k||_1`.
pub fn marginal_violation<T: Real>(x: &DenseTensor<T>, marginals: &[Vec<T>]) -> Result<T> {
    let mut acc = T::zero();
    for (k, r) in marginals.iter().enumerate() {
        for (a, &b) in x.marginal(k)?.into_iter().zip(r) {
            acc = acc + (a - b).abs();
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn feasible_input_is_returned_unchanged() {
        let x = DenseTensor::from_vec(Shape::cubic(2, 2).unwrap(), vec![0.1f64, 0.2, 0.3, 0.4]).unwrap();
        let r = vec![vec![0.3, 0.7], vec![0.4, 0.6]];
        let (y, rep) = round(&x, &r).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(!rep.correction_applied);
        assert!(rep.l1_move < 1e-15);
    }

    #[test]
    fn hand_simulated_two_by_two() {
        let x = DenseTensor::from_vec(Shape::cubic(2, 2).unwrap(), vec![0.5, 0.0, 0.0, 0.25]).unwrap();
        let r = vec![vec![0.5, 0.5]; 2];
        let (y, rep) = round(&x, &r).unwrap();
        assert_eq!(rep.mass_removed, vec![0.0, 0.0]);
        assert_eq!(rep.err_norms, vec![0.25, 0.25]);
        assert_eq!(y.data(), &[0.5, 0.0, 0.0, 0.5]);
        assert!((rep.l1_move - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_slice_is_not_rescaled() {
        // row 1 of X is empty but r_1 wants mass there: z = 1, deficit goes to err
        let x = DenseTensor::from_vec(Shape::cubic(2, 2).unwrap(), vec![0.6f64, 0.4, 0.0, 0.0]).unwrap();
        let r = vec![vec![0.5, 0.5]; 2];
        let (y, _) = round(&x, &r).unwrap();
        for k in 0..2 {
            for (a, b) in y.marginal(k).unwrap().iter().zip(&r[k]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DenseTensor::from_vec(Shape::cubic(2, 2).unwrap(), vec![0.5, -0.1, 0.3, 0.3]).unwrap();
        assert!(round(&x, &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        let ok = x.map(f64::abs);
        assert!(round(&ok, &[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(round(&ok, &[vec![0.5, 0.5]]).is_err());
    }
}
