//! Exact LP baseline for tiny instances.
//!
//! The marginal constraints of an m-way plan with n points per axis have
//! rank `m(n-1)+1`: every axis sums to the same total mass. [`build_lp`]
//! keeps all n rows of the first axis and the first `n-1` rows of every
//! other axis.

mod simplex;

pub use simplex::{simplex_solve, simplex_solve_with_limit, LpSolution, LpStatus, StandardFormLp, DEFAULT_PIVOT_LIMIT};

use num_rational::BigRational;

use crate::error::{MotError, Result};
use crate::regmot::MotInstance;
use crate::scalar::{LpScalar, Real};
use crate::sinkhorn::multi_sinkhorn;
use crate::tensor::{DenseTensor, MultiIndexIter, Shape};

/// Default cap on `n^m` for [`build_lp`].
pub const DEFAULT_ORACLE_CAP: usize = 4096;

/// All `m n` marginal rows; row `k n + j` selects the entries with `i_k = j`.
pub fn marginal_rows(shape: &Shape) -> Vec<Vec<u8>> {
    let offsets: Vec<usize> = shape
        .sizes()
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let total: usize = shape.sizes().iter().sum();
    let mut rows = vec![vec![0u8; shape.len()]; total];
    let mut it = MultiIndexIter::new(shape);
    let mut col = 0;
    loop {
        for (k, &i) in it.current().iter().enumerate() {
            rows[offsets[k] + i][col] = 1;
        }
        col += 1;
        if !it.step() {
            break;
        }
    }
    rows
}

/// Indices into [`marginal_rows`] kept by [`build_lp`].
pub fn kept_rows(n: usize, m: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..n).collect();
    for k in 1..m {
        keep.extend((0..n - 1).map(|j| k * n + j));
    }
    keep
}

pub fn build_lp<T: Real>(inst: &MotInstance<T>) -> Result<StandardFormLp<f64>> {
    build_lp_with_cap(inst, DEFAULT_ORACLE_CAP)
}

pub fn build_lp_with_cap<T: Real>(inst: &MotInstance<T>, cap: usize) -> Result<StandardFormLp<f64>> {
    let shape = inst.cost().shape();
    if shape.len() > cap {
        return Err(MotError::SizeCap {
            what: "LP oracle variables",
            requested: shape.len() as u128,
            cap: cap as u128,
        });
    }
    let (n, m) = (inst.n(), inst.m());
    let all = marginal_rows(shape);
    let rhs: Vec<f64> = inst.marginals().iter().flatten().map(|x| x.to_f64_lossy()).collect();
    let keep = kept_rows(n, m);
    Ok(StandardFormLp {
        a: keep.iter().map(|&r| all[r].iter().map(|&v| v as f64).collect()).collect(),
        b: keep.iter().map(|&r| rhs[r]).collect(),
        c: inst.cost().data().iter().map(|x| x.to_f64_lossy()).collect(),
    })
}

/// Optimal plan and value of the unregularized problem.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub status: LpStatus,
    pub value: f64,
    pub plan: DenseTensor<f64>,
    pub iterations: usize,
}

fn finish<S: LpScalar>(shape: &Shape, sol: LpSolution<S>) -> Result<OracleSolution> {
    let plan = DenseTensor::from_vec(shape.clone(), sol.x.iter().map(|x| x.approx_f64()).collect())?;
    Ok(OracleSolution {
        status: sol.status,
        value: sol.value.approx_f64(),
        plan,
        iterations: sol.iterations,
    })
}

/// Solve in floating point.
pub fn solve_exact_lp<T: Real>(inst: &MotInstance<T>) -> Result<OracleSolution> {
    let lp = build_lp(inst)?;
    finish(inst.cost().shape(), simplex_solve(&lp))
}

/// Solve in exact rational arithmetic; every f64 input is converted exactly.
pub fn solve_exact_lp_rational<T: Real>(inst: &MotInstance<T>) -> Result<(OracleSolution, BigRational)> {
    let lp = build_lp(inst)?
        .convert::<BigRational>()
        .ok_or_else(|| MotError::Domain("non-finite LP coefficient".into()))?;
    let sol = simplex_solve(&lp);
    let value = sol.value.clone();
    Ok((finish(inst.cost().shape(), sol)?, value))
}

/// Minimum of the entropic dual, from a greedy solve to `E <= 1e-10`.
pub fn lp_dual_optimum_phi<T: Real>(inst: &MotInstance<T>, eta: T) -> Result<T> {
    let (_, report) = multi_sinkhorn(inst, eta, T::lit(1e-10), None)?;
    Ok(T::lit(report.final_phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_has_three_independent_rows() {
        let inst = MotInstance::new(DenseTensor::zeros(Shape::cubic(2, 2).unwrap()), vec![vec![0.5, 0.5]; 2]).unwrap();
        let lp = build_lp(&inst).unwrap();
        assert_eq!((lp.rows(), lp.cols()), (3, 4));
        assert_eq!(lp.b, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn every_column_has_m_ones() {
        let rows = marginal_rows(&Shape::cubic(3, 3).unwrap());
        for j in 0..27 {
            assert_eq!(rows.iter().map(|r| r[j] as usize).sum::<usize>(), 3);
        }
    }

    #[test]
    fn matching_has_zero_cost() {
        let cost = DenseTensor::from_vec(Shape::cubic(2, 2).unwrap(), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let inst = MotInstance::new(cost, vec![vec![0.5, 0.5]; 2]).unwrap();
        let sol = solve_exact_lp(&inst).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.value.abs() < 1e-12);
        assert_eq!(sol.plan.data(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn constant_cost_gives_unit_value() {
        let inst = MotInstance::new(
            DenseTensor::filled(Shape::cubic(3, 3).unwrap(), 1.0),
            vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.1, 0.8], vec![0.6, 0.2, 0.2]],
        )
        .unwrap();
        assert!((solve_exact_lp(&inst).unwrap().value - 1.0).abs() < 1e-12);
        let (_, exact) = solve_exact_lp_rational(&inst).unwrap();
        assert!((exact.approx_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = MotInstance::new(DenseTensor::zeros(Shape::cubic(2, 13).unwrap()), vec![vec![0.5, 0.5]; 13]).unwrap();
        assert!(matches!(build_lp(&inst), Err(MotError::SizeCap { .. })));
    }
}
