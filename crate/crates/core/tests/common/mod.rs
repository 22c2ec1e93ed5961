//! Reference implementations used as test oracles. Everything here is
//! written directly from the definitions and shares no code with the
//! library beyond its container types.

#![allow(dead_code)]

use mot_core::{DenseTensor, MotInstance, Shape};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector with entries proportional to `U[lo, 1)`.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Cost uniform on `[0, 1)`, interior marginals.
pub fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MotInstance<f64> {
    let shape = Shape::cubic(n, m).unwrap();
    let cost: Vec<f64> = (0..shape.len()).map(|_| rng.gen::<f64>()).collect();
    let marginals = (0..m).map(|_| random_simplex(rng, n, 0.1)).collect();
    MotInstance::new(DenseTensor::from_vec(shape, cost).unwrap(), marginals).unwrap()
}

/// Digits of `flat` in the mixed radix `sizes`, most significant first.
pub fn decode(flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    let mut rest = flat;
    for k in (0..sizes.len()).rev() {
        idx[k] = rest % sizes[k];
        rest /= sizes[k];
    }
    idx
}

pub fn brute_marginal(x: &DenseTensor<f64>, k: usize) -> Vec<f64> {
    let sizes = x.shape().sizes();
    let mut out = vec![0.0; sizes[k]];
    for (flat, &v) in x.data().iter().enumerate() {
        out[decode(flat, sizes)[k]] += v;
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn brute_violation(x: &DenseTensor<f64>, marginals: &[Vec<f64>]) -> f64 {
    (0..marginals.len()).map(|k| l1(&brute_marginal(x, k), &marginals[k])).sum()
}

/// Exponents `Σ_k beta_k[i_k] - C / eta` for every entry.
fn exponents(inst: &MotInstance<f64>, eta: f64, beta: &[Vec<f64>]) -> Vec<f64> {
    let sizes = inst.cost().shape().sizes().to_vec();
    inst.cost()
        .data()
        .iter()
        .enumerate()
        .map(|(flat, &c)| {
            let idx = decode(flat, &sizes);
            idx.iter().enumerate().map(|(k, &i)| beta[k][i]).sum::<f64>() - c / eta
        })
        .collect()
}

/// `log ||B(beta)||_1 - Σ_k <beta_k, r_k>` summed entry by entry.
pub fn brute_phi(inst: &MotInstance<f64>, eta: f64, beta: &[Vec<f64>]) -> f64 {
    let e = exponents(inst, eta, beta);
    let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + e.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
    let lin: f64 = beta
        .iter()
        .zip(inst.marginals())
        .map(|(b, r)| b.iter().zip(r).map(|(x, y)| x * y).sum::<f64>())
        .sum();
    lse - lin
}

/// `B(beta) / ||B(beta)||_1` entry by entry.
pub fn brute_plan(inst: &MotInstance<f64>, eta: f64, beta: &[Vec<f64>]) -> DenseTensor<f64> {
    let e = exponents(inst, eta, beta);
    let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = e.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = w.iter().sum();
    DenseTensor::from_vec(inst.cost().shape().clone(), w.into_iter().map(|v| v / s).collect()).unwrap()
}

/// `Σ_k ||r_k(B)/||B|| - r_k||_1`.
pub fn brute_residue(inst: &MotInstance<f64>, eta: f64, beta: &[Vec<f64>]) -> f64 {
    brute_violation(&brute_plan(inst, eta, beta), inst.marginals())
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Solve the square system `M x = b` exactly; `None` if singular.
fn solve_square(mut m: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let k = b.len();
    for p in 0..k {
        let piv = (p..k).find(|&r| !m[r][p].is_zero())?;
        m.swap(p, piv);
        b.swap(p, piv);
        for r in 0..k {
            if r != p && !m[r][p].is_zero() {
                let f = &m[r][p] / &m[p][p];
                for j in p..k {
                    let v = &f * &m[p][j];
                    m[r][j] -= v;
                }
                let v = &f * &b[p];
                b[r] -= v;
            }
        }
    }
    Some((0..k).map(|i| &b[i] / &m[i][i]).collect())
}

/// Minimum of `c^T x` over the basic feasible solutions of `Ax = b, x >= 0`
/// for a full-row-rank `A`, by trying every column basis in exact arithmetic.
pub fn enumerate_bfs(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<BigRational> {
    let rows = a.len();
    let cols = c.len();
    let mut best: Option<BigRational> = None;
    let mut basis: Vec<usize> = (0..rows).collect();
    loop {
        let m: Vec<Vec<BigRational>> = (0..rows).map(|i| basis.iter().map(|&j| rat(a[i][j])).collect()).collect();
        if let Some(x) = solve_square(m, b.iter().map(|&v| rat(v)).collect()) {
            if x.iter().all(|v| !v.is_negative()) {
                let val = basis
                    .iter()
                    .zip(&x)
                    .fold(BigRational::zero(), |acc, (&j, xj)| acc + rat(c[j]) * xj);
                if best.as_ref().map_or(true, |b| val < *b) {
                    best = Some(val);
                }
            }
        }
        // next combination
        let mut i = rows;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < cols - rows + i {
                basis[i] += 1;
                for j in i + 1..rows {
                    basis[j] = basis[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Classical two-marginal Sinkhorn on the kernel `exp(-C/eta)`, alternating
/// row and column scalings for `iters` rounds.
pub fn classical_sinkhorn(cost: &[Vec<f64>], r: &[f64], c: &[f64], eta: f64, iters: usize) -> Vec<Vec<f64>> {
    let n = r.len();
    let k: Vec<Vec<f64>> = cost.iter().map(|row| row.iter().map(|v| (-v / eta).exp()).collect()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    for _ in 0..iters {
        for i in 0..n {
            u[i] = r[i] / (0..n).map(|j| k[i][j] * v[j]).sum::<f64>();
        }
        for j in 0..n {
            v[j] = c[j] / (0..n).map(|i| k[i][j] * u[i]).sum::<f64>();
        }
    }
    (0..n).map(|i| (0..n).map(|j| u[i] * k[i][j] * v[j]).collect()).collect()
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &[Vec<i64>]) -> i64 {
    let k = m.len();
    if k == 0 {
        return 1;
    }
    (0..k)
        .map(|j| {
            let minor: Vec<Vec<i64>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect()).collect();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            sign * m[0][j] * cofactor_det(&minor)
        })
        .sum()
}
