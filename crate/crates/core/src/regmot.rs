//! Entropic-regularized multimarginal transport in dual form.
//!
//! For potentials `beta = (beta_1, .., beta_m)` the implicit plan is
//! `B(beta)[i] = exp(Σ_k beta_k[i_k] - C[i] / eta)` and the dual objective is
//! `phi(beta) = log ||B(beta)||_1 - Σ_k <beta_k, r_k>`. Nothing here ever
//! exponentiates an unshifted log value; `B` is only formed explicitly by
//! [`EntropicModel::plan`].

use serde::{Deserialize, Serialize};

use crate::error::{MotError, Result};
use crate::scalar::Real;
use crate::tensor::{lse_axis, lse_collapse, log_kernel, log_sum_exp, DenseTensor};

/// Nonnegative cost tensor with equal axis sizes and one probability vector per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct MotInstance<T> {
    cost: DenseTensor<T>,
    marginals: Vec<Vec<T>>,
    cost_norm_inf: T,
    n: usize,
}

/// Absolute tolerance on `Σ r_k = 1`.
pub fn simplex_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0 * n as f64))
}

pub fn check_simplex<T: Real>(v: &[T], what: &str) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < T::zero()) {
        return Err(MotError::InvalidInstance(format!(
            "{what} has a negative or non-finite entry {x}"
        )));
    }
    let s: T = v.iter().copied().sum();
    if (s - T::one()).abs() > simplex_tolerance::<T>(v.len()) {
        return Err(MotError::InvalidInstance(format!(
            "{what} sums to {s}, expected 1"
        )));
    }
    Ok(())
}

impl<T: Real> MotInstance<T> {
    pub fn new(cost: DenseTensor<T>, marginals: Vec<Vec<T>>) -> Result<Self> {
        let n = cost.shape().uniform_size().ok_or_else(|| {
            MotError::InvalidInstance(format!(
                "solvers need equal axis sizes, got {:?}",
                cost.shape().sizes()
            ))
        })?;
        let m = cost.order();
        if marginals.len() != m {
            return Err(MotError::InvalidInstance(format!(
                "{} marginals for a {m}-way cost",
                marginals.len()
            )));
        }
        for (k, r) in marginals.iter().enumerate() {
            if r.len() != n {
                return Err(MotError::InvalidInstance(format!(
                    "marginal {k} has length {}, expected {n}",
                    r.len()
                )));
            }
            check_simplex(r, &format!("marginal {k}"))?;
        }
        if cost.data().iter().any(|c| !c.is_finite() || *c < T::zero()) {
            return Err(MotError::InvalidInstance(
                "cost entries must be finite and nonnegative".into(),
            ));
        }
        let cost_norm_inf = cost.norm_inf();
        Ok(MotInstance {
            cost,
            marginals,
            cost_norm_inf,
            n,
        })
    }

    /// Same cost, different marginals.
    pub fn with_marginals(&self, marginals: Vec<Vec<T>>) -> Result<Self> {
        MotInstance::new(self.cost.clone(), marginals)
    }

    pub fn cost(&self) -> &DenseTensor<T> {
        &self.cost
    }

    pub fn marginals(&self) -> &[Vec<T>] {
        &self.marginals
    }

    pub fn marginal(&self, k: usize) -> &[T] {
        &self.marginals[k]
    }

    pub fn cost_norm_inf(&self) -> T {
        self.cost_norm_inf
    }

    /// Support size per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of marginals.
    pub fn m(&self) -> usize {
        self.marginals.len()
    }

    pub fn min_marginal_entry(&self) -> T {
        self.marginals
            .iter()
            .flatten()
            .fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn cast<U: Real>(&self) -> MotInstance<U> {
        MotInstance {
            cost: self.cost.cast(),
            marginals: self
                .marginals
                .iter()
                .map(|r| r.iter().map(|&x| U::lit(x.to_f64_lossy())).collect())
                .collect(),
            cost_norm_inf: U::lit(self.cost_norm_inf.to_f64_lossy()),
            n: self.n,
        }
    }
}

/// Per-axis dual potentials (log scalings), one vector of length n per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials<T> {
    blocks: Vec<Vec<T>>,
}

impl<T: Real> DualPotentials<T> {
    pub fn zeros(m: usize, n: usize) -> Self {
        DualPotentials {
            blocks: vec![vec![T::zero(); n]; m],
        }
    }

    pub fn from_blocks(blocks: Vec<Vec<T>>) -> Self {
        DualPotentials { blocks }
    }

    pub fn blocks(&self) -> &[Vec<T>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[T] {
        &self.blocks[k]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut Vec<T> {
        &mut self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<Vec<T>> {
        self.blocks
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.blocks.iter().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    /// `a * self + b * other`, blockwise.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        DualPotentials {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(x, y)| x.iter().zip(y).map(|(&u, &v)| a * u + b * v).collect())
                .collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for (x, y) in self.iter().zip(other.iter()) {
            acc = acc + *x * *y;
        }
        acc
    }

    pub fn norm2(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Add `c` to every entry of block `k`.
    pub fn shift_block(&mut self, k: usize, c: T) {
        for x in &mut self.blocks[k] {
            *x = *x + c;
        }
    }

    /// The shift used in the dual-bound argument: blocks `1..m-1` are centred
    /// so that `max + min = 0`, and the opposite shift is absorbed by the last
    /// block. `phi` and `B(beta)` are unchanged.
    pub fn canonical_shift(&self) -> Self {
        let mut out = self.clone();
        let m = out.m();
        let mut total = T::zero();
        for k in 0..m.saturating_sub(1) {
            let b = &out.blocks[k];
            let hi = b.iter().fold(T::neg_infinity(), |a, &x| a.max(x));
            let lo = b.iter().fold(T::infinity(), |a, &x| a.min(x));
            let mid = (hi + lo) / T::lit(2.0);
            out.shift_block(k, -mid);
            total = total + mid;
        }
        if m > 0 {
            out.shift_block(m - 1, total);
        }
        out
    }
}

/// A-priori constants for the dual problem at a given `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverBounds {
    /// Bound on `||beta*||_inf` for a suitably shifted optimum.
    pub r: f64,
    /// Constant in the dual-gap-versus-residue bound.
    pub r_bar: f64,
    pub eta: f64,
}

impl SolverBounds {
    /// Iteration bound of the greedy solver: `2 + 2 m^2 R̄ / eps'`.
    pub fn greedy_iteration_bound(&self, m: usize, eps_prime: f64) -> f64 {
        2.0 + 2.0 * (m * m) as f64 * self.r_bar / eps_prime
    }

    /// Iteration bound of the accelerated solver with the `m^2` factor that
    /// the convergence argument actually delivers.
    pub fn accel_iteration_bound(&self, n: usize, m: usize, eps_prime: f64) -> f64 {
        1.0 + 4.0 * ((n as f64).sqrt() * (m * m) as f64 * self.r / eps_prime).powf(2.0 / 3.0)
    }

    /// The same bound written with a single factor of `m`.
    pub fn accel_iteration_bound_stated(&self, n: usize, m: usize, eps_prime: f64) -> f64 {
        1.0 + 4.0 * ((n as f64).sqrt() * m as f64 * self.r / eps_prime).powf(2.0 / 3.0)
    }
}

/// `R` and `R̄` for an instance; requires strictly positive marginals.
pub fn bounds<T: Real>(inst: &MotInstance<T>, eta: T) -> Result<SolverBounds> {
    check_eta(eta)?;
    let min_r = inst.min_marginal_entry().to_f64_lossy();
    if min_r <= 0.0 {
        return Err(MotError::Domain(
            "dual bounds need strictly positive marginals; smooth the marginals first \
             (the approximation driver does this)"
                .into(),
        ));
    }
    let eta = eta.to_f64_lossy();
    let c = inst.cost_norm_inf().to_f64_lossy() / eta;
    let (m, n) = (inst.m() as f64, inst.n() as f64);
    Ok(SolverBounds {
        r: c + (m - 1.0) * n.ln() - 2.0 * min_r.ln(),
        r_bar: c - min_r.ln(),
        eta,
    })
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if eta > T::zero() && eta.is_finite() {
        Ok(())
    } else {
        Err(MotError::Domain(format!("eta must be positive and finite, got {eta}")))
    }
}

/// `rho(a, b) = 1ᵀ(b - a) + Σ a_i log(a_i / b_i)`, with `0 log 0 = 0`.
pub fn rho<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(MotError::Shape(format!("rho of lengths {} and {}", a.len(), b.len())));
    }
    if let Some(x) = b.iter().find(|x| !(**x > T::zero())) {
        return Err(MotError::Domain(format!("rho needs b > 0, found {x}")));
    }
    let log_b: Vec<T> = b.iter().map(|x| x.ln()).collect();
    Ok(rho_log(a, &log_b))
}

/// `rho(a, exp(log_b))` without leaving the log domain for the second argument.
pub fn rho_log<T: Real>(a: &[T], log_b: &[T]) -> T {
    // each term is b - a - a log(b/a) = a (e^u - 1 - u) with u = log(b/a),
    // which stays accurate when b is close to a
    let mut acc = T::zero();
    for (&ai, &lb) in a.iter().zip(log_b) {
        if ai > T::zero() {
            acc = acc + ai * exp_remainder(lb - ai.ln());
        } else {
            acc = acc + lb.exp();
        }
    }
    acc
}

/// `e^u - 1 - u`.
fn exp_remainder<T: Real>(u: T) -> T {
    if u.abs() < T::lit(0.1) {
        let mut term = T::one();
        for k in (3..=12).rev() {
            term = T::one() + u * term / T::lit(k as f64);
        }
        u * u * term / T::lit(2.0)
    } else {
        u.exp() - T::one() - u
    }
}

/// The log plan `log B(beta)` together with derived log-marginals.
#[derive(Clone, Debug)]
pub struct PlanEval<T> {
    /// `log r_k(B(beta))` for every axis (unnormalized).
    pub log_marginals: Vec<Vec<T>>,
    /// `log ||B(beta)||_1`.
    pub log_norm: T,
    logs: DenseTensor<T>,
}

impl<T: Real> PlanEval<T> {
    /// `log(r_k(B) / ||B||_1)`.
    pub fn log_normalized_marginal(&self, k: usize) -> Vec<T> {
        self.log_marginals[k]
            .iter()
            .map(|&x| x - self.log_norm)
            .collect()
    }

    pub fn normalized_marginal(&self, k: usize) -> Vec<T> {
        self.log_marginals[k]
            .iter()
            .map(|&x| (x - self.log_norm).exp())
            .collect()
    }

    pub fn logs(&self) -> &DenseTensor<T> {
        &self.logs
    }
}

/// Residue `E = Σ_k ||r_k(B)/||B|| - r_k||_1` with its per-axis terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Residue<T> {
    pub total: T,
    pub per_axis: Vec<T>,
}

/// The dual model at a fixed `eta`, caching `C / eta`.
#[derive(Clone, Debug)]
pub struct EntropicModel<'a, T> {
    inst: &'a MotInstance<T>,
    eta: T,
    scaled_cost: DenseTensor<T>,
}

impl<'a, T: Real> EntropicModel<'a, T> {
    pub fn new(inst: &'a MotInstance<T>, eta: T) -> Result<Self> {
        check_eta(eta)?;
        let scaled_cost = inst.cost().map(|c| c / eta);
        Ok(EntropicModel {
            inst,
            eta,
            scaled_cost,
        })
    }

    pub fn instance(&self) -> &'a MotInstance<T> {
        self.inst
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn scaled_cost(&self) -> &DenseTensor<T> {
        &self.scaled_cost
    }

    fn check_beta(&self, beta: &DualPotentials<T>) -> Result<()> {
        let (m, n) = (self.inst.m(), self.inst.n());
        if beta.m() != m || beta.blocks().iter().any(|b| b.len() != n) {
            return Err(MotError::Shape(format!(
                "potentials do not match an instance with m = {m}, n = {n}"
            )));
        }
        Ok(())
    }

    /// Evaluate every log-marginal directly, `O(m n^m)`.
    pub fn evaluate(&self, beta: &DualPotentials<T>) -> Result<PlanEval<T>> {
        self.check_beta(beta)?;
        let logs = log_kernel(beta.blocks(), &self.scaled_cost)?;
        let log_marginals = (0..self.inst.m())
            .map(|k| lse_axis(&logs, k))
            .collect::<Result<Vec<_>>>()?;
        let log_norm = log_sum_exp(logs.data());
        Ok(PlanEval {
            log_marginals,
            log_norm,
            logs,
        })
    }

    /// Evaluate after an update of axis `collapse`: that axis is summed out
    /// once into an (m-1)-way tensor whose own marginals give the remaining
    /// axes, so the cost is `O(n^m + m n^(m-1))` instead of `O(m n^m)`.
    pub fn evaluate_collapsing(&self, beta: &DualPotentials<T>, collapse: usize) -> Result<PlanEval<T>> {
        self.check_beta(beta)?;
        let logs = log_kernel(beta.blocks(), &self.scaled_cost)?;
        let Some(small) = lse_collapse(&logs, collapse)? else {
            return self.evaluate(beta);
        };
        let m = self.inst.m();
        let mut log_marginals = Vec::with_capacity(m);
        for k in 0..m {
            let lm = match k.cmp(&collapse) {
                std::cmp::Ordering::Less => lse_axis(&small, k)?,
                std::cmp::Ordering::Equal => lse_axis(&logs, k)?,
                std::cmp::Ordering::Greater => lse_axis(&small, k - 1)?,
            };
            log_marginals.push(lm);
        }
        let log_norm = log_sum_exp(small.data());
        Ok(PlanEval {
            log_marginals,
            log_norm,
            logs,
        })
    }

    /// `log r_axis(B(beta))` only.
    pub fn log_marginal(&self, beta: &DualPotentials<T>, axis: usize) -> Result<Vec<T>> {
        self.check_beta(beta)?;
        let logs = log_kernel(beta.blocks(), &self.scaled_cost)?;
        lse_axis(&logs, axis)
    }

    /// `log ||B(beta)||_1`.
    pub fn log_norm(&self, beta: &DualPotentials<T>) -> Result<T> {
        self.check_beta(beta)?;
        Ok(log_sum_exp(log_kernel(beta.blocks(), &self.scaled_cost)?.data()))
    }

    pub fn linear_term(&self, beta: &DualPotentials<T>) -> T {
        let mut acc = T::zero();
        for (b, r) in beta.blocks().iter().zip(self.inst.marginals()) {
            for (&x, &y) in b.iter().zip(r) {
                acc = acc + x * y;
            }
        }
        acc
    }

    pub fn phi(&self, beta: &DualPotentials<T>) -> Result<T> {
        Ok(self.log_norm(beta)? - self.linear_term(beta))
    }

    pub fn phi_from(&self, beta: &DualPotentials<T>, eval: &PlanEval<T>) -> T {
        eval.log_norm - self.linear_term(beta)
    }

    pub fn gradient_from(&self, eval: &PlanEval<T>) -> DualPotentials<T> {
        let blocks = (0..self.inst.m())
            .map(|k| {
                eval.normalized_marginal(k)
                    .into_iter()
                    .zip(self.inst.marginal(k))
                    .map(|(p, &r)| p - r)
                    .collect()
            })
            .collect();
        DualPotentials::from_blocks(blocks)
    }

    /// `∇phi`: block `k` is `r_k(B)/||B||_1 - r_k`.
    pub fn gradient(&self, beta: &DualPotentials<T>) -> Result<DualPotentials<T>> {
        Ok(self.gradient_from(&self.evaluate(beta)?))
    }

    pub fn residue_from(&self, eval: &PlanEval<T>) -> Residue<T> {
        let per_axis: Vec<T> = (0..self.inst.m())
            .map(|k| {
                let mut acc = T::zero();
                for (p, &r) in eval.normalized_marginal(k).into_iter().zip(self.inst.marginal(k)) {
                    acc = acc + (p - r).abs();
                }
                acc
            })
            .collect();
        let mut total = T::zero();
        for &e in &per_axis {
            total = total + e;
        }
        Residue { total, per_axis }
    }

    pub fn residue(&self, beta: &DualPotentials<T>) -> Result<Residue<T>> {
        Ok(self.residue_from(&self.evaluate(beta)?))
    }

    /// `rho(r_k, r_k(B)/||B||_1)` for every axis.
    pub fn rho_per_axis(&self, eval: &PlanEval<T>) -> Vec<T> {
        (0..self.inst.m())
            .map(|k| rho_log(self.inst.marginal(k), &eval.log_normalized_marginal(k)))
            .collect()
    }

    /// Exact minimization of `phi` over block `k`:
    /// `beta_k + log r_k - log r_k(B(beta))`. Afterwards `r_k(B) = r_k` and
    /// `||B||_1 = 1`.
    pub fn coordinate_update(&self, beta: &DualPotentials<T>, eval: &PlanEval<T>, k: usize) -> DualPotentials<T> {
        let mut out = beta.clone();
        for ((x, &r), &lm) in out
            .block_mut(k)
            .iter_mut()
            .zip(self.inst.marginal(k))
            .zip(&eval.log_marginals[k])
        {
            *x = *x + r.ln() - lm;
        }
        out
    }

    /// Normalized plan `B(beta) / ||B(beta)||_1`.
    pub fn plan(&self, beta: &DualPotentials<T>) -> Result<DenseTensor<T>> {
        self.check_beta(beta)?;
        let logs = log_kernel(beta.blocks(), &self.scaled_cost)?;
        let z = log_sum_exp(logs.data());
        Ok(logs.map(|x| (x - z).exp()))
    }
}

/// Index of the largest value, smallest index on ties.
pub fn argmax_first<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

pub fn phi<T: Real>(inst: &MotInstance<T>, eta: T, beta: &DualPotentials<T>) -> Result<T> {
    EntropicModel::new(inst, eta)?.phi(beta)
}

pub fn grad_phi<T: Real>(inst: &MotInstance<T>, eta: T, beta: &DualPotentials<T>) -> Result<DualPotentials<T>> {
    EntropicModel::new(inst, eta)?.gradient(beta)
}

pub fn residue<T: Real>(inst: &MotInstance<T>, eta: T, beta: &DualPotentials<T>) -> Result<Residue<T>> {
    EntropicModel::new(inst, eta)?.residue(beta)
}
