//! End-to-end approximation of the unregularized problem: pick `eta` and the
//! residue target from the requested accuracy, smooth the marginals, solve
//! the entropic dual, materialize the plan and round it onto the polytope.

use serde::{Deserialize, Serialize};

use crate::accel::AcceleratedSinkhorn;
use crate::error::{MotError, Result};
use crate::regmot::{EntropicModel, MotInstance};
use crate::report::{SolveReport, SolverKind};
use crate::rounding::{marginal_violation, round, RoundingReport};
use crate::scalar::Real;
use crate::sinkhorn::{MultiSinkhorn, SolveOutcome};
use crate::tensor::DenseTensor;

/// Default cap on the number of plan entries the driver will materialize.
pub const DEFAULT_MATERIALIZE_CAP: usize = 20_000_000;

/// Which marginals the rounding step projects onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundTarget {
    /// The input marginals; the returned plan is feasible for the original problem.
    #[default]
    Original,
    /// The smoothed marginals the solver was run against.
    Smoothed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    /// Additive accuracy on the transport cost.
    pub epsilon: f64,
    pub solver: SolverKind,
    pub eta: Option<f64>,
    pub eps_prime: Option<f64>,
    pub max_iter: Option<usize>,
    pub round_target: RoundTarget,
    pub materialize_cap: usize,
}

impl ApproxConfig {
    pub fn new(epsilon: f64, solver: SolverKind) -> Self {
        ApproxConfig {
            epsilon,
            solver,
            eta: None,
            eps_prime: None,
            max_iter: None,
            round_target: RoundTarget::Original,
            materialize_cap: DEFAULT_MATERIALIZE_CAP,
        }
    }
}

/// Parameter values actually used by a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub epsilon: f64,
    pub eta: f64,
    /// Smoothing weight and twice the solver's residue target.
    pub eps_prime: f64,
    /// True when `epsilon / (8 ||C||_inf)` exceeded 1 and was clamped.
    pub eps_prime_clamped: bool,
    pub solver_tolerance: f64,
    pub m: usize,
    pub n: usize,
    pub cost_norm_inf: f64,
}

impl ResolvedParams {
    /// `eta = eps / (2 m log n)`, `eps' = min(1, eps / (8 ||C||_inf))`, unless overridden.
    pub fn resolve(epsilon: f64, m: usize, n: usize, cost_norm_inf: f64, eta: Option<f64>, eps_prime: Option<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MotError::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if n < 2 {
            return Err(MotError::Domain("support size n must be at least 2".into()));
        }
        let eta = eta.unwrap_or(epsilon / (2.0 * m as f64 * (n as f64).ln()));
        let raw = eps_prime.unwrap_or(epsilon / (8.0 * cost_norm_inf));
        let eps_prime_clamped = !(raw <= 1.0);
        let eps_prime = if eps_prime_clamped { 1.0 } else { raw };
        if !(eta > 0.0 && eta.is_finite()) || !(eps_prime > 0.0) {
            return Err(MotError::Domain(format!("invalid eta = {eta} or eps' = {eps_prime}")));
        }
        Ok(ResolvedParams {
            epsilon,
            eta,
            eps_prime,
            eps_prime_clamped,
            solver_tolerance: eps_prime / 2.0,
            m,
            n,
            cost_norm_inf,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ApproxResult<T> {
    pub plan: DenseTensor<T>,
    /// `<C, X̂>`.
    pub objective: T,
    pub params: ResolvedParams,
    pub report: SolveReport,
    pub rounding: RoundingReport,
    /// `<C, X̃>` before rounding.
    pub pre_round_objective: T,
    /// `Σ_k ||r_k(X̃) - r_k||_1` against the original marginals.
    pub pre_round_violation: T,
}

impl<T: Real> ApproxResult<T> {
    /// `m eta log n + 4 ||C||_inf Σ_k ||r_k(X̃) - r_k||_1`: bound on the gap to the
    /// LP optimum implied by this run.
    pub fn certified_gap(&self) -> f64 {
        let p = &self.params;
        p.m as f64 * p.eta * (p.n as f64).ln() + 4.0 * p.cost_norm_inf * self.pre_round_violation.to_f64_lossy()
    }
}

/// `(1 - eps'/(4m)) r_k + eps'/(4mn) 1`.
pub fn smooth_marginals<T: Real>(marginals: &[Vec<T>], eps_prime: T) -> Vec<Vec<T>> {
    let m = T::lit(marginals.len() as f64);
    let four = T::lit(4.0);
    marginals
        .iter()
        .map(|r| {
            let n = T::lit(r.len() as f64);
            let keep = T::one() - eps_prime / (four * m);
            let add = eps_prime / (four * m * n);
            r.iter().map(|&x| keep * x + add).collect()
        })
        .collect()
}

/// Run the solver chosen in `config` against `inst` with the given parameters.
pub fn solve_entropic<T: Real>(inst: &MotInstance<T>, kind: SolverKind, eta: T, tol: T, max_iter: Option<usize>) -> Result<SolveOutcome<T>> {
    match kind {
        SolverKind::Greedy => MultiSinkhorn::new(inst, eta)?.run(tol, max_iter),
        SolverKind::Accelerated => AcceleratedSinkhorn::new(inst, eta)?.run(tol, max_iter),
    }
}

/// Produce a feasible plan whose cost is within `epsilon` of the LP optimum.
pub fn approx_mot<T: Real>(inst: &MotInstance<T>, config: &ApproxConfig) -> Result<ApproxResult<T>> {
    let (m, n) = (inst.m(), inst.n());
    let params = ResolvedParams::resolve(
        config.epsilon,
        m,
        n,
        inst.cost_norm_inf().to_f64_lossy(),
        config.eta,
        config.eps_prime,
    )?;
    let entries = inst.cost().shape().len();
    if entries > config.materialize_cap {
        return Err(MotError::SizeCap {
            what: "plan materialization",
            requested: entries as u128,
            cap: config.materialize_cap as u128,
        });
    }

    let smoothed = smooth_marginals(inst.marginals(), T::lit(params.eps_prime));
    let smoothed_inst = inst.with_marginals(smoothed)?;
    let eta = T::lit(params.eta);
    let outcome = solve_entropic(&smoothed_inst, config.solver, eta, T::lit(params.solver_tolerance), config.max_iter)?;
    if !outcome.report.converged {
        return Err(MotError::NonConvergence {
            max_iter: outcome.report.max_iter,
            last_residue: outcome.report.final_residue,
            report: Box::new(outcome.report),
        });
    }

    let model = EntropicModel::new(&smoothed_inst, eta)?;
    let x_tilde = model.plan(&outcome.beta)?;
    let target = match config.round_target {
        RoundTarget::Original => inst.marginals(),
        RoundTarget::Smoothed => smoothed_inst.marginals(),
    };
    let (plan, rounding) = round(&x_tilde, target)?;
    Ok(ApproxResult {
        objective: inst.cost().inner(&plan)?,
        pre_round_objective: inst.cost().inner(&x_tilde)?,
        pre_round_violation: marginal_violation(&x_tilde, inst.marginals())?,
        plan,
        params,
        report: outcome.report,
        rounding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn smoothing_examples() {
        let u = vec![vec![0.25f64; 4]; 3];
        for (a, b) in smooth_marginals(&u, 0.3).iter().flatten().zip(u.iter().flatten()) {
            assert!((a - b).abs() < 1e-16);
        }
        let s = smooth_marginals(&[vec![1.0f64, 0.0], vec![0.5, 0.5]], 0.4);
        assert!((s[0][0] - 0.975).abs() < 1e-15);
        assert!((s[0][1] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn parameter_schedule() {
        let p = ResolvedParams::resolve(0.25, 3, 4, 1.0, None, None).unwrap();
        assert!((p.eta - 0.25 / (6.0 * 4f64.ln())).abs() < 1e-15);
        assert!((p.eps_prime - 0.25 / 8.0).abs() < 1e-15);
        assert!(!p.eps_prime_clamped);
        let q = ResolvedParams::resolve(20.0, 3, 4, 1.0, None, None).unwrap();
        assert_eq!(q.eps_prime, 1.0);
        assert!(q.eps_prime_clamped);
        let z = ResolvedParams::resolve(0.1, 2, 2, 0.0, None, None).unwrap();
        assert_eq!(z.eps_prime, 1.0);
        assert!(ResolvedParams::resolve(0.1, 2, 1, 1.0, None, None).is_err());
        assert!(ResolvedParams::resolve(0.0, 2, 2, 1.0, None, None).is_err());
    }

    #[test]
    fn zero_cost_gives_feasible_zero_objective() {
        let inst = MotInstance::new(
            DenseTensor::<f64>::zeros(Shape::cubic(3, 3).unwrap()),
            vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![0.1, 0.1, 0.8]],
        )
        .unwrap();
        for kind in [SolverKind::Greedy, SolverKind::Accelerated] {
            let res = approx_mot(&inst, &ApproxConfig::new(0.1, kind)).unwrap();
            assert_eq!(res.objective, 0.0);
            for k in 0..3 {
                for (a, b) in res.plan.marginal(k).unwrap().iter().zip(inst.marginal(k)) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        let inst = MotInstance::new(
            DenseTensor::zeros(Shape::cubic(3, 3).unwrap()),
            vec![vec![1.0 / 3.0; 3]; 3],
        )
        .unwrap();
        let mut cfg = ApproxConfig::new(0.1, SolverKind::Greedy);
        cfg.materialize_cap = 10;
        assert!(matches!(approx_mot(&inst, &cfg), Err(MotError::SizeCap { .. })));
    }

    #[test]
    fn smoothed_round_target_is_selectable() {
        let cost = DenseTensor::from_fn(Shape::cubic(3, 2).unwrap(), |i| (i[0] as f64 - i[1] as f64).abs());
        let inst = MotInstance::new(cost, vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]]).unwrap();
        let mut cfg = ApproxConfig::new(0.2, SolverKind::Greedy);
        cfg.round_target = RoundTarget::Smoothed;
        let res = approx_mot(&inst, &cfg).unwrap();
        let smoothed = smooth_marginals(inst.marginals(), res.params.eps_prime);
        for k in 0..2 {
            for (a, b) in res.plan.marginal(k).unwrap().iter().zip(&smoothed[k]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
