//! Accelerated multimarginal Sinkhorn.
//!
//! Each iteration combines a Nesterov estimate-sequence step on the full
//! gradient with two exact coordinate updates and a monotone search, so the
//! objective of the "check" sequence never increases:
//!
//! 1. `bar = (1 - θ) check + θ tilde`
//! 2. `tilde' = tilde - (r(B(bar))/||B(bar)|| - r) / (m θ)`
//! 3. `grave = bar + θ (tilde' - tilde)`
//! 4. `hat` = exact update of block `K` (from the previous iteration) on `grave`
//! 5. `beta^t = argmin{phi(check), phi(hat)}`
//! 6. `K` = greedy block at `beta^t`
//! 7. `check'` = exact update of block `K` on `beta^t`
//! 8. `θ' = θ (sqrt(θ² + 4) - θ) / 2`

use crate::error::{MotError, Result};
use crate::regmot::{argmax_first, bounds, DualPotentials, EntropicModel, MotInstance, PlanEval, Residue};
use crate::report::{SolveReport, SolverKind, TraceEntry};
use crate::scalar::Real;
use crate::sinkhorn::{default_max_iter, normalized_start, report, require_positive_marginals, SolveOutcome};

/// Momentum update; satisfies `(θ'/θ)² = 1 - θ'`.
pub fn next_theta<T: Real>(theta: T) -> T {
    let four = T::lit(4.0);
    theta * ((theta * theta + four).sqrt() - theta) / T::lit(2.0)
}

/// Iterate with its plan evaluation and objective.
#[derive(Clone, Debug)]
pub struct Point<T> {
    pub beta: DualPotentials<T>,
    pub eval: PlanEval<T>,
    pub phi: T,
}

/// Intermediate quantities of the last iteration, exposed for checking.
#[derive(Clone, Debug)]
pub struct StepRecord<T> {
    pub bar: DualPotentials<T>,
    pub grave: DualPotentials<T>,
    pub phi_grave: T,
    pub hat: DualPotentials<T>,
    pub phi_hat: T,
    /// True when the monotone search kept `check` over `hat`.
    pub kept_check: bool,
}

#[derive(Clone, Debug)]
pub struct AccelState<T> {
    /// `check beta^t`.
    pub check: Point<T>,
    /// `tilde beta^t`.
    pub tilde: DualPotentials<T>,
    pub theta: T,
    /// Block for the next step-4 update.
    pub axis: usize,
    pub t: usize,
    /// Monotone-search output `beta^t` of the last iteration.
    pub current: Point<T>,
    pub current_residue: Residue<T>,
    pub last: Option<StepRecord<T>>,
    pub trace: Vec<TraceEntry>,
}

pub struct AcceleratedSinkhorn<'a, T> {
    model: EntropicModel<'a, T>,
    state: AccelState<T>,
}

impl<'a, T: Real> AcceleratedSinkhorn<'a, T> {
    pub fn new(inst: &'a MotInstance<T>, eta: T) -> Result<Self> {
        require_positive_marginals(inst)?;
        let model = EntropicModel::new(inst, eta)?;
        let (beta, eval) = normalized_start(&model)?;
        let phi = model.phi_from(&beta, &eval);
        let residue = model.residue_from(&eval);
        let check = Point { beta, eval, phi };
        Ok(AcceleratedSinkhorn {
            state: AccelState {
                current: check.clone(),
                check,
                tilde: DualPotentials::zeros(inst.m(), inst.n()),
                theta: T::one(),
                axis: 0,
                t: 0,
                current_residue: residue,
                last: None,
                trace: Vec::new(),
            },
            model,
        })
    }

    pub fn model(&self) -> &EntropicModel<'a, T> {
        &self.model
    }

    pub fn state(&self) -> &AccelState<T> {
        &self.state
    }

    fn point(&self, beta: DualPotentials<T>, eval: PlanEval<T>) -> Point<T> {
        let phi = self.model.phi_from(&beta, &eval);
        Point { beta, eval, phi }
    }

    /// One full iteration (steps 1 to 9).
    pub fn step(&mut self) -> Result<()> {
        let model = &self.model;
        let st = &self.state;
        let m = T::lit(model.instance().m() as f64);
        let theta = st.theta;

        let bar = st.check.beta.combine(T::one() - theta, &st.tilde, theta);
        let grad = model.gradient_from(&model.evaluate(&bar)?);
        let tilde_next = st.tilde.combine(T::one(), &grad, -T::one() / (m * theta));
        let step = tilde_next.combine(T::one(), &st.tilde, -T::one());
        let grave = bar.combine(T::one(), &step, theta);

        let grave_eval = model.evaluate(&grave)?;
        let phi_grave = model.phi_from(&grave, &grave_eval);
        let hat_beta = model.coordinate_update(&grave, &grave_eval, st.axis);
        let hat_eval = model.evaluate_collapsing(&hat_beta, st.axis)?;
        let hat = self.point(hat_beta, hat_eval);

        let kept_check = st.check.phi <= hat.phi;
        let current = if kept_check { st.check.clone() } else { hat.clone() };
        let current_residue = model.residue_from(&current.eval);

        let rho: Vec<T> = model.rho_per_axis(&current.eval);
        let k = argmax_first(&rho);
        let check_beta = model.coordinate_update(&current.beta, &current.eval, k);
        let check_eval = model.evaluate_collapsing(&check_beta, k)?;
        let check = self.point(check_beta, check_eval);

        let entry = TraceEntry {
            t: st.t,
            residue: current_residue.total.to_f64_lossy(),
            phi: current.phi.to_f64_lossy(),
            rho: rho.iter().map(|x| x.to_f64_lossy()).collect(),
            axis: Some(k),
            phi_next: Some(check.phi.to_f64_lossy()),
            theta: Some(theta.to_f64_lossy()),
        };
        let record = StepRecord {
            bar,
            grave,
            phi_grave,
            phi_hat: hat.phi,
            hat: hat.beta,
            kept_check,
        };

        let st = &mut self.state;
        st.trace.push(entry);
        st.tilde = tilde_next;
        st.check = check;
        st.current = current;
        st.current_residue = current_residue;
        st.axis = k;
        st.theta = next_theta(theta);
        st.t += 1;
        st.last = Some(record);
        Ok(())
    }

    /// Iterate until the monotone-search iterate has `E_t <= eps_prime` or
    /// `max_iter` iterations were taken. `None` uses the guaranteed bound
    /// (with the `m^2` factor) plus a slack of 10.
    pub fn run(mut self, eps_prime: T, max_iter: Option<usize>) -> Result<SolveOutcome<T>> {
        if !(eps_prime > T::zero()) {
            return Err(MotError::Domain(format!("eps' must be positive, got {eps_prime}")));
        }
        let inst = self.model.instance();
        let b = bounds(inst, self.model.eta())?;
        let eps = eps_prime.to_f64_lossy();
        let bound = b.accel_iteration_bound(inst.n(), inst.m(), eps);
        let stated = b.accel_iteration_bound_stated(inst.n(), inst.m(), eps);
        let max_iter = max_iter.unwrap_or_else(|| default_max_iter(bound));
        let initial_residue = self.state.current_residue.total.to_f64_lossy();
        let converged = loop {
            if self.state.current_residue.total <= eps_prime {
                break true;
            }
            if self.state.t >= max_iter {
                break false;
            }
            self.step()?;
        };
        let st = self.state;
        let report: SolveReport = report(
            SolverKind::Accelerated,
            &b,
            eps,
            max_iter,
            st.t,
            converged,
            initial_residue,
            &st.current_residue,
            st.current.phi,
            bound,
            Some(stated),
            st.trace,
        );
        Ok(SolveOutcome {
            beta: st.current.beta,
            report,
        })
    }
}

/// Accelerated solve to `E_t <= eps_prime`; running out of iterations is an
/// error carrying the full report.
pub fn accelerated_multi_sinkhorn<T: Real>(
    inst: &MotInstance<T>,
    eta: T,
    eps_prime: T,
    max_iter: Option<usize>,
) -> Result<(DualPotentials<T>, SolveReport)> {
    let out = AcceleratedSinkhorn::new(inst, eta)?.run(eps_prime, max_iter)?;
    if out.report.converged {
        Ok((out.beta, out.report))
    } else {
        Err(MotError::NonConvergence {
            max_iter: out.report.max_iter,
            last_residue: out.report.final_residue,
            report: Box::new(out.report),
        })
    }
}
