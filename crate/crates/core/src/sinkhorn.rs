//! Greedy multimarginal Sinkhorn: exact block-coordinate minimization of
//! `phi`, always on the block whose marginal is furthest (in `rho`) from its
//! target.

use crate::error::{MotError, Result};
use crate::regmot::{argmax_first, bounds, DualPotentials, EntropicModel, MotInstance, PlanEval, Residue, SolverBounds};
use crate::report::{SolveReport, SolverKind, TraceEntry};
use crate::scalar::Real;

/// Potentials of the current iterate plus everything derived from them.
#[derive(Clone, Debug)]
pub struct SinkhornState<T> {
    pub beta: DualPotentials<T>,
    pub t: usize,
    pub last_axis: Option<usize>,
    pub trace: Vec<TraceEntry>,
    eval: PlanEval<T>,
    residue: Residue<T>,
    phi: T,
}

impl<T: Real> SinkhornState<T> {
    pub fn eval(&self) -> &PlanEval<T> {
        &self.eval
    }

    pub fn residue(&self) -> &Residue<T> {
        &self.residue
    }

    pub fn phi(&self) -> T {
        self.phi
    }
}

/// Output of a run that may or may not have met its residue target.
#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub beta: DualPotentials<T>,
    pub report: SolveReport,
}

pub(crate) fn require_positive_marginals<T: Real>(inst: &MotInstance<T>) -> Result<()> {
    if inst.min_marginal_entry() > T::zero() {
        Ok(())
    } else {
        Err(MotError::Domain(
            "solvers need strictly positive marginals; smooth them first".into(),
        ))
    }
}

/// `beta = 0` shifted on block 0 so that `||B(beta)||_1 = 1`.
pub(crate) fn normalized_start<T: Real>(model: &EntropicModel<'_, T>) -> Result<(DualPotentials<T>, PlanEval<T>)> {
    let inst = model.instance();
    let mut beta = DualPotentials::zeros(inst.m(), inst.n());
    let z = model.evaluate(&beta)?.log_norm;
    beta.shift_block(0, -z);
    let eval = model.evaluate(&beta)?;
    Ok((beta, eval))
}

pub(crate) fn default_max_iter(bound: f64) -> usize {
    if bound.is_finite() && bound < 1e12 {
        bound.ceil() as usize + 10
    } else {
        usize::MAX
    }
}

pub struct MultiSinkhorn<'a, T> {
    model: EntropicModel<'a, T>,
    state: SinkhornState<T>,
}

impl<'a, T: Real> MultiSinkhorn<'a, T> {
    pub fn new(inst: &'a MotInstance<T>, eta: T) -> Result<Self> {
        require_positive_marginals(inst)?;
        let model = EntropicModel::new(inst, eta)?;
        let (beta, eval) = normalized_start(&model)?;
        let residue = model.residue_from(&eval);
        let phi = model.phi_from(&beta, &eval);
        Ok(MultiSinkhorn {
            model,
            state: SinkhornState {
                beta,
                t: 0,
                last_axis: None,
                trace: Vec::new(),
                eval,
                residue,
                phi,
            },
        })
    }

    pub fn model(&self) -> &EntropicModel<'a, T> {
        &self.model
    }

    pub fn state(&self) -> &SinkhornState<T> {
        &self.state
    }

    pub fn greedy_axis(&self) -> usize {
        argmax_first(&self.model.rho_per_axis(&self.state.eval))
    }

    fn entry(&self) -> TraceEntry {
        TraceEntry {
            t: self.state.t,
            residue: self.state.residue.total.to_f64_lossy(),
            phi: self.state.phi.to_f64_lossy(),
            rho: self
                .model
                .rho_per_axis(&self.state.eval)
                .into_iter()
                .map(Real::to_f64_lossy)
                .collect(),
            axis: None,
            phi_next: None,
            theta: None,
        }
    }

    /// One greedy exact coordinate update.
    pub fn step(&mut self) -> Result<()> {
        let mut entry = self.entry();
        let k = self.greedy_axis();
        let beta = self.model.coordinate_update(&self.state.beta, &self.state.eval, k);
        let eval = self.model.evaluate_collapsing(&beta, k)?;
        let phi = self.model.phi_from(&beta, &eval);
        entry.axis = Some(k);
        entry.phi_next = Some(phi.to_f64_lossy());
        let st = &mut self.state;
        st.trace.push(entry);
        st.residue = self.model.residue_from(&eval);
        st.beta = beta;
        st.eval = eval;
        st.phi = phi;
        st.last_axis = Some(k);
        st.t += 1;
        Ok(())
    }

    /// Iterate until `E_t <= eps_prime` or `max_iter` updates have been made.
    /// `None` uses the guaranteed bound plus a slack of 10.
    pub fn run(mut self, eps_prime: T, max_iter: Option<usize>) -> Result<SolveOutcome<T>> {
        if !(eps_prime > T::zero()) {
            return Err(MotError::Domain(format!("eps' must be positive, got {eps_prime}")));
        }
        let inst = self.model.instance();
        let b = bounds(inst, self.model.eta())?;
        let eps = eps_prime.to_f64_lossy();
        let bound = b.greedy_iteration_bound(inst.m(), eps);
        let max_iter = max_iter.unwrap_or_else(|| default_max_iter(bound));
        let initial_residue = self.state.residue.total.to_f64_lossy();
        let converged = loop {
            if self.state.residue.total <= eps_prime {
                break true;
            }
            if self.state.t >= max_iter {
                break false;
            }
            self.step()?;
        };
        let final_entry = self.entry();
        let st = self.state;
        let mut trace = st.trace;
        trace.push(final_entry);
        Ok(SolveOutcome {
            report: report(SolverKind::Greedy, &b, eps, max_iter, st.t, converged, initial_residue, &st.residue, st.phi, bound, None, trace),
            beta: st.beta,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn report<T: Real>(
    solver: SolverKind,
    b: &SolverBounds,
    eps_prime: f64,
    max_iter: usize,
    iterations: usize,
    converged: bool,
    initial_residue: f64,
    residue: &Residue<T>,
    phi: T,
    iteration_bound: f64,
    iteration_bound_stated: Option<f64>,
    trace: Vec<TraceEntry>,
) -> SolveReport {
    SolveReport {
        solver,
        eta: b.eta,
        eps_prime,
        max_iter,
        iterations,
        converged,
        initial_residue,
        final_residue: residue.total.to_f64_lossy(),
        final_phi: phi.to_f64_lossy(),
        bounds: *b,
        iteration_bound,
        iteration_bound_stated,
        trace,
    }
}

/// Greedy block for `beta`: `argmax_k rho(r_k, r_k(B)/||B||_1)`, ties to the
/// smallest index.
pub fn greedy_axis<T: Real>(inst: &MotInstance<T>, eta: T, beta: &DualPotentials<T>) -> Result<usize> {
    require_positive_marginals(inst)?;
    let model = EntropicModel::new(inst, eta)?;
    let eval = model.evaluate(beta)?;
    Ok(argmax_first(&model.rho_per_axis(&eval)))
}

/// Solve to `E_t <= eps_prime`; failure to do so within `max_iter` is an error
/// carrying the full report.
pub fn multi_sinkhorn<T: Real>(
    inst: &MotInstance<T>,
    eta: T,
    eps_prime: T,
    max_iter: Option<usize>,
) -> Result<(DualPotentials<T>, SolveReport)> {
    let out = MultiSinkhorn::new(inst, eta)?.run(eps_prime, max_iter)?;
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
