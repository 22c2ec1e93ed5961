//! Solver traces and their JSON/CSV serializations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::regmot::SolverBounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Greedy,
    Accelerated,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Greedy => "greedy",
            SolverKind::Accelerated => "accelerated",
        }
    }
}

/// One recorded iterate.
///
/// For the greedy solver entry `t` describes `beta^t`; `axis` is the block
/// updated to reach `beta^(t+1)` and `phi_next` its objective. For the
/// accelerated solver entry `t` describes the monotone-search output
/// `beta^t`, and `phi_next` is the objective after the greedy coordinate
/// step taken from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: usize,
    pub residue: f64,
    pub phi: f64,
    pub rho: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi_next: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub eta: f64,
    pub eps_prime: f64,
    pub max_iter: usize,
    /// Completed iterations when the run stopped.
    pub iterations: usize,
    pub converged: bool,
    /// Residue of the iterate before any update.
    pub initial_residue: f64,
    pub final_residue: f64,
    pub final_phi: f64,
    pub bounds: SolverBounds,
    /// Guaranteed iteration count for this run's parameters.
    pub iteration_bound: f64,
    /// Accelerated solver only: the bound written with a single `m`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iteration_bound_stated: Option<f64>,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn within_iteration_bound(&self) -> bool {
        self.iterations as f64 <= self.iteration_bound
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Trace as CSV with columns `t,E_t,phi,axis` (plus `theta` for the
    /// accelerated solver). Floats carry 17 significant digits; axes are
    /// 1-based, empty when no update was taken.
    pub fn trace_csv(&self) -> String {
        let with_theta = self.solver == SolverKind::Accelerated;
        let mut out = String::from("t,E_t,phi,axis");
        if with_theta {
            out.push_str(",theta");
        }
        out.push('\n');
        for e in &self.trace {
            let axis = e.axis.map(|k| (k + 1).to_string()).unwrap_or_default();
            write!(out, "{},{},{},{}", e.t, fmt_f64(e.residue), fmt_f64(e.phi), axis).unwrap();
            if with_theta {
                write!(out, ",{}", e.theta.map(fmt_f64).unwrap_or_default()).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, the precision needed to round-trip an f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
