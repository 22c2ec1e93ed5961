//! Multimarginal optimal transport: entropic dual, greedy and accelerated
//! multimarginal Sinkhorn, rounding onto the transportation polytope, an
//! exact simplex baseline, a total-unimodularity lab and synthetic-image
//! benchmarks.
//!
//! Numerical code is generic over [`Real`]; the aliases below fix the scalar
//! for the common cases.

pub mod accel;
pub mod bench;
pub mod driver;
pub mod error;
pub mod hardness;
pub mod io;
pub mod oracle;
pub mod regmot;
pub mod report;
pub mod rounding;
pub mod scalar;
pub mod sinkhorn;
pub mod tensor;

pub use accel::{accelerated_multi_sinkhorn, next_theta, AcceleratedSinkhorn};
pub use driver::{approx_mot, ApproxConfig, ApproxResult, ResolvedParams, RoundTarget};
pub use error::{MotError, Result};
pub use regmot::{bounds, grad_phi, phi, residue, rho, DualPotentials, EntropicModel, MotInstance, SolverBounds};
pub use report::{SolveReport, SolverKind, TraceEntry};
pub use rounding::{round, RoundingReport};
pub use scalar::{LpScalar, Real};
pub use sinkhorn::{greedy_axis, multi_sinkhorn, MultiSinkhorn, SolveOutcome};
pub use tensor::{DenseTensor, Shape};

pub type Tensor64 = DenseTensor<f64>;
pub type Tensor32 = DenseTensor<f32>;
pub type Instance64 = MotInstance<f64>;
pub type Instance32 = MotInstance<f32>;
pub type Potentials64 = DualPotentials<f64>;
pub type Potentials32 = DualPotentials<f32>;
pub type ApproxResult64 = ApproxResult<f64>;
pub type ExactLp = oracle::StandardFormLp<num_rational::BigRational>;
