//! Splitting integrators with complex coefficients and boundary correctors
//! for semilinear parabolic problems `∂_t u = D u + f(u)` with Dirichlet data.
//!
//! The numerical core is generic over the real scalar ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix the scalar for the
//! common case.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod correctors;
pub mod dense;
pub mod error;
pub mod expm_krylov;
pub mod flows;
pub mod mesh_fd;
pub mod scalar;
pub mod schemes;
pub mod sparse;

pub use analysis::{estimate_order, ConvergenceReport, SpectralProblem};
pub use correctors::{build_corrector, solve_elliptic, CorrectorPair};
pub use error::{Result, SplitError};
pub use expm_krylov::{expmv, expmv_affine, ExpmvConfig};
pub use flows::{corrector_flow, diffusion_flow, source_flow, ComplexCoeffs, SourceTerm};
pub use mesh_fd::{
    assemble_operator, boundary_trace, l2_norm, BoundaryKind, BoundarySpec,
    DiffusionCoefficients, DiscreteOperator, Field, Mesh,
};
pub use scalar::{Cplx, Real};
pub use schemes::{integrate, SchemeId, SplitContext, StepStats};

pub type C64 = num_complex::Complex<f64>;
pub type Mesh64 = Mesh<f64>;
pub type Field64 = Field<f64>;
pub type DiscreteOperator64 = DiscreteOperator<f64>;
pub type SourceTerm64 = SourceTerm<f64>;
pub type SplitContext64 = SplitContext<f64>;
pub type CorrectorPair64 = CorrectorPair<f64>;

pub type C32 = num_complex::Complex<f32>;
pub type Mesh32 = Mesh<f32>;
pub type Field32 = Field<f32>;
pub type SplitContext32 = SplitContext<f32>;
