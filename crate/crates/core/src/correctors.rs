//! Corrector functions `q`, `r` that push the intermediate states of the
//! splitting into the domain of the diffusion operator.
//!
//! For a block with entry state `ω` and substep `τ_j`, let
//! `Φ = (φ^f_{τ_j}(ω) - ω) / τ_j` on the full grid, where `ω` carries the
//! Dirichlet data on the boundary. Then
//!
//! * `r` solves `D r = 0` with trace `D Φ` (one-sided differences on the
//!   boundary),
//! * `q` solves `D q = r` with trace `Φ`.
//!
//! For a solution-independent source `Φ = f` and the pair does not depend on
//! the state, the step or the block; a closed-form `D f` replaces the
//! one-sided differences when the source provides one.

use num_complex::Complex;

use crate::error::{Result, SplitError};
use crate::flows::SourceTerm;
use crate::mesh_fd::{DiscreteOperator, Field};
use crate::scalar::{creal, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorPair<T> {
    pub q: Field<T>,
    pub r: Field<T>,
    /// Boundary values imposed on `q` and `r`, in boundary ordering.
    pub q_trace: Vec<Complex<T>>,
    pub r_trace: Vec<Complex<T>>,
    pub tau_j: Complex<T>,
    /// 1 or 2; 0 for pairs shared by both blocks.
    pub block: usize,
}

impl<T: Real> CorrectorPair<T> {
    pub fn is_zero(&self) -> bool {
        self.q.values().iter().all(|z| z.re == T::zero() && z.im == T::zero())
    }
}

/// Solves `L v + fold(boundary) = rhs`, i.e. `D v = rhs` in the interior with
/// trace `boundary`.
pub fn solve_elliptic<T: Real>(
    op: &DiscreteOperator<T>,
    rhs: &Field<T>,
    boundary: &[Complex<T>],
) -> Result<Field<T>> {
    let mesh = op.mesh();
    if boundary.len() != mesh.boundary_len() {
        return Err(SplitError::DimensionMismatch {
            expected: mesh.boundary_len(),
            got: boundary.len(),
        });
    }
    if rhs.len() != mesh.len() {
        return Err(SplitError::DimensionMismatch {
            expected: mesh.len(),
            got: rhs.len(),
        });
    }
    let lu = op.elliptic_factor()?;
    let folded = op.fold_boundary(boundary);
    let mut v: Vec<_> = rhs
        .values()
        .iter()
        .zip(&folded)
        .map(|(&b, &g)| b - g)
        .collect();
    lu.solve_in_place(&mut v);
    Field::new(*mesh, v)
}

/// Full-grid increment quotient `Φ` for the block entry state `omega`.
fn increment<T: Real>(
    term: &SourceTerm<T>,
    omega: &Field<T>,
    tau_j: Complex<T>,
    op: &DiscreteOperator<T>,
) -> Result<Vec<Complex<T>>> {
    if tau_j == creal(T::zero()) {
        return Err(SplitError::Config("corrector substep must be nonzero".into()));
    }
    let full = op.embed_state(omega.values());
    term.increment_quotient(op.mesh(), tau_j, &full)
}

fn boundary_values<T: Real>(op: &DiscreteOperator<T>, full: &[Complex<T>]) -> Vec<Complex<T>> {
    op.mesh().boundary_nodes().into_iter().map(|k| full[k]).collect()
}

/// Corrector pair of the third-order scheme for one block.
pub fn build_corrector<T: Real>(
    term: &SourceTerm<T>,
    omega: &Field<T>,
    tau_j: Complex<T>,
    op: &DiscreteOperator<T>,
    block: usize,
) -> Result<CorrectorPair<T>> {
    let phi = increment(term, omega, tau_j, op)?;
    let q_trace = boundary_values(op, &phi);
    let r_trace = term
        .boundary_image(op.mesh())
        .unwrap_or_else(|| op.eval_on_boundary(&phi));
    let mesh = *op.mesh();
    let r = solve_elliptic(op, &Field::zeros(mesh), &r_trace)?;
    let q = solve_elliptic(op, &r, &q_trace)?;
    Ok(CorrectorPair {
        q,
        r,
        q_trace,
        r_trace,
        tau_j,
        block,
    })
}

/// Projection corrector of the corrected Strang scheme: `D q = 0` with trace
/// `Φ`; `r` is zero.
pub fn build_projection_corrector<T: Real>(
    term: &SourceTerm<T>,
    omega: &Field<T>,
    tau_j: Complex<T>,
    op: &DiscreteOperator<T>,
) -> Result<CorrectorPair<T>> {
    let phi = increment(term, omega, tau_j, op)?;
    let q_trace = boundary_values(op, &phi);
    let mesh = *op.mesh();
    let q = solve_elliptic(op, &Field::zeros(mesh), &q_trace)?;
    Ok(CorrectorPair {
        q,
        r: Field::zeros(mesh),
        r_trace: vec![creal(T::zero()); mesh.boundary_len()],
        q_trace,
        tau_j,
        block: 0,
    })
}
