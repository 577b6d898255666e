//! Exact flows of the sub-problems composed by the splitting schemes.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Result, SplitError};
use crate::expm_krylov::{expmv_affine, ExpmvConfig};
use crate::mesh_fd::{DiscreteOperator, Field, Mesh};
use crate::scalar::{cplx, creal, Real};

/// Nodewise exact flow `(t, u, x) -> φ_t(u)` of a scalar ODE `u' = f(u, x)`.
pub type NodeFlow<T> = Arc<dyn Fn(Complex<T>, Complex<T>, &[T]) -> Complex<T> + Send + Sync>;

/// Right-hand side `f` of the source sub-problem `∂_t u = f(u)`.
#[derive(Clone)]
pub enum SourceTerm<T> {
    /// `f` independent of time and of the solution. Values are kept on the
    /// full grid (boundary nodes included) since the correctors need the
    /// trace of `f` and of `D f`. `image` optionally holds `D f` on the full
    /// grid when it is known in closed form; otherwise the correctors fall
    /// back to one-sided differences.
    Independent {
        interior: Vec<T>,
        full: Vec<T>,
        image: Option<Vec<T>>,
    },
    /// `f(u) = M u (1 - u)`.
    Logistic { rate: T },
    /// Any source with a known nodewise exact flow. The flow must be exact
    /// (a group in `t`) for the splitting orders to hold.
    CustomExact(NodeFlow<T>),
}

impl<T: Real> SourceTerm<T> {
    /// Samples a solution-independent source on the full grid of `mesh`.
    pub fn independent(mesh: &Mesh<T>, f: impl Fn(&[T]) -> T) -> Self {
        Self::Independent {
            interior: mesh.sample(&f),
            full: mesh.sample_full(&f),
            image: None,
        }
    }

    /// As [`SourceTerm::independent`], with the closed form `df = D f` used
    /// for the boundary data of the corrector `r`.
    pub fn independent_with_image(
        mesh: &Mesh<T>,
        f: impl Fn(&[T]) -> T,
        df: impl Fn(&[T]) -> T,
    ) -> Self {
        Self::Independent {
            interior: mesh.sample(&f),
            full: mesh.sample_full(&f),
            image: Some(mesh.sample_full(&df)),
        }
    }

    /// Closed-form `D f` at the boundary nodes, if available.
    pub fn boundary_image(&self, mesh: &Mesh<T>) -> Option<Vec<Complex<T>>> {
        match self {
            Self::Independent {
                image: Some(image), ..
            } => Some(mesh.boundary_nodes().into_iter().map(|k| creal(image[k])).collect()),
            _ => None,
        }
    }

    pub fn logistic(rate: T) -> Result<Self> {
        if !(rate > T::zero()) {
            return Err(SplitError::Config(format!(
                "logistic rate must be positive, got {rate}"
            )));
        }
        Ok(Self::Logistic { rate })
    }

    pub fn is_independent(&self) -> bool {
        matches!(self, Self::Independent { .. })
    }

    /// `f ≡ 0`
    pub fn is_zero(&self) -> bool {
        match self {
            Self::Independent { full, .. } => full.iter().all(|&v| v == T::zero()),
            _ => false,
        }
    }

    /// Flow at one node. `full` is the node's full-grid index and `x` its
    /// coordinates.
    fn flow_node(
        &self,
        t: Complex<T>,
        u: Complex<T>,
        full: usize,
        x: &[T],
        growth: Complex<T>,
    ) -> std::result::Result<Complex<T>, T> {
        match self {
            Self::Independent { full: f, .. } => Ok(u + t * f[full]),
            Self::Logistic { .. } => {
                let den = creal(T::one()) + u * (growth - T::one());
                let magnitude = den.norm();
                if magnitude < T::lit(1e-12) {
                    return Err(magnitude);
                }
                Ok(u * growth / den)
            }
            Self::CustomExact(flow) => Ok(flow(t, u, x)),
        }
    }

    fn growth(&self, t: Complex<T>) -> Complex<T> {
        match self {
            Self::Logistic { rate } => (t * *rate).exp(),
            _ => creal(T::one()),
        }
    }

    /// Applies the flow over `t` to full-grid values.
    pub fn flow_full(
        &self,
        mesh: &Mesh<T>,
        t: Complex<T>,
        values: &[Complex<T>],
    ) -> Result<Vec<Complex<T>>> {
        if values.len() != mesh.full_len() {
            return Err(SplitError::DimensionMismatch {
                expected: mesh.full_len(),
                got: values.len(),
            });
        }
        let growth = self.growth(t);
        values
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                let x = mesh.full_coords(k);
                self.flow_node(t, u, k, &x[..mesh.dim()], growth)
                    .map_err(|m| singular(k, m))
            })
            .collect()
    }

    /// `(φ_t(w) - w) / t` on the full grid; exactly `f` for an independent
    /// source.
    pub fn increment_quotient(
        &self,
        mesh: &Mesh<T>,
        t: Complex<T>,
        values: &[Complex<T>],
    ) -> Result<Vec<Complex<T>>> {
        if let Self::Independent { full, .. } = self {
            return Ok(full.iter().map(|&v| creal(v)).collect());
        }
        let moved = self.flow_full(mesh, t, values)?;
        Ok(moved
            .iter()
            .zip(values)
            .map(|(&p, &w)| (p - w) / t)
            .collect())
    }
}

fn singular<T: Real>(node: usize, magnitude: T) -> SplitError {
    SplitError::SingularFlow {
        node,
        magnitude: magnitude.to_f64().unwrap_or(0.0),
    }
}

impl<T> fmt::Debug for SourceTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Independent { interior, .. } => f
                .debug_struct("Independent")
                .field("len", &interior.len())
                .finish(),
            Self::Logistic { .. } => f.write_str("Logistic"),
            Self::CustomExact(_) => f.write_str("CustomExact"),
        }
    }
}

/// Coefficients of the third-order compositions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCoeffs<T> {
    pub a: Complex<T>,
    pub abar: Complex<T>,
    pub c: T,
}

impl<T: Real> ComplexCoeffs<T> {
    /// `a = (1 - i/√3)/4`, `ā`, `c = 1/2`.
    pub fn standard() -> Self {
        let quarter = T::lit(0.25);
        let im = -quarter / T::lit(3.0).sqrt();
        Self {
            a: cplx(quarter, im),
            abar: cplx(quarter, -im),
            c: T::lit(0.5),
        }
    }

    /// Coefficients with the sign of `Im a` flipped (and `ā` left alone).
    /// Only useful to check that the verification suite notices.
    pub fn with_sign_error() -> Self {
        let mut k = Self::standard();
        k.a = k.a.conj();
        k
    }
}

impl<T: Real> Default for ComplexCoeffs<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// `φ^f_t(u)` at the interior nodes.
pub fn source_flow<T: Real>(term: &SourceTerm<T>, t: Complex<T>, u: &Field<T>) -> Result<Field<T>> {
    let mesh = *u.mesh();
    if let SourceTerm::Independent { interior, .. } = term {
        if interior.len() != u.len() {
            return Err(SplitError::DimensionMismatch {
                expected: u.len(),
                got: interior.len(),
            });
        }
        return Ok(u.with_values(
            u.values()
                .iter()
                .zip(interior)
                .map(|(&v, &f)| v + t * f)
                .collect(),
        ));
    }
    let growth = term.growth(t);
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let full = mesh.interior_to_full(k);
            let x = mesh.full_coords(full);
            term.flow_node(t, v, full, &x[..mesh.dim()], growth)
                .map_err(|m| singular(k, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(u.with_values(values))
}

/// `φ^{-q}_t(u) = u - t q`
pub fn corrector_flow<T: Real>(q: &Field<T>, t: Complex<T>, u: &Field<T>) -> Field<T> {
    u.with_values(
        u.values()
            .iter()
            .zip(q.values())
            .map(|(&v, &qi)| v - t * qi)
            .collect(),
    )
}

/// Exact discrete flow of `u' = L u + g_b + q` over the complex time `t`.
pub fn diffusion_flow<T: Real>(
    op: &DiscreteOperator<T>,
    q: Option<&Field<T>>,
    t: Complex<T>,
    u: &Field<T>,
    cfg: &ExpmvConfig<T>,
) -> Result<Field<T>> {
    if !(t.re > T::zero()) && t != creal(T::zero()) {
        return Err(SplitError::BackwardDiffusion {
            re: t.re.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut g: Vec<Complex<T>> = op.boundary_lift().iter().map(|&v| creal(v)).collect();
    if let Some(q) = q {
        for (gi, &qi) in g.iter_mut().zip(q.values()) {
            *gi += qi;
        }
    }
    let w = expmv_affine(t, op.matrix(), &g, u.values(), cfg)?;
    Ok(u.with_values(w))
}
