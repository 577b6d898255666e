//! Uniform grids on the unit interval/square and second-order finite
//! differences for `D = Σ a_ij ∂_ij + Σ b_i ∂_i + c` with Dirichlet data
//! folded into a boundary-lift vector.
//!
//! Grid layout: the full grid has `n + 2` nodes per axis, `x_k = k * dx` with
//! `dx = 1 / (n + 1)`. Full index `i + (n + 2) * j`; interior index
//! `(i - 1) + n * (j - 1)` for `1 <= i, j <= n`. Only interior values are ever
//! stored in a [`Field`].
//!
//! Boundary nodes are ordered as follows (this is the layout of every
//! boundary vector in the crate):
//! * 1D: `x = 0`, then `x = 1`;
//! * 2D: bottom edge `y = 0` for `i = 0..=n+1`, top edge `y = 1` for
//!   `i = 0..=n+1`, left edge `x = 0` for `j = 1..=n`, right edge `x = 1` for
//!   `j = 1..=n`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex;

use crate::error::{Result, SplitError};
use crate::scalar::{creal, Real};
use crate::sparse::{BandedLu, CsrMatrix};

/// Real-valued function of the node coordinates (slice of length `dim`).
pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type TensorFn<T> = Arc<dyn Fn(&[T]) -> [[T; 2]; 2] + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(&[T]) -> [T; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh<T> {
    dim: usize,
    n: usize,
    dx: T,
}

impl<T: Real> Mesh<T> {
    /// Mesh with `n` interior nodes per axis.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(SplitError::InvalidMesh(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 2 {
            return Err(SplitError::InvalidMesh(format!(
                "need at least 2 interior nodes per axis, got {n}"
            )));
        }
        Ok(Self {
            dim,
            n,
            dx: T::one() / T::from_usize_lossy(n + 1),
        })
    }

    /// Mesh whose spacing is `dx`; `1/dx` must be an integer.
    pub fn with_spacing(dim: usize, dx: T) -> Result<Self> {
        let cells = (T::one() / dx).round();
        let rel = ((T::one() / dx - cells) / cells).abs();
        if !(dx > T::zero()) || rel > T::lit(1e-9) {
            return Err(SplitError::InvalidMesh(format!(
                "1/dx must be an integer, got dx = {dx}"
            )));
        }
        let cells = cells.to_usize().unwrap_or(0);
        Self::new(dim, cells.saturating_sub(1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes per axis of the full grid.
    pub fn full_side(&self) -> usize {
        self.n + 2
    }

    pub fn full_len(&self) -> usize {
        self.full_side().pow(self.dim as u32)
    }

    pub fn boundary_len(&self) -> usize {
        self.full_len() - self.len()
    }

    /// Flat interior index of the interior multi-index `(i, j)`, zero based.
    pub fn interior_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        match self.dim {
            1 => idx[0],
            _ => idx[0] + self.n * idx[1],
        }
    }

    /// Full-grid multi-index `[i, j]` of a full flat index (`j = 0` in 1D).
    pub fn full_multi(&self, full: usize) -> [usize; 2] {
        let side = self.full_side();
        match self.dim {
            1 => [full, 0],
            _ => [full % side, full / side],
        }
    }

    pub fn full_flat(&self, i: usize, j: usize) -> usize {
        match self.dim {
            1 => i,
            _ => i + self.full_side() * j,
        }
    }

    pub fn interior_to_full(&self, k: usize) -> usize {
        match self.dim {
            1 => k + 1,
            _ => {
                let (i, j) = (k % self.n, k / self.n);
                self.full_flat(i + 1, j + 1)
            }
        }
    }

    pub fn full_to_interior(&self, full: usize) -> Option<usize> {
        let [i, j] = self.full_multi(full);
        let inside = |k: usize| (1..=self.n).contains(&k);
        match self.dim {
            1 => inside(i).then(|| i - 1),
            _ => (inside(i) && inside(j)).then(|| (i - 1) + self.n * (j - 1)),
        }
    }

    /// Position of a full-grid node in the boundary ordering.
    pub fn boundary_position(&self, full: usize) -> Option<usize> {
        let [i, j] = self.full_multi(full);
        let last = self.n + 1;
        match self.dim {
            1 => match i {
                0 => Some(0),
                k if k == last => Some(1),
                _ => None,
            },
            _ => {
                let side = self.full_side();
                if j == 0 {
                    Some(i)
                } else if j == last {
                    Some(side + i)
                } else if i == 0 {
                    Some(2 * side + (j - 1))
                } else if i == last {
                    Some(2 * side + self.n + (j - 1))
                } else {
                    None
                }
            }
        }
    }

    /// Full-grid indices of the boundary nodes, in boundary ordering.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let last = self.n + 1;
        match self.dim {
            1 => vec![0, last],
            _ => {
                let mut nodes = Vec::with_capacity(self.boundary_len());
                nodes.extend((0..=last).map(|i| self.full_flat(i, 0)));
                nodes.extend((0..=last).map(|i| self.full_flat(i, last)));
                nodes.extend((1..=self.n).map(|j| self.full_flat(0, j)));
                nodes.extend((1..=self.n).map(|j| self.full_flat(last, j)));
                nodes
            }
        }
    }

    /// Coordinates of a full-grid node; only the first `dim` entries are used.
    pub fn full_coords(&self, full: usize) -> [T; 2] {
        let [i, j] = self.full_multi(full);
        [
            T::from_usize_lossy(i) * self.dx,
            T::from_usize_lossy(j) * self.dx,
        ]
    }

    pub fn interior_coords(&self, k: usize) -> [T; 2] {
        self.full_coords(self.interior_to_full(k))
    }

    /// Number of cells between a full-grid node and the nearest boundary node.
    pub fn cells_to_boundary(&self, full: usize) -> usize {
        let [i, j] = self.full_multi(full);
        let last = self.n + 1;
        let di = i.min(last - i);
        match self.dim {
            1 => di,
            _ => di.min(j.min(last - j)),
        }
    }

    /// Samples `g` at every interior node.
    pub fn sample(&self, g: impl Fn(&[T]) -> T) -> Vec<T> {
        (0..self.len())
            .map(|k| g(&self.interior_coords(k)[..self.dim]))
            .collect()
    }

    /// Samples `g` at every full-grid node.
    pub fn sample_full(&self, g: impl Fn(&[T]) -> T) -> Vec<T> {
        (0..self.full_len())
            .map(|k| g(&self.full_coords(k)[..self.dim]))
            .collect()
    }

    /// Combines interior and boundary values into a full-grid vector.
    pub fn embed<V: Copy + Default>(&self, interior: &[V], boundary: &[V]) -> Vec<V> {
        assert_eq!(interior.len(), self.len());
        assert_eq!(boundary.len(), self.boundary_len());
        let mut full = vec![V::default(); self.full_len()];
        for (k, &v) in interior.iter().enumerate() {
            full[self.interior_to_full(k)] = v;
        }
        for (node, &v) in self.boundary_nodes().into_iter().zip(boundary) {
            full[node] = v;
        }
        full
    }
}

/// `g` sampled at the boundary nodes, in boundary ordering.
pub fn boundary_trace<T: Real>(mesh: &Mesh<T>, g: impl Fn(&[T]) -> T) -> Vec<T> {
    mesh.boundary_nodes()
        .into_iter()
        .map(|node| g(&mesh.full_coords(node)[..mesh.dim()]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    /// Reserved: no discretization is provided.
    Neumann,
    /// Reserved: no discretization is provided.
    Robin,
}

/// Boundary operator `B` and its (time-independent) data `b`.
#[derive(Clone)]
pub struct BoundarySpec<T> {
    pub kind: BoundaryKind,
    pub value: ScalarFn<T>,
}

impl<T: Real> BoundarySpec<T> {
    pub fn dirichlet(value: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            value: Arc::new(value),
        }
    }

    pub fn homogeneous() -> Self {
        Self::dirichlet(|_| T::zero())
    }

    pub fn eval(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    /// Same kind, data multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let value = Arc::clone(&self.value);
        Self {
            kind: self.kind,
            value: Arc::new(move |x| factor * value(x)),
        }
    }
}

impl<T> fmt::Debug for BoundarySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundarySpec")
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// Coefficients of `D`; all fields are evaluated at grid nodes.
#[derive(Clone)]
pub struct DiffusionCoefficients<T> {
    pub diffusion: TensorFn<T>,
    pub drift: VectorFn<T>,
    pub reaction: ScalarFn<T>,
}

impl<T: Real> DiffusionCoefficients<T> {
    pub fn laplacian() -> Self {
        Self {
            diffusion: Arc::new(|_| [[T::one(), T::zero()], [T::zero(), T::one()]]),
            drift: Arc::new(|_| [T::zero(); 2]),
            reaction: Arc::new(|_| T::zero()),
        }
    }

    /// Smallest eigenvalue of the diffusion matrix at `x`, or an error if it
    /// is not symmetric.
    fn min_eigenvalue(&self, dim: usize, x: &[T]) -> std::result::Result<T, String> {
        let a = (self.diffusion)(x);
        if dim == 1 {
            return Ok(a[0][0]);
        }
        let tol = T::epsilon() * T::lit(16.0) * (a[0][1].abs() + a[1][0].abs() + T::one());
        if (a[0][1] - a[1][0]).abs() > tol {
            return Err(format!("diffusion matrix not symmetric at {x:?}"));
        }
        let mean = (a[0][0] + a[1][1]) / T::lit(2.0);
        let half_gap = ((a[0][0] - a[1][1]) / T::lit(2.0)).hypot(a[0][1]);
        Ok(mean - half_gap)
    }
}

impl<T> fmt::Debug for DiffusionCoefficients<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionCoefficients").finish_non_exhaustive()
    }
}

/// First-derivative weights along one axis at grid position `k` of `m` nodes:
/// centered inside, second-order one-sided at the ends.
fn d1_weights<T: Real>(k: usize, m: usize, h: T) -> Vec<(usize, T)> {
    let two_h = T::lit(2.0) * h;
    if k == 0 {
        vec![
            (0, T::lit(-3.0) / two_h),
            (1, T::lit(4.0) / two_h),
            (2, T::lit(-1.0) / two_h),
        ]
    } else if k == m - 1 {
        vec![
            (k, T::lit(3.0) / two_h),
            (k - 1, T::lit(-4.0) / two_h),
            (k - 2, T::lit(1.0) / two_h),
        ]
    } else {
        vec![(k - 1, -T::one() / two_h), (k + 1, T::one() / two_h)]
    }
}

/// Second-derivative weights, same convention as [`d1_weights`].
fn d2_weights<T: Real>(k: usize, m: usize, h: T) -> Vec<(usize, T)> {
    let h2 = h * h;
    if k == 0 {
        vec![
            (0, T::lit(2.0) / h2),
            (1, T::lit(-5.0) / h2),
            (2, T::lit(4.0) / h2),
            (3, T::lit(-1.0) / h2),
        ]
    } else if k == m - 1 {
        vec![
            (k, T::lit(2.0) / h2),
            (k - 1, T::lit(-5.0) / h2),
            (k - 2, T::lit(4.0) / h2),
            (k - 3, T::lit(-1.0) / h2),
        ]
    } else {
        vec![
            (k - 1, T::one() / h2),
            (k, T::lit(-2.0) / h2),
            (k + 1, T::one() / h2),
        ]
    }
}

/// Finite-difference stencil of `D` at a full-grid node as
/// `(full index, weight)` pairs. Interior nodes get centered differences;
/// boundary nodes get second-order one-sided differences normal to the
/// boundary.
fn stencil_at<T: Real>(
    mesh: &Mesh<T>,
    coeffs: &DiffusionCoefficients<T>,
    full: usize,
) -> Vec<(usize, T)> {
    let m = mesh.full_side();
    let h = mesh.dx();
    let pos = mesh.full_multi(full);
    let x = mesh.full_coords(full);
    let x = &x[..mesh.dim()];
    let a = (coeffs.diffusion)(x);
    let b = (coeffs.drift)(x);
    let c = (coeffs.reaction)(x);

    let along = |axis: usize, k: usize| {
        let mut p = pos;
        p[axis] = k;
        mesh.full_flat(p[0], p[1])
    };

    let mut out: Vec<(usize, T)> = vec![(full, c)];
    for axis in 0..mesh.dim() {
        if a[axis][axis] != T::zero() {
            out.extend(
                d2_weights(pos[axis], m, h)
                    .into_iter()
                    .map(|(k, w)| (along(axis, k), a[axis][axis] * w)),
            );
        }
        if b[axis] != T::zero() {
            out.extend(
                d1_weights(pos[axis], m, h)
                    .into_iter()
                    .map(|(k, w)| (along(axis, k), b[axis] * w)),
            );
        }
    }
    if mesh.dim() == 2 {
        let mixed = a[0][1] + a[1][0];
        if mixed != T::zero() {
            for (kx, wx) in d1_weights(pos[0], m, h) {
                for (ky, wy) in d1_weights(pos[1], m, h) {
                    out.push((mesh.full_flat(kx, ky), mixed * wx * wy));
                }
            }
        }
    }
    out.sort_by_key(|&(k, _)| k);
    out.dedup_by(|next, acc| {
        if next.0 == acc.0 {
            acc.1 += next.1;
            true
        } else {
            false
        }
    });
    out.retain(|&(_, w)| w != T::zero());
    out
}

/// Sparse interior matrix `L` and boundary-lift vector `g_b` realizing `D`
/// with folded Dirichlet data: `(D u)|interior ≈ L u + g_b`.
pub struct DiscreteOperator<T> {
    mesh: Mesh<T>,
    coeffs: DiffusionCoefficients<T>,
    matrix: CsrMatrix<T>,
    /// Maps boundary values to their contribution at interior rows.
    fold: CsrMatrix<T>,
    trace: Vec<T>,
    lift: Vec<T>,
    elliptic: OnceLock<std::result::Result<BandedLu<T>, SplitError>>,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn fold_matrix(&self) -> &CsrMatrix<T> {
        &self.fold
    }

    /// Boundary-lift vector `g_b`.
    pub fn boundary_lift(&self) -> &[T] {
        &self.lift
    }

    /// Dirichlet data sampled at the boundary nodes.
    pub fn boundary_values(&self) -> &[T] {
        &self.trace
    }

    pub fn coefficients(&self) -> &DiffusionCoefficients<T> {
        &self.coeffs
    }

    /// `L v`
    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matrix.mul_complex(v)
    }

    /// `L v + g_b`
    pub fn apply_affine(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = self.apply(v);
        for (o, g) in out.iter_mut().zip(&self.lift) {
            *o += *g;
        }
        out
    }

    /// Interior contribution of arbitrary boundary values.
    pub fn fold_boundary(&self, boundary: &[Complex<T>]) -> Vec<Complex<T>> {
        self.fold.mul_complex(boundary)
    }

    /// Full-grid representation of an interior state carrying the Dirichlet
    /// data on the boundary.
    pub fn embed_state(&self, interior: &[Complex<T>]) -> Vec<Complex<T>> {
        let boundary: Vec<_> = self.trace.iter().map(|&b| creal(b)).collect();
        self.mesh.embed(interior, &boundary)
    }

    /// Evaluates `D` at the boundary nodes of a full-grid function with
    /// second-order one-sided differences.
    pub fn eval_on_boundary(&self, full: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(full.len(), self.mesh.full_len());
        self.mesh
            .boundary_nodes()
            .into_iter()
            .map(|node| {
                stencil_at(&self.mesh, &self.coeffs, node)
                    .into_iter()
                    .fold(creal(T::zero()), |acc, (k, w)| acc + full[k] * w)
            })
            .collect()
    }

    /// Evaluates `D` at every full-grid node (centered inside, one-sided on
    /// the boundary).
    pub fn eval_full(&self, full: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(full.len(), self.mesh.full_len());
        (0..self.mesh.full_len())
            .map(|node| {
                stencil_at(&self.mesh, &self.coeffs, node)
                    .into_iter()
                    .fold(creal(T::zero()), |acc, (k, w)| acc + full[k] * w)
            })
            .collect()
    }

    /// Banded LU of `L`, computed on first use and shared afterwards.
    pub fn elliptic_factor(&self) -> Result<&BandedLu<T>> {
        self.elliptic
            .get_or_init(|| BandedLu::factor(&self.matrix))
            .as_ref()
            .map_err(Clone::clone)
    }
}

impl<T: Real> fmt::Debug for DiscreteOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("mesh", &self.mesh)
            .field("nnz", &self.matrix.nnz())
            .finish_non_exhaustive()
    }
}

/// Assembles `(L, g_b)` for `D` on `mesh` with Dirichlet data `bc`.
pub fn assemble_operator<T: Real>(
    mesh: &Mesh<T>,
    coeffs: &DiffusionCoefficients<T>,
    bc: &BoundarySpec<T>,
) -> Result<DiscreteOperator<T>> {
    if bc.kind != BoundaryKind::Dirichlet {
        return Err(SplitError::UnsupportedBoundary(format!(
            "{:?} boundary conditions are not discretized",
            bc.kind
        )));
    }
    for full in 0..mesh.full_len() {
        let x = mesh.full_coords(full);
        let x = &x[..mesh.dim()];
        let min_eig = coeffs
            .min_eigenvalue(mesh.dim(), x)
            .map_err(SplitError::Config)?;
        if !(min_eig > T::zero()) {
            return Err(SplitError::NonElliptic {
                min_eigenvalue: min_eig.to_f64().unwrap_or(f64::NAN),
                location: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
    }

    let n = mesh.len();
    let mut interior = Vec::with_capacity(n * 5);
    let mut folded = Vec::new();
    for row in 0..n {
        let full = mesh.interior_to_full(row);
        for (node, w) in stencil_at(mesh, coeffs, full) {
            if let Some(col) = mesh.full_to_interior(node) {
                interior.push((row, col, w));
            } else {
                let pos = mesh
                    .boundary_position(node)
                    .expect("non-interior node lies on the boundary");
                folded.push((row, pos, w));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, n, &interior);
    let fold = CsrMatrix::from_triplets(n, mesh.boundary_len(), &folded);
    let trace = boundary_trace(mesh, |x| bc.eval(x));
    let lift = fold.mul_real(&trace);
    Ok(DiscreteOperator {
        mesh: *mesh,
        coeffs: coeffs.clone(),
        matrix,
        fold,
        trace,
        lift,
        elliptic: OnceLock::new(),
    })
}

/// Complex grid function on the interior nodes of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    mesh: Mesh<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> Field<T> {
    pub fn new(mesh: Mesh<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(SplitError::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh<T>) -> Self {
        Self {
            values: vec![creal(T::zero()); mesh.len()],
            mesh,
        }
    }

    pub fn from_real(mesh: Mesh<T>, values: &[T]) -> Result<Self> {
        Self::new(mesh, values.iter().map(|&v| creal(v)).collect())
    }

    /// Samples a real function at the interior nodes.
    pub fn from_fn(mesh: Mesh<T>, g: impl Fn(&[T]) -> T) -> Self {
        let values = mesh.sample(g).into_iter().map(creal).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same mesh, new values (length checked in debug builds).
    pub fn with_values(&self, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), self.mesh.len());
        Self {
            mesh: self.mesh,
            values,
        }
    }

    pub fn l2_norm(&self) -> T {
        l2_norm(self)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn conj(&self) -> Self {
        self.with_values(self.values.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.with_values(self.values.iter().map(|z| z * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!(self.len(), other.len(), "fields live on different meshes");
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        )
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> T {
        self.values.iter().map(|z| z.im.abs()).fold(T::zero(), T::max)
    }
}

/// Discrete L² norm `sqrt(dx^dim Σ |v_i|²)`.
pub fn l2_norm<T: Real>(v: &Field<T>) -> T {
    let weight = v.mesh().dx().powi(v.mesh().dim() as i32);
    (weight * v.values().iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())).sqrt()
}
