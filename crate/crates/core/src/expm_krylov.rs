//! Action of `exp(sL)` and of the affine flow `exp(sL)v + s φ1(sL) g` for a
//! real sparse `L` and a complex step `s`.
//!
//! Arnoldi runs on `L` itself (real matrix, complex vectors) and the step is
//! folded into the exponential of the small Hessenberg matrix. Substeps are
//! chosen adaptively with the local error estimate of Sidje's EXPOKIT; the
//! basis grows until that estimate meets the tolerance, so small steps use
//! small bases.

use num_complex::Complex;

use crate::dense::DenseMatrix;
use crate::error::{Result, SplitError};
use crate::scalar::{axpy, creal, dotc, norm2, Real};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpmvConfig<T> {
    /// Relative accuracy target, measured against the norm of the input.
    pub tol: T,
    /// Largest Arnoldi basis built in one substep.
    pub max_krylov_dim: usize,
    /// Upper bound on the number of substeps (time subdivisions).
    pub max_substeps: usize,
}

impl<T: Real> Default for ExpmvConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::default_expmv_tol(),
            max_krylov_dim: 100,
            max_substeps: 100_000,
        }
    }
}

impl<T: Real> ExpmvConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(SplitError::Config(format!(
                "expmv tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_krylov_dim < 2 {
            return Err(SplitError::Config(format!(
                "max_krylov_dim must be at least 2, got {}",
                self.max_krylov_dim
            )));
        }
        if self.max_substeps == 0 {
            return Err(SplitError::Config("max_substeps must be positive".into()));
        }
        Ok(())
    }
}

/// Linear map the Arnoldi process is run on.
trait KrylovOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]);
    fn norm_inf(&self) -> T;
}

struct Plain<'a, T>(&'a CsrMatrix<T>);

impl<T: Real> KrylovOperator<T> for Plain<'_, T> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        self.0.mul_complex_into(x, y);
    }

    fn norm_inf(&self) -> T {
        self.0.norm_inf()
    }
}

/// `[[L, g/η], [0, 0]]`: its exponential applied to `[v; η]` carries the
/// affine flow in the first `n` components.
struct Augmented<'a, T> {
    matrix: &'a CsrMatrix<T>,
    column: Vec<Complex<T>>,
}

impl<T: Real> KrylovOperator<T> for Augmented<'_, T> {
    fn dim(&self) -> usize {
        self.matrix.nrows() + 1
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let n = self.matrix.nrows();
        self.matrix.mul_complex_into(&x[..n], &mut y[..n]);
        let last = x[n];
        for (yi, gi) in y[..n].iter_mut().zip(&self.column) {
            *yi += *gi * last;
        }
        y[n] = creal(T::zero());
    }

    fn norm_inf(&self) -> T {
        let extra = self
            .column
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max);
        self.matrix.norm_inf() + extra
    }
}

/// Basis size the substep controller aims for.
const TARGET_DIM: usize = 40;

fn check_step<T: Real>(s: Complex<T>) -> Result<()> {
    if s.re < T::zero() {
        return Err(SplitError::BackwardDiffusion {
            re: s.re.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(SplitError::Config(format!("non-finite step {s}")));
    }
    Ok(())
}

/// `exp(sL) v`
pub fn expmv<T: Real>(
    s: Complex<T>,
    l: &CsrMatrix<T>,
    v: &[Complex<T>],
    cfg: &ExpmvConfig<T>,
) -> Result<Vec<Complex<T>>> {
    cfg.validate()?;
    check_step(s)?;
    if v.len() != l.nrows() {
        return Err(SplitError::DimensionMismatch {
            expected: l.nrows(),
            got: v.len(),
        });
    }
    if s == creal(T::zero()) {
        return Ok(v.to_vec());
    }
    krylov_exp(&Plain(l), s, v.to_vec(), cfg)
}

/// `exp(sL) v + s φ1(sL) g`, the exact solution at time `s` of
/// `u' = L u + g`, `u(0) = v`.
pub fn expmv_affine<T: Real>(
    s: Complex<T>,
    l: &CsrMatrix<T>,
    g: &[Complex<T>],
    v: &[Complex<T>],
    cfg: &ExpmvConfig<T>,
) -> Result<Vec<Complex<T>>> {
    cfg.validate()?;
    check_step(s)?;
    let n = l.nrows();
    for len in [g.len(), v.len()] {
        if len != n {
            return Err(SplitError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let g_norm = norm2(g);
    if g_norm == T::zero() {
        return expmv(s, l, v, cfg);
    }
    if s == creal(T::zero()) {
        return Ok(v.to_vec());
    }
    let rho = s.norm() * l.norm_inf();
    if rho <= T::lit(TAYLOR_RADIUS) {
        // first term s(Lv + g) formed directly, no augmentation needed
        let mut term = vec![creal(T::zero()); n];
        l.mul_complex_into(v, &mut term);
        for (t, gi) in term.iter_mut().zip(g) {
            *t = (*t + gi) * s;
        }
        let sum = v.iter().zip(&term).map(|(a, b)| a + b).collect();
        let scale = (norm2(v).powi(2) + (s.norm() * g_norm).powi(2)).sqrt();
        return Ok(taylor_tail(&Plain(l), s, sum, term, 1, rho, cfg.tol * scale));
    }
    // η = |s| ||g|| keeps the extra column of unit size after scaling by s.
    let eta = s.norm() * g_norm;
    let column = g.iter().map(|z| z / eta).collect();
    let mut start = v.to_vec();
    start.push(creal(eta));
    let mut out = krylov_exp(&Augmented { matrix: l, column }, s, start, cfg)?;
    out.truncate(n);
    Ok(out)
}

/// Below this value of `|s| ||L||_inf` the truncated Taylor series is used.
const TAYLOR_RADIUS: f64 = 2.0;

/// Sums the Taylor series of `exp(sA)` from the term of index `k`, given
/// the partial sum up to and including it.
///
/// With `v_k = (sA)^k w / k!` we have `||v_{k+1}||_inf <= rho/(k+1) ||v_k||_inf`
/// for `rho = |s| ||A||_inf`, so the tail is bounded by a geometric series.
/// The bound is driven below `abs_tol / sqrt(n)`, which covers the 2-norm,
/// and further down to round-off since the extra terms are cheap.
fn taylor_tail<T: Real, Op: KrylovOperator<T>>(
    op: &Op,
    s: Complex<T>,
    mut sum: Vec<Complex<T>>,
    mut term: Vec<Complex<T>>,
    mut k: usize,
    rho: T,
    abs_tol: T,
) -> Vec<Complex<T>> {
    let n = op.dim();
    let tail_tol = abs_tol / T::from_usize_lossy(n).sqrt();
    let inf_norm =
        |v: &[Complex<T>]| v.iter().map(|z| z.norm_sqr()).fold(T::zero(), T::max).sqrt();
    let tol = tail_tol.min(T::epsilon() * inf_norm(&sum));
    let mut next = vec![creal(T::zero()); n];
    loop {
        let q = rho / T::from_usize_lossy(k + 1);
        if (q < T::one() && inf_norm(&term) * q / (T::one() - q) <= tol) || k >= 200 {
            return sum;
        }
        k += 1;
        op.apply(&term, &mut next);
        let scale = s / T::from_usize_lossy(k);
        for ((t, x), acc) in term.iter_mut().zip(&next).zip(sum.iter_mut()) {
            *t = x * scale;
            *acc += *t;
        }
    }
}

/// Basis sizes at which the error estimate is evaluated.
fn checkpoints(m_max: usize) -> Vec<usize> {
    let mut points = Vec::new();
    let mut k = 4usize;
    while k < m_max {
        points.push(k);
        k = (k + 1).max(k * 3 / 2);
    }
    points.push(m_max);
    points
}

/// Exponential of the augmented Hessenberg matrix for a basis of size `k`,
/// together with the local error estimate.
fn small_exponential<T: Real>(
    h: &DenseMatrix<T>,
    k: usize,
    s: Complex<T>,
    t_step: T,
    beta: T,
    avnorm: T,
) -> (DenseMatrix<T>, T) {
    let mut hbar = DenseMatrix::zeros(k + 2);
    let scale = s * t_step;
    for i in 0..=k {
        for j in 0..k {
            hbar[(i, j)] = h[(i, j)] * scale;
        }
    }
    hbar[(k + 1, k)] = creal(t_step);
    let f = hbar.expm();
    let phi1 = beta * f[(k, 0)].norm();
    let phi2 = beta * f[(k + 1, 0)].norm() * avnorm * s.norm();
    let err = if phi1 > T::lit(10.0) * phi2 {
        phi2
    } else if phi1 > phi2 {
        phi1 * phi2 / (phi1 - phi2)
    } else {
        phi1
    };
    (f, err)
}

fn krylov_exp<T: Real, Op: KrylovOperator<T>>(
    op: &Op,
    s: Complex<T>,
    mut w: Vec<Complex<T>>,
    cfg: &ExpmvConfig<T>,
) -> Result<Vec<Complex<T>>> {
    let n = op.dim();
    let beta0 = norm2(&w);
    if beta0 == T::zero() {
        return Ok(w);
    }
    let m_max = cfg.max_krylov_dim.min(TARGET_DIM).min(n).max(1);
    let op_norm = op.norm_inf().max(T::min_positive_value());
    let anorm = s.norm() * op_norm;
    if anorm <= T::lit(TAYLOR_RADIUS) {
        return Ok(taylor_tail(op, s, w.clone(), w, 0, anorm, cfg.tol * beta0));
    }
    let abs_tol = cfg.tol * beta0;
    let breakdown_tol = op_norm * T::epsilon() * T::lit(8.0);
    let gamma = T::lit(0.9);
    let delta = T::lit(1.2);
    let marks = checkpoints(m_max);

    // First guess from the a priori bound with a moderate basis.
    let m_guess = m_max.min(30);
    let mg = T::from_usize_lossy(m_guess);
    let ln_fact = (mg + T::one()) * ((mg + T::one()).ln() - T::one())
        + T::lit(0.5) * (T::lit(2.0) * T::PI() * (mg + T::one())).ln();
    let ln_guess = (ln_fact + cfg.tol.ln() - (T::lit(4.0) * anorm).ln()) / mg - anorm.ln();
    let mut t_new = ln_guess.exp().min(T::one());

    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m_max + 1);
    let mut scratch = vec![creal(T::zero()); n];
    let mut t_now = T::zero();
    let mut substeps = 0usize;
    let mut total_err = T::zero();
    // Basis size accepted in the previous substep; much smaller checkpoints
    // are skipped since they rarely pass and each costs an exponential.
    let mut k_prev = 0usize;

    while t_now < T::one() {
        substeps += 1;
        if substeps > cfg.max_substeps {
            return Err(SplitError::AccuracyFailure {
                residual: (total_err / beta0).to_f64().unwrap_or(f64::NAN),
                substeps,
            });
        }
        let beta = norm2(&w);
        if beta == T::zero() {
            break;
        }
        let remaining = T::one() - t_now;
        let mut t_step = t_new.min(remaining);

        basis.clear();
        basis.push(w.iter().map(|z| z / beta).collect());
        let mut h = DenseMatrix::zeros(m_max + 2);
        let mut mark_iter = marks.iter().copied().peekable();
        // (basis size k, exponential, error, breakdown)
        let mut accepted: Option<(usize, DenseMatrix<T>, T, bool)> = None;

        for j in 0..m_max {
            let mut p = vec![creal(T::zero()); n];
            op.apply(&basis[j], &mut p);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dotc(vi, &p);
                h[(i, j)] = hij;
                axpy(-hij, vi, &mut p);
            }
            let hnext = norm2(&p);
            let k = j + 1;
            if hnext <= breakdown_tol {
                // Invariant subspace: the projection is exact for the whole
                // remaining interval.
                t_step = remaining;
                let mut hk = DenseMatrix::zeros(k);
                for r in 0..k {
                    for c in 0..k {
                        hk[(r, c)] = h[(r, c)] * s * t_step;
                    }
                }
                accepted = Some((k, hk.expm(), T::zero(), true));
                break;
            }
            h[(k, j)] = creal(hnext);
            basis.push(p.iter().map(|z| z / hnext).collect());

            if mark_iter.peek() != Some(&k) {
                continue;
            }
            mark_iter.next();
            if k < m_max && 3 * k < 2 * k_prev {
                continue;
            }
            op.apply(&basis[k], &mut scratch);
            let avnorm = norm2(&scratch);
            let (f, err) = small_exponential(&h, k, s, t_step, beta, avnorm);
            if err <= delta * t_step * abs_tol {
                accepted = Some((k, f, err, false));
                break;
            }
            if k == m_max {
                // Shrink the substep with the full basis until it passes.
                let mut err = err;
                let mut rejects = 0;
                loop {
                    let ratio = (t_step * abs_tol / err).powf(T::one() / T::from_usize_lossy(k));
                    t_step = gamma * t_step * ratio.min(T::one());
                    let (f, e) = small_exponential(&h, k, s, t_step, beta, avnorm);
                    err = e;
                    if err <= delta * t_step * abs_tol {
                        accepted = Some((k, f, err, false));
                        break;
                    }
                    rejects += 1;
                    if rejects > 60 || t_step <= T::epsilon() {
                        return Err(SplitError::AccuracyFailure {
                            residual: ((total_err + err) / beta0).to_f64().unwrap_or(f64::NAN),
                            substeps,
                        });
                    }
                }
                break;
            }
        }

        let (k, f, err, breakdown) =
            accepted.expect("Arnoldi loop either accepts or fails at the maximal basis");
        let used = if breakdown { k } else { k + 1 };
        let mut next = vec![creal(T::zero()); n];
        for (i, vi) in basis.iter().take(used).enumerate() {
            axpy(f[(i, 0)] * beta, vi, &mut next);
        }
        w = next;
        t_now += t_step;
        k_prev = k;
        total_err += err.max(anorm * T::epsilon() * beta);

        if breakdown || err == T::zero() {
            t_new = T::one();
        } else {
            let slack = t_step * abs_tol / err;
            let mut factor = gamma * slack.powf(T::one() / T::from_usize_lossy(k));
            if slack > T::lit(100.0) {
                // The a priori exponent is pessimistic for stiff operators;
                // a rejected try only costs one more small exponential.
                factor = factor.max(T::lit(1.5));
            }
            t_new = t_step * factor;
            if k < m_max {
                // The step passed with a smaller basis; aim for the full one.
                t_new = t_new * T::from_usize_lossy(m_max) / T::from_usize_lossy(k);
            }
        }
        // Avoid a sliver at the end.
        let left = T::one() - t_now;
        if left > T::zero() && left < T::lit(1e-12) {
            t_new = left;
        }
    }
    Ok(w)
}
