//! Scalar and spectral oracles for the third-order corrected scheme, and
//! convergence-order estimation.
//!
//! For a solution-independent source the one-step error of the corrected
//! scheme is `τ S(τA)(f - q)` with
//! `S(z) = a e^z + ½ e^{2āz} + ā - (e^z - 1)/z`. On a sine basis the
//! operator is diagonal, so every identity can be checked mode by mode.

use num_complex::Complex;

use crate::error::{Result, SplitError};
use crate::flows::ComplexCoeffs;
use crate::scalar::{creal, phi1, Real};
use crate::schemes::SchemeId;

/// Below this modulus `S` is summed from its Taylor series.
pub const SERIES_RADIUS: f64 = 1e-3;

/// `α_k = a + 2^{k-1} ā^k - 1/(k+1)`, the Taylor coefficients of `S` times
/// `k!` (for `k >= 1`).
pub fn alpha<T: Real>(k: u32, coeffs: &ComplexCoeffs<T>) -> Complex<T> {
    let two_pow = T::lit(2.0).powi(k as i32 - 1);
    coeffs.a + coeffs.abar.powu(k) * two_pow - T::one() / T::from_usize_lossy(k as usize + 1)
}

/// `S(z)` for the given coefficients.
pub fn s_function_with<T: Real>(z: Complex<T>, coeffs: &ComplexCoeffs<T>) -> Complex<T> {
    if z.norm() < T::lit(SERIES_RADIUS) {
        // terms beyond z^12 are below 1e-3^10 relative
        return s_series_with(z, coeffs, 10);
    }
    let ez = z.exp();
    coeffs.a * ez + (coeffs.abar * z * T::lit(2.0)).exp() * T::lit(0.5) + coeffs.abar
        - (ez - T::one()) / z
}

/// Partial sum `z³ Σ_{k<terms} α_{k+3} z^k / (k+3)!` of the Taylor series of `S`.
pub fn s_series_with<T: Real>(z: Complex<T>, coeffs: &ComplexCoeffs<T>, terms: u32) -> Complex<T> {
    let mut sum = creal(T::zero());
    let mut power = creal(T::one());
    let mut factorial = T::lit(6.0);
    for k in 0..terms {
        sum += alpha(k + 3, coeffs) * power / factorial;
        power *= z;
        factorial *= T::from_usize_lossy(k as usize + 4);
    }
    z * z * z * sum
}

/// `S(z)` for the standard coefficients.
pub fn s_function<T: Real>(z: Complex<T>) -> Complex<T> {
    s_function_with(z, &ComplexCoeffs::standard())
}

/// Real and imaginary part of `S(x)` for real `x`, written out with
/// `e^{2āx} = e^{x/2}(cos(x/√12) + i sin(x/√12))`.
pub fn s_real_imag<T: Real>(x: T) -> (T, T) {
    let half = T::lit(0.5);
    let w = x / T::lit(12.0).sqrt();
    let e = x.exp();
    let eh = (x * half).exp();
    let quarter = T::lit(0.25);
    let im_a = quarter / T::lit(3.0).sqrt();
    let re = quarter * e + half * eh * w.cos() + quarter - (e - T::one()) / x;
    let im = -im_a * e + half * eh * w.sin() + im_a;
    (re, im)
}

/// Outcome of [`check_s_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct SBoundsReport {
    pub points: usize,
    /// Points where `|S(z)| <= |z|³ e^z` (z >= -1) or
    /// `|S(z)| <= √(3/2) |z|³` (z <= -1) fails.
    pub violations: Vec<f64>,
    /// Largest `|S(z)| / bound` over the grid.
    pub max_bound_ratio: f64,
    /// `sup_{z <= -1} |S(z) z^{-3}|` on the grid and where it is attained.
    pub sup_negative: f64,
    pub sup_negative_at: f64,
}

impl SBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Real grid used by [`check_s_bounds`]: log-spaced moduli on
/// `[-1e6, -1]`, `[-1, 0)` and `(0, 50]`, plus the points `-1, 0, 1`.
pub fn s_bound_grid(per_segment: usize) -> Vec<f64> {
    let logspace = |lo: f64, hi: f64| {
        let (a, b) = (lo.log10(), hi.log10());
        (0..per_segment).map(move |i| 10f64.powf(a + (b - a) * i as f64 / (per_segment - 1) as f64))
    };
    let mut z: Vec<f64> = logspace(1.0, 1e6).map(|m| -m).collect();
    z.extend(logspace(1e-8, 1.0).map(|m| -m));
    z.extend(logspace(1e-8, 50.0));
    z.extend([-1.0, 0.0, 1.0]);
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    z.dedup();
    z
}

/// Checks both bounds on `S` along the real axis.
pub fn check_s_bounds(grid: &[f64]) -> SBoundsReport {
    let bound_ii = 1.5f64.sqrt();
    let mut report = SBoundsReport {
        points: grid.len(),
        violations: Vec::new(),
        max_bound_ratio: 0.0,
        sup_negative: 0.0,
        sup_negative_at: f64::NAN,
    };
    for &x in grid {
        let s = s_function(creal(x)).norm();
        let cube = x.abs().powi(3);
        let mut ok = true;
        if x >= -1.0 {
            let bound = cube * x.exp();
            ok &= s <= bound;
            if bound > 0.0 {
                report.max_bound_ratio = report.max_bound_ratio.max(s / bound);
            }
        }
        if x <= -1.0 {
            let bound = bound_ii * cube;
            ok &= s <= bound;
            report.max_bound_ratio = report.max_bound_ratio.max(s / bound);
            let ratio = s / cube;
            if ratio > report.sup_negative {
                report.sup_negative = ratio;
                report.sup_negative_at = x;
            }
        }
        if !ok {
            report.violations.push(x);
        }
    }
    report
}

/// Diagonal model of the 1D Dirichlet Laplacian on `(0, 1)` in the basis
/// `e_j = √2 sin(jπx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem<T> {
    eigenvalues: Vec<T>,
    /// Interior nodes of the grid for the discrete variant.
    grid: Option<usize>,
}

impl<T: Real> SpectralProblem<T> {
    /// `λ_j = -(jπ)²`, `j = 1..=modes`.
    pub fn continuous(modes: usize) -> Self {
        let eigenvalues = (1..=modes)
            .map(|j| {
                let w = T::from_usize_lossy(j) * T::PI();
                -w * w
            })
            .collect();
        Self {
            eigenvalues,
            grid: None,
        }
    }

    /// Eigenvalues `-(2/dx²)(1 - cos(kπ dx))` of the three-point Laplacian
    /// with `n` interior nodes. The sine vectors sampled at the nodes are its
    /// exact eigenvectors.
    pub fn discrete(n: usize) -> Self {
        let dx = T::one() / T::from_usize_lossy(n + 1);
        let eigenvalues = (1..=n)
            .map(|k| {
                let theta = T::from_usize_lossy(k) * T::PI() * dx;
                -(T::lit(2.0) / (dx * dx)) * (T::one() - theta.cos())
            })
            .collect();
        Self {
            eigenvalues,
            grid: Some(n),
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    fn basis(&self, n: usize, k: usize, i: usize) -> T {
        let dx = T::one() / T::from_usize_lossy(n + 1);
        let x = T::from_usize_lossy(i + 1) * dx;
        T::lit(2.0).sqrt() * (T::from_usize_lossy(k + 1) * T::PI() * x).sin()
    }

    fn grid_size(&self) -> Result<usize> {
        self.grid.ok_or_else(|| {
            SplitError::Config("grid transforms need the discrete spectral problem".into())
        })
    }

    /// Coefficients `v_k = dx Σ_i v_i e_k(x_i)` of interior grid values.
    pub fn analyze(&self, values: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.grid_size()?;
        if values.len() != n {
            return Err(SplitError::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        let dx = T::one() / T::from_usize_lossy(n + 1);
        Ok((0..n)
            .map(|k| {
                values
                    .iter()
                    .enumerate()
                    .fold(creal(T::zero()), |acc, (i, &v)| acc + v * self.basis(n, k, i))
                    * dx
            })
            .collect())
    }

    /// Grid values `Σ_k v_k e_k(x_i)`.
    pub fn synthesize(&self, coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.grid_size()?;
        if coeffs.len() != n {
            return Err(SplitError::DimensionMismatch {
                expected: n,
                got: coeffs.len(),
            });
        }
        Ok((0..n)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .fold(creal(T::zero()), |acc, (k, &c)| acc + c * self.basis(n, k, i))
            })
            .collect())
    }

    fn check_len(&self, lens: &[usize]) -> Result<()> {
        for &len in lens {
            if len != self.modes() {
                return Err(SplitError::DimensionMismatch {
                    expected: self.modes(),
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// Exact solution after one step: `e^{τλ}u + (e^{τλ} - 1)λ^{-1} f` per mode.
pub fn spectral_exact_step<T: Real>(
    p: &SpectralProblem<T>,
    u: &[Complex<T>],
    f: &[Complex<T>],
    tau: T,
) -> Result<Vec<Complex<T>>> {
    p.check_len(&[u.len(), f.len()])?;
    Ok(p.eigenvalues
        .iter()
        .zip(u.iter().zip(f))
        .map(|(&lam, (&uj, &fj))| {
            let z = creal(tau * lam);
            z.exp() * uj + phi1(z) * fj * tau
        })
        .collect())
}

/// One step of the corrected third-order scheme, composed flow by flow on
/// each mode.
pub fn spectral_scheme_step<T: Real>(
    p: &SpectralProblem<T>,
    u: &[Complex<T>],
    f: &[Complex<T>],
    q: &[Complex<T>],
    tau: T,
    coeffs: &ComplexCoeffs<T>,
) -> Result<Vec<Complex<T>>> {
    p.check_len(&[u.len(), f.len(), q.len()])?;
    let two = T::lit(2.0);
    let (t1, t2) = (coeffs.a * tau, coeffs.abar * tau);
    let c_tau = creal(coeffs.c * tau);
    Ok(p.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let (fj, qj) = (f[j], q[j]);
            // u' = λu + q over the complex time s
            let diffuse = |v: Complex<T>, s: Complex<T>| {
                let z = s * lam;
                z.exp() * v + phi1(z) * s * qj
            };
            let mut v = u[j] + t1 * fj;
            v -= t1 * qj;
            v = diffuse(v, t1 * two);
            v -= t1 * qj;
            v += c_tau * fj;
            v -= t2 * qj;
            v = diffuse(v, t2 * two);
            v -= t2 * qj;
            v + t2 * fj
        })
        .collect())
}

/// One step of [`SchemeId::C3Naiv`] per mode (no corrector).
pub fn spectral_naive_step<T: Real>(
    p: &SpectralProblem<T>,
    u: &[Complex<T>],
    f: &[Complex<T>],
    tau: T,
    coeffs: &ComplexCoeffs<T>,
) -> Result<Vec<Complex<T>>> {
    let zero = vec![creal(T::zero()); u.len()];
    spectral_scheme_step(p, u, f, &zero, tau, coeffs)
}

/// The corrected step in closed form,
/// `e^{τλ}u + τ(a e^{τλ} + ½ e^{2āτλ} + ā)(f - q) + (e^{τλ} - 1)λ^{-1} q`.
pub fn spectral_closed_form_step<T: Real>(
    p: &SpectralProblem<T>,
    u: &[Complex<T>],
    f: &[Complex<T>],
    q: &[Complex<T>],
    tau: T,
    coeffs: &ComplexCoeffs<T>,
) -> Result<Vec<Complex<T>>> {
    p.check_len(&[u.len(), f.len(), q.len()])?;
    Ok(p.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let z = creal(tau * lam);
            let e = z.exp();
            let weight =
                coeffs.a * e + (coeffs.abar * z * T::lit(2.0)).exp() * T::lit(0.5) + coeffs.abar;
            e * u[j] + weight * (f[j] - q[j]) * tau + phi1(z) * q[j] * tau
        })
        .collect())
}

/// Predicted one-step defect `τ S(τλ_j)(f_j - q_j)`.
pub fn spectral_defect<T: Real>(
    p: &SpectralProblem<T>,
    f: &[Complex<T>],
    q: &[Complex<T>],
    tau: T,
) -> Result<Vec<Complex<T>>> {
    p.check_len(&[f.len(), q.len()])?;
    Ok(p.eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &lam)| s_function(creal(tau * lam)) * (f[j] - q[j]) * tau)
        .collect())
}

/// Observed orders of a `(τ, error)` ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: Option<SchemeId>,
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1}) / log2(τ_k / τ_{k+1})`, one per consecutive pair.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log e` against `log τ`.
    pub slope: f64,
}

/// Fits the observed order of a ladder with strictly decreasing `τ`.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<ConvergenceReport> {
    if points.len() < 2 {
        return Err(SplitError::Config(format!(
            "need at least two ladder points, got {}",
            points.len()
        )));
    }
    for &(tau, err) in points {
        if !(tau > 0.0) || !(err > 0.0) || !err.is_finite() {
            return Err(SplitError::Config(format!(
                "ladder point (tau = {tau:e}, error = {err:e}) is not positive"
            )));
        }
    }
    if points.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(SplitError::Config("tau ladder must be strictly decreasing".into()));
    }
    let pairwise = points
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).log2() / (w[0].0 / w[1].0).log2())
        .collect();
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(ConvergenceReport {
        scheme: None,
        taus: points.iter().map(|p| p.0).collect(),
        errors: points.iter().map(|p| p.1).collect(),
        pairwise,
        slope: sxy / sxx,
    })
}
