//! Self-contained property suite: the function `S`, the per-mode defect of
//! the corrected scheme, the finite-difference spectrum, expmv against a
//! dense eigendecomposition and the closed-form correctors.

use std::f64::consts::PI;
use std::fmt;

use corrsplit::analysis::{
    check_s_bounds, s_bound_grid, s_function, s_real_imag, s_series_with, spectral_closed_form_step,
    spectral_defect, spectral_exact_step, spectral_scheme_step, SERIES_RADIUS,
};
use corrsplit::expm_krylov::{expmv, expmv_affine};
use corrsplit::schemes::{step_c3_new, StepStats};
use corrsplit::sparse::CsrMatrix;
use corrsplit::{
    assemble_operator, build_corrector, BoundarySpec, ComplexCoeffs, DiffusionCoefficients,
    ExpmvConfig, Field64, Mesh64, SourceTerm, SpectralProblem, SplitContext64, C64,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::convergence::tau_ladder;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Runs the suite with the scheme coefficients `coeffs`; anything but the
/// standard coefficients should make the scheme checks fail.
pub fn run_verify_with(coeffs: ComplexCoeffs<f64>) -> VerifyReport {
    let mut checks = s_bound_checks();
    checks.push(s_series_seam());
    checks.push(s_real_imag_split());
    checks.push(defect_identity(&coeffs));
    checks.push(one_step_cross_check(&coeffs));
    checks.push(fd_eigenvalues());
    checks.push(expmv_dense_oracle());
    checks.push(cosine_corrector());
    VerifyReport { checks }
}

pub fn run_verify() -> VerifyReport {
    run_verify_with(ComplexCoeffs::standard())
}

fn s_bound_checks() -> Vec<Check> {
    let grid = s_bound_grid(3334);
    let report = check_s_bounds(&grid);
    vec![
        check(
            "s-bounds",
            report.passed() && report.points >= 10_000,
            format!(
                "{} points, {} violations, max |S|/bound = {:.4}",
                report.points,
                report.violations.len(),
                report.max_bound_ratio
            ),
        ),
        check(
            "s-supremum",
            (0.004..=0.006).contains(&report.sup_negative),
            format!(
                "sup_(z <= -1) |S(z) z^-3| = {:.6} at z = {:.4}",
                report.sup_negative, report.sup_negative_at
            ),
        ),
    ]
}

/// Size of the summands of the direct formula for `S`; cancellation limits
/// its absolute accuracy to a multiple of this.
fn s_summand_scale(z: C64) -> f64 {
    let k = ComplexCoeffs::<f64>::standard();
    (k.a * z.exp()).norm()
        + 0.5 * (k.abar * z * 2.0).exp().norm()
        + k.abar.norm()
        + ((z.exp() - 1.0) / z).norm()
}

fn s_series_seam() -> Check {
    let k = ComplexCoeffs::standard();
    let mut worst = 0.0f64;
    for i in 0..=200 {
        let modulus = 10f64.powf(-3.0 + 3.0 * f64::from(i) / 200.0);
        for angle in [0.0, 0.5 * PI, 0.75 * PI, PI] {
            let z = C64::from_polar(modulus.max(SERIES_RADIUS), angle);
            let direct = s_function(z);
            let series = s_series_with(z, &k, 40);
            worst = worst.max((direct - series).norm() / s_summand_scale(z));
        }
    }
    check(
        "s-series-seam",
        worst <= 1e-12,
        format!("max |direct - series| / summand size = {worst:.2e} on 1e-3 <= |z| <= 1"),
    )
}

fn s_real_imag_split() -> Check {
    let mut worst = 0.0f64;
    for &x in s_bound_grid(200).iter().filter(|x| x.abs() >= SERIES_RADIUS) {
        let (re, im) = s_real_imag(x);
        let z = C64::new(x, 0.0);
        let err = (s_function(z) - C64::new(re, im)).norm() / s_summand_scale(z).max(1.0);
        worst = worst.max(err);
    }
    check(
        "s-real-imag",
        worst <= 1e-13,
        format!("max deviation {worst:.2e}"),
    )
}

/// Deterministic, non-smooth modal data.
fn modal_data(modes: usize) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let u = (1..=modes).map(|j| C64::new(1.0 / j as f64, 0.0)).collect();
    let f = (1..=modes)
        .map(|j| C64::new(if j % 2 == 0 { 0.5 } else { -1.0 }, 0.0))
        .collect();
    let q = (1..=modes)
        .map(|j| C64::new(0.3 / (j as f64).sqrt(), 0.0))
        .collect();
    (u, f, q)
}

fn defect_identity(coeffs: &ComplexCoeffs<f64>) -> Check {
    let p = SpectralProblem::<f64>::continuous(200);
    let (u, f, q) = modal_data(200);
    let mut worst = 0.0f64;
    for tau in tau_ladder(0, 6) {
        let num = spectral_scheme_step(&p, &u, &f, &q, tau, coeffs).expect("sizes");
        let exact = spectral_exact_step(&p, &u, &f, tau).expect("sizes");
        let defect = spectral_defect(&p, &f, &q, tau).expect("sizes");
        for j in 0..200 {
            let err = ((num[j] - exact[j]) - defect[j]).norm() / defect[j].norm().max(1.0);
            worst = worst.max(err);
        }
    }
    check(
        "defect-identity",
        worst <= 1e-14,
        format!("max |(num - exact) - tau S (f - q)| / max(1, |tau S (f - q)|) = {worst:.2e}"),
    )
}

fn one_step_cross_check(coeffs: &ComplexCoeffs<f64>) -> Check {
    let n = 100;
    let mesh = Mesh64::new(1, n).expect("mesh");
    let source = SourceTerm::independent_with_image(
        &mesh,
        |x| (2.0 * PI * x[0]).cos() + x[0],
        |x| -4.0 * PI * PI * (2.0 * PI * x[0]).cos(),
    );
    let ctx = SplitContext64::assemble(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
        source.clone(),
    )
    .expect("assembly")
    .with_coeffs(*coeffs);
    let u0 = Field64::from_fn(mesh, |x| (PI * x[0]).sin() + x[0] * (1.0 - x[0]));
    let tau = 0.01;
    let result = (|| -> anyhow::Result<f64> {
        let stepped = step_c3_new(&u0, tau, &ctx, &mut StepStats::default())?;
        let pair = build_corrector(&source, &u0, C64::new(tau, 0.0), ctx.operator(), 1)?;
        let SourceTerm::Independent { interior, .. } = &source else {
            unreachable!()
        };
        let f = Field64::from_real(mesh, interior)?;
        let p = SpectralProblem::<f64>::discrete(n);
        let closed = spectral_closed_form_step(
            &p,
            &p.analyze(u0.values())?,
            &p.analyze(f.values())?,
            &p.analyze(pair.q.values())?,
            tau,
            &ComplexCoeffs::standard(),
        )?;
        let closed = Field64::new(mesh, p.synthesize(&closed)?)?;
        Ok(stepped.sub(&closed).l2_norm() / closed.l2_norm())
    })();
    match result {
        Ok(rel) => check(
            "one-step-cross-check",
            rel <= 1e-10,
            format!("relative L2 difference to the modal closed form {rel:.2e} (n = {n})"),
        ),
        Err(e) => check("one-step-cross-check", false, format!("error: {e:#}")),
    }
}

fn laplacian(dim: usize, n: usize) -> CsrMatrix<f64> {
    let mesh = Mesh64::new(dim, n).expect("mesh");
    assemble_operator(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
    )
    .expect("assembly")
    .matrix()
    .clone()
}

fn dense(l: &CsrMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let mut col = vec![C64::new(0.0, 0.0); n];
        l.mul_complex_into(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i].re;
        }
    }
    m
}

fn fd_eigenvalues() -> Check {
    let mut worst = 0.0f64;
    for (dim, n) in [(1, 100), (1, 200), (2, 14)] {
        let eig = SymmetricEigen::new(dense(&laplacian(dim, n)));
        let mut computed: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        computed.sort_by(|a, b| b.total_cmp(a));
        let one_d = SpectralProblem::<f64>::discrete(n);
        let mut formula: Vec<f64> = if dim == 1 {
            one_d.eigenvalues().to_vec()
        } else {
            let l = one_d.eigenvalues();
            l.iter().flat_map(|a| l.iter().map(move |b| a + b)).collect()
        };
        formula.sort_by(|a, b| b.total_cmp(a));
        for (c, f) in computed.iter().zip(&formula) {
            worst = worst.max((c - f).abs() / f.abs());
        }
    }
    check(
        "fd-eigenvalues",
        worst <= 1e-10,
        format!("max relative eigenvalue error {worst:.2e} (1D n = 100, 200; 2D n = 14)"),
    )
}

fn expmv_dense_oracle() -> Check {
    let k = ComplexCoeffs::<f64>::standard();
    let cfg = ExpmvConfig::default();
    let mut worst = 0.0f64;
    let mut failure = None;
    for (dim, n) in [(1, 200), (2, 14)] {
        let l = laplacian(dim, n);
        let eig = SymmetricEigen::new(dense(&l));
        let size = l.nrows();
        let v: Vec<C64> = (0..size)
            .map(|i| C64::new((0.37 * i as f64).sin() + 0.2, (1.3 * i as f64).cos() * 0.1))
            .collect();
        let g: Vec<C64> = (0..size).map(|i| C64::new(1.0 + (i % 7) as f64, 0.0)).collect();
        let to_dvec = |w: &[C64], part: fn(&C64) -> f64| {
            DVector::from_iterator(size, w.iter().map(part))
        };
        let project = |w: &[C64]| {
            let q = &eig.eigenvectors;
            (q.transpose() * to_dvec(w, |z| z.re), q.transpose() * to_dvec(w, |z| z.im))
        };
        let (vr, vi) = project(&v);
        let (gr, gi) = project(&g);
        for tau in [0.02, 1e-3] {
            for s in [C64::new(tau, 0.0), k.a * (2.0 * tau), k.abar * (2.0 * tau)] {
                let mut plain = vec![C64::new(0.0, 0.0); size];
                let mut affine = vec![C64::new(0.0, 0.0); size];
                let q = &eig.eigenvectors;
                for (m, &lam) in eig.eigenvalues.iter().enumerate() {
                    let z = s * lam;
                    let e = z.exp();
                    let phi = if z.norm() < 1e-8 { C64::new(1.0, 0.0) } else { (e - 1.0) / z };
                    let cv = C64::new(vr[m], vi[m]);
                    let cg = C64::new(gr[m], gi[m]);
                    for i in 0..size {
                        plain[i] += e * cv * q[(i, m)];
                        affine[i] += (e * cv + phi * s * cg) * q[(i, m)];
                    }
                }
                let rel = |got: &[C64], want: &[C64]| {
                    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
                    let norm: f64 = want.iter().map(|b| b.norm_sqr()).sum();
                    (diff / norm).sqrt()
                };
                match (expmv(s, &l, &v, &cfg), expmv_affine(s, &l, &g, &v, &cfg)) {
                    (Ok(a), Ok(b)) => {
                        worst = worst.max(rel(&a, &plain)).max(rel(&b, &affine));
                    }
                    (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
                }
            }
        }
    }
    match failure {
        Some(e) => check("expmv-dense-oracle", false, format!("error: {e}")),
        None => check(
            "expmv-dense-oracle",
            worst <= 1e-10,
            format!(
                "max relative error {worst:.2e} for steps tau, 2a tau, 2abar tau \
                 (1D n = 200, 2D n = 14)"
            ),
        ),
    }
}

fn cosine_corrector() -> Check {
    let mesh = Mesh64::with_spacing(1, 2e-3).expect("mesh");
    let result = (|| -> anyhow::Result<(f64, f64)> {
        let op = assemble_operator(
            &mesh,
            &DiffusionCoefficients::laplacian(),
            &BoundarySpec::homogeneous(),
        )?;
        let source = SourceTerm::independent_with_image(
            &mesh,
            |x| (2.0 * PI * x[0]).cos(),
            |x| -4.0 * PI * PI * (2.0 * PI * x[0]).cos(),
        );
        let pair = build_corrector(&source, &Field64::zeros(mesh), C64::new(0.01, 0.0), &op, 1)?;
        let q_exact = Field64::from_fn(mesh, |x| 1.0 + 2.0 * PI * PI * x[0] * (1.0 - x[0]));
        let r_exact = Field64::from_fn(mesh, |_| -4.0 * PI * PI);
        Ok((
            pair.q.sub(&q_exact).max_abs() / q_exact.max_abs(),
            pair.r.sub(&r_exact).max_abs() / r_exact.max_abs(),
        ))
    })();
    match result {
        Ok((q, r)) => check(
            "cosine-corrector",
            q <= 1e-10 && r <= 1e-10,
            format!("relative max error q: {q:.2e}, r: {r:.2e} (dx = 2e-3)"),
        ),
        Err(e) => check("cosine-corrector", false, format!("error: {e:#}")),
    }
}
