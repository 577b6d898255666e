//! Linear-algebra and closed-form oracles computed independently of the
//! library (dense eigendecompositions via nalgebra, hand-derived solutions).

use std::f64::consts::PI;

use corrsplit::analysis::{spectral_closed_form_step, SpectralProblem};
use corrsplit::schemes::step_c3_new;
use corrsplit::sparse::CsrMatrix;
use corrsplit::{
    assemble_operator, build_corrector, expmv, expmv_affine, BoundarySpec, ComplexCoeffs,
    DiffusionCoefficients, DiscreteOperator64, ExpmvConfig, Field64, Mesh64, SourceTerm,
    SplitContext64, StepStats, C64,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn operator(dim: usize, n: usize, bc: BoundarySpec<f64>) -> DiscreteOperator64 {
    let mesh = Mesh64::new(dim, n).unwrap();
    assemble_operator(&mesh, &DiffusionCoefficients::laplacian(), &bc).unwrap()
}

fn to_dense(l: &CsrMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let mut col = vec![C64::new(0.0, 0.0); n];
        l.mul_complex_into(&e, &mut col);
        col[i].re
    })
}

/// `exp(sL)v + s φ1(sL) g` through the symmetric eigendecomposition.
fn dense_affine(eig: &SymmetricEigen<f64, nalgebra::Dyn>, s: C64, v: &[C64], g: &[C64]) -> Vec<C64> {
    let n = v.len();
    let q = &eig.eigenvectors;
    let part = |w: &[C64], f: fn(&C64) -> f64| DVector::from_iterator(n, w.iter().map(f));
    let (vr, vi) = (q.transpose() * part(v, |z| z.re), q.transpose() * part(v, |z| z.im));
    let (gr, gi) = (q.transpose() * part(g, |z| z.re), q.transpose() * part(g, |z| z.im));
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (m, &lam) in eig.eigenvalues.iter().enumerate() {
        let z = s * lam;
        let e = z.exp();
        let coeff = e * C64::new(vr[m], vi[m]) + (e - 1.0) / lam * C64::new(gr[m], gi[m]);
        for (i, o) in out.iter_mut().enumerate() {
            *o += coeff * q[(i, m)];
        }
    }
    out
}

fn rel_err(got: &[C64], want: &[C64]) -> f64 {
    let d: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let w: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (d / w).sqrt()
}

#[test]
fn expmv_matches_dense_eigendecomposition() {
    let k = ComplexCoeffs::<f64>::standard();
    let cfg = ExpmvConfig::default();
    for (dim, n) in [(1, 50), (1, 200), (2, 12)] {
        let op = operator(dim, n, BoundarySpec::homogeneous());
        let l = op.matrix();
        let eig = SymmetricEigen::new(to_dense(l));
        let size = l.nrows();
        let v: Vec<C64> = (0..size)
            .map(|i| C64::new(((i * 7 % 11) as f64 - 5.0) / 5.0, (i % 3) as f64 * 0.1))
            .collect();
        let zero = vec![C64::new(0.0, 0.0); size];
        let g: Vec<C64> = (0..size).map(|i| C64::new(2.0 - (i % 5) as f64, 0.5)).collect();
        for tau in [0.02, 1e-3, 1e-6] {
            for s in [C64::new(tau, 0.0), k.a * (2.0 * tau), k.abar * (2.0 * tau)] {
                let plain = expmv(s, l, &v, &cfg).unwrap();
                let err = rel_err(&plain, &dense_affine(&eig, s, &v, &zero));
                assert!(err <= 1e-10, "dim {dim} n {n} s {s}: {err:e}");
                let affine = expmv_affine(s, l, &g, &v, &cfg).unwrap();
                let err = rel_err(&affine, &dense_affine(&eig, s, &v, &g));
                assert!(err <= 1e-10, "affine dim {dim} n {n} s {s}: {err:e}");
            }
        }
    }
}

#[test]
fn fd_eigenvalues_match_formula() {
    for n in [10, 100, 200] {
        let h = 1.0 / (n + 1) as f64;
        let l = operator(1, n, BoundarySpec::homogeneous());
        let mut got: Vec<f64> = SymmetricEigen::new(to_dense(l.matrix()))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        got.sort_by(|a, b| b.total_cmp(a));
        for (k, g) in got.iter().enumerate() {
            let s = ((k + 1) as f64 * PI * h / 2.0).sin();
            let want = -4.0 / (h * h) * s * s;
            assert!((g - want).abs() <= 1e-10 * want.abs(), "n {n} k {k}: {g} vs {want}");
        }
        let model = SpectralProblem::<f64>::discrete(n);
        for (g, m) in got.iter().zip(model.eigenvalues()) {
            assert!((g - m).abs() <= 1e-10 * m.abs());
        }
    }
}

#[test]
fn harmonic_boundary_data_folds_to_zero() {
    // x + y is discrete harmonic, so L u + g_b vanishes on its samples
    let op = operator(2, 15, BoundarySpec::dirichlet(|x: &[f64]| x[0] + x[1]));
    let mesh = *op.mesh();
    let u = Field64::from_fn(mesh, |x| x[0] + x[1]);
    let residual = op.apply_affine(u.values());
    let worst = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
    // and the diffusion flow keeps it
    let w = corrsplit::diffusion_flow(&op, None, C64::new(0.05, 0.01), &u, &ExpmvConfig::default())
        .unwrap();
    assert!(w.sub(&u).max_abs() < 1e-10);
}

#[test]
fn cosine_corrector_closed_form() {
    for n in [49, 499] {
        let mesh = Mesh64::new(1, n).unwrap();
        let op = assemble_operator(
            &mesh,
            &DiffusionCoefficients::laplacian(),
            &BoundarySpec::homogeneous(),
        )
        .unwrap();
        let term = SourceTerm::independent_with_image(
            &mesh,
            |x| (2.0 * PI * x[0]).cos(),
            |x| -4.0 * PI * PI * (2.0 * PI * x[0]).cos(),
        );
        let pair = build_corrector(&term, &Field64::zeros(mesh), C64::new(0.01, 0.0), &op, 1)
            .unwrap();
        let q = Field64::from_fn(mesh, |x| 1.0 + 2.0 * PI * PI * x[0] * (1.0 - x[0]));
        assert!(pair.q.sub(&q).max_abs() < 1e-10 * q.max_abs(), "n = {n}");
        for z in pair.r.values() {
            assert!((z.re + 4.0 * PI * PI).abs() < 1e-10 && z.im == 0.0);
        }
    }
}

#[test]
fn x2sin_corrector_has_zero_trace_but_nonzero_r() {
    let mesh = Mesh64::new(1, 199).unwrap();
    let op = assemble_operator(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
    )
    .unwrap();
    let term = SourceTerm::independent_with_image(
        &mesh,
        |x| x[0] * x[0] * (2.0 * PI * x[0]).sin(),
        |x| {
            let (s, c) = (2.0 * PI * x[0]).sin_cos();
            2.0 * s + 8.0 * PI * x[0] * c - 4.0 * PI * PI * x[0] * x[0] * s
        },
    );
    let pair = build_corrector(&term, &Field64::zeros(mesh), C64::new(0.01, 0.0), &op, 1).unwrap();
    assert!(pair.q_trace.iter().all(|z| z.norm() < 1e-14));
    // (x² sin 2πx)'' is 0 at x = 0 and 8π at x = 1, so r is the linear 8πx
    assert!(pair.r_trace[0].norm() < 1e-14);
    assert!((pair.r_trace[1].re - 8.0 * PI).abs() < 1e-12);
    let r = Field64::from_fn(mesh, |x| 8.0 * PI * x[0]);
    assert!(pair.r.sub(&r).max_abs() < 1e-10);
    // q'' = 8πx with zero ends: q = 4π(x³ - x)/3
    let q = Field64::from_fn(mesh, |x| 4.0 * PI * (x[0].powi(3) - x[0]) / 3.0);
    assert!(pair.q.sub(&q).max_abs() < 1e-10);
}

#[test]
fn one_step_matches_modal_closed_form() {
    let n = 100;
    let mesh = Mesh64::new(1, n).unwrap();
    let term = SourceTerm::independent_with_image(
        &mesh,
        |x| (2.0 * PI * x[0]).cos() + 2.0 * x[0],
        |x| -4.0 * PI * PI * (2.0 * PI * x[0]).cos(),
    );
    let ctx = SplitContext64::assemble(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
        term.clone(),
    )
    .unwrap();
    let u0 = Field64::from_fn(mesh, |x| (3.0 * PI * x[0]).sin() + x[0] * (1.0 - x[0]));
    let p = SpectralProblem::<f64>::discrete(n);
    let SourceTerm::Independent { interior, .. } = &term else {
        unreachable!()
    };
    let f = Field64::from_real(mesh, interior).unwrap();
    let pair = build_corrector(&term, &u0, C64::new(1.0, 0.0), ctx.operator(), 1).unwrap();
    for tau in [0.02, 0.005, 1e-3] {
        let stepped = step_c3_new(&u0, tau, &ctx, &mut StepStats::default()).unwrap();
        let closed = spectral_closed_form_step(
            &p,
            &p.analyze(u0.values()).unwrap(),
            &p.analyze(f.values()).unwrap(),
            &p.analyze(pair.q.values()).unwrap(),
            tau,
            &ComplexCoeffs::standard(),
        )
        .unwrap();
        let closed = Field64::new(mesh, p.synthesize(&closed).unwrap()).unwrap();
        let rel = stepped.sub(&closed).l2_norm() / closed.l2_norm();
        assert!(rel <= 1e-10, "tau {tau}: {rel:e}");
    }
}
