//! Invariants of the flows, the exponential and the schemes under random
//! inputs.

use std::f64::consts::PI;

use corrsplit::analysis::{
    s_function, s_series_with, spectral_defect, spectral_exact_step, spectral_scheme_step,
    SpectralProblem,
};
use corrsplit::{
    assemble_operator, expmv, integrate, source_flow, BoundarySpec, ComplexCoeffs,
    DiffusionCoefficients, DiscreteOperator64, ExpmvConfig, Field64, Mesh64, SchemeId, SourceTerm,
    SplitContext64, C64,
};
use proptest::prelude::*;

fn laplacian(dim: usize, n: usize) -> DiscreteOperator64 {
    let mesh = Mesh64::new(dim, n).unwrap();
    assemble_operator(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
    )
    .unwrap()
}

fn vector(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn step() -> impl Strategy<Value = C64> {
    (1e-6..2e-2f64, -1.0..1.0f64).prop_map(|(re, slope)| C64::new(re, re * slope))
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exponential_semigroup(v in vector(40), s1 in step(), s2 in step()) {
        let op = laplacian(1, 40);
        let cfg = ExpmvConfig::default();
        let two = expmv(s2, op.matrix(), &expmv(s1, op.matrix(), &v, &cfg).unwrap(), &cfg).unwrap();
        let one = expmv(s1 + s2, op.matrix(), &v, &cfg).unwrap();
        prop_assert!(dist(&one, &two) <= 1e-10 * norm(&v));
    }

    #[test]
    fn exponential_commutes_with_conjugation(v in vector(30), s in step()) {
        let op = laplacian(1, 30);
        let cfg = ExpmvConfig::default();
        let a: Vec<C64> = expmv(s, op.matrix(), &v, &cfg).unwrap().iter().map(|z| z.conj()).collect();
        let vbar: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        let b = expmv(s.conj(), op.matrix(), &vbar, &cfg).unwrap();
        prop_assert!(dist(&a, &b) <= 1e-11 * norm(&v));
    }

    #[test]
    fn real_diffusion_is_contractive(v in vector(49), t in 1e-7..0.1f64) {
        let op = laplacian(2, 7);
        let w = expmv(C64::new(t, 0.0), op.matrix(), &v, &ExpmvConfig::default()).unwrap();
        prop_assert!(norm(&w) <= norm(&v) * (1.0 + 1e-12));
    }

    #[test]
    fn source_flows_form_a_group(
        u in prop::collection::vec(0.0..1.0f64, 9),
        s in step(),
        t in step(),
        rate in 0.5..2.0f64,
    ) {
        let mesh = Mesh64::new(1, 9).unwrap();
        let field = Field64::from_real(mesh, &u).unwrap();
        let terms = [
            SourceTerm::independent(&mesh, |x| (3.0 * x[0]).cos()),
            SourceTerm::logistic(rate).unwrap(),
        ];
        for term in &terms {
            let split = source_flow(term, t, &source_flow(term, s, &field).unwrap()).unwrap();
            let whole = source_flow(term, s + t, &field).unwrap();
            prop_assert!(split.sub(&whole).max_abs() <= 1e-13);
        }
    }

    #[test]
    fn series_and_direct_formula_agree_at_moderate_size(
        modulus in 0.3..1.0f64,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let z = C64::from_polar(modulus, angle);
        let series = s_series_with(z, &ComplexCoeffs::standard(), 40);
        let direct = s_function(z);
        prop_assert!((series - direct).norm() <= 1e-12 * direct.norm().max(1e-3));
    }

    #[test]
    fn defect_identity_for_random_modes(
        u in prop::collection::vec(-1.0..1.0f64, 50),
        f in prop::collection::vec(-1.0..1.0f64, 50),
        q in prop::collection::vec(-1.0..1.0f64, 50),
        tau in 1e-4..0.05f64,
    ) {
        let p = SpectralProblem::<f64>::continuous(50);
        let c = |v: &[f64]| v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
        let (u, f, q) = (c(&u), c(&f), c(&q));
        let k = ComplexCoeffs::standard();
        let num = spectral_scheme_step(&p, &u, &f, &q, tau, &k).unwrap();
        let exact = spectral_exact_step(&p, &u, &f, tau).unwrap();
        let defect = spectral_defect(&p, &f, &q, tau).unwrap();
        for j in 0..50 {
            let err = ((num[j] - exact[j]) - defect[j]).norm();
            prop_assert!(err <= 1e-14 * defect[j].norm().max(1.0), "mode {}: {:e}", j, err);
        }
    }

    #[test]
    fn integration_is_affine_in_the_data(
        a in -2.0..2.0f64,
        tau_k in 0u32..3,
    ) {
        // with f = 0 the scheme is linear in u0
        let mesh = Mesh64::new(1, 39).unwrap();
        let ctx = SplitContext64::assemble(
            &mesh,
            &DiffusionCoefficients::laplacian(),
            &BoundarySpec::homogeneous(),
            SourceTerm::independent(&mesh, |_| 0.0),
        )
        .unwrap();
        let u1 = Field64::from_fn(mesh, |x| (PI * x[0]).sin());
        let u2 = Field64::from_fn(mesh, |x| x[0] * (1.0 - x[0]));
        let tau = 0.02 / f64::from(1u32 << tau_k);
        for id in SchemeId::ALL {
            let run = |u: &Field64| integrate(id, u, tau, 0.04, &ctx).unwrap().0;
            let combined = run(&u1.add(&u2.scale(C64::new(a, 0.0))));
            let separate = run(&u1).add(&run(&u2).scale(C64::new(a, 0.0)));
            prop_assert!(combined.sub(&separate).max_abs() <= 1e-11);
        }
    }
}

#[test]
fn homogeneous_problem_is_integrated_exactly() {
    // f = 0, b = 0: every scheme reduces to exp(T L) u0 because the complex
    // diffusion substeps add up to τ
    let mesh = Mesh64::new(1, 99).unwrap();
    let ctx = SplitContext64::assemble(
        &mesh,
        &DiffusionCoefficients::laplacian(),
        &BoundarySpec::homogeneous(),
        SourceTerm::independent(&mesh, |_| 0.0),
    )
    .unwrap();
    let u0 = Field64::from_fn(mesh, |x| (2.0 * PI * x[0]).sin() + x[0] * (1.0 - x[0]));
    let exact = expmv(
        C64::new(0.1, 0.0),
        ctx.operator().matrix(),
        u0.values(),
        &ExpmvConfig::default(),
    )
    .unwrap();
    for id in SchemeId::ALL {
        let (u, _) = integrate(id, &u0, 0.01, 0.1, &ctx).unwrap();
        assert!(dist(u.values(), &exact) <= 1e-10 * norm(&exact), "{id}");
    }
}
