//! End-to-end behaviour of the harness on small grids: CSV schema,
//! bookkeeping, reference cache and error fields.

use std::fs;

use corrsplit::SchemeId;
use corrsplit_harness::convergence::{run_convergence, ConvergenceConfig, CSV_HEADER};
use corrsplit_harness::errorfield::run_errorfield;
use corrsplit_harness::problems::{build_problem, ProblemId};
use corrsplit_harness::reference::{compute_reference, reference_solution, RefMode, ReferenceSpec};

fn small_config(problem: ProblemId, dx: f64) -> ConvergenceConfig {
    ConvergenceConfig {
        dx: Some(dx),
        taus: vec![0.02, 0.01, 0.005],
        t_final: 0.04,
        jobs: 2,
        ..ConvergenceConfig::new(problem)
    }
}

fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn csv_has_exact_header_and_consistent_counts() {
    let result = run_convergence(&small_config(ProblemId::Heat1dCos, 0.02)).unwrap();
    let mut out = Vec::new();
    result.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,method,tau,error_l2,order_pairwise,n_steps,n_diffusion_flows,n_source_flows,n_corrector_solves,wall_time_s"
    );
    assert_eq!(CSV_HEADER.join(","), text.lines().next().unwrap());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4 * 3);
    for row in &rows {
        let method: SchemeId = row[1].parse().unwrap();
        let tau: f64 = row[2].parse().unwrap();
        let steps: usize = row[5].parse().unwrap();
        assert_eq!(steps, (0.04 / tau).round() as usize);
        let per = method.flows_per_step();
        assert_eq!(row[6].parse::<usize>().unwrap(), steps * per.n_diffusion_flows);
        assert_eq!(row[7].parse::<usize>().unwrap(), steps * per.n_source_flows);
        assert_eq!(row[8].parse::<usize>().unwrap(), steps * per.n_corrector_solves);
        assert!(row[3].parse::<f64>().unwrap() > 0.0);
    }
    // first row of each method has no pairwise order
    assert!(rows.iter().filter(|r| r[4].is_empty()).count() == 4);
}

#[test]
fn convergence_output_is_deterministic() {
    let cfg = small_config(ProblemId::Heat1dX2Sin, 0.02);
    let render = || {
        let mut out = Vec::new();
        run_convergence(&cfg).unwrap().write_csv(&mut out).unwrap();
        strip_wall_time(&String::from_utf8(out).unwrap())
    };
    assert_eq!(render(), render());
}

#[test]
fn warm_cache_reloads_identical_bits() {
    let dir = tempfile::tempdir().unwrap();
    let problem = build_problem(ProblemId::FisherKpp, Some(0.1)).unwrap();
    let spec = ReferenceSpec {
        mode: RefMode::Strang,
        tau_ref: 1e-3,
    };
    let cold = reference_solution(&problem, 0.02, &spec, Some(dir.path())).unwrap();
    assert!(!cold.from_cache);
    assert_eq!(cold.steps, 20);
    let warm = reference_solution(&problem, 0.02, &spec, Some(dir.path())).unwrap();
    assert!(warm.from_cache);
    assert_eq!(warm.steps, 0);
    for (a, b) in cold.field.values().iter().zip(warm.field.values()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    let sidecar = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "txt"))
        .unwrap();
    let text = fs::read_to_string(sidecar).unwrap();
    for key in ["problem=fisher-kpp", "dx=1e-1", "T=2e-2", "tau_ref=1e-3", "sha256="] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    // a different key is a miss
    let other = ReferenceSpec {
        tau_ref: 5e-4,
        ..spec
    };
    assert!(!reference_solution(&problem, 0.02, &other, Some(dir.path())).unwrap().from_cache);
}

#[test]
fn corrupted_cache_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let problem = build_problem(ProblemId::Heat1dSin, Some(0.01)).unwrap();
    let spec = ReferenceSpec::default_for(ProblemId::Heat1dSin);
    let cold = reference_solution(&problem, 0.1, &spec, Some(dir.path())).unwrap();
    let bin = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let mut bytes = fs::read(&bin).unwrap();
    bytes[100] ^= 0x40;
    fs::write(&bin, &bytes).unwrap();
    let again = reference_solution(&problem, 0.1, &spec, Some(dir.path())).unwrap();
    assert!(!again.from_cache);
    assert_eq!(again.field, cold.field);
    // and the rewritten entry is valid again
    assert!(reference_solution(&problem, 0.1, &spec, Some(dir.path())).unwrap().from_cache);

    fs::write(&bin, &bytes[..64]).unwrap();
    assert!(!reference_solution(&problem, 0.1, &spec, Some(dir.path())).unwrap().from_cache);
}

#[test]
fn affine_reference_rejects_nonlinear_source() {
    let problem = build_problem(ProblemId::FisherKpp, Some(0.1)).unwrap();
    let spec = ReferenceSpec {
        mode: RefMode::Affine,
        tau_ref: 1e-6,
    };
    let err = compute_reference(&problem, 0.1, &spec).unwrap_err().to_string();
    assert!(err.contains("strang"), "{err}");
}

#[test]
fn strang_and_affine_references_agree_to_second_order() {
    let problem = build_problem(ProblemId::Heat2dExpY7, Some(0.1)).unwrap();
    let affine = compute_reference(&problem, 0.01, &ReferenceSpec::default_for(problem.id)).unwrap();
    let diff = |tau_ref: f64| {
        let spec = ReferenceSpec {
            mode: RefMode::Strang,
            tau_ref,
        };
        let strang = compute_reference(&problem, 0.01, &spec).unwrap();
        strang.field.sub(&affine.field).l2_norm()
    };
    let (coarse, fine) = (diff(1e-3), diff(5e-4));
    assert!(fine < coarse);
    assert!(coarse / fine > 2.0, "{coarse:e} {fine:e}");
}

#[test]
fn error_field_of_zero_source_vanishes() {
    // heat with f = 0 and b = 0 is integrated exactly by every scheme
    let mut problem = build_problem(ProblemId::Heat1dSin, Some(0.02)).unwrap();
    let mesh = problem.mesh;
    problem.ctx = corrsplit::SplitContext64::assemble(
        &mesh,
        &corrsplit::DiffusionCoefficients::laplacian(),
        &corrsplit::BoundarySpec::homogeneous(),
        corrsplit::SourceTerm::independent(&mesh, |_| 0.0),
    )
    .unwrap();
    let reference = compute_reference(&problem, 0.1, &ReferenceSpec::default_for(problem.id))
        .unwrap()
        .field;
    for id in SchemeId::ALL {
        let field = run_errorfield(&problem, id, 0.01, 0.1, &reference).unwrap();
        assert!(field.peak().value < 1e-10, "{id}");
        assert_eq!(field.values.len(), mesh.full_len());
    }
}

#[test]
fn naive_error_concentrates_at_the_boundary() {
    let problem = build_problem(ProblemId::Heat1dCos, Some(0.01)).unwrap();
    let reference = compute_reference(&problem, 0.1, &ReferenceSpec::default_for(problem.id))
        .unwrap()
        .field;
    let naive = run_errorfield(&problem, SchemeId::C3Naiv, 0.01, 0.1, &reference).unwrap();
    assert!(naive.peak().cells_to_boundary <= 2);
    let corrected = run_errorfield(&problem, SchemeId::C3New, 0.01, 0.1, &reference).unwrap();
    assert!(corrected.peak().value * 100.0 < naive.peak().value);
    assert_eq!(corrected.boundary_max(), 0.0);
}

#[test]
fn unknown_problem_lists_valid_ids() {
    let err = "heat1d-tan".parse::<ProblemId>().unwrap_err().to_string();
    for id in ProblemId::ALL {
        assert!(err.contains(id.name()));
    }
}
