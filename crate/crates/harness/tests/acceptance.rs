//! Acceptance run: reproduces the convergence experiments at full size and
//! prints one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::ops::RangeInclusive;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use corrsplit::SchemeId::{self, C3Naiv, C3New, StrangCorr, StrangNaiv};
use corrsplit_harness::convergence::{
    run_cell, run_convergence, ConvergenceConfig, ConvergenceResult, FLOOR_MARGIN,
};
use corrsplit_harness::errorfield::run_errorfield;
use corrsplit_harness::problems::{build_problem, ProblemId};
use corrsplit_harness::verify::run_verify;

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
}

impl Tally {
    fn record(&mut self, ok: bool, text: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {text}", if ok { "PASS" } else { "FAIL" });
    }

    fn slope(&mut self, result: &ConvergenceResult, method: SchemeId, window: Window) {
        let fit = result.fit(method);
        let slope = fit.and_then(|f| f.slope);
        let points = fit.map_or(0, |f| f.taus_used.len());
        self.record(
            slope.is_some_and(|s| window.contains(s)),
            format!(
                "{} {method} slope {} in {window} ({points} points)",
                result.problem,
                slope.map_or_else(|| "n/a".into(), |s| format!("{s:.3}"))
            ),
        );
    }

    fn runtime(&mut self, label: &str, took: Duration, limit_s: u64) {
        self.record(
            took.as_secs_f64() <= limit_s as f64,
            format!("{label} runtime {:.1} s <= {limit_s} s", took.as_secs_f64()),
        );
    }

    /// Error ratios of consecutive retained C3New points.
    fn halving(&mut self, result: &ConvergenceResult) {
        let Some(fit) = result.fit(C3New) else { return };
        let errors: Vec<f64> = fit
            .taus_used
            .iter()
            .filter_map(|&t| result.error(C3New, t))
            .collect();
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        let ok = !ratios.is_empty() && ratios.iter().all(|r| (6.5..=9.5).contains(r));
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
        self.record(
            ok,
            format!(
                "{} C3New error ratio under halving in [6.5, 9.5]: {}",
                result.problem,
                shown.join(", ")
            ),
        );
    }
}

#[derive(Clone, Copy)]
enum Window {
    Closed(f64, f64),
    HalfOpen(f64, f64),
}

impl Window {
    fn contains(self, x: f64) -> bool {
        match self {
            Window::Closed(a, b) => RangeInclusive::new(a, b).contains(&x),
            Window::HalfOpen(a, b) => (a..b).contains(&x),
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Window::Closed(a, b) => write!(f, "[{a:.2}, {b:.2}]"),
            Window::HalfOpen(a, b) => write!(f, "[{a:.2}, {b:.2})"),
        }
    }
}

const THIRD: Window = Window::Closed(2.80, 3.15);
const SECOND: Window = Window::Closed(1.85, 2.15);
const BETWEEN: Window = Window::HalfOpen(1.0, 2.0);

fn ladder(problem: ProblemId, methods: &[SchemeId], cache: &std::path::Path) -> ConvergenceResult {
    let cfg = ConvergenceConfig {
        methods: methods.to_vec(),
        cache_dir: Some(cache.to_path_buf()),
        ..ConvergenceConfig::new(problem)
    };
    let result = run_convergence(&cfg).expect("convergence run");
    for cell in &result.cells {
        match &cell.outcome {
            Ok(d) => println!(
                "     {problem} {:<10} tau = {:<9.3e} error = {:.4e}",
                cell.method, cell.tau, d.error_l2
            ),
            Err(e) => println!("     {problem} {} tau = {:e} failed: {e}", cell.method, cell.tau),
        }
    }
    result
}

fn table_one(t: &mut Tally, cache: &std::path::Path) {
    let start = Instant::now();
    let sin = ladder(ProblemId::Heat1dSin, &[StrangNaiv, C3Naiv, C3New], cache);
    t.slope(&sin, StrangNaiv, SECOND);
    t.slope(&sin, C3Naiv, THIRD);
    t.slope(&sin, C3New, THIRD);
    t.runtime("heat1d-sin", start.elapsed(), 120);
    t.halving(&sin);

    let x2sin = ladder(ProblemId::Heat1dX2Sin, &[C3Naiv, C3New], cache);
    t.slope(&x2sin, C3Naiv, Window::Closed(1.7, 2.3));
    t.slope(&x2sin, C3New, THIRD);
    t.halving(&x2sin);

    let cos = ladder(ProblemId::Heat1dCos, &[StrangNaiv, StrangCorr, C3Naiv, C3New], cache);
    t.slope(&cos, StrangNaiv, BETWEEN);
    t.slope(&cos, C3Naiv, BETWEEN);
    t.slope(&cos, StrangCorr, SECOND);
    t.slope(&cos, C3New, THIRD);
    t.halving(&cos);
}

fn two_d(t: &mut Tally, cache: &std::path::Path) {
    let start = Instant::now();
    let result = ladder(ProblemId::Heat2dExpY7, &[C3Naiv, C3New], cache);
    t.slope(&result, C3New, THIRD);
    t.slope(&result, C3Naiv, BETWEEN);
    t.halving(&result);
    let problem = build_problem(ProblemId::Heat2dExpY7, None).expect("problem");
    let reference = &result.reference.field;
    let at = |m| {
        run_cell(&problem, m, 1e-3, 0.1, reference)
            .outcome
            .map(|d| d.error_l2)
            .unwrap_or(f64::NAN)
    };
    let (naive, new) = (at(C3Naiv), at(C3New));
    t.record(
        naive / new >= 1e3,
        format!(
            "heat2d-expy7 tau = 1e-3: C3Naiv {naive:.3e} / C3New {new:.3e} = {:.0} >= 1000",
            naive / new
        ),
    );
    t.runtime("heat2d-expy7", start.elapsed(), 600);
}

fn fisher(t: &mut Tally, cache: &std::path::Path) {
    let start = Instant::now();
    let result = ladder(ProblemId::FisherKpp, &[C3Naiv, C3New], cache);
    t.slope(&result, C3New, THIRD);
    t.slope(&result, C3Naiv, Window::Closed(0.8, 1.4));
    t.halving(&result);
    let problem = build_problem(ProblemId::FisherKpp, None).expect("problem");
    let reference = &result.reference.field;
    let naive = run_errorfield(&problem, C3Naiv, 1e-2, 0.1, reference).expect("C3Naiv field");
    let new = run_errorfield(&problem, C3New, 1e-2, 0.1, reference).expect("C3New field");
    let peak = naive.peak();
    t.record(
        peak.cells_to_boundary <= 2,
        format!(
            "fisher-kpp C3Naiv tau = 1e-2: max error {:.3e} at {:?}, {} cells from the boundary (<= 2)",
            peak.value, peak.coords, peak.cells_to_boundary
        ),
    );
    let (trace, interior) = (new.boundary_max(), new.interior_max());
    t.record(
        trace <= 1e-2 * interior,
        format!(
            "fisher-kpp C3New tau = 1e-2: boundary trace error {trace:.3e} <= 1e-2 x interior max {interior:.3e} \
             (first layer {:.3e})",
            new.layer_max(1)
        ),
    );
    let ratio = peak.value / new.peak().value;
    t.record(
        ratio >= 100.0,
        format!(
            "fisher-kpp tau = 1e-2: C3Naiv max {:.3e} / C3New max {:.3e} = {ratio:.0} >= 100",
            peak.value,
            new.peak().value
        ),
    );
    t.runtime("fisher-kpp", start.elapsed(), 600);
}

fn properties(t: &mut Tally) {
    let start = Instant::now();
    let report = run_verify();
    let took = start.elapsed();
    for check in &report.checks {
        t.record(check.passed, format!("{}: {}", check.name, check.detail));
    }
    t.runtime("property suite", took, 30);
}

fn main() -> ExitCode {
    // `cargo test <filter>` style arguments are accepted and ignored
    let cache = tempfile::tempdir().expect("temporary cache");
    println!("acceptance: fitted slopes drop points within {FLOOR_MARGIN}x of the expmv floor");
    let mut t = Tally::default();
    properties(&mut t);
    table_one(&mut t, cache.path());
    two_d(&mut t, cache.path());
    fisher(&mut t, cache.path());
    println!("acceptance: {} passed, {} failed", t.passed, t.failed);
    if t.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
