use std::fs;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use corrsplit::{ComplexCoeffs, SchemeId};

use corrsplit_harness::convergence::{parse_ladder, run_convergence, ConvergenceConfig, DEFAULT_T};
use corrsplit_harness::errorfield::run_errorfield;
use corrsplit_harness::problems::{build_problem, ProblemId};
use corrsplit_harness::reference::{reference_solution, RefMode, ReferenceSpec, DEFAULT_TAU_REF};
use corrsplit_harness::verify::{run_verify, run_verify_with};

/// Splitting integrators with boundary correctors: convergence experiments.
#[derive(Parser, Debug)]
#[command(name = "corrsplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error against the reference over a ladder of time steps.
    Convergence(ConvergenceArgs),
    /// Pointwise error of each method at one time step.
    Errorfield(ErrorfieldArgs),
    /// Run the property suite; nonzero exit status on any failure.
    Verify {
        /// Run with a sign error injected into the scheme coefficients; the
        /// exit status is zero when the suite catches it.
        #[arg(long)]
        self_test: bool,
    },
    /// Print the available problems.
    ListProblems,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    problem: ProblemId,
    /// Comma-separated methods (StrangNaiv, StrangCorr, C3Naiv, C3New).
    #[arg(long, value_delimiter = ',', default_value = "StrangNaiv,StrangCorr,C3Naiv,C3New")]
    methods: Vec<SchemeId>,
    /// Final time.
    #[arg(long = "T", default_value_t = DEFAULT_T)]
    t_final: f64,
    /// Grid spacing; the problem default when omitted.
    #[arg(long)]
    dx: Option<f64>,
    /// Step of the Strang reference.
    #[arg(long, default_value_t = DEFAULT_TAU_REF)]
    ref_tau: f64,
    /// Reference kind; affine for solution-independent sources, strang otherwise.
    #[arg(long)]
    ref_mode: Option<RefMode>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Reference cache directory (default: <out>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Do not read or write the reference cache.
    #[arg(long)]
    no_cache: bool,
}

impl Common {
    fn reference(&self) -> ReferenceSpec {
        ReferenceSpec {
            mode: self.ref_mode.unwrap_or_else(|| RefMode::default_for(self.problem)),
            tau_ref: self.ref_tau,
        }
    }

    fn cache_dir(&self) -> Option<PathBuf> {
        (!self.no_cache).then(|| self.cache.clone().unwrap_or_else(|| self.out.join("cache")))
    }
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Ladder indices k0..k1 for tau_k = 0.02 * 2^-k.
    #[arg(long, default_value = "0..6")]
    tau_ladder: String,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct ErrorfieldArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-2)]
    tau: f64,
}

fn convergence(args: ConvergenceArgs) -> anyhow::Result<()> {
    let c = &args.common;
    let cfg = ConvergenceConfig {
        problem: c.problem,
        methods: c.methods.clone(),
        t_final: c.t_final,
        dx: c.dx,
        taus: parse_ladder(&args.tau_ladder)?,
        reference: c.reference(),
        cache_dir: c.cache_dir(),
        jobs: args.jobs,
    };
    let result = run_convergence(&cfg)?;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    let csv_path = c.out.join(format!("convergence_{}.csv", c.problem));
    let file = fs::File::create(&csv_path).with_context(|| csv_path.display().to_string())?;
    result.write_csv(BufWriter::new(file))?;
    let summary = result.summary();
    let orders_path = c.out.join(format!("orders_{}.txt", c.problem));
    fs::write(&orders_path, &summary)?;
    print!("{summary}");
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn errorfield(args: ErrorfieldArgs) -> anyhow::Result<()> {
    let c = &args.common;
    let problem = build_problem(c.problem, c.dx)?;
    let reference =
        reference_solution(&problem, c.t_final, &c.reference(), c.cache_dir().as_deref())?;
    fs::create_dir_all(&c.out)?;
    for &method in &c.methods {
        let field = match run_errorfield(&problem, method, args.tau, c.t_final, &reference.field) {
            Ok(f) => f,
            Err(e) => {
                log::error!("{method} tau={:e} failed: {e:#}", args.tau);
                continue;
            }
        };
        let path = c
            .out
            .join(format!("errorfield_{}_{}_tau{:e}.csv", c.problem, method, args.tau));
        field.write_csv(BufWriter::new(fs::File::create(&path)?))?;
        let peak = field.peak();
        println!(
            "{method:<11} max |error| {:.3e} at {:?}, {} cells from the boundary; wrote {}",
            peak.value,
            &peak.coords[..problem.mesh.dim()],
            peak.cells_to_boundary,
            path.display()
        );
    }
    Ok(())
}

fn list_problems() -> io::Result<()> {
    for id in ProblemId::ALL {
        println!(
            "{:<14} {}D  dx = {:<6} reference = {:<6} {}",
            id.name(),
            id.dim(),
            id.default_dx(),
            RefMode::default_for(id).name(),
            id.description()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Convergence(args) => convergence(args),
        Command::Errorfield(args) => errorfield(args),
        Command::ListProblems => list_problems().map_err(Into::into),
        Command::Verify { self_test } => {
            let report = if self_test {
                run_verify_with(ComplexCoeffs::with_sign_error())
            } else {
                run_verify()
            };
            println!("{report}");
            return match (self_test, report.passed()) {
                (false, true) => ExitCode::SUCCESS,
                (true, false) => {
                    println!("self-test: injected coefficient error detected");
                    ExitCode::SUCCESS
                }
                (true, true) => {
                    println!("self-test: injected coefficient error went unnoticed");
                    ExitCode::FAILURE
                }
                (false, false) => ExitCode::FAILURE,
            };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
