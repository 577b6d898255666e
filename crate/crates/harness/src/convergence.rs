//! Convergence ladders: every (scheme, τ) cell is integrated to the final
//! time and compared with the reference.

use std::io;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use corrsplit::{estimate_order, integrate, Field64, SchemeId, StepStats};
use log::{info, warn};
use rayon::prelude::*;

use crate::problems::{build_problem, Problem, ProblemId};
use crate::reference::{reference_solution, Reference, ReferenceSpec};

pub const CSV_HEADER: [&str; 10] = [
    "problem",
    "method",
    "tau",
    "error_l2",
    "order_pairwise",
    "n_steps",
    "n_diffusion_flows",
    "n_source_flows",
    "n_corrector_solves",
    "wall_time_s",
];

pub const DEFAULT_T: f64 = 0.1;
pub const TAU_0: f64 = 0.02;

/// `τ_k = 0.02·2^{-k}` for `k` in `k0..=k1`.
pub fn tau_ladder(k0: u32, k1: u32) -> Vec<f64> {
    (k0..=k1).map(|k| TAU_0 / f64::from(1u32 << k)).collect()
}

/// Parses `k0..k1` (inclusive) into the corresponding ladder.
pub fn parse_ladder(text: &str) -> anyhow::Result<Vec<f64>> {
    let (a, b) = text
        .split_once("..")
        .with_context(|| format!("tau ladder {text:?} is not of the form k0..k1"))?;
    let k0: u32 = a.trim().parse().context("tau ladder start")?;
    let k1: u32 = b.trim().parse().context("tau ladder end")?;
    anyhow::ensure!(k0 <= k1 && k1 < 31, "tau ladder {text:?} must satisfy k0 <= k1 < 31");
    Ok(tau_ladder(k0, k1))
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub problem: ProblemId,
    pub methods: Vec<SchemeId>,
    pub t_final: f64,
    pub dx: Option<f64>,
    pub taus: Vec<f64>,
    pub reference: ReferenceSpec,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl ConvergenceConfig {
    pub fn new(problem: ProblemId) -> Self {
        Self {
            problem,
            methods: SchemeId::ALL.to_vec(),
            t_final: DEFAULT_T,
            dx: None,
            taus: tau_ladder(0, 6),
            reference: ReferenceSpec::default_for(problem),
            cache_dir: None,
            jobs: 0,
        }
    }
}

/// Result of one ladder cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: SchemeId,
    pub tau: f64,
    pub outcome: Result<CellData, String>,
}

#[derive(Debug, Clone)]
pub struct CellData {
    pub error_l2: f64,
    pub stats: StepStats,
    pub wall_time_s: f64,
    /// Error level set by the expmv tolerance, `tol · ||u_ref||`.
    pub floor: f64,
}

/// Integrates `scheme` with step `tau` and measures the L² distance of the
/// complex result to `reference`.
pub fn run_cell(
    problem: &Problem,
    scheme: SchemeId,
    tau: f64,
    t_final: f64,
    reference: &Field64,
) -> Cell {
    let started = Instant::now();
    let outcome = integrate(scheme, &problem.u0, tau, t_final, &problem.ctx)
        .map(|(u, stats)| {
            let wall_time_s = started.elapsed().as_secs_f64();
            let floor = problem.ctx.expmv_config().tol * reference.l2_norm();
            CellData {
                error_l2: u.sub(reference).l2_norm(),
                stats,
                wall_time_s,
                floor,
            }
        })
        .map_err(|e| e.to_string());
    match &outcome {
        Ok(d) => info!(
            "{} {scheme} tau={tau:e}: error {:.3e} in {:.2}s",
            problem.id, d.error_l2, d.wall_time_s
        ),
        Err(e) => warn!("{} {scheme} tau={tau:e} failed: {e}", problem.id),
    }
    Cell {
        method: scheme,
        tau,
        outcome,
    }
}

/// Observed order of one scheme's ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedOrder {
    pub method: SchemeId,
    /// Least-squares slope over the retained points.
    pub slope: Option<f64>,
    /// Steps of the retained points.
    pub taus_used: Vec<f64>,
    /// Steps dropped as saturated or as too close to the error floor.
    pub taus_dropped: Vec<f64>,
}

/// Points closer than this factor to the estimated floor are not fitted.
pub const FLOOR_MARGIN: f64 = 10.0;

/// Fits the order of one method's cells (in ladder order, τ decreasing).
///
/// Failed cells and cells within [`FLOOR_MARGIN`] of their floor are
/// dropped, and the ladder is cut where the error stops decreasing.
pub fn fit_order(method: SchemeId, cells: &[&Cell]) -> FittedOrder {
    let mut used: Vec<(f64, f64)> = Vec::new();
    let mut dropped = Vec::new();
    let mut saturated = false;
    for cell in cells {
        let keep = match &cell.outcome {
            Ok(d) if !saturated && d.error_l2 > FLOOR_MARGIN * d.floor => {
                match used.last() {
                    Some(&(_, prev)) if d.error_l2 >= prev => {
                        saturated = true;
                        false
                    }
                    _ => true,
                }
            }
            _ => false,
        };
        match (&cell.outcome, keep) {
            (Ok(d), true) => used.push((cell.tau, d.error_l2)),
            _ => dropped.push(cell.tau),
        }
    }
    let slope = estimate_order(&used).ok().map(|r| r.slope);
    FittedOrder {
        method,
        slope,
        taus_used: used.iter().map(|p| p.0).collect(),
        taus_dropped: dropped,
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub problem: ProblemId,
    /// Ordered by method (as configured), then by decreasing τ.
    pub cells: Vec<Cell>,
    pub fits: Vec<FittedOrder>,
    pub reference: Reference,
}

impl ConvergenceResult {
    pub fn cells_of(&self, method: SchemeId) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.method == method).collect()
    }

    pub fn fit(&self, method: SchemeId) -> Option<&FittedOrder> {
        self.fits.iter().find(|f| f.method == method)
    }

    pub fn error(&self, method: SchemeId, tau: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.tau == tau)
            .and_then(|c| c.outcome.as_ref().ok())
            .map(|d| d.error_l2)
    }

    /// Writes the CSV rows, one per cell.
    pub fn write_csv<W: io::Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for method in self.methods() {
            let mut prev: Option<(f64, f64)> = None;
            for cell in self.cells_of(method) {
                let mut record = vec![
                    self.problem.to_string(),
                    method.to_string(),
                    format!("{:e}", cell.tau),
                ];
                match &cell.outcome {
                    Ok(d) => {
                        let order = prev
                            .map(|(t, e)| (e / d.error_l2).ln() / (t / cell.tau).ln())
                            .map_or_else(String::new, |p| format!("{p:.6}"));
                        prev = Some((cell.tau, d.error_l2));
                        record.extend([
                            format!("{:e}", d.error_l2),
                            order,
                            d.stats.n_steps.to_string(),
                            d.stats.n_diffusion_flows.to_string(),
                            d.stats.n_source_flows.to_string(),
                            d.stats.n_corrector_solves.to_string(),
                            format!("{:.6}", d.wall_time_s),
                        ]);
                    }
                    Err(_) => {
                        prev = None;
                        record.extend(std::iter::repeat_n(String::new(), 7));
                    }
                }
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable summary of the fitted orders.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: fitted orders\n", self.problem);
        for f in &self.fits {
            let slope = f.slope.map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}"));
            s.push_str(&format!(
                "  {:<11} {slope:>6}  ({} points",
                f.method.name(),
                f.taus_used.len()
            ));
            if !f.taus_dropped.is_empty() {
                s.push_str(&format!(", {} dropped", f.taus_dropped.len()));
            }
            s.push_str(")\n");
        }
        for cell in &self.cells {
            if let Err(e) = &cell.outcome {
                s.push_str(&format!("  {} tau={:e} failed: {e}\n", cell.method, cell.tau));
            }
        }
        s
    }

    fn methods(&self) -> Vec<SchemeId> {
        let mut m: Vec<SchemeId> = Vec::new();
        for c in &self.cells {
            if !m.contains(&c.method) {
                m.push(c.method);
            }
        }
        m
    }
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// Runs the full ladder of `cfg`.
pub fn run_convergence(cfg: &ConvergenceConfig) -> anyhow::Result<ConvergenceResult> {
    anyhow::ensure!(!cfg.methods.is_empty(), "no methods selected");
    anyhow::ensure!(!cfg.taus.is_empty(), "empty tau ladder");
    anyhow::ensure!(cfg.t_final > 0.0, "final time must be positive");
    let problem = build_problem(cfg.problem, cfg.dx)?;
    let reference = reference_solution(
        &problem,
        cfg.t_final,
        &cfg.reference,
        cfg.cache_dir.as_deref(),
    )?;
    let mut taus = cfg.taus.clone();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    let jobs: Vec<(SchemeId, f64)> = cfg
        .methods
        .iter()
        .flat_map(|&m| taus.iter().map(move |&t| (m, t)))
        .collect();
    let cells: Vec<Cell> = pool(cfg.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(m, t)| run_cell(&problem, m, t, cfg.t_final, &reference.field))
            .collect()
    });
    let fits = cfg
        .methods
        .iter()
        .map(|&m| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.method == m).collect();
            fit_order(m, &mine)
        })
        .collect();
    Ok(ConvergenceResult {
        problem: cfg.problem,
        cells,
        fits,
        reference,
    })
}
