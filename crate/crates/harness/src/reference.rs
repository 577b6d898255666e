//! Reference solutions and their on-disk cache.
//!
//! A cached reference is a raw little-endian dump of the interior values
//! (`re, im` per node) next to a text sidecar holding the key and the
//! SHA-256 of the dump. Anything that does not match exactly is recomputed.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use corrsplit::{diffusion_flow, integrate, Field64, SchemeId, SourceTerm, C64};
use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::problems::{Problem, ProblemId};

/// How the reference is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    /// StrangNaiv with a small step.
    Strang,
    /// Exact flow of the semi-discrete affine problem; solution-independent
    /// sources only.
    Affine,
}

impl RefMode {
    pub fn name(self) -> &'static str {
        match self {
            RefMode::Strang => "strang",
            RefMode::Affine => "affine",
        }
    }

    pub fn default_for(id: ProblemId) -> Self {
        if id.independent_source() {
            RefMode::Affine
        } else {
            RefMode::Strang
        }
    }
}

impl fmt::Display for RefMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RefMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strang" => Ok(RefMode::Strang),
            "affine" => Ok(RefMode::Affine),
            other => bail!("unknown reference mode {other:?}; expected strang or affine"),
        }
    }
}

pub const DEFAULT_TAU_REF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub mode: RefMode,
    /// Step of the Strang reference; ignored by the affine mode.
    pub tau_ref: f64,
}

impl ReferenceSpec {
    pub fn default_for(id: ProblemId) -> Self {
        Self {
            mode: RefMode::default_for(id),
            tau_ref: DEFAULT_TAU_REF,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub field: Field64,
    /// Integration steps spent; zero when loaded from the cache.
    pub steps: usize,
    pub from_cache: bool,
}

/// Computes the reference at time `t_final` without touching the cache.
pub fn compute_reference(
    problem: &Problem,
    t_final: f64,
    spec: &ReferenceSpec,
) -> anyhow::Result<Reference> {
    let started = Instant::now();
    let (field, steps) = match spec.mode {
        RefMode::Affine => {
            let SourceTerm::Independent { interior, .. } = problem.ctx.source() else {
                bail!(
                    "the affine reference needs a solution-independent source; \
                     use --ref-mode strang for {}",
                    problem.id
                );
            };
            let f = Field64::from_real(problem.mesh, interior)?;
            let u = diffusion_flow(
                problem.ctx.operator(),
                Some(&f),
                C64::new(t_final, 0.0),
                &problem.u0,
                problem.ctx.expmv_config(),
            )?;
            (u, 1)
        }
        RefMode::Strang => {
            let (u, stats) =
                integrate(SchemeId::StrangNaiv, &problem.u0, spec.tau_ref, t_final, &problem.ctx)?;
            (u, stats.n_steps)
        }
    };
    info!(
        "reference for {} ({}) computed in {:.2?}",
        problem.id,
        spec.mode,
        started.elapsed()
    );
    Ok(Reference {
        field,
        steps,
        from_cache: false,
    })
}

/// Reference at `t_final`, read from `cache_dir` when a valid entry exists
/// and stored there otherwise.
pub fn reference_solution(
    problem: &Problem,
    t_final: f64,
    spec: &ReferenceSpec,
    cache_dir: Option<&Path>,
) -> anyhow::Result<Reference> {
    let Some(dir) = cache_dir else {
        return compute_reference(problem, t_final, spec);
    };
    let key = CacheKey::new(problem, t_final, spec);
    let (bin, sidecar) = key.paths(dir);
    if bin.exists() || sidecar.exists() {
        match load(&key, &bin, &sidecar, problem) {
            Ok(field) => {
                info!("reference loaded from {}", bin.display());
                return Ok(Reference {
                    field,
                    steps: 0,
                    from_cache: true,
                });
            }
            Err(e) => warn!("discarding cached reference {}: {e:#}; recomputing", bin.display()),
        }
    }
    let reference = compute_reference(problem, t_final, spec)?;
    store(&key, &bin, &sidecar, &reference.field)
        .with_context(|| format!("writing reference cache in {}", dir.display()))?;
    Ok(reference)
}

struct CacheKey {
    problem: ProblemId,
    mode: RefMode,
    dx: f64,
    t_final: f64,
    tau_ref: Option<f64>,
    nodes: usize,
}

impl CacheKey {
    fn new(problem: &Problem, t_final: f64, spec: &ReferenceSpec) -> Self {
        Self {
            problem: problem.id,
            mode: spec.mode,
            dx: problem.mesh.dx(),
            t_final,
            tau_ref: (spec.mode == RefMode::Strang).then_some(spec.tau_ref),
            nodes: problem.mesh.len(),
        }
    }

    fn tau_text(&self) -> String {
        self.tau_ref.map_or_else(|| "exact".to_string(), |t| format!("{t:e}"))
    }

    fn paths(&self, dir: &Path) -> (PathBuf, PathBuf) {
        let stem = format!(
            "ref_{}_{}_dx{:e}_T{:e}_tau{}",
            self.problem,
            self.mode,
            self.dx,
            self.t_final,
            self.tau_text()
        );
        (dir.join(format!("{stem}.bin")), dir.join(format!("{stem}.txt")))
    }

    fn sidecar(&self, checksum: &str) -> String {
        format!(
            "problem={}\nmode={}\ndx={:e}\nT={:e}\ntau_ref={}\nnodes={}\nsha256={checksum}\n",
            self.problem,
            self.mode,
            self.dx,
            self.t_final,
            self.tau_text(),
            self.nodes
        )
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn encode(field: &Field64) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(field.len() * 16);
    for z in field.values() {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    bytes
}

fn decode(bytes: &[u8]) -> Vec<C64> {
    bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect()
}

fn load(key: &CacheKey, bin: &Path, sidecar: &Path, problem: &Problem) -> anyhow::Result<Field64> {
    let text = fs::read_to_string(sidecar).context("reading sidecar")?;
    let checksum = text
        .lines()
        .find_map(|l| l.strip_prefix("sha256="))
        .context("sidecar has no checksum")?
        .trim()
        .to_string();
    if text != key.sidecar(&checksum) {
        bail!("sidecar does not match the requested key");
    }
    let bytes = fs::read(bin).context("reading field dump")?;
    if bytes.len() != key.nodes * 16 {
        bail!("field dump has {} bytes, expected {}", bytes.len(), key.nodes * 16);
    }
    if sha256_hex(&bytes) != checksum {
        bail!("checksum mismatch");
    }
    Ok(Field64::new(problem.mesh, decode(&bytes))?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn store(key: &CacheKey, bin: &Path, sidecar: &Path, field: &Field64) -> anyhow::Result<()> {
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir)?;
    }
    let bytes = encode(field);
    write_atomic(bin, &bytes)?;
    write_atomic(sidecar, key.sidecar(&sha256_hex(&bytes)).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips_bits() {
        let mesh = corrsplit::Mesh64::new(1, 5).unwrap();
        let values = vec![
            C64::new(0.1, -0.0),
            C64::new(f64::MIN_POSITIVE, 1e300),
            C64::new(-3.5, 2.0f64.sqrt()),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 3.0, -1.0 / 7.0),
        ];
        let field = Field64::new(mesh, values.clone()).unwrap();
        let back = decode(&encode(&field));
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Affine".parse::<RefMode>().unwrap(), RefMode::Affine);
        assert!("exact".parse::<RefMode>().is_err());
        assert_eq!(RefMode::default_for(ProblemId::FisherKpp), RefMode::Strang);
        assert_eq!(RefMode::default_for(ProblemId::Heat2dExpY7), RefMode::Affine);
    }
}
