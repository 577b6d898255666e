//! The four splitting integrators and the time-stepping loop.
//!
//! Compositions are written right to left as in the usual flow notation and
//! executed left to right in the code below.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex;

use crate::correctors::{build_corrector, build_projection_corrector, CorrectorPair};
use crate::error::{Result, SplitError};
use crate::expm_krylov::ExpmvConfig;
use crate::flows::{corrector_flow, diffusion_flow, source_flow, ComplexCoeffs, SourceTerm};
use crate::mesh_fd::{
    assemble_operator, BoundarySpec, DiffusionCoefficients, DiscreteOperator, Field, Mesh,
};
use crate::scalar::{creal, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// `φ^f_{τ/2} ∘ φ^D_τ ∘ φ^f_{τ/2}`
    StrangNaiv,
    /// Strang splitting with a projection corrector around the diffusion flow.
    StrangCorr,
    /// `φ^f_{āτ} ∘ φ^D_{2āτ} ∘ φ^f_{cτ} ∘ φ^D_{2aτ} ∘ φ^f_{aτ}`
    C3Naiv,
    /// `C3Naiv` with corrector flows around both diffusion flows.
    C3New,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::StrangNaiv,
        SchemeId::StrangCorr,
        SchemeId::C3Naiv,
        SchemeId::C3New,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::StrangNaiv => "StrangNaiv",
            SchemeId::StrangCorr => "StrangCorr",
            SchemeId::C3Naiv => "C3Naiv",
            SchemeId::C3New => "C3New",
        }
    }

    /// Order on smooth, non-stiff problems.
    pub fn formal_order(self) -> u32 {
        match self {
            SchemeId::StrangNaiv | SchemeId::StrangCorr => 2,
            SchemeId::C3Naiv | SchemeId::C3New => 3,
        }
    }

    /// Flow counts of a single step.
    pub fn flows_per_step(self) -> StepStats {
        let (diffusion, source, corrector) = match self {
            SchemeId::StrangNaiv => (1, 2, 0),
            SchemeId::StrangCorr => (1, 2, 2),
            SchemeId::C3Naiv => (2, 3, 0),
            SchemeId::C3New => (2, 3, 4),
        };
        StepStats {
            n_steps: 1,
            n_diffusion_flows: diffusion,
            n_source_flows: source,
            n_corrector_solves: corrector,
            n_elliptic_solves: 0,
        }
    }

    /// Real parts of the diffusion substeps, in units of `τ`. They always
    /// sum to one.
    pub fn diffusion_substeps<T: Real>(self, coeffs: &ComplexCoeffs<T>) -> Vec<Complex<T>> {
        match self {
            SchemeId::StrangNaiv | SchemeId::StrangCorr => vec![creal(T::one())],
            SchemeId::C3Naiv | SchemeId::C3New => {
                vec![coeffs.a * T::lit(2.0), coeffs.abar * T::lit(2.0)]
            }
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                SplitError::Config(format!(
                    "unknown method {s:?}; expected one of StrangNaiv, StrangCorr, C3Naiv, C3New"
                ))
            })
    }
}

/// Flow and solve counters.
///
/// `n_corrector_solves` counts corrector flows `u - t q` (four per step for
/// `C3New`, two for `StrangCorr`); the elliptic solves behind the correctors
/// are counted separately in `n_elliptic_solves`, which stays zero after the
/// first step when the correctors are cached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub n_steps: usize,
    pub n_diffusion_flows: usize,
    pub n_source_flows: usize,
    pub n_corrector_solves: usize,
    pub n_elliptic_solves: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, rhs: Self) {
        self.n_steps += rhs.n_steps;
        self.n_diffusion_flows += rhs.n_diffusion_flows;
        self.n_source_flows += rhs.n_source_flows;
        self.n_corrector_solves += rhs.n_corrector_solves;
        self.n_elliptic_solves += rhs.n_elliptic_solves;
    }
}

type Cached<T> = OnceLock<std::result::Result<CorrectorPair<T>, SplitError>>;

/// Everything a step needs: operator with folded boundary data, source,
/// coefficients and the Krylov settings. Correctors of solution-independent
/// sources are computed on first use and shared afterwards.
pub struct SplitContext<T> {
    op: DiscreteOperator<T>,
    source: SourceTerm<T>,
    coeffs: ComplexCoeffs<T>,
    expmv: ExpmvConfig<T>,
    suppress_correctors: bool,
    c3_pair: Cached<T>,
    projection_pair: Cached<T>,
}

impl<T: Real> SplitContext<T> {
    pub fn new(op: DiscreteOperator<T>, source: SourceTerm<T>) -> Self {
        Self {
            op,
            source,
            coeffs: ComplexCoeffs::standard(),
            expmv: ExpmvConfig::default(),
            suppress_correctors: false,
            c3_pair: OnceLock::new(),
            projection_pair: OnceLock::new(),
        }
    }

    pub fn assemble(
        mesh: &Mesh<T>,
        coeffs: &DiffusionCoefficients<T>,
        bc: &BoundarySpec<T>,
        source: SourceTerm<T>,
    ) -> Result<Self> {
        Ok(Self::new(assemble_operator(mesh, coeffs, bc)?, source))
    }

    pub fn with_coeffs(mut self, coeffs: ComplexCoeffs<T>) -> Self {
        self.coeffs = coeffs;
        self
    }

    pub fn with_expmv(mut self, cfg: ExpmvConfig<T>) -> Self {
        self.expmv = cfg;
        self
    }

    /// Forces every corrector to zero, turning the corrected schemes into
    /// their naive counterparts. Diagnostic use only.
    pub fn without_correctors(mut self) -> Self {
        self.suppress_correctors = true;
        self
    }

    pub fn operator(&self) -> &DiscreteOperator<T> {
        &self.op
    }

    pub fn mesh(&self) -> &Mesh<T> {
        self.op.mesh()
    }

    pub fn source(&self) -> &SourceTerm<T> {
        &self.source
    }

    pub fn coeffs(&self) -> &ComplexCoeffs<T> {
        &self.coeffs
    }

    pub fn expmv_config(&self) -> &ExpmvConfig<T> {
        &self.expmv
    }

    fn zero_pair(&self, tau_j: Complex<T>, block: usize) -> CorrectorPair<T> {
        let mesh = *self.mesh();
        CorrectorPair {
            q: Field::zeros(mesh),
            r: Field::zeros(mesh),
            q_trace: vec![creal(T::zero()); mesh.boundary_len()],
            r_trace: vec![creal(T::zero()); mesh.boundary_len()],
            tau_j,
            block,
        }
    }

    /// Corrector of the third-order scheme for block `block` with entry
    /// state `omega`.
    pub fn corrector(
        &self,
        omega: &Field<T>,
        tau_j: Complex<T>,
        block: usize,
        stats: &mut StepStats,
    ) -> Result<Cow<'_, CorrectorPair<T>>> {
        if self.suppress_correctors {
            return Ok(Cow::Owned(self.zero_pair(tau_j, block)));
        }
        if self.source.is_independent() {
            let pair = self.c3_pair.get_or_init(|| {
                stats.n_elliptic_solves += 2;
                build_corrector(&self.source, omega, tau_j, &self.op, 0)
            });
            return pair.as_ref().map(Cow::Borrowed).map_err(Clone::clone);
        }
        stats.n_elliptic_solves += 2;
        build_corrector(&self.source, omega, tau_j, &self.op, block).map(Cow::Owned)
    }

    /// Projection corrector of the corrected Strang scheme.
    pub fn projection_corrector(
        &self,
        omega: &Field<T>,
        tau_j: Complex<T>,
        stats: &mut StepStats,
    ) -> Result<Cow<'_, CorrectorPair<T>>> {
        if self.suppress_correctors {
            return Ok(Cow::Owned(self.zero_pair(tau_j, 0)));
        }
        if self.source.is_independent() {
            let pair = self.projection_pair.get_or_init(|| {
                stats.n_elliptic_solves += 1;
                build_projection_corrector(&self.source, omega, tau_j, &self.op)
            });
            return pair.as_ref().map(Cow::Borrowed).map_err(Clone::clone);
        }
        stats.n_elliptic_solves += 1;
        build_projection_corrector(&self.source, omega, tau_j, &self.op).map(Cow::Owned)
    }

    fn source_flow(&self, t: Complex<T>, u: &Field<T>, stats: &mut StepStats) -> Result<Field<T>> {
        stats.n_source_flows += 1;
        source_flow(&self.source, t, u)
    }

    fn diffusion_flow(
        &self,
        q: Option<&Field<T>>,
        t: Complex<T>,
        u: &Field<T>,
        stats: &mut StepStats,
    ) -> Result<Field<T>> {
        stats.n_diffusion_flows += 1;
        diffusion_flow(&self.op, q, t, u, &self.expmv)
    }

    /// `φ^{-q}_{h} ∘ φ^{D+q}_{2h'} ∘ φ^{-q}_{h}` where the diffusion step is
    /// `diffusion_t` and each corrector flow runs over `corrector_t`.
    fn corrected_diffusion(
        &self,
        pair: &CorrectorPair<T>,
        corrector_t: Complex<T>,
        diffusion_t: Complex<T>,
        u: &Field<T>,
        stats: &mut StepStats,
    ) -> Result<Field<T>> {
        stats.n_corrector_solves += 2;
        if pair.is_zero() {
            return self.diffusion_flow(None, diffusion_t, u, stats);
        }
        let v = corrector_flow(&pair.q, corrector_t, u);
        let v = self.diffusion_flow(Some(&pair.q), diffusion_t, &v, stats)?;
        Ok(corrector_flow(&pair.q, corrector_t, &v))
    }
}

impl<T: Real> fmt::Debug for SplitContext<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SplitContext")
            .field("op", &self.op)
            .field("source", &self.source)
            .field("coeffs", &self.coeffs)
            .finish_non_exhaustive()
    }
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(SplitError::Config(format!(
            "time step must be positive and finite, got {tau}"
        )));
    }
    Ok(())
}

pub fn step_strang_naiv<T: Real>(
    u: &Field<T>,
    tau: T,
    ctx: &SplitContext<T>,
    stats: &mut StepStats,
) -> Result<Field<T>> {
    check_tau(tau)?;
    let half = creal(tau / T::lit(2.0));
    let v = ctx.source_flow(half, u, stats)?;
    let v = ctx.diffusion_flow(None, creal(tau), &v, stats)?;
    let v = ctx.source_flow(half, &v, stats)?;
    stats.n_steps += 1;
    Ok(v)
}

pub fn step_strang_corr<T: Real>(
    u: &Field<T>,
    tau: T,
    ctx: &SplitContext<T>,
    stats: &mut StepStats,
) -> Result<Field<T>> {
    check_tau(tau)?;
    let half = creal(tau / T::lit(2.0));
    let pair = ctx.projection_corrector(u, half, stats)?;
    let v = ctx.source_flow(half, u, stats)?;
    let v = ctx.corrected_diffusion(&pair, half, creal(tau), &v, stats)?;
    let v = ctx.source_flow(half, &v, stats)?;
    stats.n_steps += 1;
    Ok(v)
}

pub fn step_c3_naiv<T: Real>(
    u: &Field<T>,
    tau: T,
    ctx: &SplitContext<T>,
    stats: &mut StepStats,
) -> Result<Field<T>> {
    check_tau(tau)?;
    let k = ctx.coeffs;
    let two = T::lit(2.0);
    let v = ctx.source_flow(k.a * tau, u, stats)?;
    let v = ctx.diffusion_flow(None, k.a * (two * tau), &v, stats)?;
    let v = ctx.source_flow(creal(k.c * tau), &v, stats)?;
    let v = ctx.diffusion_flow(None, k.abar * (two * tau), &v, stats)?;
    let v = ctx.source_flow(k.abar * tau, &v, stats)?;
    stats.n_steps += 1;
    Ok(v)
}

pub fn step_c3_new<T: Real>(
    u: &Field<T>,
    tau: T,
    ctx: &SplitContext<T>,
    stats: &mut StepStats,
) -> Result<Field<T>> {
    check_tau(tau)?;
    let k = ctx.coeffs;
    let two = T::lit(2.0);
    let (tau1, tau2) = (k.a * tau, k.abar * tau);

    let first = ctx.corrector(u, tau1, 1, stats)?;
    let v = ctx.source_flow(tau1, u, stats)?;
    let v = ctx.corrected_diffusion(&first, tau1, tau1 * two, &v, stats)?;
    let omega2 = ctx.source_flow(creal(k.c * tau), &v, stats)?;
    drop(first);

    let second = ctx.corrector(&omega2, tau2, 2, stats)?;
    let v = ctx.corrected_diffusion(&second, tau2, tau2 * two, &omega2, stats)?;
    let v = ctx.source_flow(tau2, &v, stats)?;
    stats.n_steps += 1;
    Ok(v)
}

/// One step of `scheme`.
pub fn step<T: Real>(
    scheme: SchemeId,
    u: &Field<T>,
    tau: T,
    ctx: &SplitContext<T>,
    stats: &mut StepStats,
) -> Result<Field<T>> {
    match scheme {
        SchemeId::StrangNaiv => step_strang_naiv(u, tau, ctx, stats),
        SchemeId::StrangCorr => step_strang_corr(u, tau, ctx, stats),
        SchemeId::C3Naiv => step_c3_naiv(u, tau, ctx, stats),
        SchemeId::C3New => step_c3_new(u, tau, ctx, stats),
    }
}

/// Number of steps of size `tau` that reach `t_final`.
///
/// Decimal ladders such as `0.1 / 1e-6` miss an integer by one rounding, so a
/// few ulps of slack are allowed.
pub fn step_count<T: Real>(tau: T, t_final: T) -> Result<usize> {
    check_tau(tau)?;
    if !(t_final >= T::zero()) || !t_final.is_finite() {
        return Err(SplitError::Config(format!(
            "final time must be nonnegative and finite, got {t_final}"
        )));
    }
    let ratio = t_final / tau;
    let steps = ratio.round();
    let slack = T::lit(4.0) * T::epsilon() * ratio.max(T::one());
    if (ratio - steps).abs() > slack {
        return Err(SplitError::Config(format!(
            "T / tau = {ratio} is not an integer (T = {t_final}, tau = {tau})"
        )));
    }
    steps
        .to_usize()
        .ok_or_else(|| SplitError::Config(format!("step count {steps} out of range")))
}

/// Integrates from `0` to `t_final` with constant step `tau`.
pub fn integrate<T: Real>(
    scheme: SchemeId,
    u0: &Field<T>,
    tau: T,
    t_final: T,
    ctx: &SplitContext<T>,
) -> Result<(Field<T>, StepStats)> {
    if u0.mesh() != ctx.mesh() {
        return Err(SplitError::DimensionMismatch {
            expected: ctx.mesh().len(),
            got: u0.len(),
        });
    }
    let steps = step_count(tau, t_final)?;
    let mut stats = StepStats::default();
    let mut u = u0.clone();
    for _ in 0..steps {
        u = step(scheme, &u, tau, ctx, &mut stats)?;
    }
    Ok((u, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use std::f64::consts::PI;

    fn heat_ctx(n: usize, f: impl Fn(&[f64]) -> f64) -> SplitContext<f64> {
        let mesh = Mesh::new(1, n).unwrap();
        let source = SourceTerm::independent(&mesh, f);
        SplitContext::assemble(
            &mesh,
            &DiffusionCoefficients::laplacian(),
            &BoundarySpec::homogeneous(),
            source,
        )
        .unwrap()
    }

    #[test]
    fn names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
        }
        assert_eq!("c3new".parse::<SchemeId>().unwrap(), SchemeId::C3New);
        assert!("C4".parse::<SchemeId>().is_err());
    }

    #[test]
    fn diffusion_substeps_sum_to_one() {
        let k = ComplexCoeffs::<f64>::standard();
        for id in SchemeId::ALL {
            let total: Complex<f64> = id.diffusion_substeps(&k).into_iter().sum();
            assert!((total - cplx(1.0, 0.0)).norm() < 1e-15, "{id}");
        }
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.02 / 64.0, 0.1).unwrap(), 320);
        assert_eq!(step_count(1e-6, 0.1).unwrap(), 100_000);
        assert_eq!(step_count(0.02, 0.02).unwrap(), 1);
        assert!(step_count(0.03, 0.1).is_err());
        assert!(step_count(-0.01, 0.1).is_err());
    }

    #[test]
    fn stats_match_flow_counts() {
        let ctx = heat_ctx(30, |x| (2.0 * PI * x[0]).cos());
        let u0 = Field::from_fn(*ctx.mesh(), |x| (2.0 * PI * x[0]).sin());
        for id in SchemeId::ALL {
            let (_, stats) = integrate(id, &u0, 0.025, 0.1, &ctx).unwrap();
            let per = id.flows_per_step();
            assert_eq!(stats.n_steps, 4);
            assert_eq!(stats.n_diffusion_flows, 4 * per.n_diffusion_flows, "{id}");
            assert_eq!(stats.n_source_flows, 4 * per.n_source_flows, "{id}");
            assert_eq!(stats.n_corrector_solves, 4 * per.n_corrector_solves, "{id}");
        }
    }

    #[test]
    fn strang_schemes_stay_real() {
        let ctx = heat_ctx(30, |x| (2.0 * PI * x[0]).cos());
        let u0 = Field::from_fn(*ctx.mesh(), |x| (2.0 * PI * x[0]).sin());
        for id in [SchemeId::StrangNaiv, SchemeId::StrangCorr] {
            let (u, _) = integrate(id, &u0, 0.01, 0.05, &ctx).unwrap();
            assert!(u.max_imag() < 1e-14, "{id}");
        }
    }

    #[test]
    fn suppressed_correctors_give_naive_scheme() {
        let ctx = heat_ctx(40, |x| (2.0 * PI * x[0]).cos()).without_correctors();
        let u0 = Field::from_fn(*ctx.mesh(), |x| (2.0 * PI * x[0]).sin());
        let mut s = StepStats::default();
        let a = step_c3_new(&u0, 0.01, &ctx, &mut s).unwrap();
        let b = step_c3_naiv(&u0, 0.01, &ctx, &mut s).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12);
    }
}
