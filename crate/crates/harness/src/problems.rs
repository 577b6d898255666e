//! The benchmark problems: three 1D heat equations with different sources,
//! a 2D heat equation with inhomogeneous boundary data and Fisher-KPP.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context};
use corrsplit::{
    BoundarySpec, DiffusionCoefficients, Field64, Mesh64, SourceTerm, SplitContext64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Heat1dSin,
    Heat1dX2Sin,
    Heat1dCos,
    Heat2dExpY7,
    FisherKpp,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::Heat1dSin,
        ProblemId::Heat1dX2Sin,
        ProblemId::Heat1dCos,
        ProblemId::Heat2dExpY7,
        ProblemId::FisherKpp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Heat1dSin => "heat1d-sin",
            ProblemId::Heat1dX2Sin => "heat1d-x2sin",
            ProblemId::Heat1dCos => "heat1d-cos",
            ProblemId::Heat2dExpY7 => "heat2d-expy7",
            ProblemId::FisherKpp => "fisher-kpp",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ProblemId::Heat1dSin => "u_t = u_xx + sin(2 pi x), u = 0 on {0,1}, u0 = sin(2 pi x)",
            ProblemId::Heat1dX2Sin => {
                "u_t = u_xx + x^2 sin(2 pi x), u = 0 on {0,1}, u0 = sin(2 pi x)"
            }
            ProblemId::Heat1dCos => "u_t = u_xx + cos(2 pi x), u = 0 on {0,1}, u0 = sin(2 pi x)",
            ProblemId::Heat2dExpY7 => {
                "u_t = Lap u + e^x y^7 + 1 on (0,1)^2, u = x + y on the boundary, u0 = x + y"
            }
            ProblemId::FisherKpp => {
                "u_t = Lap u + u(1 - u) on (0,1)^2, u = 1/2 on the boundary, \
                 u0 = sin(2 pi x) sin(2 pi y) + 1/2"
            }
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemId::Heat2dExpY7 | ProblemId::FisherKpp => 2,
            _ => 1,
        }
    }

    pub fn default_dx(self) -> f64 {
        match self.dim() {
            1 => 2e-3,
            _ => 1e-2,
        }
    }

    /// Whether the source does not depend on the solution.
    pub fn independent_source(self) -> bool {
        self != ProblemId::FisherKpp
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .with_context(|| {
                let names: Vec<_> = ProblemId::ALL.iter().map(|p| p.name()).collect();
                format!("unknown problem {s:?}; valid ids: {}", names.join(", "))
            })
    }
}

/// An assembled problem.
pub struct Problem {
    pub id: ProblemId,
    pub mesh: Mesh64,
    pub ctx: SplitContext64,
    pub u0: Field64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("mesh", &self.mesh)
            .finish_non_exhaustive()
    }
}

fn sin2pi(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

/// Builds problem `id` on a grid of spacing `dx` (the problem default when
/// `None`).
pub fn build_problem(id: ProblemId, dx: Option<f64>) -> anyhow::Result<Problem> {
    let dx = dx.unwrap_or_else(|| id.default_dx());
    if !(dx > 0.0 && dx < 0.5) {
        bail!("grid spacing must lie in (0, 1/2), got {dx}");
    }
    let mesh = Mesh64::with_spacing(id.dim(), dx)?;
    let lap = DiffusionCoefficients::laplacian();
    let k2 = 4.0 * PI * PI;
    let (bc, source, u0) = match id {
        ProblemId::Heat1dSin => (
            BoundarySpec::homogeneous(),
            SourceTerm::independent_with_image(&mesh, |x| sin2pi(x[0]), |x| -k2 * sin2pi(x[0])),
            Field64::from_fn(mesh, |x| sin2pi(x[0])),
        ),
        ProblemId::Heat1dX2Sin => (
            BoundarySpec::homogeneous(),
            SourceTerm::independent_with_image(
                &mesh,
                |x| x[0] * x[0] * sin2pi(x[0]),
                |x| {
                    let (s, c) = (2.0 * PI * x[0]).sin_cos();
                    2.0 * s + 8.0 * PI * x[0] * c - k2 * x[0] * x[0] * s
                },
            ),
            Field64::from_fn(mesh, |x| sin2pi(x[0])),
        ),
        ProblemId::Heat1dCos => (
            BoundarySpec::homogeneous(),
            SourceTerm::independent_with_image(
                &mesh,
                |x| (2.0 * PI * x[0]).cos(),
                |x| -k2 * (2.0 * PI * x[0]).cos(),
            ),
            Field64::from_fn(mesh, |x| sin2pi(x[0])),
        ),
        ProblemId::Heat2dExpY7 => (
            BoundarySpec::dirichlet(|x: &[f64]| x[0] + x[1]),
            SourceTerm::independent_with_image(
                &mesh,
                |x| x[0].exp() * x[1].powi(7) + 1.0,
                |x| x[0].exp() * (x[1].powi(7) + 42.0 * x[1].powi(5)),
            ),
            Field64::from_fn(mesh, |x| x[0] + x[1]),
        ),
        ProblemId::FisherKpp => (
            BoundarySpec::dirichlet(|_: &[f64]| 0.5),
            SourceTerm::logistic(1.0)?,
            Field64::from_fn(mesh, |x| sin2pi(x[0]) * sin2pi(x[1]) + 0.5),
        ),
    };
    let ctx = SplitContext64::assemble(&mesh, &lap, &bc, source)?;
    Ok(Problem { id, mesh, ctx, u0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ProblemId::ALL {
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
        }
        let err = "heat3d".parse::<ProblemId>().unwrap_err().to_string();
        assert!(err.contains("fisher-kpp"));
    }

    #[test]
    fn default_grids() {
        let p = build_problem(ProblemId::Heat1dCos, None).unwrap();
        assert_eq!(p.mesh.n(), 499);
        let p = build_problem(ProblemId::FisherKpp, Some(0.05)).unwrap();
        assert_eq!(p.mesh.n(), 19);
        assert_eq!(p.mesh.dim(), 2);
    }
}
