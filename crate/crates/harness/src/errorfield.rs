//! Pointwise error of one scheme at the final time.

use std::io;

use corrsplit::{integrate, Field64, Mesh64, SchemeId};

use crate::problems::Problem;

/// `|u_N - u_ref|` on the full grid; boundary nodes carry the Dirichlet
/// data in both solutions and hold zero.
#[derive(Debug, Clone)]
pub struct ErrorField {
    pub mesh: Mesh64,
    pub values: Vec<f64>,
}

/// Location and size of the largest entry of an [`ErrorField`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPeak {
    pub value: f64,
    pub coords: [f64; 2],
    /// Grid cells between the node and the nearest boundary node.
    pub cells_to_boundary: usize,
}

impl ErrorField {
    pub fn from_fields(u: &Field64, reference: &Field64) -> Self {
        let mesh = *u.mesh();
        let interior: Vec<f64> = u.sub(reference).values().iter().map(|z| z.norm()).collect();
        let boundary = vec![0.0; mesh.boundary_len()];
        Self {
            mesh,
            values: mesh.embed(&interior, &boundary),
        }
    }

    pub fn peak(&self) -> ErrorPeak {
        let (k, &value) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        ErrorPeak {
            value,
            coords: self.mesh.full_coords(k),
            cells_to_boundary: self.mesh.cells_to_boundary(k),
        }
    }

    /// Largest error on the boundary nodes.
    pub fn boundary_max(&self) -> f64 {
        self.max_where(|c| c == 0)
    }

    /// Largest error on the interior nodes.
    pub fn interior_max(&self) -> f64 {
        self.max_where(|c| c > 0)
    }

    /// Largest error at nodes whose distance to the boundary is `cells`.
    pub fn layer_max(&self, cells: usize) -> f64 {
        self.max_where(|c| c == cells)
    }

    fn max_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|&(k, _)| keep(self.mesh.cells_to_boundary(k)))
            .map(|(_, &v)| v)
            .fold(0.0, f64::max)
    }

    /// Writes `x[,y],abs_error`, one row per node of the full grid.
    pub fn write_csv<W: io::Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.mesh.dim();
        if dim == 1 {
            w.write_record(["x", "abs_error"])?;
        } else {
            w.write_record(["x", "y", "abs_error"])?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let c = self.mesh.full_coords(k);
            let mut record: Vec<String> = c[..dim].iter().map(|x| format!("{x:e}")).collect();
            record.push(format!("{v:e}"));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `scheme` to `t_final` and returns its error field.
pub fn run_errorfield(
    problem: &Problem,
    scheme: SchemeId,
    tau: f64,
    t_final: f64,
    reference: &Field64,
) -> anyhow::Result<ErrorField> {
    let (u, _) = integrate(scheme, &problem.u0, tau, t_final, &problem.ctx)?;
    Ok(ErrorField::from_fields(&u, reference))
}
