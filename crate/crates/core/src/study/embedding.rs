//! Eulerian view of ALE solutions: embedding into a fixed background mesh.

use crate::error::{Error, Result};
use crate::fem::mesh::barycentric;
use crate::fem::{mass_matrix, Mesh, QuadratureTable, ScalarField, SparseMatrix, VectorField};
use crate::scalar::Scalar;

/// Uniform triangulation of `[-a, a]²`.
#[derive(Debug)]
pub struct Background<T: Scalar> {
    pub mesh: Mesh<T>,
    pub half_width: f64,
    pub spacing: f64,
    /// Vertices per side.
    pub side: usize,
    pub mass: SparseMatrix<T>,
}

pub const BACKGROUND_HALF_WIDTH: f64 = 3.0;

impl<T: Scalar> Background<T> {
    pub fn new(half_width: f64, target_h: f64) -> Result<Self> {
        if !(half_width > 0.0 && target_h > 0.0) {
            return Err(Error::Config("background size and spacing must be positive".into()));
        }
        let n = (2.0 * half_width / target_h).ceil() as usize;
        let spacing = 2.0 * half_width / n as f64;
        let side = n + 1;
        let mut vertices = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                vertices.push([
                    T::lit(-half_width + i as f64 * spacing),
                    T::lit(-half_width + j as f64 * spacing),
                ]);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v = j * side + i;
                cells.push([v, v + 1, v + side + 1]);
                cells.push([v, v + side + 1, v + side]);
            }
        }
        let mesh = Mesh::new(vertices, cells)?;
        let mass = mass_matrix(&mesh, &QuadratureTable::degree4());
        Ok(Background {
            mesh,
            half_width,
            spacing,
            side,
            mass,
        })
    }

    /// Values of `û ∘ Ψ⁻¹` at the background vertices, zero outside `Ψ(Ω̂)`.
    /// Points on mapped cell boundaries count as inside.
    pub fn embed(&self, mesh: &Mesh<T>, u_hat: &ScalarField<T>, psi: &VectorField<T>) -> Result<Vec<T>> {
        let a = T::lit(self.half_width);
        let h = T::lit(self.spacing);
        let nv = mesh.n_vertices();
        for &v in mesh.boundary_vertices() {
            let x = psi.at(v);
            if x[0].abs() > a || x[1].abs() > a {
                return Err(Error::PointLocationFailure(format!(
                    "deformed domain leaves the background square at ({:e}, {:e})",
                    x[0], x[1]
                )));
            }
        }
        let mut values = vec![T::zero(); self.side * self.side];
        let mut found = vec![false; values.len()];
        let tol = T::lit(1e-12);
        let last = (self.side - 1) as isize;
        for (t, c) in mesh.cells().iter().enumerate() {
            let p = c.map(|v| psi.at(v));
            let lo_x = p.iter().map(|q| q[0]).fold(T::infinity(), T::min);
            let hi_x = p.iter().map(|q| q[0]).fold(T::neg_infinity(), T::max);
            let lo_y = p.iter().map(|q| q[1]).fold(T::infinity(), T::min);
            let hi_y = p.iter().map(|q| q[1]).fold(T::neg_infinity(), T::max);
            let idx = |x: T, up: bool| -> isize {
                let r = ((x + a) / h).to_f64_lossy();
                let k = if up { r.ceil() } else { r.floor() } as isize;
                k.clamp(0, last)
            };
            for j in idx(lo_y, false)..=idx(hi_y, true) {
                for i in idx(lo_x, false)..=idx(hi_x, true) {
                    let k = j as usize * self.side + i as usize;
                    if found[k] {
                        continue;
                    }
                    let x = self.mesh.vertices()[k];
                    if let Some(l) = barycentric(&p[0], &p[1], &p[2], x, tol) {
                        values[k] = l[0] * u_hat.values[c[0]] + l[1] * u_hat.values[c[1]] + l[2] * u_hat.values[c[2]];
                        found[k] = true;
                    }
                }
            }
            debug_assert!(c.iter().all(|&v| v < nv), "cell {t}");
        }
        Ok(values)
    }
}
