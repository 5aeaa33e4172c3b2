//! Weighted symmetric-gradient extension of boundary data into the domain.

use crate::error::Result;
use crate::fem::assembly::symmetric_gradient_matrix;
use crate::fem::sparse::SparseSolver;
use crate::fem::{Mesh, SparseMatrix, TraceField, VectorField};
use crate::scalar::Scalar;

/// Solution operator of `-div[h⁻¹ (∇q + ∇qᵀ)] = 0` with Dirichlet data on the
/// boundary. The interior block is factorized once.
#[derive(Debug)]
pub struct ExtensionOperator<T: Scalar> {
    n: usize,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    k_ii: SparseSolver<T>,
    k_ib: SparseMatrix<T>,
}

impl<T: Scalar> ExtensionOperator<T> {
    pub fn new(mesh: &Mesh<T>) -> Result<Self> {
        let n = mesh.n_vertices();
        let nb = mesh.n_boundary();
        let interior: Vec<usize> = (0..n).filter(|&v| mesh.boundary_position(v).is_none()).collect();
        let ni = interior.len();
        let mut interior_pos = vec![usize::MAX; n];
        for (k, &v) in interior.iter().enumerate() {
            interior_pos[v] = k;
        }
        let k = symmetric_gradient_matrix(mesh);
        let mut ii = Vec::new();
        let mut ib = Vec::new();
        for (r, c, v) in k.entries() {
            let (rc, rv) = (r / n, r % n);
            if interior_pos[rv] == usize::MAX {
                continue;
            }
            let row = rc * ni + interior_pos[rv];
            let (cc, cv) = (c / n, c % n);
            match mesh.boundary_position(cv) {
                Some(p) => ib.push((row, cc * nb + p, v)),
                None => ii.push((row, cc * ni + interior_pos[cv], v)),
            }
        }
        let k_ii = SparseMatrix::from_triplets(2 * ni, 2 * ni, &ii)?.cholesky("extension")?;
        let k_ib = SparseMatrix::from_triplets(2 * ni, 2 * nb, &ib)?;
        Ok(ExtensionOperator {
            n,
            interior,
            boundary: mesh.boundary_vertices().to_vec(),
            k_ii,
            k_ib,
        })
    }

    /// Extends trace data `g` to a volume field.
    pub fn extend(&self, g: &TraceField<T>) -> Result<VectorField<T>> {
        let (n, ni, nb) = (self.n, self.interior.len(), self.boundary.len());
        let rhs: Vec<T> = self.k_ib.mul_vec(&g.values).into_iter().map(|v| -v).collect();
        let x = if ni > 0 { self.k_ii.solve(&rhs)? } else { Vec::new() };
        let mut out = vec![T::zero(); 2 * n];
        for c in 0..2 {
            for (k, &v) in self.interior.iter().enumerate() {
                out[c * n + v] = x[c * ni + k];
            }
            for (p, &v) in self.boundary.iter().enumerate() {
                out[c * n + v] = g.values[c * nb + p];
            }
        }
        VectorField::new(out)
    }
}
