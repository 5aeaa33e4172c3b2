//! Coefficient vectors of P1 finite element functions.
//!
//! Vector fields store their two components in separate blocks: entry
//! `c * n + i` is component `c` at node `i`.

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::scalar::Scalar;

/// Scalar P1 function on the reference domain (one value per vertex).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub values: Vec<T>,
}

/// Two-component P1 function on the reference domain.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    pub values: Vec<T>,
}

/// Two-component P1 function on the reference boundary, indexed by loop
/// position.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceField<T> {
    pub values: Vec<T>,
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteValue { index }),
        None => Ok(()),
    }
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_finite(&values)?;
        Ok(ScalarField { values })
    }

    pub fn constant(n: usize, value: T) -> Self {
        ScalarField { values: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at barycentric coordinates `l` of cell `t`.
    pub fn eval(&self, mesh: &Mesh<T>, t: usize, l: [T; 3]) -> T {
        let c = mesh.cells()[t];
        l[0] * self.values[c[0]] + l[1] * self.values[c[1]] + l[2] * self.values[c[2]]
    }
}

impl<T: Scalar> VectorField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_finite(&values)?;
        if values.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "vector field with odd length {}",
                values.len()
            )));
        }
        Ok(VectorField { values })
    }

    pub fn zeros(n: usize) -> Self {
        VectorField { values: vec![T::zero(); 2 * n] }
    }

    /// The identity map `x -> x`.
    pub fn identity(mesh: &Mesh<T>) -> Self {
        let n = mesh.n_vertices();
        let mut values = vec![T::zero(); 2 * n];
        for (i, v) in mesh.vertices().iter().enumerate() {
            values[i] = v[0];
            values[n + i] = v[1];
        }
        VectorField { values }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn at(&self, i: usize) -> [T; 2] {
        let n = self.n_nodes();
        [self.values[i], self.values[n + i]]
    }

    /// Value at barycentric coordinates `l` of cell `t`.
    pub fn eval(&self, mesh: &Mesh<T>, t: usize, l: [T; 3]) -> [T; 2] {
        let n = self.n_nodes();
        let c = mesh.cells()[t];
        let comp = |k: usize| {
            l[0] * self.values[k * n + c[0]] + l[1] * self.values[k * n + c[1]] + l[2] * self.values[k * n + c[2]]
        };
        [comp(0), comp(1)]
    }

    /// Jacobian `D u` on cell `t`: `jac[c][k] = d_k u_c`.
    pub fn cell_jacobian(&self, mesh: &Mesh<T>, t: usize) -> [[T; 2]; 2] {
        let n = self.n_nodes();
        let g = mesh.cell_gradients(t);
        let c = mesh.cells()[t];
        let mut jac = [[T::zero(); 2]; 2];
        for (comp, row) in jac.iter_mut().enumerate() {
            for (a, grad) in g.iter().enumerate() {
                let u = self.values[comp * n + c[a]];
                row[0] = row[0] + u * grad[0];
                row[1] = row[1] + u * grad[1];
            }
        }
        jac
    }

    pub fn axpy(&mut self, alpha: T, other: &VectorField<T>) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + alpha * b;
        }
    }

    /// Restriction to the boundary loop.
    pub fn trace(&self, mesh: &Mesh<T>) -> TraceField<T> {
        let n = self.n_nodes();
        let nb = mesh.n_boundary();
        let mut values = vec![T::zero(); 2 * nb];
        for (k, &v) in mesh.boundary_vertices().iter().enumerate() {
            values[k] = self.values[v];
            values[nb + k] = self.values[n + v];
        }
        TraceField { values }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Scalar> TraceField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_finite(&values)?;
        Ok(TraceField { values })
    }

    pub fn zeros(n_boundary: usize) -> Self {
        TraceField { values: vec![T::zero(); 2 * n_boundary] }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn at(&self, k: usize) -> [T; 2] {
        let n = self.n_nodes();
        [self.values[k], self.values[n + k]]
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Nodal interpolation of a scalar function.
pub fn interpolate<T: Scalar>(mesh: &Mesh<T>, f: impl Fn([T; 2]) -> T) -> Result<ScalarField<T>> {
    ScalarField::new(mesh.vertices().iter().map(|&x| f(x)).collect())
}

/// Nodal interpolation of a vector function.
pub fn interpolate_vector<T: Scalar>(mesh: &Mesh<T>, f: impl Fn([T; 2]) -> [T; 2]) -> Result<VectorField<T>> {
    let n = mesh.n_vertices();
    let mut values = vec![T::zero(); 2 * n];
    for (i, &x) in mesh.vertices().iter().enumerate() {
        let v = f(x);
        values[i] = v[0];
        values[n + i] = v[1];
    }
    VectorField::new(values)
}

/// Nodal interpolation of a vector function on the boundary loop.
pub fn interpolate_boundary<T: Scalar>(mesh: &Mesh<T>, g: impl Fn([T; 2]) -> [T; 2]) -> Result<TraceField<T>> {
    let nb = mesh.n_boundary();
    let mut values = vec![T::zero(); 2 * nb];
    for (k, &v) in mesh.boundary_vertices().iter().enumerate() {
        let y = g(mesh.vertices()[v]);
        values[k] = y[0];
        values[nb + k] = y[1];
    }
    TraceField::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        let m = Mesh::<f64>::disk(0.3).unwrap();
        let one = interpolate(&m, |_| 1.0).unwrap();
        assert!(one.values.iter().all(|&v| v == 1.0));
        let x1 = interpolate(&m, |x| x[0]).unwrap();
        for (i, v) in m.vertices().iter().enumerate() {
            assert_eq!(x1.values[i], v[0]);
        }
        let r2 = |x: [f64; 2]| x[0] * x[0] + x[1] * x[1];
        assert!((r2([0.6, 0.8]) - 1.0).abs() < 1e-15);
        let bad = interpolate(&m, |x| 1.0 / (x[0] * x[0] + x[1] * x[1]));
        assert!(matches!(bad, Err(Error::NonFiniteValue { index: 0 })));
    }

    #[test]
    fn boundary_interpolation_of_normal() {
        let m = Mesh::<f64>::disk(0.25).unwrap();
        let tr = interpolate_boundary(&m, |x| x).unwrap();
        for (k, &v) in m.boundary_vertices().iter().enumerate() {
            assert_eq!(tr.at(k), m.vertices()[v]);
        }
        let zero = interpolate_boundary(&m, |_| [0.0, 0.0]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn affine_reproduction_at_barycenters() {
        let m = Mesh::<f64>::disk(0.2).unwrap();
        let f = |x: [f64; 2]| 0.3 - 1.7 * x[0] + 2.5 * x[1];
        let u = interpolate(&m, f).unwrap();
        let third = 1.0 / 3.0;
        for (t, c) in m.cells().iter().enumerate() {
            let v = c.map(|i| m.vertices()[i]);
            let centre = [
                (v[0][0] + v[1][0] + v[2][0]) * third,
                (v[0][1] + v[1][1] + v[2][1]) * third,
            ];
            assert!((u.eval(&m, t, [third; 3]) - f(centre)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_unit_jacobian() {
        let m = Mesh::<f64>::disk(0.3).unwrap();
        let id = VectorField::identity(&m);
        for t in 0..m.n_cells() {
            let j = id.cell_jacobian(&m, t);
            assert!((j[0][0] - 1.0).abs() < 1e-12 && (j[1][1] - 1.0).abs() < 1e-12);
            assert!(j[0][1].abs() < 1e-12 && j[1][0].abs() < 1e-12);
        }
    }
}
