//! Transformation quantities of a P1 map and the pulled-back coefficient
//! fields `c1 .. c7`.
//!
//! For a P1 transformation the Jacobian `F` is constant on each cell, so
//! every volume quadrature point of a cell shares the cell's `F` and `J`, and
//! every boundary point uses the `F` of the adjacent cell together with the
//! polygonal reference normal of its edge.

use crate::error::{Error, Result};
use crate::fem::assembly::{n_points, Coefficient, PointSet};
use crate::fem::quadrature::{QuadratureTable, BOUNDARY_POINTS, VOLUME_POINTS};
use crate::fem::{Mesh, ScalarField, VectorField};
use crate::scalar::Scalar;

/// Mappings with `J` at or below this value are treated as folded.
pub const DEGENERATE_J: f64 = 1e-12;

pub type Mat2<T> = [[T; 2]; 2];

/// Per-point geometry of a transformation. Volume data is stored per cell
/// and boundary data per edge; see the module docs for why that is exact.
#[derive(Clone, Debug)]
pub struct TransformQuantities<T> {
    pub cell_f: Vec<Mat2<T>>,
    pub cell_j: Vec<T>,
    pub edge_j_gamma: Vec<T>,
    pub edge_normal: Vec<[T; 2]>,
    pub edge_projector: Vec<Mat2<T>>,
}

impl<T: Scalar> TransformQuantities<T> {
    /// `F` and `J` at volume quadrature point `p`.
    pub fn volume_point(&self, p: usize) -> (Mat2<T>, T) {
        let t = p / VOLUME_POINTS;
        (self.cell_f[t], self.cell_j[t])
    }

    /// `J_Γ`, `n` and `P` at boundary quadrature point `p`.
    pub fn boundary_point(&self, p: usize) -> (T, [T; 2], Mat2<T>) {
        let e = p / BOUNDARY_POINTS;
        (self.edge_j_gamma[e], self.edge_normal[e], self.edge_projector[e])
    }
}

pub fn det<T: Scalar>(f: &Mat2<T>) -> T {
    f[0][0] * f[1][1] - f[0][1] * f[1][0]
}

fn inverse<T: Scalar>(f: &Mat2<T>, j: T) -> Mat2<T> {
    [[f[1][1] / j, -f[0][1] / j], [-f[1][0] / j, f[0][0] / j]]
}

/// Boundary frame from `F` and the reference normal: returns
/// `(J_Γ, n, P, F⁻ᵀ n̂)`.
fn boundary_frame<T: Scalar>(f_inv: &Mat2<T>, j: T, n_hat: [T; 2]) -> (T, [T; 2], Mat2<T>, [T; 2]) {
    // F⁻ᵀ n̂, with (F⁻ᵀ)[a][b] = F⁻¹[b][a]
    let m = [
        f_inv[0][0] * n_hat[0] + f_inv[1][0] * n_hat[1],
        f_inv[0][1] * n_hat[0] + f_inv[1][1] * n_hat[1],
    ];
    let norm = m[0].hypot(m[1]);
    let n = [m[0] / norm, m[1] / norm];
    let p = [
        [T::one() - n[0] * n[0], -n[0] * n[1]],
        [-n[1] * n[0], T::one() - n[1] * n[1]],
    ];
    (norm * j, n, p, m)
}

/// Geometry of the transformation `psi` (which stores `Ψ`, not `Ψ - id`).
pub fn transform_quantities<T: Scalar>(mesh: &Mesh<T>, psi: &VectorField<T>) -> Result<TransformQuantities<T>> {
    check_len(mesh, psi)?;
    let mut cell_f = Vec::with_capacity(mesh.n_cells());
    let mut cell_j = Vec::with_capacity(mesh.n_cells());
    for t in 0..mesh.n_cells() {
        let f = psi.cell_jacobian(mesh, t);
        let j = det(&f);
        if !(j > T::lit(DEGENERATE_J)) {
            return Err(Error::DegenerateMapping {
                cell: t,
                jacobian: j.to_f64_lossy(),
            });
        }
        cell_f.push(f);
        cell_j.push(j);
    }
    let ne = mesh.boundary_edges().len();
    let mut edge_j_gamma = Vec::with_capacity(ne);
    let mut edge_normal = Vec::with_capacity(ne);
    let mut edge_projector = Vec::with_capacity(ne);
    for e in 0..ne {
        let t = mesh.boundary_edge_cell(e);
        let f_inv = inverse(&cell_f[t], cell_j[t]);
        let (jg, n, p, _) = boundary_frame(&f_inv, cell_j[t], mesh.edge_normal(e));
        edge_j_gamma.push(jg);
        edge_normal.push(n);
        edge_projector.push(p);
    }
    Ok(TransformQuantities {
        cell_f,
        cell_j,
        edge_j_gamma,
        edge_normal,
        edge_projector,
    })
}

fn check_len<T: Scalar>(mesh: &Mesh<T>, psi: &VectorField<T>) -> Result<()> {
    if psi.values.len() != 2 * mesh.n_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "transformation has {} entries, mesh needs {}",
            psi.values.len(),
            2 * mesh.n_vertices()
        )));
    }
    Ok(())
}

/// All components of `c_i` at one point, given the local Jacobian `f`.
///
/// `n_hat` is only read for boundary coefficients, `eta` only for `c4` and
/// `phi` only for `c7`. Returns `None` when `det f ≤ 1e-12`. Unused trailing
/// entries of the result are zero.
pub fn local_coefficient<T: Scalar>(c: Coefficient, f: &Mat2<T>, n_hat: [T; 2], eta: [T; 2], phi: T) -> Option<[T; 4]> {
    let j = det(f);
    if !(j > T::lit(DEGENERATE_J)) {
        return None;
    }
    let fi = inverse(f, j);
    let z = T::zero();
    Some(match c {
        Coefficient::C3 => [j, z, z, z],
        Coefficient::C4 => [
            j * (fi[0][0] * eta[0] + fi[0][1] * eta[1]),
            j * (fi[1][0] * eta[0] + fi[1][1] * eta[1]),
            z,
            z,
        ],
        Coefficient::C5 => {
            // J F⁻¹ F⁻ᵀ
            let a = j * (fi[0][0] * fi[0][0] + fi[0][1] * fi[0][1]);
            let b = j * (fi[0][0] * fi[1][0] + fi[0][1] * fi[1][1]);
            let d = j * (fi[1][0] * fi[1][0] + fi[1][1] * fi[1][1]);
            [a, b, b, d]
        }
        Coefficient::C1 | Coefficient::C2 | Coefficient::C6 | Coefficient::C7 => {
            let (jg, _, p, m) = boundary_frame(&fi, j, n_hat);
            match c {
                Coefficient::C1 => [jg, z, z, z],
                Coefficient::C7 => [jg * m[0] * phi, jg * m[1] * phi, z, z],
                _ => {
                    // F⁻¹ P
                    let mut fp = [[z; 2]; 2];
                    for r in 0..2 {
                        for s in 0..2 {
                            fp[r][s] = fi[r][0] * p[0][s] + fi[r][1] * p[1][s];
                        }
                    }
                    if c == Coefficient::C6 {
                        [jg * fp[0][0], jg * fp[0][1], jg * fp[1][0], jg * fp[1][1]]
                    } else {
                        // (F⁻¹ P) F⁻ᵀ
                        let mut out = [z; 4];
                        for r in 0..2 {
                            for s in 0..2 {
                                out[2 * r + s] = jg * (fp[r][0] * fi[s][0] + fp[r][1] * fi[s][1]);
                            }
                        }
                        out
                    }
                }
            }
        }
    })
}

/// Samples of one coefficient field at its quadrature point set.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSamples<T> {
    pub coefficient: Coefficient,
    /// `values[p * d + k]` is component `k` at point `p`.
    pub values: Vec<T>,
}

impl<T: Scalar> CoefficientSamples<T> {
    pub fn components(&self) -> usize {
        self.coefficient.components()
    }

    pub fn point_set(&self) -> PointSet {
        self.coefficient.point_set()
    }

    pub fn n_points(&self) -> usize {
        self.values.len() / self.components()
    }
}

/// Samples of `c_i` for `i ∈ {1, 2, 3, 5, 6}`.
pub fn coefficient_field<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    c: Coefficient,
    psi: &VectorField<T>,
) -> Result<CoefficientSamples<T>> {
    match c {
        Coefficient::C4 | Coefficient::C7 => Err(Error::DimensionMismatch(format!(
            "c{} needs an extra field argument",
            c.number()
        ))),
        _ => sample(mesh, quad, c, psi, None, None),
    }
}

/// Samples of `c4 = J F⁻¹ η`.
pub fn coefficient_field_c4<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    psi: &VectorField<T>,
    eta: &VectorField<T>,
) -> Result<CoefficientSamples<T>> {
    sample(mesh, quad, Coefficient::C4, psi, Some(eta), None)
}

/// Samples of `c7 = J_Γ F⁻ᵀ n̂ φ`.
pub fn coefficient_field_c7<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    psi: &VectorField<T>,
    phi: &ScalarField<T>,
) -> Result<CoefficientSamples<T>> {
    sample(mesh, quad, Coefficient::C7, psi, None, Some(phi))
}

fn sample<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    c: Coefficient,
    psi: &VectorField<T>,
    eta: Option<&VectorField<T>>,
    phi: Option<&ScalarField<T>>,
) -> Result<CoefficientSamples<T>> {
    check_len(mesh, psi)?;
    if let Some(eta) = eta {
        check_len(mesh, eta)?;
    }
    if let Some(phi) = phi {
        if phi.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch("concentration length".into()));
        }
    }
    let d = c.components();
    let np = n_points(mesh, c.point_set());
    let mut values = Vec::with_capacity(np * d);
    let zero2 = [T::zero(); 2];
    match c.point_set() {
        PointSet::Volume => {
            for t in 0..mesh.n_cells() {
                let f = psi.cell_jacobian(mesh, t);
                for q in 0..VOLUME_POINTS {
                    let e = eta.map_or(zero2, |eta| eta.eval(mesh, t, quad.volume_points[q]));
                    let v = local_coefficient(c, &f, zero2, e, T::zero()).ok_or(Error::DegenerateMapping {
                        cell: t,
                        jacobian: det(&f).to_f64_lossy(),
                    })?;
                    values.extend_from_slice(&v[..d]);
                }
            }
        }
        PointSet::Boundary => {
            for (e, &[a, b]) in mesh.boundary_edges().iter().enumerate() {
                let t = mesh.boundary_edge_cell(e);
                let f = psi.cell_jacobian(mesh, t);
                let n_hat = mesh.edge_normal(e);
                for q in 0..BOUNDARY_POINTS {
                    let s = quad.boundary_points[q];
                    let ph = phi.map_or(T::zero(), |phi| (T::one() - s) * phi.values[a] + s * phi.values[b]);
                    let v = local_coefficient(c, &f, n_hat, zero2, ph).ok_or(Error::DegenerateMapping {
                        cell: t,
                        jacobian: det(&f).to_f64_lossy(),
                    })?;
                    values.extend_from_slice(&v[..d]);
                }
            }
        }
    }
    Ok(CoefficientSamples { coefficient: c, values })
}
