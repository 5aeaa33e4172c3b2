//! Projection of the EIM-separated forms onto the reduced bases, plus the
//! exact multilinear tensors for mass and variance.
//!
//! Index conventions: reduced matrices have the test index as row. Bases are
//! `Φ_Γ` (boundary velocity), `Φ_Ψ` (deformation) and `Φ_u` (concentration,
//! constant first).

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_form, Assembled, Coefficient, PointSet};
use crate::fem::quadrature::{BOUNDARY_POINTS, VOLUME_POINTS};
use crate::fem::{InnerProduct, InnerProductKind, Mesh, ScalarField, TraceField, VectorField};
use crate::fom::FomSolver;
use crate::geometry::Mat2;
use crate::offline::eim::EimData;
use crate::offline::pod::ReducedBasis;
use crate::scalar::Scalar;

/// Sizes of a reduced model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub k_gamma: usize,
    pub k_psi: usize,
    pub k_u: usize,
    /// EIM sizes `M_1 .. M_7`.
    pub m: [usize; 7],
}

impl Dims {
    /// Componentwise minimum.
    pub fn min(&self, other: &Dims) -> Dims {
        let mut m = self.m;
        for (a, b) in m.iter_mut().zip(other.m) {
            *a = (*a).min(b);
        }
        Dims {
            k_gamma: self.k_gamma.min(other.k_gamma),
            k_psi: self.k_psi.min(other.k_psi),
            k_u: self.k_u.min(other.k_u),
            m,
        }
    }

    /// Same reduced dimension `k` for every basis and `m` for every EIM.
    pub fn uniform(k: usize, m: usize) -> Dims {
        Dims {
            k_gamma: k,
            k_psi: k,
            k_u: k,
            m: [m; 7],
        }
    }
}

/// What is needed to evaluate one coefficient at one interpolation pair
/// from reduced coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGeometry<T> {
    pub cell: usize,
    pub component: usize,
    /// Reference normal (boundary coefficients only).
    pub n_hat: [T; 2],
    /// Jacobian of every deformation mode on the pair's cell.
    pub mode_jacobians: Vec<Mat2<T>>,
    /// Deformation modes at the point (`c4` only, for the velocity `η`).
    pub velocity_values: Vec<[T; 2]>,
    /// Concentration modes at the point (`c7` only).
    pub concentration_values: Vec<T>,
}

/// Reduced operators attached to one coefficient.
#[derive(Clone, Debug)]
pub struct CoefficientOperators<T> {
    pub coefficient: Coefficient,
    pub interpolation: Mat<T>,
    pub pairs: Vec<PairGeometry<T>>,
    /// Reduced `a_i^m` (bilinear forms).
    pub matrices: Vec<Mat<T>>,
    /// Reduced `l_i^m` (linear forms).
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> CoefficientOperators<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `a3(φ_j, 1; id + Σ d_k Φ_k) = t0_j + Σ_k d_k t1_jk + Σ_kl d_k d_l t2_j,kl`.
#[derive(Clone, Debug)]
pub struct MassRow<T> {
    pub t0: Vec<T>,
    /// `k_u × k_psi`.
    pub t1: Mat<T>,
    /// Per concentration mode a symmetric `k_psi × k_psi` matrix.
    pub t2: Vec<Mat<T>>,
}

impl<T: Scalar> MassRow<T> {
    /// The row `a3(φ_j, 1; Ψ)` for all `j`.
    pub fn row(&self, d: &[T]) -> Vec<T> {
        (0..self.t0.len())
            .map(|j| {
                let mut s = self.t0[j];
                for (k, &dk) in d.iter().enumerate() {
                    let mut inner = self.t1[(j, k)];
                    for (l, &dl) in d.iter().enumerate() {
                        inner = inner + self.t2[j][(k, l)] * dl;
                    }
                    s = s + dk * inner;
                }
                s
            })
            .collect()
    }

    fn truncated(&self, k_u: usize, k_psi: usize) -> Self {
        MassRow {
            t0: self.t0[..k_u].to_vec(),
            t1: self.t1.submatrix(0, 0, k_u, k_psi).to_owned(),
            t2: self.t2[..k_u]
                .iter()
                .map(|m| m.submatrix(0, 0, k_psi, k_psi).to_owned())
                .collect(),
        }
    }
}

/// Reduced mass matrix `a3(φ_i, φ_j; Ψ)` as a polynomial in the deformation
/// coefficients.
#[derive(Clone, Debug)]
pub struct VarianceTensor<T> {
    pub u0: Mat<T>,
    pub u1: Vec<Mat<T>>,
    /// `u2[k][l]`, symmetric in `(k, l)`.
    pub u2: Vec<Vec<Mat<T>>>,
}

/// Largest `k_psi² · k_u²` for which the variance tensor is built.
pub const VARIANCE_TENSOR_CAP: usize = 1 << 22;

impl<T: Scalar> VarianceTensor<T> {
    pub fn matrix(&self, d: &[T]) -> Mat<T> {
        let mut a = self.u0.clone();
        for (k, &dk) in d.iter().enumerate() {
            let mut w = self.u1[k].clone();
            for (l, &dl) in d.iter().enumerate() {
                w += faer::Scale(dl) * &self.u2[k][l];
            }
            a += faer::Scale(dk) * &w;
        }
        a
    }

    fn truncated(&self, k_u: usize, k_psi: usize) -> Self {
        let cut = |m: &Mat<T>| m.submatrix(0, 0, k_u, k_u).to_owned();
        VarianceTensor {
            u0: cut(&self.u0),
            u1: self.u1[..k_psi].iter().map(cut).collect(),
            u2: self.u2[..k_psi]
                .iter()
                .map(|row| row[..k_psi].iter().map(cut).collect())
                .collect(),
        }
    }
}

/// Everything the online phase needs; no full-order data beyond the local
/// geometry at interpolation pairs.
#[derive(Clone, Debug)]
pub struct ReducedOperators<T> {
    pub dims: Dims,
    /// `c1 .. c7` in order.
    pub coefficients: Vec<CoefficientOperators<T>>,
    /// `Φ_Ψᵀ W E_h Φ_Γ` (`k_psi × k_gamma`).
    pub extension: Mat<T>,
    /// Reduced initial concentration.
    pub u_init: Vec<T>,
    /// Reduced initial deformation per shape.
    pub shape_init: Vec<Vec<T>>,
    /// `‖1‖` in the concentration inner product.
    pub one_norm: T,
    pub mass_row: MassRow<T>,
    pub variance: Option<VarianceTensor<T>>,
}

impl<T: Scalar> ReducedOperators<T> {
    pub fn coefficient(&self, c: Coefficient) -> &CoefficientOperators<T> {
        &self.coefficients[c.number() - 1]
    }

    /// Leading sub-model. Every component is nested, so this equals a model
    /// built directly at the smaller sizes.
    pub fn truncated(&self, dims: Dims) -> Result<Self> {
        let d = &self.dims;
        if dims.k_gamma > d.k_gamma
            || dims.k_psi > d.k_psi
            || dims.k_u > d.k_u
            || dims.m.iter().zip(d.m).any(|(&a, b)| a > b)
        {
            return Err(Error::DimensionMismatch(format!(
                "cannot truncate {:?} to {:?}",
                self.dims, dims
            )));
        }
        if dims.k_u == 0 || dims.k_psi == 0 || dims.k_gamma == 0 || dims.m.iter().any(|&m| m == 0) {
            return Err(Error::DimensionMismatch("reduced sizes must be positive".into()));
        }
        let coefficients = self
            .coefficients
            .iter()
            .map(|co| {
                let m = dims.m[co.coefficient.number() - 1];
                let (rows, cols) = match co.coefficient {
                    Coefficient::C1 | Coefficient::C2 | Coefficient::C6 | Coefficient::C7 => {
                        (dims.k_gamma, dims.k_gamma)
                    }
                    _ => (dims.k_u, dims.k_u),
                };
                CoefficientOperators {
                    coefficient: co.coefficient,
                    interpolation: co.interpolation.submatrix(0, 0, m, m).to_owned(),
                    pairs: co.pairs[..m]
                        .iter()
                        .map(|p| PairGeometry {
                            cell: p.cell,
                            component: p.component,
                            n_hat: p.n_hat,
                            mode_jacobians: p.mode_jacobians[..dims.k_psi].to_vec(),
                            velocity_values: p.velocity_values[..p.velocity_values.len().min(dims.k_psi)].to_vec(),
                            concentration_values: p.concentration_values
                                [..p.concentration_values.len().min(dims.k_u)]
                                .to_vec(),
                        })
                        .collect(),
                    matrices: co.matrices[..co.matrices.len().min(m)]
                        .iter()
                        .map(|a| a.submatrix(0, 0, rows, cols).to_owned())
                        .collect(),
                    vectors: co.vectors[..co.vectors.len().min(m)]
                        .iter()
                        .map(|v| v[..rows].to_vec())
                        .collect(),
                }
            })
            .collect();
        Ok(ReducedOperators {
            dims,
            coefficients,
            extension: self.extension.submatrix(0, 0, dims.k_psi, dims.k_gamma).to_owned(),
            u_init: self.u_init[..dims.k_u].to_vec(),
            shape_init: self.shape_init.iter().map(|v| v[..dims.k_psi].to_vec()).collect(),
            one_norm: self.one_norm,
            mass_row: self.mass_row.truncated(dims.k_u, dims.k_psi),
            variance: self.variance.as_ref().map(|v| v.truncated(dims.k_u, dims.k_psi)),
        })
    }
}

/// Modes of a basis as separate coefficient vectors, limited to `basis.dim`.
fn columns<T: Scalar>(basis: &ReducedBasis<T>) -> Vec<Vec<T>> {
    (0..basis.dim).map(|k| basis.mode(k)).collect()
}

fn as_mat<T: Scalar>(cols: &[Vec<T>]) -> Mat<T> {
    let n = cols.first().map_or(0, Vec::len);
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// `(b(X, Y) + b(Y, X)) / 2` with `b(X, Y) = X₀₀Y₁₁ − X₀₁Y₁₀`, so that
/// `det(Σ d_k D_k) = Σ_kl d_k d_l sym_b(D_k, D_l)`.
fn sym_b<T: Scalar>(x: &Mat2<T>, y: &Mat2<T>) -> T {
    let b = |x: &Mat2<T>, y: &Mat2<T>| x[0][0] * y[1][1] - x[0][1] * y[1][0];
    (b(x, y) + b(y, x)) * T::lit(0.5)
}

/// Bases used by a reduced model.
#[derive(Clone, Debug)]
pub struct Bases<T> {
    pub boundary: ReducedBasis<T>,
    pub deformation: ReducedBasis<T>,
    pub concentration: ReducedBasis<T>,
}

impl<T: Scalar> Bases<T> {
    pub fn truncated(&self, dims: &Dims) -> Self {
        Bases {
            boundary: self.boundary.truncated(dims.k_gamma),
            deformation: self.deformation.truncated(dims.k_psi),
            concentration: self.concentration.truncated(dims.k_u),
        }
    }
}

/// Builds all reduced operators for the given bases (at their `dim`) and EIM
/// data (at their full length).
pub fn project_operators<T: Scalar>(
    solver: &FomSolver<T>,
    bases: &Bases<T>,
    eim: &[EimData<T>],
    with_variance: bool,
) -> Result<ReducedOperators<T>> {
    if eim.len() != 7 || eim.iter().enumerate().any(|(k, e)| e.coefficient.number() != k + 1) {
        return Err(Error::DimensionMismatch("need EIM data for c1 .. c7 in order".into()));
    }
    let mesh = solver.mesh();
    let quad = solver.quadrature();
    let nv = mesh.n_vertices();
    let nb = mesh.n_boundary();
    let phi_g = columns(&bases.boundary);
    let phi_p = columns(&bases.deformation);
    let phi_u = columns(&bases.concentration);
    if phi_g.iter().any(|v| v.len() != 2 * nb)
        || phi_p.iter().any(|v| v.len() != 2 * nv)
        || phi_u.iter().any(|v| v.len() != nv)
    {
        return Err(Error::DimensionMismatch("basis length does not match the mesh".into()));
    }
    if phi_g.is_empty() || phi_p.is_empty() || phi_u.is_empty() {
        return Err(Error::DimensionMismatch("empty basis".into()));
    }
    let mat_g = as_mat(&phi_g);
    let mat_u = as_mat(&phi_u);
    let psi_fields: Vec<VectorField<T>> = phi_p.iter().map(|v| VectorField { values: v.clone() }).collect();
    let u_fields: Vec<ScalarField<T>> = phi_u.iter().map(|v| ScalarField { values: v.clone() }).collect();

    let mut coefficients = Vec::with_capacity(7);
    for e in eim {
        let c = e.coefficient;
        let test_basis = match c.point_set() {
            PointSet::Boundary => &mat_g,
            PointSet::Volume => &mat_u,
        };
        let forms: Vec<Assembled<T>> = e
            .basis
            .par_iter()
            .map(|b| assemble_form(mesh, quad, c.form(), b))
            .collect::<Result<_>>()?;
        let mut matrices = Vec::new();
        let mut vectors = Vec::new();
        for f in forms {
            match f {
                Assembled::Matrix(a) => {
                    let k = test_basis.ncols();
                    let ax = Mat::from_fn(a.nrows(), k, |_, _| T::zero());
                    let mut ax = ax;
                    for j in 0..k {
                        let col: Vec<T> = test_basis.col(j).iter().copied().collect();
                        let y = a.mul_vec(&col);
                        for (i, v) in y.into_iter().enumerate() {
                            ax[(i, j)] = v;
                        }
                    }
                    matrices.push(test_basis.transpose() * &ax);
                }
                Assembled::Vector(l) => {
                    let k = test_basis.ncols();
                    vectors.push((0..k).map(|j| dot(&test_basis.col(j).iter().copied().collect::<Vec<_>>(), &l)).collect());
                }
            }
        }
        let pairs = (0..e.len())
            .map(|m| {
                let (p, component) = e.pair(m);
                pair_geometry(mesh, quad, c, p, component, &psi_fields, &u_fields)
            })
            .collect();
        coefficients.push(CoefficientOperators {
            coefficient: c,
            interpolation: e.interpolation_matrix.clone(),
            pairs,
            matrices,
            vectors,
        });
    }

    let h1v = InnerProduct::new(mesh, quad, InnerProductKind::H1Vector);
    let weighted_p: Vec<Vec<T>> = phi_p.iter().map(|v| h1v.matrix.mul_vec(v)).collect();
    let project_p = |v: &[T]| -> Vec<T> { weighted_p.iter().map(|w| dot(w, v)).collect() };
    let mut extension = Mat::zeros(phi_p.len(), phi_g.len());
    for (j, g) in phi_g.iter().enumerate() {
        let ext = solver.extend(&TraceField { values: g.clone() })?;
        for (i, v) in project_p(&ext.values).into_iter().enumerate() {
            extension[(i, j)] = v;
        }
    }
    let shape_init = solver.shape_fields().iter().map(|f| project_p(&f.values)).collect();

    let h1 = InnerProduct::new(mesh, quad, InnerProductKind::H1Scalar);
    let ones = vec![T::one(); nv];
    let one_norm = h1.norm(&ones);
    let w1 = h1.matrix.mul_vec(&ones);
    let u_init = phi_u.iter().map(|v| dot(v, &w1)).collect();

    let mass_row = mass_row(mesh, &psi_fields, &phi_u);
    let variance = if with_variance && phi_p.len().pow(2) * phi_u.len().pow(2) <= VARIANCE_TENSOR_CAP {
        Some(variance_tensor(mesh, &psi_fields, &phi_u))
    } else {
        None
    };
    let dims = Dims {
        k_gamma: phi_g.len(),
        k_psi: phi_p.len(),
        k_u: phi_u.len(),
        m: std::array::from_fn(|i| eim[i].len()),
    };
    Ok(ReducedOperators {
        dims,
        coefficients,
        extension,
        u_init,
        shape_init,
        one_norm,
        mass_row,
        variance,
    })
}

fn pair_geometry<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &crate::fem::QuadratureTable<T>,
    c: Coefficient,
    p: usize,
    component: usize,
    psi_modes: &[VectorField<T>],
    u_modes: &[ScalarField<T>],
) -> PairGeometry<T> {
    let zero2 = [T::zero(); 2];
    match c.point_set() {
        PointSet::Volume => {
            let t = p / VOLUME_POINTS;
            let l = quad.volume_points[p % VOLUME_POINTS];
            PairGeometry {
                cell: t,
                component,
                n_hat: zero2,
                mode_jacobians: psi_modes.iter().map(|f| f.cell_jacobian(mesh, t)).collect(),
                velocity_values: if c == Coefficient::C4 {
                    psi_modes.iter().map(|f| f.eval(mesh, t, l)).collect()
                } else {
                    Vec::new()
                },
                concentration_values: Vec::new(),
            }
        }
        PointSet::Boundary => {
            let e = p / BOUNDARY_POINTS;
            let s = quad.boundary_points[p % BOUNDARY_POINTS];
            let t = mesh.boundary_edge_cell(e);
            let [a, b] = mesh.boundary_edges()[e];
            PairGeometry {
                cell: t,
                component,
                n_hat: mesh.edge_normal(e),
                mode_jacobians: psi_modes.iter().map(|f| f.cell_jacobian(mesh, t)).collect(),
                velocity_values: Vec::new(),
                concentration_values: if c == Coefficient::C7 {
                    u_modes
                        .iter()
                        .map(|f| (T::one() - s) * f.values[a] + s * f.values[b])
                        .collect()
                } else {
                    Vec::new()
                },
            }
        }
    }
}

fn mass_row<T: Scalar>(mesh: &Mesh<T>, psi_modes: &[VectorField<T>], phi_u: &[Vec<T>]) -> MassRow<T> {
    let (ku, kp) = (phi_u.len(), psi_modes.len());
    let mut t0 = vec![T::zero(); ku];
    let mut t1 = Mat::<T>::zeros(ku, kp);
    let mut t2 = vec![Mat::<T>::zeros(kp, kp); ku];
    let third = T::lit(1.0 / 3.0);
    for t in 0..mesh.n_cells() {
        let area = mesh.cell_area(t);
        let c = mesh.cells()[t];
        let jac: Vec<Mat2<T>> = psi_modes.iter().map(|f| f.cell_jacobian(mesh, t)).collect();
        let div: Vec<T> = jac.iter().map(|d| d[0][0] + d[1][1]).collect();
        let mut b = Mat::<T>::zeros(kp, kp);
        for k in 0..kp {
            for l in k..kp {
                let v = sym_b(&jac[k], &jac[l]);
                b[(k, l)] = v;
                b[(l, k)] = v;
            }
        }
        for (j, u) in phi_u.iter().enumerate() {
            let w = area * (u[c[0]] + u[c[1]] + u[c[2]]) * third;
            if w == T::zero() {
                continue;
            }
            t0[j] = t0[j] + w;
            for k in 0..kp {
                t1[(j, k)] = t1[(j, k)] + w * div[k];
            }
            t2[j] += faer::Scale(w) * &b;
        }
    }
    MassRow { t0, t1, t2 }
}

fn variance_tensor<T: Scalar>(mesh: &Mesh<T>, psi_modes: &[VectorField<T>], phi_u: &[Vec<T>]) -> VarianceTensor<T> {
    let (ku, kp) = (phi_u.len(), psi_modes.len());
    let mut u0 = Mat::<T>::zeros(ku, ku);
    let mut u1 = vec![Mat::<T>::zeros(ku, ku); kp];
    let mut u2 = vec![vec![Mat::<T>::zeros(ku, ku); kp]; kp];
    let twelfth = T::lit(1.0 / 12.0);
    for t in 0..mesh.n_cells() {
        let area = mesh.cell_area(t);
        let c = mesh.cells()[t];
        // local P1 mass |T|(1 + δ_ab)/12, contracted with the modes
        let vals = Mat::from_fn(3, ku, |a, j| phi_u[j][c[a]]);
        let local = Mat::from_fn(3, 3, |a, b| area * twelfth * if a == b { T::lit(2.0) } else { T::one() });
        let q = vals.transpose() * (&local * &vals);
        let jac: Vec<Mat2<T>> = psi_modes.iter().map(|f| f.cell_jacobian(mesh, t)).collect();
        u0 += &q;
        for k in 0..kp {
            u1[k] += faer::Scale(jac[k][0][0] + jac[k][1][1]) * &q;
            for l in k..kp {
                u2[k][l] += faer::Scale(sym_b(&jac[k], &jac[l])) * &q;
            }
        }
    }
    for k in 0..kp {
        for l in 0..k {
            u2[k][l] = u2[l][k].clone();
        }
    }
    VarianceTensor { u0, u1, u2 }
}
