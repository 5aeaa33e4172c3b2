//! Assembly of the coefficient-driven forms and of the inner products.
//!
//! Coefficient samples are laid out point-major: sample `k` of point `p` is
//! `values[p * d + k]`, with 2x2 tensors flattened row-major
//! (`k = 2 * row + col`). Matrices use the test function as row index.
//!
//! Gradients of vector functions follow the convention
//! `G[k][c] = d_k s_c`. On the polygonal boundary only tangential derivatives
//! of traces exist; they are taken edge-wise, `G = t ⊗ d_t s`.

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::fem::quadrature::{QuadratureTable, BOUNDARY_POINTS, VOLUME_POINTS};
use crate::fem::sparse::SparseMatrix;
use crate::scalar::Scalar;

/// Where a coefficient is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointSet {
    Volume,
    Boundary,
}

/// The seven coefficient fields `c1 .. c7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coefficient {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl Coefficient {
    pub const ALL: [Coefficient; 7] = [
        Coefficient::C1,
        Coefficient::C2,
        Coefficient::C3,
        Coefficient::C4,
        Coefficient::C5,
        Coefficient::C6,
        Coefficient::C7,
    ];

    /// One-based number `i` of `c_i`.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(i: usize) -> Option<Self> {
        Self::ALL.get(i.wrapping_sub(1)).copied()
    }

    /// Number of scalar components per point.
    pub fn components(self) -> usize {
        match self {
            Coefficient::C1 | Coefficient::C3 => 1,
            Coefficient::C4 | Coefficient::C7 => 2,
            Coefficient::C2 | Coefficient::C5 | Coefficient::C6 => 4,
        }
    }

    pub fn point_set(self) -> PointSet {
        match self {
            Coefficient::C3 | Coefficient::C4 | Coefficient::C5 => PointSet::Volume,
            _ => PointSet::Boundary,
        }
    }

    pub fn form(self) -> Form {
        match self {
            Coefficient::C1 => Form::A1,
            Coefficient::C2 => Form::A2,
            Coefficient::C3 => Form::A3,
            Coefficient::C4 => Form::A4,
            Coefficient::C5 => Form::A5,
            Coefficient::C6 => Form::L1,
            Coefficient::C7 => Form::L2,
        }
    }
}

/// Bilinear (`A*`) and linear (`L*`) forms of the discrete model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Form {
    A1,
    A2,
    A3,
    A4,
    A5,
    L1,
    L2,
}

impl Form {
    pub fn coefficient(self) -> Coefficient {
        match self {
            Form::A1 => Coefficient::C1,
            Form::A2 => Coefficient::C2,
            Form::A3 => Coefficient::C3,
            Form::A4 => Coefficient::C4,
            Form::A5 => Coefficient::C5,
            Form::L1 => Coefficient::C6,
            Form::L2 => Coefficient::C7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Form::A1 => "a1",
            Form::A2 => "a2",
            Form::A3 => "a3",
            Form::A4 => "a4",
            Form::A5 => "a5",
            Form::L1 => "l1",
            Form::L2 => "l2",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Form::L1 | Form::L2)
    }
}

pub fn n_points<T: Scalar>(mesh: &Mesh<T>, set: PointSet) -> usize {
    match set {
        PointSet::Volume => mesh.n_cells() * VOLUME_POINTS,
        PointSet::Boundary => mesh.boundary_edges().len() * BOUNDARY_POINTS,
    }
}

/// Expected sample length for a coefficient on this mesh.
pub fn sample_len<T: Scalar>(mesh: &Mesh<T>, c: Coefficient) -> usize {
    n_points(mesh, c.point_set()) * c.components()
}

#[derive(Clone, Debug)]
pub enum Assembled<T: Scalar> {
    Matrix(SparseMatrix<T>),
    Vector(Vec<T>),
}

impl<T: Scalar> Assembled<T> {
    pub fn into_matrix(self) -> Option<SparseMatrix<T>> {
        match self {
            Assembled::Matrix(m) => Some(m),
            Assembled::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<Vec<T>> {
        match self {
            Assembled::Vector(v) => Some(v),
            Assembled::Matrix(_) => None,
        }
    }
}

/// Assembles `form` with the frozen coefficient given by `samples`.
pub fn assemble_form<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    form: Form,
    samples: &[T],
) -> Result<Assembled<T>> {
    let expected = sample_len(mesh, form.coefficient());
    if samples.len() != expected {
        return Err(Error::ShapeMismatch {
            form: form.name(),
            got: samples.len(),
            expected,
        });
    }
    Ok(match form {
        Form::A1 => Assembled::Matrix(boundary_mass(mesh, quad, samples)?),
        Form::A2 => Assembled::Matrix(boundary_stiffness(mesh, quad, samples)?),
        Form::A3 => Assembled::Matrix(volume_mass(mesh, quad, samples)?),
        Form::A4 => Assembled::Matrix(volume_advection(mesh, quad, samples)?),
        Form::A5 => Assembled::Matrix(volume_stiffness(mesh, quad, samples)?),
        Form::L1 => Assembled::Vector(boundary_curvature(mesh, quad, samples)),
        Form::L2 => Assembled::Vector(boundary_load(mesh, quad, samples)),
    })
}

fn cell_weight<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, t: usize, q: usize) -> T {
    // reference weights sum to 1/2
    T::lit(2.0) * mesh.cell_area(t) * quad.volume_weights[q]
}

/// `int c3 u v`.
fn volume_mass<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Result<SparseMatrix<T>> {
    let mut trip = Vec::with_capacity(9 * mesh.n_cells());
    for (t, cell) in mesh.cells().iter().enumerate() {
        let mut local = [[T::zero(); 3]; 3];
        for q in 0..VOLUME_POINTS {
            let w = cell_weight(mesh, quad, t, q) * c[t * VOLUME_POINTS + q];
            let l = quad.volume_points[q];
            for (i, row) in local.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = *v + w * l[i] * l[j];
                }
            }
        }
        push_local(&mut trip, cell, &local);
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), &trip)
}

/// `int (c4 u) . grad v`.
fn volume_advection<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Result<SparseMatrix<T>> {
    let mut trip = Vec::with_capacity(9 * mesh.n_cells());
    for (t, cell) in mesh.cells().iter().enumerate() {
        let g = mesh.cell_gradients(t);
        let mut local = [[T::zero(); 3]; 3];
        for q in 0..VOLUME_POINTS {
            let w = cell_weight(mesh, quad, t, q);
            let p = (t * VOLUME_POINTS + q) * 2;
            let (b0, b1) = (c[p], c[p + 1]);
            let l = quad.volume_points[q];
            for (i, row) in local.iter_mut().enumerate() {
                let bg = b0 * g[i][0] + b1 * g[i][1];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = *v + w * bg * l[j];
                }
            }
        }
        push_local(&mut trip, cell, &local);
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), &trip)
}

/// `int (c5 grad u) . grad v`.
fn volume_stiffness<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Result<SparseMatrix<T>> {
    let mut trip = Vec::with_capacity(9 * mesh.n_cells());
    for (t, cell) in mesh.cells().iter().enumerate() {
        let g = mesh.cell_gradients(t);
        let mut k = [T::zero(); 4];
        for q in 0..VOLUME_POINTS {
            let w = cell_weight(mesh, quad, t, q);
            let p = (t * VOLUME_POINTS + q) * 4;
            for (kk, &ck) in k.iter_mut().zip(&c[p..p + 4]) {
                *kk = *kk + w * ck;
            }
        }
        let mut local = [[T::zero(); 3]; 3];
        for (i, row) in local.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                // c5[k][l] d_l u d_k v
                *v = g[i][0] * (k[0] * g[j][0] + k[1] * g[j][1]) + g[i][1] * (k[2] * g[j][0] + k[3] * g[j][1]);
            }
        }
        push_local(&mut trip, cell, &local);
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), &trip)
}

fn push_local<T: Scalar>(trip: &mut Vec<(usize, usize, T)>, cell: &[usize; 3], local: &[[T; 3]; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            trip.push((cell[i], cell[j], local[i][j]));
        }
    }
}

/// Edge data: loop positions of the endpoints, length, tangent.
fn edge_frame<T: Scalar>(mesh: &Mesh<T>, e: usize) -> ([usize; 2], T, [T; 2]) {
    let nb = mesh.n_boundary();
    ([e, (e + 1) % nb], mesh.edge_length(e), mesh.edge_tangent(e))
}

/// `int c1 q . s` on the boundary, blocked by component.
fn boundary_mass<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Result<SparseMatrix<T>> {
    let nb = mesh.n_boundary();
    let mut trip = Vec::with_capacity(8 * nb);
    for e in 0..mesh.boundary_edges().len() {
        let (ends, len, _) = edge_frame(mesh, e);
        let mut local = [[T::zero(); 2]; 2];
        for q in 0..BOUNDARY_POINTS {
            let s = quad.boundary_points[q];
            let hat = [T::one() - s, s];
            let w = len * quad.boundary_weights[q] * c[e * BOUNDARY_POINTS + q];
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] = local[i][j] + w * hat[i] * hat[j];
                }
            }
        }
        for comp in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    trip.push((comp * nb + ends[i], comp * nb + ends[j], local[i][j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(2 * nb, 2 * nb, &trip)
}

/// `int (c2 ∇q) : ∇s` with edge-wise tangential gradients.
fn boundary_stiffness<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Result<SparseMatrix<T>> {
    let nb = mesh.n_boundary();
    let mut trip = Vec::with_capacity(8 * nb);
    for e in 0..mesh.boundary_edges().len() {
        let (ends, len, tan) = edge_frame(mesh, e);
        // sum_kl c2[k][l] t_k t_l integrated over the edge
        let mut ctt = T::zero();
        for q in 0..BOUNDARY_POINTS {
            let p = (e * BOUNDARY_POINTS + q) * 4;
            let m = &c[p..p + 4];
            let form = tan[0] * (m[0] * tan[0] + m[1] * tan[1]) + tan[1] * (m[2] * tan[0] + m[3] * tan[1]);
            ctt = ctt + len * quad.boundary_weights[q] * form;
        }
        let dt = [-T::one() / len, T::one() / len];
        for comp in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    trip.push((comp * nb + ends[i], comp * nb + ends[j], ctt * dt[i] * dt[j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(2 * nb, 2 * nb, &trip)
}

/// `int c6 : ∇s` with edge-wise tangential gradients.
fn boundary_curvature<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Vec<T> {
    let nb = mesh.n_boundary();
    let mut out = vec![T::zero(); 2 * nb];
    for e in 0..mesh.boundary_edges().len() {
        let (ends, len, tan) = edge_frame(mesh, e);
        // (tᵀ c6)[comp] integrated over the edge
        let mut tc = [T::zero(); 2];
        for q in 0..BOUNDARY_POINTS {
            let p = (e * BOUNDARY_POINTS + q) * 4;
            let m = &c[p..p + 4];
            let w = len * quad.boundary_weights[q];
            tc[0] = tc[0] + w * (tan[0] * m[0] + tan[1] * m[2]);
            tc[1] = tc[1] + w * (tan[0] * m[1] + tan[1] * m[3]);
        }
        let dt = [-T::one() / len, T::one() / len];
        for comp in 0..2 {
            for i in 0..2 {
                out[comp * nb + ends[i]] = out[comp * nb + ends[i]] + tc[comp] * dt[i];
            }
        }
    }
    out
}

/// `int c7 . s` on the boundary.
fn boundary_load<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>, c: &[T]) -> Vec<T> {
    let nb = mesh.n_boundary();
    let mut out = vec![T::zero(); 2 * nb];
    for e in 0..mesh.boundary_edges().len() {
        let (ends, len, _) = edge_frame(mesh, e);
        for q in 0..BOUNDARY_POINTS {
            let s = quad.boundary_points[q];
            let hat = [T::one() - s, s];
            let w = len * quad.boundary_weights[q];
            let p = (e * BOUNDARY_POINTS + q) * 2;
            for comp in 0..2 {
                for i in 0..2 {
                    out[comp * nb + ends[i]] = out[comp * nb + ends[i]] + w * c[p + comp] * hat[i];
                }
            }
        }
    }
    out
}

/// Samples of a constant coefficient value.
pub fn constant_samples<T: Scalar>(mesh: &Mesh<T>, c: Coefficient, value: &[T]) -> Vec<T> {
    assert_eq!(value.len(), c.components());
    let n = n_points(mesh, c.point_set());
    let mut out = Vec::with_capacity(n * value.len());
    for _ in 0..n {
        out.extend_from_slice(value);
    }
    out
}

/// Standard P1 mass matrix on the reference domain.
pub fn mass_matrix<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>) -> SparseMatrix<T> {
    volume_mass(mesh, quad, &constant_samples(mesh, Coefficient::C3, &[T::one()])).expect("mass matrix")
}

/// Standard P1 stiffness matrix on the reference domain.
pub fn stiffness_matrix<T: Scalar>(mesh: &Mesh<T>, quad: &QuadratureTable<T>) -> SparseMatrix<T> {
    let id = [T::one(), T::zero(), T::zero(), T::one()];
    volume_stiffness(mesh, quad, &constant_samples(mesh, Coefficient::C5, &id)).expect("stiffness matrix")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerProductKind {
    /// Full `H1` norm (mass plus stiffness) of scalar functions.
    H1Scalar,
    /// Componentwise `H1` of vector functions.
    H1Vector,
    /// Componentwise `L2` on the polygonal boundary.
    L2BoundaryVector,
}

impl InnerProductKind {
    pub fn name(self) -> &'static str {
        match self {
            InnerProductKind::H1Scalar => "h1-scalar",
            InnerProductKind::H1Vector => "h1-vector",
            InnerProductKind::L2BoundaryVector => "l2-boundary-vector",
        }
    }
}

/// Gram matrix of an inner product on a coefficient space.
#[derive(Clone, Debug)]
pub struct InnerProduct<T: Scalar> {
    pub kind: InnerProductKind,
    pub matrix: SparseMatrix<T>,
}

impl<T: Scalar> InnerProduct<T> {
    pub fn new(mesh: &Mesh<T>, quad: &QuadratureTable<T>, kind: InnerProductKind) -> Self {
        let matrix = match kind {
            InnerProductKind::H1Scalar => {
                let m = mass_matrix(mesh, quad);
                let k = stiffness_matrix(mesh, quad);
                SparseMatrix::combine(&[(T::one(), &m), (T::one(), &k)]).expect("h1")
            }
            InnerProductKind::H1Vector => {
                let n = mesh.n_vertices();
                let m = mass_matrix(mesh, quad);
                let k = stiffness_matrix(mesh, quad);
                let mut trip = Vec::new();
                for (i, j, v) in m.entries().chain(k.entries()) {
                    trip.push((i, j, v));
                    trip.push((n + i, n + j, v));
                }
                SparseMatrix::from_triplets(2 * n, 2 * n, &trip).expect("h1 vector")
            }
            InnerProductKind::L2BoundaryVector => {
                boundary_mass(mesh, quad, &constant_samples(mesh, Coefficient::C1, &[T::one()])).expect("l2 boundary")
            }
        };
        InnerProduct { kind, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dot(&self, x: &[T], y: &[T]) -> T {
        self.matrix.bilinear(x, y)
    }

    pub fn norm(&self, x: &[T]) -> T {
        self.dot(x, x).max(T::zero()).sqrt()
    }
}

/// Stiffness of the weighted symmetric-gradient operator
/// `int h⁻¹ (∇q + ∇qᵀ) : ∇s` on blocked vector fields.
pub fn symmetric_gradient_matrix<T: Scalar>(mesh: &Mesh<T>) -> SparseMatrix<T> {
    let n = mesh.n_vertices();
    let mut trip = Vec::with_capacity(36 * mesh.n_cells());
    for (t, cell) in mesh.cells().iter().enumerate() {
        let g = mesh.cell_gradients(t);
        let w = mesh.cell_area(t) / mesh.cell_size()[t];
        for i in 0..3 {
            for j in 0..3 {
                let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                for b in 0..2 {
                    for a in 0..2 {
                        // test phi_i e_b, trial phi_j e_a
                        let mut v = g[j][b] * g[i][a];
                        if a == b {
                            v = v + dot;
                        }
                        trip.push((b * n + cell[i], a * n + cell[j], w * v));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(2 * n, 2 * n, &trip).expect("symmetric gradient")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(h: f64) -> (Mesh<f64>, QuadratureTable<f64>) {
        (Mesh::disk(h).unwrap(), QuadratureTable::degree4())
    }

    #[test]
    fn mass_sums_to_area() {
        let (m, q) = setup(0.2);
        let a3 = assemble_form(&m, &q, Form::A3, &constant_samples(&m, Coefficient::C3, &[1.0]))
            .unwrap()
            .into_matrix()
            .unwrap();
        let ones = vec![1.0; m.n_vertices()];
        let area = m.total_area();
        assert!((a3.bilinear(&ones, &ones) - area).abs() <= 1e-12 * area);
    }

    #[test]
    fn stiffness_annihilates_constants_and_a4_zero() {
        let (m, q) = setup(0.25);
        let id = [1.0, 0.0, 0.0, 1.0];
        let a5 = assemble_form(&m, &q, Form::A5, &constant_samples(&m, Coefficient::C5, &id))
            .unwrap()
            .into_matrix()
            .unwrap();
        let ones = vec![1.0; m.n_vertices()];
        let row_sums = a5.mul_transpose_vec(&ones);
        assert!(row_sums.iter().all(|v| v.abs() < 1e-12));
        let a4 = assemble_form(&m, &q, Form::A4, &constant_samples(&m, Coefficient::C4, &[0.0, 0.0]))
            .unwrap()
            .into_matrix()
            .unwrap();
        assert_eq!(a4.max_abs(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (m, q) = setup(0.3);
        let bad = assemble_form(&m, &q, Form::A2, &[1.0; 5]);
        assert!(matches!(bad, Err(Error::ShapeMismatch { form: "a2", .. })));
    }

    #[test]
    fn boundary_mass_gives_perimeter() {
        let (m, q) = setup(0.1);
        let ip = InnerProduct::new(&m, &q, InnerProductKind::L2BoundaryVector);
        let nb = m.n_boundary();
        let mut first = vec![0.0; 2 * nb];
        first[..nb].iter_mut().for_each(|v| *v = 1.0);
        let perimeter = ip.dot(&first, &first);
        assert!((perimeter - m.perimeter()).abs() < 1e-12);
        assert!((perimeter - 2.0 * std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn h1_of_constant_is_area() {
        let (m, q) = setup(0.2);
        let ip = InnerProduct::new(&m, &q, InnerProductKind::H1Scalar);
        let ones = vec![1.0; m.n_vertices()];
        assert!((ip.dot(&ones, &ones) - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn inner_products_symmetric_positive_definite() {
        let (m, q) = setup(0.25);
        for kind in [
            InnerProductKind::H1Scalar,
            InnerProductKind::H1Vector,
            InnerProductKind::L2BoundaryVector,
        ] {
            let ip = InnerProduct::new(&m, &q, kind);
            let d = ip.matrix.to_dense();
            let max = ip.matrix.max_abs();
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    assert!((d[(i, j)] - d[(j, i)]).abs() <= 1e-12 * max);
                }
            }
            assert!(ip.matrix.as_faer().sp_cholesky(faer::Side::Lower).is_ok(), "{kind:?}");
        }
    }

    #[test]
    fn symmetric_gradient_kernel_contains_translations() {
        let (m, _) = setup(0.25);
        let k = symmetric_gradient_matrix(&m);
        let n = m.n_vertices();
        let mut tx = vec![0.0; 2 * n];
        tx[..n].iter_mut().for_each(|v| *v = 1.0);
        assert!(k.mul_vec(&tx).iter().all(|v| v.abs() < 1e-10));
        // infinitesimal rotation (-y, x) has zero symmetric gradient
        let mut rot = vec![0.0; 2 * n];
        for (i, v) in m.vertices().iter().enumerate() {
            rot[i] = -v[1];
            rot[n + i] = v[0];
        }
        assert!(k.mul_vec(&rot).iter().all(|v| v.abs() < 1e-10));
    }
}
