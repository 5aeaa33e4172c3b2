//! Proper orthogonal decomposition by the method of snapshots.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::fem::{InnerProduct, SparseMatrix};
use crate::scalar::Scalar;

/// What a snapshot set or basis represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SnapshotKind {
    /// Boundary velocities `q_Γ`.
    BoundaryVelocity,
    /// Deformations `Ψ - id`.
    Deformation,
    /// Concentrations `û`.
    Concentration,
}

impl SnapshotKind {
    pub const ALL: [SnapshotKind; 3] = [
        SnapshotKind::BoundaryVelocity,
        SnapshotKind::Deformation,
        SnapshotKind::Concentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SnapshotKind::BoundaryVelocity => "boundary-velocity",
            SnapshotKind::Deformation => "deformation",
            SnapshotKind::Concentration => "concentration",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Snapshot vectors with their `(parameter index, time step)` origin.
#[derive(Clone, Debug)]
pub struct SnapshotSet<T> {
    pub kind: SnapshotKind,
    pub vectors: Vec<Vec<T>>,
    pub provenance: Vec<(usize, usize)>,
}

impl<T: Scalar> SnapshotSet<T> {
    pub fn new(kind: SnapshotKind) -> Self {
        SnapshotSet {
            kind,
            vectors: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn push(&mut self, v: Vec<T>, mu_index: usize, n: usize) {
        self.vectors.push(v);
        self.provenance.push((mu_index, n));
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Orthonormal modes, ordered by decreasing singular value.
///
/// `modes` holds every numerically nonzero mode; `dim` is the truncation
/// chosen for `eps_rb`. Use [`ReducedBasis::truncated`] to slice.
#[derive(Clone, Debug)]
pub struct ReducedBasis<T> {
    pub kind: SnapshotKind,
    pub modes: Mat<T>,
    /// Singular values of the snapshot map. For concentration bases these are
    /// the values of the part orthogonal to the constant.
    pub singular_values: Vec<T>,
    /// Largest singular value of the unmodified snapshot map.
    pub sigma_ref: T,
    pub eps_rb: f64,
    pub dim: usize,
    pub constant_included: bool,
}

/// Singular values below this fraction of the largest are treated as
/// numerical noise and their modes are discarded.
pub const NULL_RATIO: f64 = 1e-10;

impl<T: Scalar> ReducedBasis<T> {
    /// Number of modes kept for tolerance `eps`: the constant (if any) plus
    /// the minimal `K` with `σ_{K+1} / σ_ref < eps`.
    pub fn dim_for(&self, eps: f64) -> usize {
        let avail = self.modes.ncols();
        let extra = usize::from(self.constant_included);
        let k = if self.sigma_ref > T::zero() {
            self.singular_values
                .iter()
                .take_while(|&&s| (s / self.sigma_ref).to_f64_lossy() >= eps)
                .count()
        } else {
            0
        };
        (k + extra).min(avail)
    }

    /// Basis restricted to its leading `dim` modes.
    pub fn truncated(&self, dim: usize) -> Self {
        let dim = dim.min(self.modes.ncols());
        ReducedBasis {
            modes: self.modes.subcols(0, dim).to_owned(),
            dim,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.modes.nrows()
    }

    /// Mode `k` as a slice-backed vector.
    pub fn mode(&self, k: usize) -> Vec<T> {
        self.modes.col(k).iter().copied().collect()
    }

    /// Coefficients of the `ip`-orthogonal projection of `v`.
    pub fn project(&self, ip: &InnerProduct<T>, v: &[T]) -> Vec<T> {
        let wv = ip.matrix.mul_vec(v);
        (0..self.dim)
            .map(|k| self.modes.col(k).iter().zip(&wv).fold(T::zero(), |s, (&a, &b)| s + a * b))
            .collect()
    }

    /// `Σ_k c_k φ_k`.
    pub fn expand(&self, coeffs: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for (k, &c) in coeffs.iter().enumerate().take(self.modes.ncols()) {
            if c == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.modes.col(k).iter()) {
                *o = *o + c * m;
            }
        }
        out
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Modified Gram-Schmidt in the `ip` inner product, applied twice. Vectors
/// whose norm collapses below `tol` times their original norm are dropped.
pub fn orthonormalize<T: Scalar>(ip: &InnerProduct<T>, vectors: Vec<Vec<T>>, tol: f64) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut weighted: Vec<Vec<T>> = Vec::new();
    for mut v in vectors {
        let n0 = ip.norm(&v);
        if !(n0 > T::zero()) {
            continue;
        }
        for _ in 0..2 {
            for (b, wb) in basis.iter().zip(&weighted) {
                let c = dot(wb, &v);
                for (x, &y) in v.iter_mut().zip(b) {
                    *x = *x - c * y;
                }
            }
        }
        let wv = ip.matrix.mul_vec(&v);
        let n = dot(&wv, &v).max(T::zero()).sqrt();
        if !(n > T::lit(tol) * n0) {
            continue;
        }
        basis.push(v.iter().map(|&x| x / n).collect());
        weighted.push(wv.iter().map(|&x| x / n).collect());
    }
    basis
}

/// Eigenpairs of the snapshot Gram matrix, largest first: `(σ, coefficient
/// vectors)` with `σ_k = sqrt(λ_k)`.
fn gram_svd<T: Scalar>(ip: &InnerProduct<T>, vectors: &[Vec<T>]) -> Result<(Vec<T>, Mat<T>)> {
    gram_svd_with(&ip.matrix, vectors)
}

fn gram_svd_with<T: Scalar>(w: &SparseMatrix<T>, vectors: &[Vec<T>]) -> Result<(Vec<T>, Mat<T>)> {
    let ns = vectors.len();
    let weighted: Vec<Vec<T>> = vectors.iter().map(|v| w.mul_vec(v)).collect();
    let mut g = Mat::<T>::zeros(ns, ns);
    for i in 0..ns {
        for j in 0..=i {
            let v = dot(&weighted[i], &vectors[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = g
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::SingularSystem("snapshot Gram eigendecomposition"))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut sigma = Vec::with_capacity(ns);
    let mut coeffs = Mat::<T>::zeros(ns, ns);
    for (c, k) in (0..ns).rev().enumerate() {
        sigma.push(s[k].max(T::zero()).sqrt());
        for r in 0..ns {
            coeffs[(r, c)] = u[(r, k)];
        }
    }
    Ok((sigma, coeffs))
}

/// Singular values of the snapshot map in the inner product with Gram
/// matrix `w`, non-increasing.
pub fn singular_values<T: Scalar>(w: &SparseMatrix<T>, vectors: &[Vec<T>]) -> Result<Vec<T>> {
    if vectors.is_empty() {
        return Err(Error::EmptySnapshotSet);
    }
    Ok(gram_svd_with(w, vectors)?.0)
}

fn modes_from<T: Scalar>(vectors: &[Vec<T>], sigma: &[T], coeffs: &Mat<T>) -> Vec<Vec<T>> {
    let len = vectors[0].len();
    let keep = sigma
        .iter()
        .take_while(|&&s| sigma[0] > T::zero() && (s / sigma[0]).to_f64_lossy() >= NULL_RATIO)
        .count();
    (0..keep)
        .map(|k| {
            let mut m = vec![T::zero(); len];
            for (j, v) in vectors.iter().enumerate() {
                let c = coeffs[(j, k)] / sigma[k];
                for (x, &y) in m.iter_mut().zip(v) {
                    *x = *x + c * y;
                }
            }
            m
        })
        .collect()
}

fn to_mat<T: Scalar>(len: usize, cols: &[Vec<T>]) -> Mat<T> {
    Mat::from_fn(len, cols.len(), |i, j| cols[j][i])
}

/// POD of `snapshots` with respect to `ip`, truncated at `eps_rb`.
///
/// Concentration snapshots get the normalized constant as first mode; the
/// remaining modes come from the snapshots' parts orthogonal to it, with
/// truncation measured against the largest singular value of the original
/// snapshots.
pub fn pod<T: Scalar>(snapshots: &SnapshotSet<T>, ip: &InnerProduct<T>, eps_rb: f64) -> Result<ReducedBasis<T>> {
    if snapshots.is_empty() {
        return Err(Error::EmptySnapshotSet);
    }
    let len = snapshots.vectors[0].len();
    if snapshots.vectors.iter().any(|v| v.len() != len) || len != ip.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} snapshots do not match the inner product dimension {}",
            snapshots.kind.name(),
            ip.dim()
        )));
    }
    let constant = snapshots.kind == SnapshotKind::Concentration;
    let (sigma_full, coeffs_full) = gram_svd(ip, &snapshots.vectors)?;
    let sigma_ref = sigma_full[0];
    let (singular_values, vectors) = if constant {
        let ones = vec![T::one(); len];
        let c: Vec<T> = {
            let n = ip.norm(&ones);
            ones.iter().map(|&x| x / n).collect()
        };
        let wc = ip.matrix.mul_vec(&c);
        let rest: Vec<Vec<T>> = snapshots
            .vectors
            .iter()
            .map(|v| {
                let a = dot(&wc, v);
                v.iter().zip(&c).map(|(&x, &y)| x - a * y).collect()
            })
            .collect();
        let (sigma, coeffs) = gram_svd(ip, &rest)?;
        let mut all = vec![c];
        // Noise is judged against the full snapshot scale.
        let keep = sigma
            .iter()
            .take_while(|&&s| sigma_ref > T::zero() && (s / sigma_ref).to_f64_lossy() >= NULL_RATIO)
            .count();
        if keep > 0 {
            all.extend(modes_from(&rest, &sigma[..keep], &coeffs));
        }
        (sigma, all)
    } else {
        (sigma_full.clone(), modes_from(&snapshots.vectors, &sigma_full, &coeffs_full))
    };
    let modes = orthonormalize(ip, vectors, 1e-6);
    let mut basis = ReducedBasis {
        kind: snapshots.kind,
        modes: to_mat(len, &modes),
        singular_values,
        sigma_ref,
        eps_rb,
        dim: 0,
        constant_included: constant,
    };
    basis.dim = basis.dim_for(eps_rb);
    Ok(basis)
}

/// A basis of the whole coefficient space (for oracle comparisons): the
/// orthonormalized unit vectors, with the constant first for concentrations.
pub fn complete_basis<T: Scalar>(kind: SnapshotKind, ip: &InnerProduct<T>) -> ReducedBasis<T> {
    let len = ip.dim();
    let constant = kind == SnapshotKind::Concentration;
    let mut vectors = Vec::with_capacity(len + 1);
    if constant {
        vectors.push(vec![T::one(); len]);
    }
    for i in 0..len {
        let mut e = vec![T::zero(); len];
        e[i] = T::one();
        vectors.push(e);
    }
    let modes = orthonormalize(ip, vectors, 1e-8);
    let dim = modes.len();
    ReducedBasis {
        kind,
        modes: to_mat(len, &modes),
        singular_values: vec![T::one(); dim - usize::from(constant)],
        sigma_ref: T::one(),
        eps_rb: 0.0,
        dim,
        constant_included: constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{InnerProductKind, Mesh, QuadratureTable};

    fn ip() -> (Mesh<f64>, InnerProduct<f64>) {
        let m = Mesh::disk(0.3).unwrap();
        let q = QuadratureTable::degree4();
        let ip = InnerProduct::new(&m, &q, InnerProductKind::H1Scalar);
        (m, ip)
    }

    fn set(kind: SnapshotKind, v: Vec<Vec<f64>>) -> SnapshotSet<f64> {
        let mut s = SnapshotSet::new(kind);
        for (i, x) in v.into_iter().enumerate() {
            s.push(x, 0, i);
        }
        s
    }

    #[test]
    fn single_snapshot() {
        let (m, ip) = ip();
        let s: Vec<f64> = m.vertices().iter().map(|x| x[0] + 2.0).collect();
        let b = pod(&set(SnapshotKind::Deformation, vec![s.clone()]), &ip, 1e-3).unwrap();
        assert_eq!(b.dim, 1);
        let n = ip.norm(&s);
        assert!((b.singular_values[0] - n).abs() < 1e-10 * n);
        for (a, x) in b.mode(0).iter().zip(&s) {
            assert!((a.abs() - x / n).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_second_direction_is_truncated() {
        let (m, ip) = ip();
        let e: Vec<f64> = m.vertices().iter().map(|x| x[0]).collect();
        let raw: Vec<f64> = m.vertices().iter().map(|x| x[1] * x[1]).collect();
        // make f orthogonal to e
        let f = orthonormalize(&ip, vec![e.clone(), raw], 1e-8).pop().unwrap();
        let small: Vec<f64> = f.iter().map(|x| 1e-8 * x * ip.norm(&e)).collect();
        let b = pod(&set(SnapshotKind::Deformation, vec![e, small]), &ip, 1e-3).unwrap();
        assert_eq!(b.dim, 1);
        // a Gram eigenvalue ratio of 1e-16 sits at rounding level, so only
        // its size is checked
        assert!(b.singular_values[1] / b.singular_values[0] < 1e-6);
    }

    #[test]
    fn constant_concentrations() {
        let (m, ip) = ip();
        let n = m.n_vertices();
        let b = pod(&set(SnapshotKind::Concentration, vec![vec![1.0; n], vec![3.0; n]]), &ip, 1e-3).unwrap();
        assert_eq!(b.dim, 1);
        let c = b.mode(0);
        assert!(c.iter().all(|&x| (x - c[0]).abs() < 1e-14));
    }

    #[test]
    fn modes_orthonormal_and_sorted() {
        let (m, ip) = ip();
        let snaps: Vec<Vec<f64>> = (0..6)
            .map(|k| m.vertices().iter().map(|x| ((k + 1) as f64 * x[0]).sin() + x[1].powi(k as i32)).collect())
            .collect();
        let b = pod(&set(SnapshotKind::Concentration, snaps), &ip, 1e-12).unwrap();
        for w in b.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for i in 0..b.dim {
            for j in 0..b.dim {
                let g = ip.dot(&b.mode(i), &b.mode(j));
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_error_matches_discarded_energy() {
        let (m, ip) = ip();
        let snaps: Vec<Vec<f64>> = (0..8)
            .map(|k| m.vertices().iter().map(|x| (k as f64 * 0.7 * x[0] + x[1]).cos()).collect())
            .collect();
        let b = pod(&set(SnapshotKind::Deformation, snaps.clone()), &ip, 0.05).unwrap();
        let tail: f64 = b.singular_values[b.dim..].iter().map(|s| s * s).sum();
        let err: f64 = snaps
            .iter()
            .map(|s| {
                let p = b.expand(&b.project(&ip, s));
                let d: Vec<f64> = s.iter().zip(&p).map(|(a, c)| a - c).collect();
                ip.dot(&d, &d)
            })
            .sum();
        assert!((err - tail).abs() <= 1e-8 * b.sigma_ref * b.sigma_ref);
    }

    #[test]
    fn eps_one_gives_single_mode() {
        let (m, ip) = ip();
        let snaps: Vec<Vec<f64>> = (0..4)
            .map(|k| m.vertices().iter().map(|x| 1.0 + 0.1 * k as f64 * x[0]).collect())
            .collect();
        let b = pod(&set(SnapshotKind::Concentration, snaps), &ip, 1.0).unwrap();
        assert_eq!(b.dim, 1);
    }

    #[test]
    fn complete_basis_spans_space() {
        let (m, ip) = ip();
        let b = complete_basis(SnapshotKind::Concentration, &ip);
        assert_eq!(b.dim, m.n_vertices());
        let v: Vec<f64> = m.vertices().iter().map(|x| x[0] * x[1] + 3.0).collect();
        let r = b.expand(&b.project(&ip, &v));
        assert!(v.iter().zip(&r).all(|(a, c)| (a - c).abs() < 1e-10));
    }

    #[test]
    fn empty_set_errors() {
        let (_, ip) = ip();
        assert!(matches!(
            pod(&SnapshotSet::<f64>::new(SnapshotKind::Deformation), &ip, 0.1),
            Err(Error::EmptySnapshotSet)
        ));
    }
}
