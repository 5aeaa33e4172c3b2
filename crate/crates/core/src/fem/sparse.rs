//! Thin wrapper over `faer` compressed-column matrices.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse matrix in compressed-column form. Duplicate triplets are summed.
#[derive(Clone, Debug)]
pub struct SparseMatrix<T: Scalar> {
    inner: SparseColMat<usize, T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let entries: Vec<Triplet<usize, usize, T>> =
            triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &entries)
            .map_err(|e| Error::DimensionMismatch(format!("sparse construction failed: {e:?}")))?;
        Ok(SparseMatrix { inner })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[]).expect("empty matrix")
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    pub fn as_faer(&self) -> &SparseColMat<usize, T> {
        &self.inner
    }

    /// Iterates over stored `(row, col, value)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let sym = self.inner.symbolic();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let val = self.inner.val();
        (0..self.ncols()).flat_map(move |j| (col_ptr[j]..col_ptr[j + 1]).map(move |k| (row_idx[k], j, val[k])))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols());
        let mut y = vec![T::zero(); self.nrows()];
        for (i, j, v) in self.entries() {
            y[i] = y[i] + v * x[j];
        }
        y
    }

    pub fn mul_transpose_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows());
        let mut y = vec![T::zero(); self.ncols()];
        for (i, j, v) in self.entries() {
            y[j] = y[j] + v * x[i];
        }
        y
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[T], x: &[T]) -> T {
        self.entries().fold(T::zero(), |s, (i, j, v)| s + y[i] * v * x[j])
    }

    /// `Aᵀ`-free product `A X` for a dense block `X`.
    pub fn mul_dense(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.ncols());
        let mut y = Mat::<T>::zeros(self.nrows(), x.ncols());
        for (i, j, v) in self.entries() {
            for c in 0..x.ncols() {
                y[(i, c)] = y[(i, c)] + v * x[(j, c)];
            }
        }
        y
    }

    /// `Lᵀ A R` for dense column bases `L` and `R`.
    pub fn congruence(&self, left: &Mat<T>, right: &Mat<T>) -> Mat<T> {
        let ar = self.mul_dense(right);
        left.transpose() * &ar
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::<T>::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.entries() {
            m[(i, j)] = m[(i, j)] + v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries().fold(T::zero(), |s, (_, _, v)| s + v * v).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.entries().fold(T::zero(), |m, (_, _, v)| m.max(v.abs()))
    }

    /// Linear combination of matrices: `sum_k w_k A_k`.
    pub fn combine(terms: &[(T, &SparseMatrix<T>)]) -> Result<Self> {
        let (nrows, ncols) = match terms.first() {
            Some((_, a)) => (a.nrows(), a.ncols()),
            None => return Err(Error::DimensionMismatch("empty combination".into())),
        };
        let mut trip = Vec::new();
        for (w, a) in terms {
            if a.nrows() != nrows || a.ncols() != ncols {
                return Err(Error::DimensionMismatch("combination of differently sized matrices".into()));
            }
            trip.extend(a.entries().map(|(i, j, v)| (i, j, *w * v)));
        }
        Self::from_triplets(nrows, ncols, &trip)
    }
}

impl<T: Scalar> SparseMatrix<T> {
    /// Sparse Cholesky factorization; the matrix must be symmetric positive
    /// definite (only the lower triangle is read).
    pub fn cholesky(&self, what: &'static str) -> Result<SparseSolver<T>> {
        let llt = self.inner.sp_cholesky(Side::Lower).map_err(|_| Error::SingularSystem(what))?;
        Ok(SparseSolver {
            factor: Factor::Cholesky(llt),
            matrix: self.clone(),
            what,
        })
    }

    /// Sparse LU factorization with partial pivoting.
    pub fn lu(&self, what: &'static str) -> Result<SparseSolver<T>> {
        let lu = self.inner.sp_lu().map_err(|_| Error::SingularSystem(what))?;
        Ok(SparseSolver {
            factor: Factor::Lu(lu),
            matrix: self.clone(),
            what,
        })
    }

    /// Symbolic LU analysis, reusable for matrices with the same pattern.
    pub fn lu_symbolic(&self) -> Result<SymbolicLu<usize>> {
        SymbolicLu::try_new(self.inner.symbolic()).map_err(|_| Error::SingularSystem("symbolic analysis"))
    }

    /// LU factorization reusing a symbolic analysis of the same pattern.
    pub fn lu_with(&self, symbolic: &SymbolicLu<usize>, what: &'static str) -> Result<SparseSolver<T>> {
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), self.inner.as_ref()).map_err(|_| Error::SingularSystem(what))?;
        Ok(SparseSolver {
            factor: Factor::Lu(lu),
            matrix: self.clone(),
            what,
        })
    }

    /// Same sparsity pattern (column pointers and row indices).
    pub fn same_pattern(&self, other: &SparseMatrix<T>) -> bool {
        let (a, b) = (self.inner.symbolic(), other.inner.symbolic());
        a.nrows() == b.nrows() && a.ncols() == b.ncols() && a.col_ptr() == b.col_ptr() && a.row_idx() == b.row_idx()
    }
}

#[derive(Debug)]
enum Factor<T> {
    Cholesky(Llt<usize, T>),
    Lu(Lu<usize, T>),
}

/// A factorized sparse matrix. Solutions are refined until the relative
/// residual is at most `1e-12` (or stops improving).
#[derive(Debug)]
pub struct SparseSolver<T: Scalar> {
    factor: Factor<T>,
    matrix: SparseMatrix<T>,
    what: &'static str,
}

pub const RESIDUAL_TOL: f64 = 1e-12;

impl<T: Scalar> SparseSolver<T> {
    fn raw_solve(&self, b: &[T]) -> Vec<T> {
        let mut x = Mat::<T>::from_fn(b.len(), 1, |i, _| b[i]);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(x.as_mut()),
            Factor::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a {}x{} system",
                b.len(),
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        let norm = |v: &[T]| v.iter().fold(T::zero(), |s, &a| s + a * a).sqrt();
        let b_norm = norm(b);
        let mut x = self.raw_solve(b);
        let mut best = T::infinity();
        for _ in 0..3 {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem(self.what));
            }
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            let rel = if b_norm > T::zero() { norm(&r) / b_norm } else { norm(&r) };
            if rel <= T::lit(RESIDUAL_TOL) || !(rel < best) {
                break;
            }
            best = rel;
            let dx = self.raw_solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi = *xi + d;
            }
        }
        Ok(x)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Dense `Lᵀ x` for a dense column basis `L` and a vector `x`.
pub fn dense_transpose_vec<T: Scalar>(left: &Mat<T>, x: &[T]) -> Vec<T> {
    assert_eq!(left.nrows(), x.len());
    (0..left.ncols())
        .map(|c| (0..x.len()).fold(T::zero(), |s, i| s + left[(i, c)] * x[i]))
        .collect()
}

/// Dense `L y` for a dense column basis `L` and coefficients `y`.
pub fn dense_vec<T: Scalar>(left: &Mat<T>, y: &[T]) -> Vec<T> {
    assert_eq!(left.ncols(), y.len());
    let mut out = vec![T::zero(); left.nrows()];
    for (c, &yc) in y.iter().enumerate() {
        if yc == T::zero() {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = *o + left[(i, c)] * yc;
        }
    }
    out
}
