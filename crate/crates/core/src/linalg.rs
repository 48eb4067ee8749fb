//! Dense linear-algebra primitives shared by every solver: symmetric and
//! block matrix types, the PSD-cone and trace-ball projections, and thin
//! eigen/SVD wrappers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{from_f64, Scalar};

/// Relative asymmetry accepted (and silently symmetrized) by
/// [`SymMatrix::try_new`]. Solver iterates accumulate roundoff of this
/// order; anything larger is treated as a caller bug.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// A square matrix kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Scalar> {
    data: DMatrix<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Accepts a square matrix whose relative asymmetry
    /// `||A - A^T||_F / (1 + ||A||_F)` is at most [`SYMMETRY_RTOL`] and
    /// stores the symmetrized `(A + A^T) / 2`.
    pub fn try_new(matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dim_mismatch(
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
                "square matrix",
            ));
        }
        let asym = (&matrix - matrix.transpose()).norm();
        let scale = T::one() + matrix.norm();
        let tol = from_f64::<T>(SYMMETRY_RTOL);
        if asym > tol * scale {
            return Err(Error::Asymmetric {
                asymmetry: crate::scalar::to_f64(asym / scale),
                tolerance: SYMMETRY_RTOL,
            });
        }
        Ok(Self::symmetrize(matrix))
    }

    /// Unconditionally symmetrizes `(A + A^T) / 2`. Used where asymmetry is
    /// known to be pure roundoff (e.g. after an eigendecomposition).
    pub fn symmetrize(matrix: DMatrix<T>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "square matrix required");
        let half = from_f64::<T>(0.5);
        let sym = (&matrix + matrix.transpose()).scale(half);
        Self { data: sym }
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    /// Scaled identity `c * I`.
    pub fn scaled_identity(dim: usize, c: T) -> Self {
        Self {
            data: DMatrix::identity(dim, dim).scale(c),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> T {
        self.data.trace()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.norm()
    }
}

/// An `M x (N*K)` matrix viewed as `K` contiguous `M x N` blocks.
///
/// Block `k` occupies columns `[k*N, (k+1)*N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix<T: Scalar> {
    m: usize,
    n: usize,
    k: usize,
    data: DMatrix<T>,
}

impl<T: Scalar> BlockMatrix<T> {
    pub fn new(m: usize, n: usize, k: usize, data: DMatrix<T>) -> Result<Self> {
        if data.nrows() != m || data.ncols() != n * k {
            return Err(Error::dim_mismatch(
                format!("{}x{}", data.nrows(), data.ncols()),
                format!("{}x{} ({} blocks of {} columns)", m, n * k, k, n),
            ));
        }
        Ok(Self { m, n, k, data })
    }

    pub fn zeros(m: usize, n: usize, k: usize) -> Self {
        Self {
            m,
            n,
            k,
            data: DMatrix::zeros(m, n * k),
        }
    }

    /// Assembles from `K` blocks of identical shape.
    pub fn from_blocks(blocks: &[DMatrix<T>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Domain("block list is empty".into()))?;
        let (m, n) = (first.nrows(), first.ncols());
        let k = blocks.len();
        let mut data = DMatrix::zeros(m, n * k);
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != m || b.ncols() != n {
                return Err(Error::dim_mismatch(
                    format!("block {}: {}x{}", i, b.nrows(), b.ncols()),
                    format!("{m}x{n}"),
                ));
            }
            data.view_mut((0, i * n), (m, n)).copy_from(b);
        }
        Ok(Self { m, n, k, data })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    /// Columns per block.
    pub fn block_cols(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.k
    }

    pub fn block(&self, k: usize) -> nalgebra::DMatrixView<'_, T> {
        assert!(k < self.k, "block index {k} out of range {}", self.k);
        self.data.view((0, k * self.n), (self.m, self.n))
    }

    pub fn block_owned(&self, k: usize) -> DMatrix<T> {
        self.block(k).into_owned()
    }

    pub fn set_block(&mut self, k: usize, block: &DMatrix<T>) {
        assert!(k < self.k, "block index {k} out of range {}", self.k);
        assert_eq!((block.nrows(), block.ncols()), (self.m, self.n));
        self.data
            .view_mut((0, k * self.n), (self.m, self.n))
            .copy_from(block);
    }

    pub fn block_frobenius_norm(&self, k: usize) -> T {
        self.block(k).norm()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.norm()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    /// Reinterprets a plain matrix with the given block structure.
    pub fn from_matrix(n: usize, data: DMatrix<T>) -> Result<Self> {
        if n == 0 || !data.ncols().is_multiple_of(n) {
            return Err(Error::dim_mismatch(
                format!("{} columns", data.ncols()),
                format!("a multiple of {n}"),
            ));
        }
        let k = data.ncols() / n;
        Self::new(data.nrows(), n, k, data)
    }
}

/// Thin singular value decomposition `A = U diag(sigma) V^T` with
/// `min(M, N)` singular triplets, singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> ThinSvd<T> {
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[j];
        }
        us * self.v.transpose()
    }

    /// Best rank-`r` approximation (truncated reconstruction).
    pub fn truncated(&self, r: usize) -> DMatrix<T> {
        let r = r.min(self.sigma.len());
        let mut us = self.u.columns(0, r).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[j];
        }
        us * self.v.columns(0, r).transpose()
    }
}

/// Symmetric eigendecomposition `A = V diag(lambda) V^T`, eigenvalues
/// ascending, eigenvectors orthonormal columns of `V`.
///
/// Uses the system LAPACK (`?syevd`), falling back to nalgebra's
/// tridiagonal QL when LAPACK declines the input.
pub fn sym_eig<T: Scalar>(a: &SymMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let dim = a.dim();
    if let Some((values, vectors)) = T::lapack_syevd(a.as_matrix().clone()) {
        return Ok((values, vectors));
    }
    let eig = nalgebra::SymmetricEigen::try_new(a.as_matrix().clone(), T::default_epsilon(), 0)
        .ok_or(Error::EigenFailure { dim })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalues are finite")
    });
    let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Projection onto the positive semidefinite cone: eigenvalues clipped at
/// exactly zero, eigenvectors kept.
pub fn psd_project<T: Scalar>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let (values, vectors) = sym_eig(a)?;
    let dim = a.dim();
    let positive: Vec<usize> = (0..dim).filter(|&i| values[i] > T::zero()).collect();
    if positive.is_empty() {
        return Ok(SymMatrix::zeros(dim));
    }
    let mut v_pos = DMatrix::zeros(dim, positive.len());
    let mut v_scaled = DMatrix::zeros(dim, positive.len());
    for (j, &i) in positive.iter().enumerate() {
        v_pos.set_column(j, &vectors.column(i));
        v_scaled.set_column(j, &(vectors.column(i) * values[i]));
    }
    Ok(SymMatrix::symmetrize(v_scaled * v_pos.transpose()))
}

/// Projection onto `{ W : trace(W) <= beta }` in Frobenius distance:
/// `A - max(trace(A) - beta, 0) / dim * I`.
pub fn trace_ball_project<T: Scalar>(a: &SymMatrix<T>, beta: T) -> SymMatrix<T> {
    debug_assert!(beta >= T::zero(), "trace bound must be nonnegative");
    let dim = a.dim();
    let excess = a.trace() - beta;
    if excess <= T::zero() {
        return a.clone();
    }
    let shift = excess / from_f64::<T>(dim as f64);
    let mut data = a.as_matrix().clone();
    for i in 0..dim {
        data[(i, i)] -= shift;
    }
    SymMatrix { data }
}

/// Thin SVD with singular values sorted descending.
pub fn thin_svd<T: Scalar>(a: &DMatrix<T>) -> Result<ThinSvd<T>> {
    let (rows, cols) = a.shape();
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, T::default_epsilon(), 0)
        .ok_or(Error::SvdFailure { rows, cols })?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let p = svd.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });
    let sigma = DVector::from_iterator(p, order.iter().map(|&i| svd.singular_values[i]));
    let mut u_sorted = DMatrix::zeros(rows, p);
    let mut v_sorted = DMatrix::zeros(cols, p);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v_t.row(src).transpose());
    }
    Ok(ThinSvd {
        u: u_sorted,
        sigma,
        v: v_sorted,
    })
}

/// Assembles the stacked certificate matrix `[[W1, X], [X^T, W2]]` of
/// dimension `M + N*K`.
pub fn assemble_stacked<T: Scalar>(
    w1: &SymMatrix<T>,
    x: &BlockMatrix<T>,
    w2: &SymMatrix<T>,
) -> SymMatrix<T> {
    let m = x.rows();
    let nk = x.block_cols() * x.num_blocks();
    assert_eq!(w1.dim(), m, "W1 must be MxM");
    assert_eq!(w2.dim(), nk, "W2 must be NKxNK");
    let dim = m + nk;
    let mut s = DMatrix::zeros(dim, dim);
    s.view_mut((0, 0), (m, m)).copy_from(w1.as_matrix());
    s.view_mut((0, m), (m, nk)).copy_from(x.as_matrix());
    s.view_mut((m, 0), (nk, m))
        .copy_from(&x.as_matrix().transpose());
    s.view_mut((m, m), (nk, nk)).copy_from(w2.as_matrix());
    SymMatrix { data: s }
}
