//! Subspaces `E` of ℝⁿ of dimension `n - k`, kept as orthonormal bases of
//! both `E` and its orthogonal complement `E⊥`.
//!
//! The projector onto `E` is `P_E = BᵀB` for a basis matrix `B` with
//! orthonormal rows; coordinates in the basis of `E` ("E-coordinates") are
//! `c = B·v`, so `|c| = |P_E v|` and `Bᵀ·c = P_E v`. The complement basis
//! supplies the `E⊥`-coordinates used by the face tiling.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::sqrt;
use crate::rng::{stream_rng, STREAM_HAAR};

/// Residual tolerance under which an input row is declared dependent.
const RANK_TOL: f64 = 1e-10;
/// Residual tolerance for extending a basis by standard basis vectors.
const EXTEND_TOL: f64 = 1e-8;

/// An `(n-k)`-dimensional subspace of ℝⁿ.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct Subspace {
    n: usize,
    k: usize,
    /// `(n-k) × n`, orthonormal rows spanning `E`.
    basis: Matrix,
    /// `k × n`, orthonormal rows spanning `E⊥`.
    complement: Matrix,
}

/// Norms of the difference of two subspace projectors.
///
/// `op ≤ hs` always, and `op ≤ 1` since the difference of two orthogonal
/// projectors is a contraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectorDistance {
    /// Hilbert–Schmidt (Frobenius) norm of `P_{E₁} - P_{E₂}`.
    pub hs: f64,
    /// Operator norm of `P_{E₁} - P_{E₂}`.
    pub op: f64,
}

impl Subspace {
    /// Orthonormalize the given `(n-k) × n` rows into a subspace.
    ///
    /// The rows need not be orthonormal; they must span an `(n-k)`-space.
    /// The complement basis is completed deterministically by extending with
    /// standard basis vectors in index order.
    pub fn from_rows(rows: Matrix) -> Result<Self> {
        let m = rows.rows();
        let n = rows.cols();
        if m > n || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= n-k <= n, got {m} rows in dimension {n}"
            )));
        }
        let mut basis = rows;
        linalg::mgs_orthonormalize(&mut basis, RANK_TOL)
            .map_err(|row| Error::RankDeficient { row })?;
        let complement = complete_complement(&basis)?;
        Ok(Self { n, k: n - m, basis, complement })
    }

    /// The axis-aligned subspace `span{e₁, …, e_{n-k}}`.
    pub fn axis_aligned(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidParameter(format!("need k < n, got k={k}, n={n}")));
        }
        let mut basis = Matrix::zeros(n - k, n);
        for i in 0..n - k {
            basis.set(i, i, 1.0);
        }
        let mut complement = Matrix::zeros(k, n);
        for j in 0..k {
            complement.set(j, n - k + j, 1.0);
        }
        Ok(Self { n, k, basis, complement })
    }

    /// Haar-random subspace from the Grassmannian of `(n-k)`-planes.
    ///
    /// Gaussian rows orthonormalized by MGS: rotation invariance of the
    /// Gaussian makes the row span Haar distributed. Identical seeds
    /// reproduce the identical basis bit-for-bit.
    pub fn haar(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 1 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k < n, got k={k}, n={n}"
            )));
        }
        let mut rng = stream_rng(seed, STREAM_HAAR);
        // a Gaussian matrix is full rank with probability one; retry the
        // draw on the (measure-zero, numerically conceivable) failure
        for _attempt in 0..4 {
            let rows = gaussian_matrix(n - k, n, &mut rng);
            if let Ok(s) = Self::from_rows(rows) {
                return Ok(s);
            }
        }
        Err(Error::NumericalFailure("haar draw kept producing rank-deficient rows"))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the subspace, `n - k`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n - self.k
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn complement_basis(&self) -> &Matrix {
        &self.complement
    }

    /// E-coordinates of the projection: `c = B·v` with `|c| = |P_E v|`.
    pub fn to_e_coords(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(self.basis.matvec(v))
    }

    /// E⊥-coordinates of the projection onto the complement.
    pub fn to_perp_coords(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(self.complement.matvec(v))
    }

    /// Ambient vector `Bᵀ·c` for E-coordinates `c` (the point of `E` they
    /// name).
    pub fn embed(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: c.len() });
        }
        Ok(self.basis.tr_matvec(c))
    }

    /// Ambient vector `Cᵀ·c` for E⊥-coordinates `c`.
    pub fn embed_perp(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: c.len() });
        }
        Ok(self.complement.tr_matvec(c))
    }

    /// `P_E v` in ambient coordinates.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.basis.tr_matvec(&self.to_e_coords(v)?))
    }

    /// The `n × n` projector matrix `P_E = BᵀB`.
    pub fn projector(&self) -> Matrix {
        self.basis.transpose().matmul(&self.basis)
    }

    /// E-coordinates of `P_E e_j` — column `j` (0-based) of the basis.
    pub fn basis_column(&self, j: usize) -> Vec<f64> {
        self.basis.column(j)
    }

    /// `|P_E e_j|²` for 0-based column `j`.
    pub fn projected_axis_norm_sq(&self, j: usize) -> f64 {
        self.basis.column(j).iter().map(|x| x * x).sum()
    }

    /// Hilbert–Schmidt and operator norms of `P_{E₁} - P_{E₂}`.
    pub fn projector_distance(&self, other: &Subspace) -> Result<ProjectorDistance> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        if self.k != other.k {
            return Err(Error::InvalidParameter(format!(
                "codimension mismatch: {} vs {}",
                self.k, other.k
            )));
        }
        let diff = self.projector().sub(&other.projector());
        let hs = sqrt(diff.frobenius_norm_sq());
        let op = linalg::sym_op_norm(&diff);
        Ok(ProjectorDistance { hs, op })
    }

    /// Largest residual over the orthonormality contracts:
    /// `max(|BBᵀ - I|∞, |CBᵀ|∞, |CCᵀ - I|∞)`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.dim();
        let bbt = self.basis.gram_rows();
        let mut err = bbt.sub(&Matrix::identity(m)).max_abs();
        if self.k > 0 {
            let cbt = self.complement.matmul(&self.basis.transpose());
            err = err.max(cbt.max_abs());
            let cct = self.complement.gram_rows();
            err = err.max(cct.sub(&Matrix::identity(self.k)).max_abs());
        }
        err
    }
}

/// Extend `basis` to an orthonormal basis of ℝⁿ with standard basis
/// vectors, in index order, and return the added rows.
fn complete_complement(basis: &Matrix) -> Result<Matrix> {
    let n = basis.cols();
    let k = n - basis.rows();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    for axis in 0..n {
        if rows.len() == k {
            break;
        }
        let mut v: Vec<f64> = alloc::vec![0.0; n];
        v[axis] = 1.0;
        // two projection passes keep the result orthogonal to working
        // precision even when the residual is small
        for _pass in 0..2 {
            for i in 0..basis.rows() {
                let c = linalg::dot(basis.row(i), &v);
                linalg::axpy(-c, basis.row(i), &mut v);
            }
            for r in &rows {
                let c = linalg::dot(r, &v);
                linalg::axpy(-c, r, &mut v);
            }
        }
        let res = linalg::norm(&v);
        if res > EXTEND_TOL {
            let inv = 1.0 / res;
            for x in &mut v {
                *x *= inv;
            }
            rows.push(v);
        }
    }
    if rows.len() != k {
        return Err(Error::NumericalFailure("could not complete complement basis"));
    }
    let mut out = Matrix::zeros(k, n);
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(r);
    }
    Ok(out)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rng.sample::<f64, _>(StandardNormal));
        }
    }
    m
}

/// Haar-random unit vector in an `m`-dimensional coordinate system
/// (Gaussian direction, normalized).
pub fn haar_unit_vector(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = linalg::norm(&v);
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}
