//! Small dense linear algebra: row-major matrices, modified Gram–Schmidt,
//! LU with partial pivoting, and a cyclic Jacobi eigenvalue solver.
//!
//! Everything here targets matrices of order at most a few hundred, which is
//! all the shadow computations ever need; no attempt is made at blocking or
//! BLAS-style performance beyond keeping inner loops on contiguous slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `A · v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ · v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a != 0.0 {
                    let src = other.row(l);
                    let dst = out.row_mut(i);
                    axpy(a, src, dst);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `A · Aᵀ` (symmetric result).
    pub fn gram_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v = dot(self.row(i), self.row(j));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    /// `Aᵀ · A` (symmetric result).
    pub fn gram_cols(&self) -> Matrix {
        self.transpose().gram_rows()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self += s · v vᵀ` for a square matrix.
    pub fn add_scaled_outer(&mut self, s: f64, v: &[f64]) {
        assert_eq!(self.rows, self.cols);
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            let si = s * v[i];
            if si != 0.0 {
                axpy(si, v, self.row_mut(i));
            }
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(abs(x)))
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut m = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                m = m.max(abs(self.get(i, j) - self.get(j, i)));
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    sqrt(norm_sq(v))
}

/// Orthonormalize `rows` in place by modified Gram–Schmidt with one full
/// re-orthogonalization pass per row ("twice is enough").
///
/// Row `i` is rejected as dependent when its residual norm after projection
/// drops below `tol_rel` times its original norm (or is exactly zero).
pub fn mgs_orthonormalize(m: &mut Matrix, tol_rel: f64) -> Result<(), usize> {
    let rows = m.rows;
    for i in 0..rows {
        let original = norm(m.row(i));
        for _pass in 0..2 {
            for j in 0..i {
                let c = dot(m.row(j), m.row(i));
                // borrow dance: copy row j, subtract from row i
                let rj: Vec<f64> = m.row(j).to_vec();
                axpy(-c, &rj, m.row_mut(i));
            }
        }
        let res = norm(m.row(i));
        if res <= tol_rel * original || res == 0.0 {
            return Err(i);
        }
        let inv = 1.0 / res;
        for v in m.row_mut(i) {
            *v *= inv;
        }
    }
    Ok(())
}

/// Determinant by LU with partial pivoting. Exact zero for structurally
/// singular input; tiny pivots are not rounded away.
pub fn lu_det(a: &Matrix) -> f64 {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return a.data[0];
    }
    if n == 2 {
        return a.data[0] * a.data[3] - a.data[1] * a.data[2];
    }
    let mut lu = a.data.clone();
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = abs(lu[col * n + col]);
        for r in (col + 1)..n {
            let v = abs(lu[r * n + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                lu.swap(col * n + j, piv * n + j);
            }
            det = -det;
        }
        let p = lu[col * n + col];
        det *= p;
        let pinv = 1.0 / p;
        for r in (col + 1)..n {
            let f = lu[r * n + col] * pinv;
            if f != 0.0 {
                lu[r * n + col] = f;
                for j in (col + 1)..n {
                    lu[r * n + j] -= f * lu[col * n + j];
                }
            }
        }
    }
    det
}

/// Solve `A·x = b` by LU with partial pivoting; `None` when a pivot
/// underflows `pivot_tol` times the largest entry of `A`.
pub fn lu_solve(a: &Matrix, b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(b.len(), a.rows);
    let n = a.rows;
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = a.max_abs();
    let floor = pivot_tol * scale;
    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = abs(lu[col * n + col]);
        for r in (col + 1)..n {
            let v = abs(lu[r * n + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= floor {
            return None;
        }
        if piv != col {
            for j in col..n {
                lu.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let pinv = 1.0 / lu[col * n + col];
        for r in (col + 1)..n {
            let f = lu[r * n + col] * pinv;
            if f != 0.0 {
                for j in (col + 1)..n {
                    lu[r * n + j] -= f * lu[col * n + j];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        x[col] /= lu[col * n + col];
        for r in 0..col {
            let f = lu[r * n + col];
            if f != 0.0 {
                x[r] -= f * x[col];
            }
        }
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Converges to machine precision; the sweep loop stops once the
/// off-diagonal Frobenius norm falls below `1e-14` times the matrix norm
/// (relative accuracy far below the 1e-12 contract used by callers).
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a.data[0]];
    }
    let mut m = a.data.clone();
    let scale = sqrt(a.frobenius_norm_sq()).max(f64::MIN_POSITIVE);
    let stop = 1e-14 * scale;

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = m[i * n + j];
                s += 2.0 * v * v;
            }
        }
        sqrt(s)
    };

    for _sweep in 0..64 {
        if off(&m) <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if abs(apq) == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[p * n + j];
                    let aqj = m[q * n + j];
                    m[p * n + j] = c * apj - s * aqj;
                    m[q * n + j] = s * apj + c * aqj;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    eig
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eigenvalue(a: &Matrix) -> f64 {
    *sym_eigenvalues(a).last().expect("nonempty matrix")
}

/// Largest eigenvalue magnitude (the spectral norm for symmetric input).
pub fn sym_op_norm(a: &Matrix) -> f64 {
    sym_eigenvalues(a)
        .iter()
        .fold(0.0f64, |m, &l| m.max(abs(l)))
}
