//! Small dense matrices and the factorizations the solver needs.
//!
//! Everything here targets the sizes that occur in practice: ambient
//! dimension N of at most a handful, quotient graphs with at most a few
//! hundred vertex orbits. Determinism matters more than speed, so the
//! eigensolver is a cyclic Jacobi sweep and linear solves go through
//! explicit Cholesky / LU factorizations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matvec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// A * other * A^T, the congruence action on symmetric tensors.
    pub fn congruence(&self, other: &Matrix) -> Matrix {
        self.matmul(other).matmul(&self.transpose())
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn det(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return 1.0;
        }
        let mut lu = self.data.clone();
        let mut sign = 1.0;
        for k in 0..n {
            let mut pivot = k;
            for i in (k + 1)..n {
                if lu[i * n + k].abs() > lu[pivot * n + k].abs() {
                    pivot = i;
                }
            }
            if lu[pivot * n + k] == 0.0 {
                return 0.0;
            }
            if pivot != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot * n + j);
                }
                sign = -sign;
            }
            let d = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        let mut det = sign;
        for k in 0..n {
            det *= lu[k * n + k];
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut pivot = k;
            for i in (k + 1)..n {
                if a[(i, k)].abs() > a[(pivot, k)].abs() {
                    pivot = i;
                }
            }
            if a[(pivot, k)].abs() <= 1e-14 * scale {
                return Err(Error::SingularSystem("matrix inverse".into()));
            }
            if pivot != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(pivot, j)];
                    a[(pivot, j)] = t;
                    let t = inv[(k, j)];
                    inv[(k, j)] = inv[(pivot, j)];
                    inv[(pivot, j)] = t;
                }
            }
            let d = a[(k, k)];
            for j in 0..n {
                a[(k, j)] /= d;
                inv[(k, j)] /= d;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(k, j)];
                    inv[(i, j)] -= f * inv[(k, j)];
                }
            }
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub struct Cholesky {
    n: usize,
    /// Lower-triangular factor, row-major, including the diagonal.
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `m = L L^T`. Fails when a pivot drops below
    /// `1e-13 * max diagonal`, which for reduced graph Laplacians means
    /// the positive-weight graph is disconnected.
    pub fn new(m: &Matrix) -> Result<Cholesky> {
        assert!(m.is_square());
        let n = m.rows();
        let mut l = vec![0.0; n * n];
        let scale = (0..n)
            .map(|i| m[(i, i)].abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..=i {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 1e-13 * scale {
                        return Err(Error::SingularSystem(format!(
                            "non-positive pivot {s:.3e} at row {i}"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `m x = b` using the stored factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching eigenvector
/// columns. The sweep stops once the off-diagonal Frobenius mass falls
/// below `1e-13` times the norm of the input.
pub fn sym_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(m.is_square());
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        let vals = (0..n).map(|i| a[(i, i)]).collect();
        return (vals, v);
    }
    let threshold = 1e-13 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold / (n as f64) {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vecs[(row, col)] = v[(row, src)];
        }
    }
    (vals, vecs)
}

/// Inverse square root of a symmetric positive-definite matrix.
pub fn sym_inv_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = sym_eigen(m);
    let scale = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut d = Matrix::zeros(vals.len(), vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalue {v:.3e} is not positive"
            )));
        }
        d[(i, i)] = 1.0 / v.sqrt();
    }
    Ok(vecs.matmul(&d).matmul(&vecs.transpose()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], f: f64) -> Vec<f64> {
    a.iter().map(|x| x * f).collect()
}

/// Accumulates `w * v v^T` into a symmetric matrix.
pub fn add_outer(m: &mut Matrix, w: f64, v: &[f64]) {
    for i in 0..v.len() {
        for j in 0..v.len() {
            m[(i, j)] += w * v[i] * v[j];
        }
    }
}

/// Checks that `r` is orthogonal: `r^T r = I` within `tol`.
pub fn is_orthogonal(r: &Matrix, tol: f64) -> bool {
    if !r.is_square() {
        return false;
    }
    let gram = r.transpose().matmul(r);
    gram.sub(&Matrix::identity(r.rows())).frobenius_norm() <= tol
}
