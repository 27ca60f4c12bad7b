//! Small dense linear algebra kernels.
//!
//! Row-major `f64` storage throughout. The routines here are sized for the
//! problems this crate sees: covariance matrices up to a few hundred rows and
//! per-depth Gaussians of dimension at most the embedding size.

use std::ops::{Index, IndexMut};

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a flat row-major buffer.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows. Returns `None` for ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        self.row_iter().map(|r| dot(r, v)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower Cholesky factor `L` with `L Lᵀ = a`, or `None` if `a` is not
/// numerically positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return None;
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &y[..i]);
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `Lᵀ x = y` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors.row(i)` is the unit eigenvector for `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// drops below `tol` times the matrix norm, or `max_sweeps` is reached.
pub fn jacobi_eigen(a: &Matrix, tol: f64, max_sweeps: usize) -> SymmetricEigen {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi_eigen needs a square matrix");
    let mut m = a.clone();
    // Symmetrize so rounding noise in the input cannot bias the rotations.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();

    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= tol * scale || scale == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
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
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(r, k)] = v[(k, i)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Orthonormalizes `basis` in place with two passes of modified Gram-Schmidt.
/// Vectors that collapse numerically are replaced by fresh random directions.
pub fn orthonormalize<R: Rng>(basis: &mut [Vec<f64>], rng: &mut R) {
    for i in 0..basis.len() {
        for _attempt in 0..4 {
            for _pass in 0..2 {
                for j in 0..i {
                    let (head, tail) = basis.split_at_mut(i);
                    let proj = dot(&tail[0], &head[j]);
                    for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = norm(&basis[i]);
            if nrm > 1e-12 {
                basis[i].iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            basis[i]
                .iter_mut()
                .for_each(|x| *x = rng.random::<f64>() - 0.5);
        }
    }
}

/// Leading `count` eigenpairs of a symmetric positive semidefinite matrix via
/// block subspace iteration with Rayleigh-Ritz projection.
///
/// The projected problems are solved with [`jacobi_eigen`]. Iteration stops
/// once every wanted Ritz pair has residual `‖A v − θ v‖ ≤ tol · θ₁`.
pub fn subspace_eigen<R: Rng>(
    a: &Matrix,
    count: usize,
    tol: f64,
    max_iter: usize,
    rng: &mut R,
) -> SymmetricEigen {
    let n = a.rows();
    assert_eq!(n, a.cols(), "subspace_eigen needs a square matrix");
    let block = (2 * count + 8).min(n);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut q, rng);

    let mut values = vec![0.0; block];
    for _ in 0..max_iter {
        let z: Vec<Vec<f64>> = q.iter().map(|v| a.matvec(v)).collect();
        let mut h = Matrix::zeros(block, block);
        for i in 0..block {
            for j in 0..=i {
                let hij = 0.5 * (dot(&q[i], &z[j]) + dot(&q[j], &z[i]));
                h[(i, j)] = hij;
                h[(j, i)] = hij;
            }
        }
        let small = jacobi_eigen(&h, 1e-15, 100);
        let rotate = |basis: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..block)
                .map(|r| {
                    let coeffs = small.vectors.row(r);
                    let mut out = vec![0.0; n];
                    for (c, b) in coeffs.iter().zip(basis) {
                        for (o, x) in out.iter_mut().zip(b) {
                            *o += c * x;
                        }
                    }
                    out
                })
                .collect()
        };
        q = rotate(&q);
        let mut az = rotate(&z);
        values.clone_from(&small.values);

        let top = values[0].abs().max(f64::MIN_POSITIVE);
        let converged = (0..count).all(|i| {
            let res: f64 = az[i]
                .iter()
                .zip(&q[i])
                .map(|(x, y)| (x - values[i] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            res <= tol * top
        });
        if converged {
            break;
        }
        orthonormalize(&mut az, rng);
        q = az;
    }

    let mut vectors = Matrix::zeros(count, n);
    for i in 0..count {
        vectors.row_mut(i).copy_from_slice(&q[i]);
    }
    values.truncate(count);
    SymmetricEigen { values, vectors }
}
