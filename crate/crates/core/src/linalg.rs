//! Small dense symmetric matrices: Cholesky factorization, cyclic Jacobi
//! eigendecomposition and eigenvalue clamping.
//!
//! Mixture components live in at most a dozen or so dimensions, so the
//! straightforward O(n^3) routines here are all that is needed.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SquareMatrix<F: Scalar> {
    order: usize,
    data: Vec<F>,
}

impl<F: Scalar> SquareMatrix<F> {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![F::zero(); order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[F]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Returns `None` when `data.len() != order * order`.
    pub fn from_row_major(order: usize, data: Vec<F>) -> Option<Self> {
        (data.len() == order * order).then_some(Self { order, data })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<F> {
        (0..self.order).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute difference between `self[(i, j)]` and `self[(j, i)]`.
    pub fn asymmetry(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.order {
            for j in (i + 1)..self.order {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let half = F::lit(0.5);
        for i in 0..self.order {
            for j in (i + 1)..self.order {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn principal(&self, indices: &[usize]) -> Self {
        let mut m = Self::zeros(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            for (c, &j) in indices.iter().enumerate() {
                m[(r, c)] = self[(i, j)];
            }
        }
        m
    }

    /// Entries `self[(row, j)]` for `j` in `indices`.
    pub fn row_entries(&self, row: usize, indices: &[usize]) -> Vec<F> {
        indices.iter().map(|&j| self[(row, j)]).collect()
    }

    /// Copy with every off-diagonal entry zeroed.
    pub fn diagonal_part(&self) -> Self {
        Self::from_diagonal(&self.diagonal())
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        (0..self.order)
            .map(|i| {
                self.data[i * self.order..(i + 1) * self.order]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Lower Cholesky factor, or `None` if the matrix is not numerically
    /// positive definite.
    pub fn cholesky(&self) -> Option<Cholesky<F>> {
        let n = self.order;
        let mut l = vec![F::zero(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > F::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Cholesky { order: n, lower: l })
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Only the upper triangle is trusted; the matrix is symmetrized first.
    pub fn symmetric_eigen(&self) -> SymmetricEigen<F> {
        let n = self.order;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Self::identity(n);
        let eps = F::epsilon();
        for _sweep in 0..100 {
            let mut off = F::zero();
            let mut scale = F::zero();
            for i in 0..n {
                scale = scale + a[(i, i)] * a[(i, i)];
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= eps * eps * scale || off == F::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == F::zero() {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (F::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                    let c = F::one() / (t * t + F::one()).sqrt();
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
        SymmetricEigen {
            values: a.diagonal(),
            vectors: v,
        }
    }

    /// Rebuilds `V diag(values) V^T`.
    pub fn from_eigen(values: &[F], vectors: &SquareMatrix<F>) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: F = (0..n)
                    .map(|k| vectors[(i, k)] * values[k] * vectors[(j, k)])
                    .sum();
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
        }
        m
    }

    /// Raises every eigenvalue below `floor` up to `floor`, preserving the
    /// eigenvectors. Returns the clamped matrix and the raw spectrum.
    pub fn clamp_eigenvalues(&self, floor: F) -> (Self, Vec<F>) {
        let eig = self.symmetric_eigen();
        if eig.values.iter().all(|&v| v >= floor) {
            let mut m = self.clone();
            m.symmetrize();
            return (m, eig.values);
        }
        let clamped: Vec<F> = eig
            .values
            .iter()
            .map(|&v| if v >= floor { v } else { floor })
            .collect();
        (Self::from_eigen(&clamped, &eig.vectors), eig.values)
    }
}

impl<F: Scalar> std::ops::Index<(usize, usize)> for SquareMatrix<F> {
    type Output = F;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.order + j]
    }
}

impl<F: Scalar> std::ops::IndexMut<(usize, usize)> for SquareMatrix<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.order + j]
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen<F: Scalar> {
    /// Unsorted eigenvalues.
    pub values: Vec<F>,
    /// Eigenvectors stored as columns.
    pub vectors: SquareMatrix<F>,
}

impl<F: Scalar> SymmetricEigen<F> {
    pub fn min_value(&self) -> F {
        self.values.iter().copied().fold(F::infinity(), F::min)
    }

    pub fn max_value(&self) -> F {
        self.values.iter().copied().fold(F::neg_infinity(), F::max)
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky<F: Scalar> {
    order: usize,
    lower: Vec<F>,
}

impl<F: Scalar> Cholesky<F> {
    pub fn log_det(&self) -> F {
        let two = F::lit(2.0);
        (0..self.order)
            .map(|i| two * self.lower[i * self.order + i].ln())
            .sum()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[F]) -> Vec<F> {
        let n = self.order;
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = row
                .iter()
                .zip(&y[..i])
                .fold(b[i], |s, (&l, &yk)| s - l * yk);
            y[i] = s / self.lower[i * n + i];
        }
        y
    }

    /// Solves `A x = b` with `A = L L^T`.
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.order;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let s = ((i + 1)..n).fold(x[i], |s, k| s - self.lower[k * n + i] * x[k]);
            x[i] = s / self.lower[i * n + i];
        }
        x
    }

    /// `d^T A^{-1} d`.
    pub fn mahalanobis_sq(&self, d: &[F]) -> F {
        self.forward(d).iter().map(|&v| v * v).sum()
    }
}
