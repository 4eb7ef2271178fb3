//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! cyclic Jacobi eigenvalues and a matrix-free conjugate gradient.
//!
//! Sizes here are boundary-grid sized (N <= a few hundred), so everything is
//! plain `Vec` storage with cache-friendly loop orders.

use std::ops::{Index, IndexMut};

use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix payload length");
        Self { rows, cols, data }
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[T], v: &[T]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhsᵀ` without forming the transpose.
    pub fn matmul_transpose(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_transpose inner dimension");
        Self::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * alpha).collect() }
    }

    pub fn scale_mut(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_diagonal(&mut self, alpha: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += alpha;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-T::one(), other);
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    /// `max |a_ij - a_ji|`, zero for symmetric matrices.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Self {
        let h = T::half();
        Self::from_fn(self.rows, self.cols, |i, j| h * (self[(i, j)] + self[(j, i)]))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| U::lit(x.f64())).collect() }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// LU factorization with partial pivoting, `P A = L U` stored in place.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    /// `min |u_ii| / max |a_ij|`; zero for an exactly singular matrix.
    pivot_ratio: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Self {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.rows();
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            if pivot == T::zero() {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu.data[k * n + j];
                    lu.data[i * n + j] -= f * u;
                }
            }
        }
        let pivot_ratio = if n == 0 {
            T::one()
        } else if scale == T::zero() {
            T::zero()
        } else {
            min_pivot / scale
        };
        Self { lu, perm, pivot_ratio }
    }

    pub fn pivot_ratio(&self) -> T {
        self.pivot_ratio
    }

    pub fn is_singular(&self, threshold: T) -> bool {
        !(self.pivot_ratio > threshold)
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|j| self.lu[(i, j)] * x[j]).fold(x[i], |acc, v| acc - v);
            x[i] = s;
        }
        for i in (0..n).rev() {
            let s: T = ((i + 1)..n).map(|j| self.lu[(i, j)] * x[j]).fold(x[i], |acc, v| acc - v);
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column block at once.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "solve_matrix rows");
        let m = b.cols();
        let mut x = Matrix::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.data[i * m..(i + 1) * m].copy_from_slice(b.row(p));
        }
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                if l == T::zero() {
                    continue;
                }
                for c in 0..m {
                    let v = x.data[j * m + c];
                    x.data[i * m + c] -= l * v;
                }
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                if u == T::zero() {
                    continue;
                }
                for c in 0..m {
                    let v = x.data[j * m + c];
                    x.data[i * m + c] -= u * v;
                }
            }
            let d = self.lu[(i, i)];
            for c in 0..m {
                x.data[i * m + c] /= d;
            }
        }
        x
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.symmetrized();
    let tol = T::epsilon() * T::lit(1e-2);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        let total = m.frobenius_norm();
        if off.sqrt() <= tol * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
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
            }
        }
    }
    let mut ev = m.diagonal();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm<T: Real>(a: &Matrix<T>) -> T {
    symmetric_eigenvalues(a).iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Singular values of a (small) matrix, descending, via the eigenvalues of `AᵀA`.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let gram = a.transpose().matmul(a);
    let mut sv: Vec<T> = symmetric_eigenvalues(&gram).into_iter().map(|l| l.max(T::zero()).sqrt()).collect();
    sv.reverse();
    sv
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome<T> {
    pub iterations: usize,
    pub relative_residual: T,
    pub converged: bool,
}

/// Unpreconditioned conjugate gradient for a symmetric positive definite
/// operator given only through its action. `x` holds the initial guess and
/// receives the solution.
pub fn conjugate_gradient<T: Real>(
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let b_norm = norm2(b);
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return CgOutcome { iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let ax = apply(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        let rel = rr.sqrt() / b_norm;
        if rel <= tol {
            return CgOutcome { iterations: it, relative_residual: rel, converged: true };
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return CgOutcome { iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rel = rr.sqrt() / b_norm;
    CgOutcome { iterations: max_iter, relative_residual: rel, converged: rel <= tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_reports_singularity() {
        let a = Matrix::<f64>::from_vec(3, 3, vec![4.0, 1.0, 2.0, 1.0, 5.0, 3.0, 2.0, 3.0, 6.0]);
        let lu = Lu::factor(&a);
        let x = lu.solve_vec(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-12);
        }
        let s = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(Lu::factor(&s).is_singular(1e-12));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = Matrix::<f64>::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let r = Matrix::<f64>::outer(&[1.0, 2.0, 3.0], &[1.0, -1.0]);
        let sv = singular_values(&r);
        assert!((sv[0] - (14.0f64 * 2.0).sqrt()).abs() < 1e-12);
        assert!(sv[1].abs() < 1e-7);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = Matrix::<f64>::from_vec(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        let out = conjugate_gradient(|v| a.mul_vec(v), &b, &mut x, 1e-12, 50);
        assert!(out.converged);
        let back = a.mul_vec(&x);
        assert!(back.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-10));
    }
}
