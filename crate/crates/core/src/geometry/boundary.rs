//! Equispaced boundary grids (circle or flat torus) and their real Fourier basis.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryGrid {
    /// `n` equispaced nodes on the unit circle, spacing `2π/n`.
    Circle { n: usize },
    /// `n1 × n2` nodes on the flat torus `(R/2πZ)²`, row-major in `(i1, i2)`.
    Torus { n1: usize, n2: usize },
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        match *self {
            BoundaryGrid::Circle { n } => n,
            BoundaryGrid::Torus { n1, n2 } => n1 * n2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension of the boundary manifold.
    pub fn dimension(&self) -> usize {
        match self {
            BoundaryGrid::Circle { .. } => 1,
            BoundaryGrid::Torus { .. } => 2,
        }
    }

    pub fn axis_sizes(&self) -> Vec<usize> {
        match *self {
            BoundaryGrid::Circle { n } => vec![n],
            BoundaryGrid::Torus { n1, n2 } => vec![n1, n2],
        }
    }

    /// Angular coordinates of node `i`, one per axis.
    pub fn angles<T: Real>(&self, i: usize) -> Vec<T> {
        let tau = T::TAU();
        match *self {
            BoundaryGrid::Circle { n } => vec![tau * T::from_usize_lossy(i) / T::from_usize_lossy(n)],
            BoundaryGrid::Torus { n1, n2 } => vec![
                tau * T::from_usize_lossy(i / n2) / T::from_usize_lossy(n1),
                tau * T::from_usize_lossy(i % n2) / T::from_usize_lossy(n2),
            ],
        }
    }

    /// Quadrature weight of a node on the undeformed (`r = 1`) boundary.
    pub fn unit_cell_measure<T: Real>(&self) -> T {
        self.axis_sizes()
            .into_iter()
            .fold(T::one(), |acc, n| acc * T::TAU() / T::from_usize_lossy(n))
    }

    /// Geodesic distance between nodes on the undeformed boundary.
    pub fn distance<T: Real>(&self, i: usize, j: usize) -> T {
        let a = self.angles::<T>(i);
        let b = self.angles::<T>(j);
        a.iter()
            .zip(&b)
            .map(|(&x, &y)| {
                let d = circle_distance(x, y);
                d * d
            })
            .sum::<T>()
            .sqrt()
    }
}

/// Distance on `R/2πZ`, in `[0, π]`.
pub fn circle_distance<T: Real>(a: T, b: T) -> T {
    let tau = T::TAU();
    let mut d = (a - b) % tau;
    if d < T::zero() {
        d += tau;
    }
    d.min(tau - d)
}

/// One real Fourier mode of a 1D periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode1d {
    Constant,
    Cos(usize),
    Sin(usize),
    Nyquist(usize),
}

impl Mode1d {
    pub fn wavenumber(&self) -> usize {
        match *self {
            Mode1d::Constant => 0,
            Mode1d::Cos(k) | Mode1d::Sin(k) | Mode1d::Nyquist(k) => k,
        }
    }

    fn sample<T: Real>(&self, n: usize, i: usize) -> T {
        let nn = T::from_usize_lossy(n);
        let theta = T::TAU() * T::from_usize_lossy(i) / nn;
        let s2 = (T::two() / nn).sqrt();
        match *self {
            Mode1d::Constant => T::one() / nn.sqrt(),
            Mode1d::Cos(k) => s2 * (T::from_usize_lossy(k) * theta).cos(),
            Mode1d::Sin(k) => s2 * (T::from_usize_lossy(k) * theta).sin(),
            Mode1d::Nyquist(_) => {
                let sign = if i.is_multiple_of(2) { T::one() } else { -T::one() };
                sign / nn.sqrt()
            }
        }
    }

    fn all(n: usize) -> Vec<Mode1d> {
        let mut modes = vec![Mode1d::Constant];
        for k in 1..n / 2 {
            modes.push(Mode1d::Cos(k));
            modes.push(Mode1d::Sin(k));
        }
        modes.push(Mode1d::Nyquist(n / 2));
        modes
    }
}

/// Orthonormal (in the unweighted Euclidean product) real Fourier basis of a
/// boundary grid, with the Laplace symbol `|k|²` of each column.
#[derive(Clone, Debug)]
pub struct FourierBasis<T> {
    vectors: Matrix<T>,
    wavenumber_sq: Vec<T>,
    labels: Vec<Vec<Mode1d>>,
}

impl<T: Real> FourierBasis<T> {
    pub fn new(grid: &BoundaryGrid) -> Self {
        let sizes = grid.axis_sizes();
        let per_axis: Vec<Vec<Mode1d>> = sizes.iter().map(|&n| Mode1d::all(n)).collect();
        let mut labels: Vec<Vec<Mode1d>> = vec![vec![]];
        for axis in &per_axis {
            labels = labels
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |m| {
                        let mut p = prefix.clone();
                        p.push(*m);
                        p
                    })
                })
                .collect();
        }
        let n = grid.len();
        let vectors = Matrix::from_fn(n, labels.len(), |i, c| {
            let label = &labels[c];
            match *grid {
                BoundaryGrid::Circle { n } => label[0].sample(n, i),
                BoundaryGrid::Torus { n1, n2 } => {
                    label[0].sample::<T>(n1, i / n2) * label[1].sample::<T>(n2, i % n2)
                }
            }
        });
        let wavenumber_sq = labels
            .iter()
            .map(|l| l.iter().map(|m| T::from_usize_lossy(m.wavenumber() * m.wavenumber())).sum())
            .collect();
        Self { vectors, wavenumber_sq, labels }
    }

    pub fn len(&self) -> usize {
        self.wavenumber_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumber_sq.is_empty()
    }

    /// Basis vectors as columns.
    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn vector(&self, c: usize) -> Vec<T> {
        self.vectors.column(c)
    }

    pub fn wavenumber_sq(&self) -> &[T] {
        &self.wavenumber_sq
    }

    pub fn label(&self, c: usize) -> &[Mode1d] {
        &self.labels[c]
    }

    /// Index of the first column whose label matches.
    pub fn find(&self, label: &[Mode1d]) -> Option<usize> {
        self.labels.iter().position(|l| l.as_slice() == label)
    }

    /// The matrix `E diag(symbol(|k|²)) Eᵀ`.
    pub fn multiplier(&self, symbol: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.vectors.rows();
        let s: Vec<T> = self.wavenumber_sq.iter().map(|&k2| symbol(k2)).collect();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for (c, &sc) in s.iter().enumerate() {
                scaled[(i, c)] *= sc;
            }
        }
        scaled.matmul_transpose(&self.vectors)
    }

    /// Coefficients `Eᵀ u`.
    pub fn analyze(&self, u: &[T]) -> Vec<T> {
        self.vectors.transpose().mul_vec(u)
    }

    /// `E c`.
    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        self.vectors.mul_vec(coeffs)
    }

    /// Rayleigh quotient `vᵀ M v` of column `c` (the symbol of `M` on that
    /// mode when `M` commutes with rotations).
    pub fn mode_value(&self, m: &Matrix<T>, c: usize) -> T {
        let v = self.vector(c);
        crate::linalg::dot(&v, &m.mul_vec(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_basis_is_orthonormal() {
        let b = FourierBasis::<f64>::new(&BoundaryGrid::Circle { n: 8 });
        let g = b.vectors().transpose().matmul(b.vectors());
        assert!(g.sub(&Matrix::identity(8)).max_abs() < 1e-14);
    }

    #[test]
    fn torus_basis_is_orthonormal_with_sum_symbols() {
        let grid = BoundaryGrid::Torus { n1: 4, n2: 6 };
        let b = FourierBasis::<f64>::new(&grid);
        let g = b.vectors().transpose().matmul(b.vectors());
        assert!(g.sub(&Matrix::identity(24)).max_abs() < 1e-13);
        let c = b.find(&[Mode1d::Cos(1), Mode1d::Sin(2)]).unwrap();
        assert_eq!(b.wavenumber_sq()[c], 5.0);
    }

    #[test]
    fn multiplier_acts_on_pure_mode() {
        let b = FourierBasis::<f64>::new(&BoundaryGrid::Circle { n: 16 });
        let lap = b.multiplier(|k2| k2);
        let u: Vec<f64> = (0..16).map(|i| (3.0 * std::f64::consts::TAU * i as f64 / 16.0).cos()).collect();
        let lu = lap.mul_vec(&u);
        assert!(lu.iter().zip(&u).all(|(a, b)| (a - 9.0 * b).abs() < 1e-12));
    }

    #[test]
    fn circle_distance_wraps() {
        let d: f64 = circle_distance(0.1, std::f64::consts::TAU - 0.1);
        assert!((d - 0.2).abs() < 1e-14);
    }
}
