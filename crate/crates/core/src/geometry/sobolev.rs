use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::Real;

use super::WarpedGeometry;

/// `(1 + L₀)^s` on the outer boundary grid.
#[derive(Clone, Debug)]
pub struct SobolevScale<T> {
    order: T,
    /// `1 + |k|²/r(0)²` per basis column.
    symbols: Vec<T>,
    matrix: Matrix<T>,
}

impl<T: Real> SobolevScale<T> {
    pub fn new(geometry: &WarpedGeometry<T>, order: T) -> Result<Self> {
        if !order.is_finite() {
            return Err(Error::InvalidArgument(format!("Sobolev order {order}")));
        }
        let r0 = geometry.r(0);
        let basis = geometry.basis();
        let symbols: Vec<T> = basis.wavenumber_sq().iter().map(|&k2| T::one() + k2 / (r0 * r0)).collect();
        let matrix = if order == T::zero() {
            Matrix::identity(basis.vectors().rows())
        } else {
            basis.multiplier(|k2| (T::one() + k2 / (r0 * r0)).powf(order))
        };
        Ok(Self { order, symbols, matrix })
    }

    pub fn order(&self) -> T {
        self.order
    }

    pub fn symbols(&self) -> &[T] {
        &self.symbols
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        self.matrix.mul_vec(u)
    }

    /// `Σ_k (1 + k²)^s û_k²` with `û` the orthonormal Fourier coefficients.
    pub fn norm_sq(&self, u: &[T]) -> T {
        dot(&self.apply(u), u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};
    use crate::linalg::norm2;

    fn disk(n: usize) -> WarpedGeometry<f64> {
        build_warped_geometry(&ProfileSpec::Disk, BoundaryGrid::Circle { n }, 8, 0.25).unwrap()
    }

    #[test]
    fn order_zero_is_identity() {
        let g = disk(16);
        let s = SobolevScale::new(&g, 0.0).unwrap();
        let u: Vec<f64> = (0..16).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(s.apply(&u), u);
    }

    #[test]
    fn inverse_pair_recovers_input() {
        let g = disk(32);
        let up = SobolevScale::new(&g, 1.0).unwrap();
        let down = SobolevScale::new(&g, -1.0).unwrap();
        let u: Vec<f64> = (0..32).map(|i| (0.3 * i as f64).sin() + 0.01 * (i * i) as f64).collect();
        let back = down.apply(&up.apply(&u));
        let err: Vec<f64> = back.iter().zip(&u).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-12 * norm2(&u));
    }

    #[test]
    fn negative_order_divides_pure_mode() {
        let g = disk(32);
        let s = SobolevScale::new(&g, -1.0).unwrap();
        let u: Vec<f64> = (0..32).map(|i| (5.0 * std::f64::consts::TAU * i as f64 / 32.0).sin()).collect();
        let v = s.apply(&u);
        assert!(v.iter().zip(&u).all(|(a, b)| (a - b / 26.0).abs() < 1e-13));
    }
}
