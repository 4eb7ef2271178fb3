use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stencil::{apply_difference, fd_weights};
use crate::Real;

use super::WarpedGeometry;

#[derive(Clone, Debug)]
pub struct ConformalPotential<T> {
    /// `Q = σ^{-1/2} Δ σ^{1/2}` on every depth node (rows) and boundary node (columns).
    pub q: Matrix<T>,
    pub sqrt_sigma: Matrix<T>,
    /// Inward derivative `∂_t σ^{1/2}` on the outer boundary.
    pub boundary_correction: Vec<T>,
}

impl<T: Real> ConformalPotential<T> {
    /// `∂_t σ^{1/2} / σ^{1/2}` on the outer boundary, the shift between the
    /// conductivity and Schrödinger DN maps when `σ` is constant along it.
    pub fn log_derivative(&self) -> Vec<T> {
        self.boundary_correction.iter().zip(self.sqrt_sigma.row(0)).map(|(&d, &s)| d / s).collect()
    }
}

/// Potential of the Schrödinger problem equivalent to `div(γ^{n/2-1} ∇u) = 0`
/// in ambient dimension `n`, with `γ` sampled on all depth nodes.
pub fn conformal_potential<T: Real>(
    gamma: &Matrix<T>,
    geometry: &WarpedGeometry<T>,
    n: usize,
) -> Result<ConformalPotential<T>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("ambient dimension {n} < 3")));
    }
    let rows = geometry.depths().len();
    let cols = geometry.boundary_len();
    if gamma.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols}"),
            found: format!("{}x{}", gamma.rows(), gamma.cols()),
        });
    }
    if let Some((index, &value)) = gamma.as_slice().iter().enumerate().find(|(_, g)| !(**g > T::zero())) {
        return Err(Error::NotAConductivity { index, value: value.f64() });
    }
    let exponent = (T::from_usize_lossy(n) / T::two() - T::one()) / T::two();
    let s = gamma.map(|g| g.powf(exponent));
    let depths = geometry.depths();

    let stencil = |j: usize| -> (usize, Vec<Vec<T>>) {
        let start = if j == 0 {
            0
        } else if j + 1 == rows {
            rows - 4
        } else {
            j - 1
        };
        let len = if j == 0 || j + 1 == rows { 4 } else { 3 };
        (start, fd_weights(depths[j], &depths[start..start + len], 2))
    };

    let mut q = Matrix::zeros(rows, cols);
    let mut column = [T::zero(); 4];
    let mut boundary_correction = vec![T::zero(); cols];
    for j in 0..rows {
        let (start, w) = stencil(j);
        let len = w[0].len();
        let lap = geometry.apply_laplacian(j, s.row(j));
        for i in 0..cols {
            for (k, c) in column.iter_mut().take(len).enumerate() {
                *c = s[(start + k, i)];
            }
            let centre = s[(j, i)];
            let d1 = apply_difference(&w[1], &column[..len], centre);
            let d2 = apply_difference(&w[2], &column[..len], centre);
            q[(j, i)] = (d2 + geometry.mu_dot(j) * d1 - lap[i]) / centre;
            if j == 0 {
                boundary_correction[i] = d1;
            }
        }
    }
    Ok(ConformalPotential { q, sqrt_sigma: s, boundary_correction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};

    fn cylinder(m: usize) -> WarpedGeometry<f64> {
        build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 8 }, m, 0.5).unwrap()
    }

    #[test]
    fn constant_conductivity_gives_exactly_zero() {
        let g = cylinder(16);
        let gamma = Matrix::from_fn(g.depths().len(), 8, |_, _| 2.7);
        let c = conformal_potential(&gamma, &g, 3).unwrap();
        assert!(c.q.as_slice().iter().all(|&x| x == 0.0));
        assert!(c.boundary_correction.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exponential_conductivity_gives_quarter() {
        let g = cylinder(64);
        let gamma = Matrix::from_fn(g.depths().len(), 8, |j, _| (2.0 * g.depth(j)).exp());
        let c = conformal_potential(&gamma, &g, 3).unwrap();
        assert!(c.q.as_slice().iter().all(|&x| (x - 0.25).abs() < 1e-3));
        assert!(c.log_derivative().iter().all(|&x| (x - 0.5).abs() < 1e-4));
    }

    #[test]
    fn negative_sample_is_rejected() {
        let g = cylinder(16);
        let mut gamma = Matrix::from_fn(g.depths().len(), 8, |_, _| 1.0);
        gamma[(3, 2)] = -0.5;
        assert!(matches!(conformal_potential(&gamma, &g, 3), Err(Error::NotAConductivity { .. })));
    }
}
