//! Named potentials and their samples on a geometry's nodal grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circle_distance, WarpedGeometry};
use crate::linalg::Matrix;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Zero,
    Constant { c: f64 },
    /// `amplitude · exp(1 - 1/(1 - ρ²))` with `ρ² = (d(θ, θ₀)² + (t - t₀)²)/width²`,
    /// zero for `ρ ≥ 1`. `theta0` has one entry per boundary axis.
    Bump { theta0: Vec<f64>, t0: f64, width: f64, amplitude: f64 },
    /// Rows of boundary samples at increasing physical depths, linear in between.
    Sampled { depths: Vec<f64>, values: Vec<Vec<f64>> },
}

impl PotentialSpec {
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Constant { c } => *c == 0.0,
            PotentialSpec::Bump { amplitude, .. } => *amplitude == 0.0,
            PotentialSpec::Sampled { values, .. } => values.iter().flatten().all(|&v| v == 0.0),
        }
    }

    /// Values on every depth node (rows) and boundary node (columns).
    pub fn sample<T: Real>(&self, geometry: &WarpedGeometry<T>) -> Result<Matrix<T>> {
        let rows = geometry.depths().len();
        let grid = geometry.grid();
        let n = grid.len();
        let offset = geometry.offset().f64();
        match self {
            PotentialSpec::Zero => Ok(Matrix::zeros(rows, n)),
            PotentialSpec::Constant { c } => Ok(Matrix::from_fn(rows, n, |_, _| T::lit(*c))),
            PotentialSpec::Bump { theta0, t0, width, amplitude } => {
                if theta0.len() != grid.dimension() {
                    return Err(Error::InvalidArgument(format!(
                        "bump centre has {} angles, boundary has dimension {}",
                        theta0.len(),
                        grid.dimension()
                    )));
                }
                if !(*width > 0.0) {
                    return Err(Error::InvalidArgument(format!("bump width {width}")));
                }
                Ok(Matrix::from_fn(rows, n, |j, i| {
                    let angles = grid.angles::<f64>(i);
                    let d2: f64 = angles
                        .iter()
                        .zip(theta0)
                        .map(|(&a, &b)| circle_distance(a, b).powi(2))
                        .sum();
                    let dt = geometry.depth(j).f64() + offset - t0;
                    let rho2 = (d2 + dt * dt) / (width * width);
                    T::lit(if rho2 < 1.0 { amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp() } else { 0.0 })
                }))
            }
            PotentialSpec::Sampled { depths, values } => {
                if depths.is_empty() || depths.len() != values.len() {
                    return Err(Error::InvalidArgument("sampled potential needs one row per depth".into()));
                }
                if let Some(bad) = values.iter().find(|row| row.len() != n) {
                    return Err(Error::GridMismatch(format!("sampled potential row has {} nodes, grid has {n}", bad.len())));
                }
                if depths.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument("sampled potential depths must increase".into()));
                }
                Ok(Matrix::from_fn(rows, n, |j, i| {
                    let t = geometry.depth(j).f64() + offset;
                    let k = depths.partition_point(|&d| d <= t);
                    let v = if k == 0 {
                        values[0][i]
                    } else if k == depths.len() {
                        values[k - 1][i]
                    } else {
                        let s = (t - depths[k - 1]) / (depths[k] - depths[k - 1]);
                        values[k - 1][i] * (1.0 - s) + values[k][i] * s
                    };
                    T::lit(v)
                }))
            }
        }
    }
}
