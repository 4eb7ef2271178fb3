//! Matrix Riccati flow `∂_t Λ = Λ² - L_t - Q_t - μ̇_t Λ`, integrated from `ε`
//! back to the outer boundary.

use crate::error::{Error, Result};
use crate::geometry::{SobolevScale, WarpedGeometry};
use crate::linalg::{symmetric_spectral_norm, Matrix};
use crate::Real;

use super::{DnFamily, DnOperator, Provenance};

/// `Λ² - L_j - Q_j - μ̇_j Λ`.
fn rhs<T: Real>(geometry: &WarpedGeometry<T>, q: &Matrix<T>, j: usize, lambda: &Matrix<T>) -> Matrix<T> {
    let mut out = lambda.matmul(lambda);
    out.add_scaled(-geometry.mu_dot(j), lambda);
    let r = geometry.r(j);
    out.add_scaled(-T::one() / (r * r), geometry.unit_laplacian());
    for (k, &qk) in q.row(j).iter().enumerate() {
        out[(k, k)] -= qk;
    }
    out
}

/// Heun steps of size `ε/M` from `Λ(ε)` down to `t = 0`. Aborts with
/// [`Error::RiccatiEscape`] once `‖Λ‖_∞` exceeds `50 N`.
pub fn riccati_integrate<T: Real>(
    geometry: &WarpedGeometry<T>,
    q: &Matrix<T>,
    lambda_eps: &Matrix<T>,
) -> Result<DnFamily<T>> {
    let m = geometry.steps();
    let n = geometry.boundary_len();
    if lambda_eps.shape() != (n, n) {
        return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), found: format!("{:?}", lambda_eps.shape()) });
    }
    let bound = T::lit(50.0) * T::from_usize_lossy(n);
    let escape = |j: usize, lam: &Matrix<T>| -> Result<()> {
        let norm = lam.inf_norm();
        if !(norm <= bound) {
            return Err(Error::RiccatiEscape {
                depth: (geometry.depth(j) + geometry.offset()).f64(),
                norm: norm.f64(),
                bound: bound.f64(),
            });
        }
        Ok(())
    };
    escape(m, lambda_eps)?;
    let mut maps = vec![lambda_eps.clone(); m + 1];
    for j in (0..m).rev() {
        let h = geometry.depth(j + 1) - geometry.depth(j);
        let current = &maps[j + 1];
        let k1 = rhs(geometry, q, j + 1, current);
        let mut predictor = current.clone();
        predictor.add_scaled(-h, &k1);
        let k2 = rhs(geometry, q, j, &predictor);
        let mut next = current.clone();
        next.add_scaled(-T::half() * h, &k1);
        next.add_scaled(-T::half() * h, &k2);
        escape(j, &next)?;
        maps[j] = next;
    }
    Ok(DnFamily {
        provenance: Provenance::Riccati,
        geometry_hash: geometry.hash(),
        operators: maps
            .into_iter()
            .enumerate()
            .map(|(j, matrix)| DnOperator {
                depth: geometry.depth(j),
                index: j,
                matrix,
                weight: geometry.weight(j),
                provenance: Provenance::Riccati,
            })
            .collect(),
    })
}

#[derive(Clone, Debug)]
pub struct RiccatiResidual<T> {
    /// Depth nodes `1..M` (centered differences need both neighbours).
    pub indices: Vec<usize>,
    pub norms: Vec<T>,
    pub max: T,
}

/// Residual of the Riccati identity with centered `D_t`, measured as the
/// spectral norm of `(1+L₀)^{-1} R (1+L₀)^{-1}` so that it stays bounded when
/// the boundary grid is refined together with the depth grid.
pub fn riccati_residual<T: Real>(
    family: &DnFamily<T>,
    geometry: &WarpedGeometry<T>,
    q: &Matrix<T>,
) -> Result<RiccatiResidual<T>> {
    if family.len() < 3 {
        return Err(Error::InvalidArgument(format!("residual needs at least 3 depths, family has {}", family.len())));
    }
    let smoothing = SobolevScale::new(geometry, -T::one())?;
    let p = smoothing.matrix();
    let mut indices = Vec::new();
    let mut norms = Vec::new();
    for j in 1..family.len() - 1 {
        let h = family.operators[j + 1].depth - family.operators[j - 1].depth;
        let mut res = family.matrix(j + 1).sub(family.matrix(j - 1));
        res.scale_mut(T::one() / h);
        res.add_scaled(-T::one(), &rhs(geometry, q, j, family.matrix(j)));
        let smoothed = p.matmul(&res).matmul(p);
        indices.push(j);
        norms.push(symmetric_spectral_norm(&smoothed.symmetrized()));
    }
    let max = norms.iter().copied().fold(T::zero(), T::max);
    Ok(RiccatiResidual { indices, norms, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::dn_family;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};
    use crate::potential::PotentialSpec;

    #[test]
    fn backward_flow_reproduces_schur_family() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 64, 0.3)
                .unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let schur = dn_family(&g, &q).unwrap();
        let ric = riccati_integrate(&g, &q, &schur.last().matrix).unwrap();
        assert!(ric.max_relative_difference(&schur) < 1e-2);
    }

    #[test]
    fn square_root_is_stationary_on_half_cylinder() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 32, 0.3)
                .unwrap();
        let q = PotentialSpec::Constant { c: 1.0 }.sample(&g).unwrap();
        let root = g.basis().multiplier(|k2| (k2 + 1.0).sqrt());
        let ric = riccati_integrate(&g, &q, &root).unwrap();
        assert!(ric.first().matrix.sub(&root).max_abs() < 1e-10);
    }

    #[test]
    fn large_perturbation_escapes() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 32, 0.3)
                .unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let mut lam = dn_family(&g, &q).unwrap().last().matrix.clone();
        lam.add_diagonal(1e3);
        assert!(matches!(riccati_integrate(&g, &q, &lam), Err(Error::RiccatiEscape { .. })));
    }
}
