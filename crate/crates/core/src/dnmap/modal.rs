//! Scalar version of the Schur sweep for a single Fourier mode, used when the
//! coefficients do not depend on the boundary variable.

use crate::error::{Error, Result};
use crate::geometry::{Cap, WarpedGeometry};
use crate::Real;

#[derive(Clone, Copy, Debug)]
pub struct ModalCoefficients<'a, T> {
    /// Laplace symbol `|k|²` of the unit slice.
    pub k2: T,
    /// Potential on every depth node.
    pub potential: &'a [T],
    /// Optional conductivity on every depth node: the equation becomes
    /// `(σρ u')' - σρ (|k|²/r² + Q) u = 0` and the returned map is still `-u'`.
    pub conductivity: Option<&'a [T]>,
}

/// `λ(t_j)`, `j = 0..=M`, for one mode.
pub fn modal_dn_family<T: Real>(geometry: &WarpedGeometry<T>, coeffs: ModalCoefficients<'_, T>) -> Result<Vec<T>> {
    let d = geometry.depths();
    let nodes = d.len();
    if coeffs.potential.len() != nodes || coeffs.conductivity.is_some_and(|s| s.len() != nodes) {
        return Err(Error::ShapeMismatch { expected: nodes.to_string(), found: coeffs.potential.len().to_string() });
    }
    let sigma = |i: usize| coeffs.conductivity.map_or(T::one(), |s| s[i]);
    let p = |i: usize| geometry.rho(i) * sigma(i);
    let p_half = |i: usize| geometry.rho_half(i) * T::half() * (sigma(i) + sigma(i + 1));
    let symbol = |i: usize| {
        let r = geometry.r(i);
        coeffs.k2 / (r * r) + coeffs.potential[i]
    };

    let last = geometry.last_index();
    let mut s = vec![T::zero(); last];
    if geometry.cap() == Cap::CenterRegular {
        s[last - 1] = geometry.center_ratio(coeffs.k2);
    }
    for i in (0..last - 1).rev() {
        let node = i + 1;
        let hm = d[node] - d[node - 1];
        let hp = d[node + 1] - d[node];
        let a = p_half(node - 1) / hm;
        let c = p_half(node) / hp;
        let source = T::half() * (hm + hp) * p(node) * symbol(node);
        let pivot = -(a + c) - source + c * s[node];
        let scale = a + c + source.abs();
        if !(pivot.abs() > T::lit(1e-10) * scale) {
            return Err(Error::EigenvalueCollision {
                depth: (d[node] + geometry.offset()).f64(),
                node,
                pivot: (pivot / scale).f64(),
            });
        }
        s[i] = -a / pivot;
    }
    Ok((0..=geometry.steps())
        .map(|j| {
            let h = d[j + 1] - d[j];
            (p_half(j) * (T::one() - s[j]) / h + T::half() * h * p(j) * symbol(j)) / p(j)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::dn_family;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, Mode1d, ProfileSpec};
    use crate::potential::PotentialSpec;

    #[test]
    fn modal_sweep_equals_matrix_sweep_per_mode() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.25 }, BoundaryGrid::Circle { n: 16 }, 32, 0.3).unwrap();
        let q = PotentialSpec::Constant { c: 0.7 }.sample(&g).unwrap();
        let family = dn_family(&g, &q).unwrap();
        let qcol = q.column(0);
        for k in [0usize, 2, 5] {
            let label = if k == 0 { Mode1d::Constant } else { Mode1d::Cos(k) };
            let col = g.basis().find(&[label]).unwrap();
            let modal = modal_dn_family(
                &g,
                ModalCoefficients { k2: (k * k) as f64, potential: &qcol, conductivity: None },
            )
            .unwrap();
            for j in [0, 17, 32] {
                let lam = g.basis().mode_value(family.matrix(j), col);
                assert!((lam - modal[j]).abs() < 1e-10 * lam.abs().max(1.0));
            }
        }
    }

    #[test]
    fn annulus_oracle() {
        let rho: f64 = 0.2;
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho }, BoundaryGrid::Circle { n: 8 }, 256, 0.3).unwrap();
        let zero = vec![0.0; g.depths().len()];
        for k in 0..=8usize {
            let lam = modal_dn_family(&g, ModalCoefficients { k2: (k * k) as f64, potential: &zero, conductivity: None })
                .unwrap()[0];
            let exact = if k == 0 {
                1.0 / (1.0 / rho).ln()
            } else {
                let p = rho.powi(2 * k as i32);
                k as f64 * (1.0 + p) / (1.0 - p)
            };
            assert!((lam - exact).abs() < 1e-3 * exact, "k={k}: {lam} vs {exact}");
        }
    }
}
