use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cap, SobolevScale, WarpedGeometry};
use crate::linalg::{dot, norm2, Matrix};
use crate::Real;

use super::schur::SchurSweep;
use super::DnOperator;

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityFit {
    pub order: f64,
    pub c1: f64,
    pub c2: f64,
    /// `C₁ > 0`.
    pub admissible: bool,
    /// `(√(1+k²), ⟨(1+L₀)^s Λ e_k, e_k⟩ / (1+k²)^s)` for every resolved mode.
    pub samples: Vec<(f64, f64)>,
}

/// Fits `⟨(1+L₀)^s Λu, u⟩ ≥ C₁‖u‖²_{s+1/2} - C₂‖u‖²_s` over the Fourier modes
/// with `|k| ≤ N/4`: `C₁` is the least-squares slope of the per-mode ratio
/// against `√(1+k²)` and `C₂` the smallest constant making every mode admissible.
pub fn coercivity_probe<T: Real>(
    op: &DnOperator<T>,
    scale: &SobolevScale<T>,
    geometry: &WarpedGeometry<T>,
) -> Result<CoercivityFit> {
    let s = scale.order();
    if !(s >= -T::two() && s <= T::two()) {
        return Err(Error::InvalidArgument(format!("Sobolev order {s} outside [-2, 2]")));
    }
    let basis = geometry.basis();
    let kmax = geometry.grid().axis_sizes().into_iter().min().unwrap_or(0) / 4;
    let kmax2 = T::from_usize_lossy(kmax * kmax);
    let weighted = scale.matrix().matmul(&op.matrix);
    let mut samples = Vec::new();
    for c in 0..basis.len() {
        if basis.wavenumber_sq()[c] > kmax2 {
            continue;
        }
        let sym = scale.symbols()[c];
        let y = basis.mode_value(&weighted, c) / sym.powf(s);
        samples.push((sym.sqrt().f64(), y.f64()));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|p| p.0).sum::<f64>() / n;
    let my = samples.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c2 = samples.iter().map(|&(x, y)| c1 * x - y).fold(f64::NEG_INFINITY, f64::max);
    Ok(CoercivityFit { order: s.f64(), c1, c2, admissible: c1 > 0.0, samples })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BilinearCheck {
    /// `⟨Λ f₁, f₂⟩_t`.
    pub lhs: f64,
    /// Dirichlet energy plus potential term of the two extensions.
    pub rhs: f64,
    pub residual: f64,
}

/// Compares `⟨Λ_t f₁, f₂⟩_t` with `∫⟨du₁, du₂⟩ + ∫ u₁ Q u₂` over `Σ_t`, the
/// integrals by trapezoid quadrature on the depth grid. On a disk the ball
/// below the last node contributes its exact harmonic energy.
pub fn bilinear_identity_check<T: Real>(
    geometry: &WarpedGeometry<T>,
    q: &Matrix<T>,
    j: usize,
    f1: &[T],
    f2: &[T],
) -> Result<BilinearCheck> {
    if j > geometry.steps() {
        return Err(Error::IndexOutOfRange { index: j, max: geometry.steps() });
    }
    let sweep = SchurSweep::new(geometry, q)?;
    let lhs = sweep.dn(geometry, q, j).pairing(f1, f2);
    let u1 = sweep.extend(geometry, j, f1)?;
    let u2 = sweep.extend(geometry, j, f2)?;
    let d = geometry.depths();
    let last = geometry.last_index();
    let mut energy = T::zero();
    for i in j..last {
        let h = d[i + 1] - d[i];
        let du1: Vec<T> = u1.trace(i + 1).iter().zip(u1.trace(i)).map(|(a, b)| *a - *b).collect();
        let du2: Vec<T> = u2.trace(i + 1).iter().zip(u2.trace(i)).map(|(a, b)| *a - *b).collect();
        energy += geometry.rho_half(i) / h * dot(&du1, &du2);
        let tau = if i == j { T::half() * h } else { T::half() * (d[i + 1] - d[i - 1]) };
        let mut lq = geometry.apply_laplacian(i, u2.trace(i));
        for (k, v) in lq.iter_mut().enumerate() {
            *v += q[(i, k)] * u2.trace(i)[k];
        }
        energy += tau * geometry.rho(i) * dot(u1.trace(i), &lq);
    }
    let mut rhs = energy * geometry.weight(0);
    if geometry.cap() == Cap::CenterRegular {
        let r = geometry.r(last);
        let inner = geometry.basis().multiplier(|k2| k2.sqrt() / r);
        rhs += geometry.weight(last) * dot(u1.trace(last), &inner.mul_vec(u2.trace(last)));
    }
    let w = geometry.weight(j);
    let norms = norm2(f1) * norm2(f2) * w;
    let scale = lhs.abs().max(norms);
    let residual = if scale > T::zero() { ((lhs - rhs) / scale).abs() } else { T::zero() };
    Ok(BilinearCheck { lhs: lhs.f64(), rhs: rhs.f64(), residual: residual.f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::dn_schur;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};
    use crate::potential::PotentialSpec;

    fn geometry(profile: ProfileSpec, n: usize, m: usize) -> WarpedGeometry<f64> {
        build_warped_geometry(&profile, BoundaryGrid::Circle { n }, m, 0.3).unwrap()
    }

    #[test]
    fn disk_probe_is_admissible() {
        let g = geometry(ProfileSpec::Disk, 32, 64);
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let dn = dn_schur(&g, &q, 0).unwrap();
        for s in [-1.0, -0.5, 0.0] {
            let fit = coercivity_probe(&dn, &SobolevScale::new(&g, s).unwrap(), &g).unwrap();
            assert!(fit.admissible && fit.c1 > 0.5, "{fit:?}");
        }
    }

    #[test]
    fn zero_operator_fails_probe() {
        let g = geometry(ProfileSpec::Disk, 16, 16);
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let mut dn = dn_schur(&g, &q, 0).unwrap();
        dn.matrix = Matrix::zeros(16, 16);
        let fit = coercivity_probe(&dn, &SobolevScale::new(&g, 0.0).unwrap(), &g).unwrap();
        assert!(!fit.admissible && fit.c1 <= fit.c2);
        assert!(coercivity_probe(&dn, &SobolevScale::new(&g, 3.0).unwrap(), &g).is_err());
    }

    #[test]
    fn disk_mode_one_energy() {
        let g = geometry(ProfileSpec::Disk, 32, 128);
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let f: Vec<f64> = (0..32).map(|i| (std::f64::consts::TAU * i as f64 / 32.0).cos()).collect();
        let check = bilinear_identity_check(&g, &q, 0, &f, &f).unwrap();
        assert!((check.lhs - std::f64::consts::PI).abs() < 1e-2, "{check:?}");
        assert!(check.residual < 1e-3, "{check:?}");
    }

    #[test]
    fn radial_pairing_on_annulus() {
        let rho: f64 = 0.2;
        let g = geometry(ProfileSpec::Annulus { rho }, 16, 128);
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let f1: Vec<f64> = (0..16).map(|i| 1.0 + (i as f64).sin()).collect();
        let check = bilinear_identity_check(&g, &q, 0, &f1, &[2.0; 16]).unwrap();
        let mean = f1.iter().sum::<f64>() / 16.0;
        let expected = 2.0 * mean * std::f64::consts::TAU / (1.0 / rho).ln();
        assert!((check.lhs - expected).abs() < 1e-3 * expected.abs());
        assert!(check.residual < 1e-10);
        let zero = bilinear_identity_check(&g, &q, 0, &[0.0; 16], &f1).unwrap();
        assert_eq!((zero.lhs, zero.rhs, zero.residual), (0.0, 0.0, 0.0));
    }
}
