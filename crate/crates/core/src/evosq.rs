//! The evolution-squared operator `(∂_t* + A_t)(∂_t + A_t)` and its expanded
//! second-order forms.

use serde::Serialize;

use crate::dnmap::DnFamily;
use crate::error::{Error, Result};
use crate::evolution::{apply_at, TensorField};
use crate::geometry::WarpedGeometry;
use crate::linalg::Matrix;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvosqVariant {
    /// `(∂_t* + A_t)(∂_t + A_t)` with the summation-by-parts pair.
    Factorized,
    /// `Δ_G + Q¹ + Q² - μ̇μ̇/2 + 2(Λ¹ - μ̇/2)⊗(Λ² - μ̇/2)`.
    Expanded,
    /// `Δ_G - μ̇μ̇ + Q¹ + Q² + (Λ¹ - μ̇)⊗(Λ² - μ̇)`.
    ExpandedUnscaled,
}

impl EvosqVariant {
    pub const ALL: [EvosqVariant; 3] = [EvosqVariant::Factorized, EvosqVariant::Expanded, EvosqVariant::ExpandedUnscaled];

    pub fn as_str(&self) -> &'static str {
        match self {
            EvosqVariant::Factorized => "factorized",
            EvosqVariant::Expanded => "expanded",
            EvosqVariant::ExpandedUnscaled => "expanded-unscaled",
        }
    }
}

/// Everything the operator depends on besides the field.
#[derive(Clone, Copy, Debug)]
pub struct EvosqForm<'a, T> {
    pub variant: EvosqVariant,
    pub geometry: &'a WarpedGeometry<T>,
    pub lambda1: &'a DnFamily<T>,
    pub lambda2: &'a DnFamily<T>,
    /// Potentials on the geometry's depth nodes (rows) and boundary nodes.
    pub q1: &'a Matrix<T>,
    pub q2: &'a Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct EvosqApplied<T> {
    pub field: TensorField<T>,
    /// Depth nodes where a one-sided stencil entered the result.
    pub one_sided: Vec<usize>,
}

/// First-derivative SBP operator `D = H⁻¹Q` on a uniform grid: centered in the
/// interior, first-order one-sided at both ends.
pub fn sbp_derivative<T: Real>(slices: &[Matrix<T>], h: T) -> Vec<Matrix<T>> {
    let m = slices.len() - 1;
    (0..=m)
        .map(|j| {
            let (a, b, scale) = if j == 0 {
                (0, 1, T::one() / h)
            } else if j == m {
                (m - 1, m, T::one() / h)
            } else {
                (j - 1, j + 1, T::half() / h)
            };
            slices[b].sub(&slices[a]).scaled(scale)
        })
        .collect()
}

/// `∂_t* Y = -Ω⁻¹ D(Ω Y)` with `Ω` the product slice weight, the exact adjoint
/// of [`sbp_derivative`] up to boundary terms in the trapezoid space-time pairing.
pub fn sbp_adjoint<T: Real>(slices: &[Matrix<T>], omega: &[T], h: T) -> Vec<Matrix<T>> {
    let weighted: Vec<Matrix<T>> = slices.iter().zip(omega).map(|(s, &o)| s.scaled(o)).collect();
    sbp_derivative(&weighted, h)
        .into_iter()
        .zip(omega)
        .map(|(s, &o)| s.scaled(-T::one() / o))
        .collect()
}

/// `Σ_j H_j Ω_j ⟨X_j, Y_j⟩` with trapezoid weights `H`.
pub fn space_time_pairing<T: Real>(x: &[Matrix<T>], y: &[Matrix<T>], omega: &[T], h: T) -> T {
    let m = x.len() - 1;
    (0..=m)
        .map(|j| {
            let hj = if j == 0 || j == m { T::half() * h } else { h };
            hj * omega[j] * x[j].frobenius_dot(&y[j])
        })
        .sum()
}

impl<'a, T: Real> EvosqForm<'a, T> {
    fn check(&self, w: &TensorField<T>) -> Result<usize> {
        let m = self.geometry.steps();
        if w.len() != m + 1 || self.lambda1.len() != m + 1 || self.lambda2.len() != m + 1 {
            return Err(Error::GridMismatch(format!(
                "field {} / families {}, {} slices for {} depth steps",
                w.len(),
                self.lambda1.len(),
                self.lambda2.len(),
                m
            )));
        }
        Ok(m)
    }

    pub fn omega(&self) -> Vec<T> {
        (0..=self.geometry.steps()).map(|j| self.geometry.weight(j).powi(2)).collect()
    }

    fn lambdas(&self, j: usize) -> (Matrix<T>, Matrix<T>) {
        (self.lambda1.matrix(j).symmetrized(), self.lambda2.matrix(j).symmetrized())
    }

    pub fn apply(&self, w: &TensorField<T>) -> Result<EvosqApplied<T>> {
        let m = self.check(w)?;
        match self.variant {
            EvosqVariant::Factorized => self.apply_factorized(w, m),
            EvosqVariant::Expanded => self.apply_expanded(w, m, T::two(), T::half(), T::half()),
            EvosqVariant::ExpandedUnscaled => self.apply_expanded(w, m, T::one(), T::one(), T::one()),
        }
    }

    /// `(∂_t + A_t) W` slice by slice.
    pub fn first_factor(&self, w: &TensorField<T>) -> Result<TensorField<T>> {
        self.check(w)?;
        let h = self.geometry.step();
        let dw = sbp_derivative(&w.slices, h);
        let slices = dw
            .into_iter()
            .enumerate()
            .map(|(j, mut s)| {
                let (l1, l2) = self.lambdas(j);
                s.add_scaled(T::one(), &apply_at(&l1, &l2, w.slice(j))?);
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorField { depths: w.depths.clone(), slices })
    }

    /// `(∂_t* + A_t) Z` slice by slice.
    pub fn second_factor(&self, z: &TensorField<T>) -> Result<TensorField<T>> {
        self.check(z)?;
        let h = self.geometry.step();
        let dz = sbp_adjoint(&z.slices, &self.omega(), h);
        let slices = dz
            .into_iter()
            .enumerate()
            .map(|(j, mut s)| {
                let (l1, l2) = self.lambdas(j);
                s.add_scaled(T::one(), &apply_at(&l1, &l2, z.slice(j))?);
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorField { depths: z.depths.clone(), slices })
    }

    fn apply_factorized(&self, w: &TensorField<T>, m: usize) -> Result<EvosqApplied<T>> {
        let z = self.first_factor(w)?;
        let field = self.second_factor(&z)?;
        Ok(EvosqApplied { field, one_sided: vec![0, 1, m - 1, m] })
    }

    /// `Δ_G W + Q¹W + WQ² - c μ̇² W + k (Λ¹ - a μ̇) W (Λ² - a μ̇)ᵀ`.
    fn apply_expanded(&self, w: &TensorField<T>, m: usize, k: T, c: T, a: T) -> Result<EvosqApplied<T>> {
        let g = self.geometry;
        let h = g.step();
        let n = g.boundary_len();
        let second = |j: usize| -> Matrix<T> {
            let (i0, i1, i2) = if j == 0 {
                (0, 1, 2)
            } else if j == m {
                (m - 2, m - 1, m)
            } else {
                (j - 1, j, j + 1)
            };
            let mut s = w.slice(i0).add(w.slice(i2));
            s.add_scaled(-T::two(), w.slice(i1));
            s.scaled(T::one() / (h * h))
        };
        let first = |j: usize| -> Matrix<T> {
            if j == 0 {
                let mut s = w.slice(1).scaled(T::lit(4.0));
                s.add_scaled(-T::lit(3.0), w.slice(0));
                s.add_scaled(-T::one(), w.slice(2));
                s.scaled(T::half() / h)
            } else if j == m {
                let mut s = w.slice(m).scaled(T::lit(3.0));
                s.add_scaled(-T::lit(4.0), w.slice(m - 1));
                s.add_scaled(T::one(), w.slice(m - 2));
                s.scaled(T::half() / h)
            } else {
                w.slice(j + 1).sub(w.slice(j - 1)).scaled(T::half() / h)
            }
        };
        let mut slices = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let wj = w.slice(j);
            let md = g.mu_dot(j);
            let lap = g.laplacian(j);
            let mut out = apply_at(&lap, &lap, wj)?;
            out.add_scaled(-T::one(), &second(j));
            out.add_scaled(-T::two() * md, &first(j));
            for x in 0..n {
                for y in 0..n {
                    out[(x, y)] += (self.q1[(j, x)] + self.q2[(j, y)] - c * md * md) * wj[(x, y)];
                }
            }
            let (mut l1, mut l2) = self.lambdas(j);
            l1.add_diagonal(-a * md);
            l2.add_diagonal(-a * md);
            out.add_scaled(k, &l1.matmul(wj).matmul_transpose(&l2));
            slices.push(out);
        }
        Ok(EvosqApplied { field: TensorField { depths: w.depths.clone(), slices }, one_sided: vec![0, m] })
    }
}

pub fn apply_evosq<T: Real>(form: &EvosqForm<'_, T>, w: &TensorField<T>) -> Result<EvosqApplied<T>> {
    form.apply(w)
}

/// Root-sum-square over depth nodes `2..=M-2`, where every variant uses only
/// centered stencils.
pub fn interior_norm<T: Real>(field: &TensorField<T>) -> T {
    let m = field.len() - 1;
    (2..=m.saturating_sub(2)).map(|j| field.slice(j).frobenius_norm().powi(2)).sum::<T>().sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelResidual {
    pub variant: EvosqVariant,
    pub residual: f64,
}

/// `‖A(u⊗v)‖ / ‖u⊗v‖` over interior depths for every variant.
pub fn kernel_residual<T: Real>(
    form: &EvosqForm<'_, T>,
    u: &[Vec<T>],
    v: &[Vec<T>],
) -> Result<Vec<KernelResidual>> {
    if u.len() != v.len() || u.len() != form.geometry.steps() + 1 {
        return Err(Error::GridMismatch(format!("trajectories of length {} and {}", u.len(), v.len())));
    }
    let depths = form.geometry.collar_depths().to_vec();
    let w = TensorField::from_fn(&depths, |j| Matrix::outer(&u[j], &v[j]));
    let scale = interior_norm(&w);
    EvosqVariant::ALL
        .iter()
        .map(|&variant| {
            let applied = EvosqForm { variant, ..*form }.apply(&w)?;
            let r = interior_norm(&applied.field);
            Ok(KernelResidual { variant, residual: if scale > T::zero() { (r / scale).f64() } else { 0.0 } })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::dn_family;
    use crate::evolution::evolve_tautological;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, Mode1d, ProfileSpec};
    use crate::potential::PotentialSpec;

    #[test]
    fn sbp_pair_is_exact_up_to_boundary_terms() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.3 }, BoundaryGrid::Circle { n: 8 }, 16, 0.3).unwrap();
        let h = g.step();
        let omega: Vec<f64> = (0..=16).map(|j| g.weight(j).powi(2)).collect();
        let x: Vec<Matrix<f64>> = (0..=16).map(|j| Matrix::from_fn(8, 8, |a, b| ((a + 2 * b + j) as f64).sin())).collect();
        let y: Vec<Matrix<f64>> = (0..=16).map(|j| Matrix::from_fn(8, 8, |a, b| ((3 * a + b) as f64 * 0.1 + j as f64).cos())).collect();
        let lhs = space_time_pairing(&sbp_derivative(&x, h), &y, &omega, h);
        let rhs = space_time_pairing(&x, &sbp_adjoint(&y, &omega, h), &omega, h);
        let boundary = omega[16] * x[16].frobenius_dot(&y[16]) - omega[0] * x[0].frobenius_dot(&y[0]);
        assert!((lhs - rhs - boundary).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.3 }, BoundaryGrid::Circle { n: 8 }, 8, 0.3).unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let fam = dn_family(&g, &q).unwrap();
        let w = TensorField::zeros(g.collar_depths(), 8);
        for variant in EvosqVariant::ALL {
            let form = EvosqForm { variant, geometry: &g, lambda1: &fam, lambda2: &fam, q1: &q, q2: &q };
            assert_eq!(form.apply(&w).unwrap().field.max_abs(), 0.0);
        }
    }

    #[test]
    fn factorized_form_reduces_per_mode() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 32, 0.3)
                .unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let fam = dn_family(&g, &q).unwrap();
        let b = g.basis();
        let ex = b.vector(b.find(&[Mode1d::Cos(2)]).unwrap());
        let ey = b.vector(b.find(&[Mode1d::Sin(3)]).unwrap());
        let p: Vec<f64> = g.collar_depths().iter().map(|t| (3.0 * t).sin() + t * t).collect();
        let w = TensorField::from_fn(g.collar_depths(), |j| Matrix::outer(&ex, &ey).scaled(p[j]));
        let form = EvosqForm { variant: EvosqVariant::Factorized, geometry: &g, lambda1: &fam, lambda2: &fam, q1: &q, q2: &q };
        let out = form.apply(&w).unwrap();

        let h = g.step();
        let (cx, cy) = (b.find(&[Mode1d::Cos(2)]).unwrap(), b.find(&[Mode1d::Sin(3)]).unwrap());
        let a: Vec<f64> = (0..=32).map(|j| b.mode_value(fam.matrix(j), cx) + b.mode_value(fam.matrix(j), cy)).collect();
        let scalar = |v: &[f64]| -> Vec<f64> {
            let mats: Vec<Matrix<f64>> = v.iter().map(|&x| Matrix::from_vec(1, 1, vec![x])).collect();
            sbp_derivative(&mats, h).into_iter().map(|m| m[(0, 0)]).collect()
        };
        let dp = scalar(&p);
        let z: Vec<f64> = (0..=32).map(|j| dp[j] + a[j] * p[j]).collect();
        let dz = scalar(&z);
        for j in 0..=32 {
            let expected = -dz[j] + a[j] * z[j];
            let got = crate::linalg::dot(&ex, &out.field.slice(j).mul_vec(&ey));
            assert!((got - expected).abs() < 1e-6 * expected.abs().max(1.0), "j={j}: {got} vs {expected}");
        }
    }

    #[test]
    fn expanded_kernel_beats_unscaled_on_flat_cylinder() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 64, 0.3)
                .unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let fam = dn_family(&g, &q).unwrap();
        let b = g.basis();
        let u0 = b.vector(b.find(&[Mode1d::Cos(1)]).unwrap());
        let v0 = b.vector(b.find(&[Mode1d::Sin(2)]).unwrap());
        let u = evolve_tautological(&fam, &u0).unwrap();
        let v = evolve_tautological(&fam, &v0).unwrap();
        let form = EvosqForm { variant: EvosqVariant::Factorized, geometry: &g, lambda1: &fam, lambda2: &fam, q1: &q, q2: &q };
        let res = kernel_residual(&form, &u, &v).unwrap();
        assert!(res[0].residual < 1e-2 && res[1].residual < 1e-2, "{res:?}");
        assert!(res[2].residual > 0.5, "{res:?}");
    }
}
