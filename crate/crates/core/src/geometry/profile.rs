use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Warping profile `r(t)` of the model metric `dt² + r(t)² dθ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    /// Unit disk: `r = 1 - t`, regular at the center `t = 1`.
    Disk,
    /// Annulus `ρ < |x| < 1`: `r = 1 - t`, Dirichlet at `t = 1 - ρ`.
    Annulus { rho: f64 },
    /// Flat cylinder of length `depth`: `r = 1`, Dirichlet at the far end.
    FlatCylinder { depth: f64 },
    /// `r` sampled at equispaced depths on `[0, depth]`, Dirichlet at `depth`.
    Custom { depth: f64, samples: Vec<f64> },
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProfileSpec::Disk => Ok(()),
            ProfileSpec::Annulus { rho } if *rho > 0.0 && *rho < 1.0 => Ok(()),
            ProfileSpec::Annulus { rho } => Err(Error::InvalidProfile(format!("annulus inner radius {rho} outside (0, 1)"))),
            ProfileSpec::FlatCylinder { depth } if *depth > 0.0 && depth.is_finite() => Ok(()),
            ProfileSpec::FlatCylinder { depth } => Err(Error::InvalidProfile(format!("cylinder depth {depth}"))),
            ProfileSpec::Custom { depth, samples } => {
                if !(*depth > 0.0 && depth.is_finite()) {
                    return Err(Error::InvalidProfile(format!("custom depth {depth}")));
                }
                if samples.len() < 3 {
                    return Err(Error::InvalidProfile("custom profile needs at least 3 samples".into()));
                }
                if let Some((i, r)) = samples.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
                    return Err(Error::InvalidProfile(format!("sample {i} is {r}, radii must be positive")));
                }
                Ok(())
            }
        }
    }

    /// Depth `T` at which the manifold ends.
    pub fn cap_depth(&self) -> f64 {
        match self {
            ProfileSpec::Disk => 1.0,
            ProfileSpec::Annulus { rho } => 1.0 - rho,
            ProfileSpec::FlatCylinder { depth } | ProfileSpec::Custom { depth, .. } => *depth,
        }
    }

    pub fn is_center_regular(&self) -> bool {
        matches!(self, ProfileSpec::Disk)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileSpec::Disk => "disk",
            ProfileSpec::Annulus { .. } => "annulus",
            ProfileSpec::FlatCylinder { .. } => "flat-cylinder",
            ProfileSpec::Custom { .. } => "custom",
        }
    }

    /// `(r(t), r'(t))`. Custom profiles use a cubic Hermite interpolant with
    /// finite-difference slopes.
    pub fn eval<T: Real>(&self, t: T) -> (T, T) {
        match self {
            ProfileSpec::Disk | ProfileSpec::Annulus { .. } => (T::one() - t, -T::one()),
            ProfileSpec::FlatCylinder { .. } => (T::one(), T::zero()),
            ProfileSpec::Custom { depth, samples } => hermite(samples, T::lit(*depth), t),
        }
    }
}

fn hermite<T: Real>(samples: &[f64], depth: T, t: T) -> (T, T) {
    let n = samples.len();
    let h = depth / T::from_usize_lossy(n - 1);
    let r = |i: usize| T::lit(samples[i]);
    let slope = |i: usize| -> T {
        if i == 0 {
            (-T::lit(3.0) * r(0) + T::lit(4.0) * r(1) - r(2)) / (T::two() * h)
        } else if i == n - 1 {
            (T::lit(3.0) * r(n - 1) - T::lit(4.0) * r(n - 2) + r(n - 3)) / (T::two() * h)
        } else {
            (r(i + 1) - r(i - 1)) / (T::two() * h)
        }
    };
    let x = (t / h).max(T::zero());
    let mut i = x.floor().to_usize().unwrap_or(0);
    if i >= n - 1 {
        i = n - 2;
    }
    let s = x - T::from_usize_lossy(i);
    let (p0, p1, m0, m1) = (r(i), r(i + 1), slope(i) * h, slope(i + 1) * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let two = T::two();
    let three = T::lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    let value = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
    let d00 = T::lit(6.0) * s2 - T::lit(6.0) * s;
    let d10 = three * s2 - T::lit(4.0) * s + T::one();
    let d01 = -T::lit(6.0) * s2 + T::lit(6.0) * s;
    let d11 = three * s2 - two * s;
    let deriv = (d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1) / h;
    (value, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_profile_reproduces_linear_samples() {
        let p = ProfileSpec::Custom { depth: 1.0, samples: vec![1.0, 0.9, 0.8, 0.7, 0.6] };
        let (r, dr): (f64, f64) = p.eval(0.37);
        assert!((r - 0.852).abs() < 1e-12);
        assert!((dr + 0.4).abs() < 1e-12);
    }

    #[test]
    fn negative_sample_is_rejected() {
        let p = ProfileSpec::Custom { depth: 1.0, samples: vec![1.0, -0.5, 0.8] };
        assert!(matches!(p.validate(), Err(Error::InvalidProfile(_))));
    }
}
