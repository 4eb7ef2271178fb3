//! Probes of off-diagonal unique continuation on a solved source problem:
//! the null test, dyadic off-diagonal shell masses and the `|∇φ|^p` growth
//! toward the diagonal.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::TensorField;
use crate::exhaustion::smooth_min_pair;
use crate::geometry::{BoundaryGrid, WarpedGeometry};
use crate::linalg::Matrix;
use crate::source_bvp::{boundary_time_derivative, BvpSolution};
use crate::stencil::{fd_weights, trapezoid_weights};
use crate::Real;

/// Relative threshold of the null test.
pub const NULL_TOLERANCE: f64 = 1e-10;
/// Relative mass threshold of the nonvanishing flag.
pub const NONVANISHING_TOLERANCE: f64 = 1e-6;
/// Shells whose outer edge is at least this far from the diagonal count for the flag.
pub const FAR_DISTANCE: f64 = std::f64::consts::PI / 8.0;
pub const MIN_GRADIENT_SHELLS: usize = 4;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NullReport {
    pub phi_norm: f64,
    pub dphi_norm: f64,
    pub scale: f64,
    pub pass: bool,
}

/// `‖φ‖` (discrete `L²` over all slices) and `‖∂_tφ(0)‖`, both against
/// `1e-10·scale`.
pub fn null_test<T: Real>(solution: &BvpSolution<T>, geometry: &WarpedGeometry<T>, scale: f64) -> Result<NullReport> {
    let phi_norm = field_l2(&solution.phi, geometry).sqrt();
    let w = geometry.weight(0).f64();
    let dphi_norm = boundary_time_derivative(&solution.phi)?.frobenius_norm().f64() * w;
    let pass = phi_norm <= NULL_TOLERANCE * scale && dphi_norm <= NULL_TOLERANCE * scale;
    Ok(NullReport { phi_norm, dphi_norm, scale, pass })
}

/// `Σ_j τ_j Σ_ab w_a w_b φ_ab²`.
fn field_l2<T: Real>(phi: &TensorField<T>, geometry: &WarpedGeometry<T>) -> f64 {
    let tau = trapezoid_weights(&phi.depths);
    (0..phi.len())
        .map(|j| {
            let w = geometry.weight(j).f64();
            tau[j].f64() * w * w * phi.slice(j).frobenius_norm().f64().powi(2)
        })
        .sum()
}

/// Which bin a node pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bin {
    Diagonal,
    /// `0 < d ≤ π 2^{-K}`, below the finest resolvable shell.
    Inner,
    Shell(usize),
}

/// Dyadic partition of `∂M × ∂M` by distance from the diagonal: shell `m`
/// holds `π 2^{-m-1} < d ≤ π 2^{-m}` (shell 0 is unbounded above, which only
/// matters on the torus).
#[derive(Clone, Debug)]
struct Shells {
    count: usize,
    /// Bin per `(a, b)`, row-major.
    bins: Vec<Bin>,
}

impl Shells {
    fn new(grid: &BoundaryGrid) -> Self {
        // A shell is resolvable when its inner edge is at least the finest spacing.
        let n_min = grid.axis_sizes().into_iter().min().unwrap_or(1).max(2);
        let count = (n_min / 2).ilog2() as usize;
        let pi = std::f64::consts::PI;
        let n = grid.len();
        let mut bins = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let d: f64 = grid.distance(a, b);
                let bin = if a == b {
                    Bin::Diagonal
                } else {
                    // Largest m with d ≤ π 2^{-m}, with a guard for round-off at the edges.
                    let m = ((pi / d) * (1.0 + 1e-12)).log2().floor().max(0.0) as usize;
                    if m < count {
                        Bin::Shell(m)
                    } else {
                        Bin::Inner
                    }
                };
                bins.push(bin);
            }
        }
        Self { count, bins }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellRow {
    pub m: usize,
    /// Outer edge `π 2^{-m}`.
    pub d_m: f64,
    pub mass: f64,
    pub grad_mass: f64,
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellProfile {
    pub shells: Vec<ShellRow>,
    /// Pairs closer than the finest shell but off the diagonal.
    pub inner_mass: f64,
    pub diagonal_mass: f64,
    /// Computed independently of the bins.
    pub total_mass: f64,
    /// `|Σ bins - total| / max(total, tiny)`.
    pub conservation_error: f64,
}

impl ShellProfile {
    pub fn binned_mass(&self) -> f64 {
        self.shells.iter().map(|s| s.mass).sum::<f64>() + self.inner_mass + self.diagonal_mass
    }

    /// Some shell with `d_m ≥ π/8` carries mass above `1e-6·scale`.
    pub fn nonvanishing(&self, scale: f64) -> bool {
        self.shells.iter().any(|s| s.d_m >= FAR_DISTANCE && s.mass > NONVANISHING_TOLERANCE * scale)
    }

    /// CSV `m,d_m,mass,grad_p_mass`; the last column is empty without a probe.
    pub fn to_csv(&self, probe: Option<&GradientProbe>) -> String {
        let mut out = String::from("m,d_m,mass,grad_p_mass\n");
        for s in &self.shells {
            let g = probe.and_then(|p| p.integrals.get(s.m)).map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", s.m, s.d_m, s.mass, g);
        }
        out
    }
}

/// `|∇φ|²` on every node, with angular derivatives in the metric of slice `j`.
fn gradient_sq<T: Real>(phi: &TensorField<T>, geometry: &WarpedGeometry<T>) -> Vec<Matrix<f64>> {
    let grid = geometry.grid();
    let sizes = grid.axis_sizes();
    let n = grid.len();
    let depths: Vec<f64> = phi.depths.iter().map(|t| t.f64()).collect();
    // Index shift by ±1 along one axis, periodic.
    let shift = |a: usize, axis: usize, up: bool| -> usize {
        let stride: usize = sizes[axis + 1..].iter().product();
        let k = (a / stride) % sizes[axis];
        let k2 = if up { (k + 1) % sizes[axis] } else { (k + sizes[axis] - 1) % sizes[axis] };
        a - k * stride + k2 * stride
    };
    let nj = phi.len();
    (0..nj)
        .map(|j| {
            let s = phi.slice(j);
            let r = geometry.r(j).f64();
            let nodes: Vec<usize> = match nj {
                1 => vec![0],
                2 => vec![0, 1],
                _ => {
                    let lo = j.saturating_sub(1).min(nj - 3);
                    vec![lo, lo + 1, lo + 2]
                }
            };
            let xs: Vec<f64> = nodes.iter().map(|&k| depths[k]).collect();
            let wt = if nj > 1 { fd_weights(depths[j], &xs, 1)[1].clone() } else { vec![0.0] };
            Matrix::from_fn(n, n, |a, b| {
                let mut g2 = 0.0;
                for (axis, &size) in sizes.iter().enumerate() {
                    let h = 2.0 * r * std::f64::consts::TAU / size as f64;
                    let da = (s[(shift(a, axis, true), b)] - s[(shift(a, axis, false), b)]).f64() / h;
                    let db = (s[(a, shift(b, axis, true))] - s[(a, shift(b, axis, false))]).f64() / h;
                    g2 += da * da + db * db;
                }
                let dt: f64 = nodes.iter().zip(&wt).map(|(&k, &c)| c * phi.slice(k)[(a, b)].f64()).sum();
                g2 + dt * dt
            })
        })
        .collect()
}

pub fn offdiagonal_shell_profile<T: Real>(phi: &TensorField<T>, geometry: &WarpedGeometry<T>) -> ShellProfile {
    let grid = geometry.grid();
    let shells = Shells::new(&grid);
    let n = grid.len();
    let tau = trapezoid_weights(&phi.depths);
    let grad = gradient_sq(phi, geometry);
    let pi = std::f64::consts::PI;
    let mut rows: Vec<ShellRow> = (0..shells.count)
        .map(|m| ShellRow { m, d_m: pi * 0.5f64.powi(m as i32), mass: 0.0, grad_mass: 0.0, measure: 0.0 })
        .collect();
    let (mut inner, mut diagonal) = (0.0, 0.0);
    for j in 0..phi.len() {
        let w = geometry.weight(j).f64();
        let c = tau[j].f64() * w * w;
        let s = phi.slice(j);
        for a in 0..n {
            for b in 0..n {
                let v = c * s[(a, b)].f64().powi(2);
                match shells.bins[a * n + b] {
                    Bin::Diagonal => diagonal += v,
                    Bin::Inner => inner += v,
                    Bin::Shell(m) => {
                        rows[m].mass += v;
                        rows[m].grad_mass += c * grad[j][(a, b)];
                        rows[m].measure += c;
                    }
                }
            }
        }
    }
    for row in &mut rows {
        row.grad_mass = row.grad_mass.sqrt();
    }
    let total_mass = field_l2(phi, geometry);
    let mut profile = ShellProfile { shells: rows, inner_mass: inner, diagonal_mass: diagonal, total_mass, conservation_error: 0.0 };
    profile.conservation_error = (profile.binned_mass() - total_mass).abs() / total_mass.max(f64::MIN_POSITIVE);
    profile
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientProbe {
    pub p: f64,
    /// Dimension of `∂M² × [0, ε]`.
    pub dimension: usize,
    pub critical_exponent: f64,
    /// `∫_shell |∇φ|^p`, shell 0 outermost.
    pub integrals: Vec<f64>,
    /// Least-squares `log₂` slope of the integrals against `m` over the finest 3 shells.
    pub slope: f64,
    /// Integrals non-decreasing toward the diagonal across the finest 3 shells.
    pub monotone_toward_diagonal: bool,
}

pub fn gradient_blowup_probe<T: Real>(phi: &TensorField<T>, geometry: &WarpedGeometry<T>, p: f64) -> Result<GradientProbe> {
    let grid = geometry.grid();
    let shells = Shells::new(&grid);
    if shells.count < MIN_GRADIENT_SHELLS {
        return Err(Error::InsufficientShells { available: shells.count, required: MIN_GRADIENT_SHELLS });
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be positive")));
    }
    let n = grid.len();
    let tau = trapezoid_weights(&phi.depths);
    let grad = gradient_sq(phi, geometry);
    let mut integrals = vec![0.0; shells.count];
    for j in 0..phi.len() {
        let w = geometry.weight(j).f64();
        let c = tau[j].f64() * w * w;
        for a in 0..n {
            for b in 0..n {
                if let Bin::Shell(m) = shells.bins[a * n + b] {
                    integrals[m] += c * grad[j][(a, b)].powf(0.5 * p);
                }
            }
        }
    }
    let fine = &integrals[shells.count - 3..];
    let slope = if fine.iter().all(|&v| v > 0.0) {
        // Centered abscissae -1, 0, 1.
        0.5 * (fine[2].log2() - fine[0].log2())
    } else {
        f64::NEG_INFINITY
    };
    let monotone_toward_diagonal = fine.windows(2).all(|w| w[1] >= w[0]);
    let dimension = 2 * grid.dimension() + 1;
    let critical_exponent = dimension as f64 / (dimension - 1) as f64;
    Ok(GradientProbe { p, dimension, critical_exponent, integrals, slope, monotone_toward_diagonal })
}

/// `Σ τ w w φ_ab ζ_k(d_ab)` with `ζ_k = min_ε{k, log log d⁻¹}` on `d < e⁻¹`,
/// `0` beyond and `k` on the diagonal.
pub fn zeta_pairing<T: Real>(phi: &TensorField<T>, geometry: &WarpedGeometry<T>, ks: &[f64], eps: f64) -> Vec<(f64, f64)> {
    let grid = geometry.grid();
    let n = grid.len();
    let tau = trapezoid_weights(&phi.depths);
    let cutoff = (-1.0f64).exp();
    ks.iter()
        .map(|&k| {
            let zeta = Matrix::from_fn(n, n, |a, b| {
                let d: f64 = grid.distance(a, b);
                if a == b {
                    k
                } else if d < cutoff {
                    smooth_min_pair(k, (1.0 / d).ln().ln(), eps)
                } else {
                    0.0
                }
            });
            let v: f64 = (0..phi.len())
                .map(|j| {
                    let w = geometry.weight(j).f64();
                    let s: f64 = phi.slice(j).as_slice().iter().zip(zeta.as_slice()).map(|(x, z)| x.f64() * z).sum();
                    tau[j].f64() * w * w * s
                })
                .sum();
            (k, v)
        })
        .collect()
}
