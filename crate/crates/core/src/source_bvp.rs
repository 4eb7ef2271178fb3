//! Boundary value problem with the diagonal source of density `Q¹ - Q²`, whose
//! time derivative at `t = 0` reproduces `Λ¹ - Λ²` as a kernel.

use serde::Serialize;

use crate::dnmap::{DnFamily, SchurSweep};
use crate::error::{Error, Result};
use crate::evolution::{evolve_tensor_backward, evolve_tensor_forward, InnerSolver, TensorField};
use crate::geometry::WarpedGeometry;
use crate::linalg::{dot, Matrix};
use crate::stencil::trapezoid_weights;
use crate::Real;

/// Kernel `K` of an operator `M` in the weighted pairing:
/// `⟨M u, v⟩_t = Σ_ab K_ab u_a v_b w_a w_b`, i.e. `K_ab = M_ba / w_a`.
pub fn kernel_from_operator<T: Real>(m: &Matrix<T>, weights: &[T]) -> Matrix<T> {
    Matrix::from_fn(m.rows(), m.cols(), |a, b| m[(b, a)] / weights[a])
}

/// Inverse of [`kernel_from_operator`]: `M_ij = K_ji w_j`.
pub fn operator_from_kernel<T: Real>(k: &Matrix<T>, weights: &[T]) -> Matrix<T> {
    Matrix::from_fn(k.rows(), k.cols(), |i, j| k[(j, i)] * weights[j])
}

/// Discrete diagonal measure: slices `R(t_j) = diag(q_i / w_i(t_j))`.
#[derive(Clone, Debug)]
pub struct DiagonalSource<T> {
    /// `Q¹ - Q²` on the collar depth nodes (rows) and boundary nodes.
    pub density: Matrix<T>,
    pub field: TensorField<T>,
}

pub fn assemble_diagonal_source<T: Real>(
    geometry: &WarpedGeometry<T>,
    q1: &Matrix<T>,
    q2: &Matrix<T>,
) -> Result<DiagonalSource<T>> {
    if q1.shape() != q2.shape() {
        return Err(Error::GridMismatch(format!("potentials of shape {:?} and {:?}", q1.shape(), q2.shape())));
    }
    let m = geometry.steps();
    let n = geometry.boundary_len();
    if q1.rows() <= m || q1.cols() != n {
        return Err(Error::GridMismatch(format!("potential shape {:?} for {} depths x {n} nodes", q1.shape(), m + 1)));
    }
    let density = Matrix::from_fn(m + 1, n, |j, i| q1[(j, i)] - q2[(j, i)]);
    let field = TensorField::from_fn(geometry.collar_depths(), |j| {
        let w = geometry.weight(j);
        Matrix::from_diagonal(&density.row(j).iter().map(|&q| q / w).collect::<Vec<_>>())
    });
    Ok(DiagonalSource { density, field })
}

impl<T: Real> DiagonalSource<T> {
    pub fn is_zero(&self) -> bool {
        self.density.as_slice().iter().all(|&q| q == T::zero())
    }

    /// `Σ_j τ_j Σ_{a,b} R_ab f_ab w_a w_b` with trapezoid weights `τ`.
    pub fn pairing(&self, geometry: &WarpedGeometry<T>, f: &TensorField<T>) -> T {
        let tau = trapezoid_weights(geometry.collar_depths());
        (0..self.field.len())
            .map(|j| {
                let w = geometry.weight(j);
                tau[j] * w * w * self.field.slice(j).frobenius_dot(f.slice(j))
            })
            .sum()
    }

    /// `Σ_j τ_j Σ_i f(θ_i, θ_i, t_j) q_i w_i`, the defining property of the measure.
    pub fn diagonal_quadrature(&self, geometry: &WarpedGeometry<T>, f: &TensorField<T>) -> T {
        let tau = trapezoid_weights(geometry.collar_depths());
        (0..self.field.len())
            .map(|j| {
                let w = geometry.weight(j);
                let s: T = self.density.row(j).iter().enumerate().map(|(i, &q)| f.slice(j)[(i, i)] * q * w).sum();
                tau[j] * s
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BvpSettings {
    /// Sign `s₁` of the terminal kernel `ψ(ε) = s₁ (Λ¹_ε - Λ²_ε)`.
    pub terminal_sign: f64,
    pub solver: InnerSolver,
}

impl Default for BvpSettings {
    fn default() -> Self {
        Self { terminal_sign: 1.0, solver: InnerSolver::default() }
    }
}

#[derive(Clone, Debug)]
pub struct BvpSolution<T> {
    pub phi: TensorField<T>,
    pub psi: TensorField<T>,
    pub phi_hat: TensorField<T>,
    pub psi_tilde: TensorField<T>,
    pub phi_tilde: TensorField<T>,
    pub terminal_sign: f64,
}

/// Four sequential stages, each a linear evolution:
/// 1. `(∂_t* + A)ψ = 0`, `ψ(ε) = s₁ (Λ¹_ε - Λ²_ε)` as a kernel;
/// 2. `(∂_t + A)φ̂ = ψ`, `φ̂(0) = 0`;
/// 3. `(∂_t* + A)ψ̃ = R`, `ψ̃(ε) = 0`;
/// 4. `(∂_t + A)φ̃ = ψ̃`, `φ̃(0) = 0`;
///
/// and `φ = φ̃ + φ̂`.
pub fn solve_source_bvp<T: Real>(
    l1: &DnFamily<T>,
    l2: &DnFamily<T>,
    geometry: &WarpedGeometry<T>,
    source: &DiagonalSource<T>,
    settings: BvpSettings,
) -> Result<BvpSolution<T>> {
    let m = geometry.steps();
    if l1.len() != m + 1 || l2.len() != m + 1 || source.field.len() != m + 1 {
        return Err(Error::GridMismatch(format!(
            "families of length {}, {} and source of length {} on {} depth nodes",
            l1.len(),
            l2.len(),
            source.field.len(),
            m + 1
        )));
    }
    let n = geometry.boundary_len();
    let mu_dot = geometry.mu_dots();
    let solver = settings.solver;
    let diff = l1.last().matrix.sub(&l2.last().matrix);
    let psi_eps = kernel_from_operator(&diff, &geometry.weights(m)).scaled(T::lit(settings.terminal_sign));

    let psi = evolve_tensor_backward(l1, l2, mu_dot, None, &psi_eps, solver).map_err(|e| e.in_stage(1))?;
    let zero = Matrix::zeros(n, n);
    let phi_hat = evolve_tensor_forward(l1, l2, Some(&psi), &zero, solver).map_err(|e| e.in_stage(2))?;
    let psi_tilde =
        evolve_tensor_backward(l1, l2, mu_dot, Some(&source.field), &zero, solver).map_err(|e| e.in_stage(3))?;
    let phi_tilde = evolve_tensor_forward(l1, l2, Some(&psi_tilde), &zero, solver).map_err(|e| e.in_stage(4))?;
    let phi = phi_tilde.add(&phi_hat);
    Ok(BvpSolution { phi, psi, phi_hat, psi_tilde, phi_tilde, terminal_sign: settings.terminal_sign })
}

/// `∂_t φ(0) ≈ (4φ(t₁) - φ(t₂)) / (2Δt)`, using `φ(0) = 0`.
pub fn boundary_time_derivative<T: Real>(phi: &TensorField<T>) -> Result<Matrix<T>> {
    if phi.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 slices, got {}", phi.len())));
    }
    let h = phi.depths[1] - phi.depths[0];
    let mut k = phi.slice(1).scaled(T::lit(4.0));
    k.add_scaled(-T::one(), phi.slice(2));
    Ok(k.scaled(T::half() / h))
}

#[derive(Clone, Debug, Serialize)]
pub struct HeadlineCheck {
    /// `min_σ ‖σ K₀ - (Λ¹(0) - Λ²(0))‖ / ‖Λ¹(0) - Λ²(0)‖`.
    pub relative_error: f64,
    pub sign: i32,
    /// Errors for `σ = +1` and `σ = -1`.
    pub errors: [f64; 2],
}

pub fn headline_check<T: Real>(
    solution: &BvpSolution<T>,
    l1_0: &Matrix<T>,
    l2_0: &Matrix<T>,
    geometry: &WarpedGeometry<T>,
) -> Result<HeadlineCheck> {
    let diff = l1_0.sub(l2_0);
    let scale = diff.frobenius_norm();
    if scale == T::zero() {
        return Err(Error::NullComparison);
    }
    let k0 = boundary_time_derivative(&solution.phi)?;
    let op = operator_from_kernel(&k0, &geometry.weights(0));
    let plus = (op.sub(&diff).frobenius_norm() / scale).f64();
    let minus = (op.add(&diff).frobenius_norm() / scale).f64();
    let (relative_error, sign) = if plus <= minus { (plus, 1) } else { (minus, -1) };
    Ok(HeadlineCheck { relative_error, sign, errors: [plus, minus] })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LayerStripCheck {
    /// `⟨(Λ¹ - Λ²)(0) f₁, f₂⟩_0`.
    pub lhs: f64,
    /// `∫₀^ε ∫ E₁f₁ (Q¹ - Q²) E₂f₂ dvol_t dt`.
    pub volume: f64,
    /// `⟨(Λ¹_ε - Λ²_ε) E₁f₁(ε), E₂f₂(ε)⟩_ε`.
    pub depth_term: f64,
    pub residual: f64,
}

/// Splits the DN difference into a collar volume integral and the DN
/// difference at depth `ε`.
pub fn layer_strip_check<T: Real>(
    geometry: &WarpedGeometry<T>,
    q1: &Matrix<T>,
    q2: &Matrix<T>,
    f1: &[T],
    f2: &[T],
) -> Result<LayerStripCheck> {
    let m = geometry.steps();
    let s1 = SchurSweep::new(geometry, q1)?;
    let s2 = SchurSweep::new(geometry, q2)?;
    let u1 = s1.extend(geometry, 0, f1)?;
    let u2 = s2.extend(geometry, 0, f2)?;
    let pair = |a: &Matrix<T>, b: &Matrix<T>, j: usize, x: &[T], y: &[T]| -> T {
        dot(&a.sub(b).mul_vec(x), y) * geometry.weight(j)
    };
    let lhs = pair(&s1.dn(geometry, q1, 0).matrix, &s2.dn(geometry, q2, 0).matrix, 0, f1, f2);
    let depth_term = pair(&s1.dn(geometry, q1, m).matrix, &s2.dn(geometry, q2, m).matrix, m, u1.trace(m), u2.trace(m));
    let tau = trapezoid_weights(geometry.collar_depths());
    let mut volume = T::zero();
    for j in 0..=m {
        let s: T = (0..f1.len()).map(|i| u1.trace(j)[i] * (q1[(j, i)] - q2[(j, i)]) * u2.trace(j)[i]).sum();
        volume += tau[j] * geometry.weight(j) * s;
    }
    let scale = lhs.abs().max(volume.abs()).max(depth_term.abs());
    let residual = if scale > T::zero() { ((lhs - volume - depth_term) / scale).abs() } else { T::zero() };
    Ok(LayerStripCheck { lhs: lhs.f64(), volume: volume.f64(), depth_term: depth_term.f64(), residual: residual.f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::dn_family;
    use crate::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};
    use crate::potential::PotentialSpec;

    fn flat(n: usize, m: usize) -> WarpedGeometry<f64> {
        build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n }, m, 0.3).unwrap()
    }

    #[test]
    fn source_pairing_equals_diagonal_quadrature() {
        let g = flat(16, 16);
        let bump = PotentialSpec::Bump { theta0: vec![2.0], t0: 0.1, width: 0.5, amplitude: 1.5 };
        let q1 = bump.sample(&g).unwrap();
        let q2 = PotentialSpec::Constant { c: 0.3 }.sample(&g).unwrap();
        let src = assemble_diagonal_source(&g, &q1, &q2).unwrap();
        let f = TensorField::from_fn(g.collar_depths(), |j| Matrix::from_fn(16, 16, |a, b| ((a * 7 + b * 3 + j) as f64).sin()));
        let a = src.pairing(&g, &f);
        let b = src.diagonal_quadrature(&g, &f);
        assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
        let same = assemble_diagonal_source(&g, &q1, &q1).unwrap();
        assert!(same.is_zero());
    }

    #[test]
    fn stencil_is_exact_on_linear_and_kills_quadratic() {
        let depths: Vec<f64> = (0..5).map(|j| j as f64 * 0.1).collect();
        let c = Matrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64);
        let lin = TensorField::from_fn(&depths, |j| c.scaled(depths[j]));
        assert!(boundary_time_derivative(&lin).unwrap().sub(&c).max_abs() < 1e-13);
        let quad = TensorField::from_fn(&depths, |j| c.scaled(depths[j] * depths[j]));
        assert!(boundary_time_derivative(&quad).unwrap().max_abs() < 1e-13);
        assert!(boundary_time_derivative(&TensorField::<f64>::zeros(&depths[..2], 4)).is_err());
    }

    #[test]
    fn equal_potentials_give_zero_solution_and_null_comparison() {
        let g = flat(16, 16);
        let q = PotentialSpec::Constant { c: 0.5 }.sample(&g).unwrap();
        let fam = dn_family(&g, &q).unwrap();
        let src = assemble_diagonal_source(&g, &q, &q).unwrap();
        let sol = solve_source_bvp(&fam, &fam, &g, &src, BvpSettings::default()).unwrap();
        assert_eq!(sol.phi.max_abs(), 0.0);
        assert!(matches!(headline_check(&sol, fam.matrix(0), fam.matrix(0), &g), Err(Error::NullComparison)));
    }

    #[test]
    fn constant_potentials_reproduce_dn_difference() {
        let g = flat(16, 64);
        let q1 = PotentialSpec::Constant { c: 1.0 }.sample(&g).unwrap();
        let q2 = PotentialSpec::Zero.sample(&g).unwrap();
        let f1 = dn_family(&g, &q1).unwrap();
        let f2 = dn_family(&g, &q2).unwrap();
        let src = assemble_diagonal_source(&g, &q1, &q2).unwrap();
        let sol = solve_source_bvp(&f1, &f2, &g, &src, BvpSettings::default()).unwrap();
        let check = headline_check(&sol, f1.matrix(0), f2.matrix(0), &g).unwrap();
        assert_eq!(check.sign, 1);
        assert!(check.relative_error < 5e-2, "{check:?}");
        assert_eq!(sol.phi, sol.phi_tilde.add(&sol.phi_hat));
        assert!(sol.phi.slice(0).max_abs() == 0.0);
    }

    /// Mode pair `(c, c)` of `φ` against RK4 on the scalar system
    /// `P' = aP - 1/w`, `Φ' = P - aΦ` with `a = λ¹ + λ²` from `κ coth(κ(1-t))`.
    #[test]
    fn per_mode_oracle_on_flat_cylinder() {
        let (n, m, eps) = (16, 128, 0.3);
        let g = flat(n, m);
        let q1 = PotentialSpec::Constant { c: 1.0 }.sample(&g).unwrap();
        let q2 = PotentialSpec::Zero.sample(&g).unwrap();
        let (l1, l2) = (dn_family(&g, &q1).unwrap(), dn_family(&g, &q2).unwrap());
        let src = assemble_diagonal_source(&g, &q1, &q2).unwrap();
        let sol = solve_source_bvp(&l1, &l2, &g, &src, BvpSettings::default()).unwrap();
        let w = std::f64::consts::TAU / n as f64;
        let lam = |k2: f64, t: f64| {
            let kappa = k2.sqrt();
            if kappa == 0.0 { 1.0 / (1.0 - t) } else { kappa / (kappa * (1.0 - t)).tanh() }
        };
        let fine = 64 * m;
        let h = eps / fine as f64;
        for c in [0usize, 3, 8, 15] {
            let k2 = g.basis().wavenumber_sq()[c];
            let a = |t: f64| lam(k2 + 1.0, t) + lam(k2, t);
            let dp = |t: f64, p: f64| a(t) * p - 1.0 / w;
            let mut p = vec![0.0; fine + 1];
            p[fine] = (lam(k2 + 1.0, eps) - lam(k2, eps)) / w;
            for i in (0..fine).rev() {
                let t = (i + 1) as f64 * h;
                let k1 = dp(t, p[i + 1]);
                let k2_ = dp(t - h / 2.0, p[i + 1] - h / 2.0 * k1);
                let k3 = dp(t - h / 2.0, p[i + 1] - h / 2.0 * k2_);
                let k4 = dp(t - h, p[i + 1] - h * k3);
                p[i] = p[i + 1] - h / 6.0 * (k1 + 2.0 * k2_ + 2.0 * k3 + k4);
            }
            let mut phi = vec![0.0; fine / 2 + 1];
            for i in 0..fine / 2 {
                let t = 2.0 * i as f64 * h;
                let df = |s: f64, pv: f64, f: f64| pv - a(s) * f;
                let k1 = df(t, p[2 * i], phi[i]);
                let k2_ = df(t + h, p[2 * i + 1], phi[i] + h * k1);
                let k3 = df(t + h, p[2 * i + 1], phi[i] + h * k2_);
                let k4 = df(t + 2.0 * h, p[2 * i + 2], phi[i] + 2.0 * h * k3);
                phi[i + 1] = phi[i] + h / 3.0 * (k1 + 2.0 * k2_ + 2.0 * k3 + k4);
            }
            let scale = phi.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for j in (8..=m).step_by(8) {
                let got = g.basis().mode_value(sol.phi.slice(j), c);
                let want = phi[j * fine / (2 * m)];
                assert!((got - want).abs() < 5e-2 * scale, "mode {c} node {j}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn layer_strip_identity_holds_for_bump() {
        let g = flat(16, 32);
        let q1 = PotentialSpec::Bump { theta0: vec![1.0], t0: 0.15, width: 0.6, amplitude: 2.0 }.sample(&g).unwrap();
        let q2 = PotentialSpec::Zero.sample(&g).unwrap();
        let f1: Vec<f64> = (0..16).map(|i| (i as f64 * 0.4).sin() + 0.3).collect();
        let f2: Vec<f64> = (0..16).map(|i| (i as f64 * 1.1).cos()).collect();
        let check = layer_strip_check(&g, &q1, &q2, &f1, &f2).unwrap();
        assert!(check.residual < 1e-10, "{check:?}");
        let same = layer_strip_check(&g, &q1, &q1, &f1, &f2).unwrap();
        assert_eq!((same.lhs, same.volume, same.depth_term), (0.0, 0.0, 0.0));
    }
}
