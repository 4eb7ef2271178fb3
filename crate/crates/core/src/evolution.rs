//! Tautological evolution `∂_t u = -Λ_t u` and the tensor evolution with
//! `A_t W = Λ¹_t W + W (Λ²_t)ᵀ` on slice arrays indexed by `(θ_x, θ_y)`.

use crate::dnmap::DnFamily;
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, Lu, Matrix};
use crate::Real;

/// Function on `∂M × ∂M × {t_j}`, one `N×N` slice per depth node.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    pub depths: Vec<T>,
    pub slices: Vec<Matrix<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn zeros(depths: &[T], n: usize) -> Self {
        Self { depths: depths.to_vec(), slices: vec![Matrix::zeros(n, n); depths.len()] }
    }

    pub fn from_fn(depths: &[T], mut f: impl FnMut(usize) -> Matrix<T>) -> Self {
        Self { depths: depths.to_vec(), slices: (0..depths.len()).map(&mut f).collect() }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slice(&self, j: usize) -> &Matrix<T> {
        &self.slices[j]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { depths: self.depths.clone(), slices: self.slices.iter().zip(&other.slices).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { depths: self.depths.clone(), slices: self.slices.iter().zip(&other.slices).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self { depths: self.depths.clone(), slices: self.slices.iter().map(|s| s.scaled(alpha)).collect() }
    }

    /// Root of the sum of squared entries over all slices.
    pub fn norm(&self) -> T {
        self.slices.iter().map(|s| s.frobenius_norm().powi(2)).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.slices.iter().map(Matrix::max_abs).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(Matrix::is_finite)
    }
}

/// `Λ¹ W + W (Λ²)ᵀ`, never forming the `N² × N²` operator.
pub fn apply_at<T: Real>(l1: &Matrix<T>, l2: &Matrix<T>, w: &Matrix<T>) -> Result<Matrix<T>> {
    let n = w.rows();
    if !w.is_square() || l1.shape() != (n, n) || l2.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} operators for a {n}x{n} slice"),
            found: format!("{:?}, {:?}, {:?}", l1.shape(), l2.shape(), w.shape()),
        });
    }
    let mut out = l1.matmul(w);
    out.add_scaled(T::one(), &w.matmul_transpose(l2));
    Ok(out)
}

/// Trapezoidal steps of `∂_t u = -Λ_t u` from `u(0) = f`.
pub fn evolve_tautological<T: Real>(family: &DnFamily<T>, f: &[T]) -> Result<Vec<Vec<T>>> {
    let n = family.first().matrix.rows();
    if f.len() != n {
        return Err(Error::ShapeMismatch { expected: n.to_string(), found: f.len().to_string() });
    }
    let mut out = vec![f.to_vec()];
    for j in 0..family.len() - 1 {
        let h = family.operators[j + 1].depth - family.operators[j].depth;
        let prev = out.last().expect("non-empty");
        let mut rhs = prev.clone();
        for (r, v) in rhs.iter_mut().zip(family.matrix(j).mul_vec(prev)) {
            *r -= T::half() * h * v;
        }
        let mut lhs = family.matrix(j + 1).scaled(T::half() * h);
        lhs.add_diagonal(T::one());
        let lu = Lu::factor(&lhs);
        if lu.is_singular(T::lit(1e-12)) {
            return Err(Error::StepFailure { depth: family.operators[j + 1].depth.f64() });
        }
        out.push(lu.solve_vec(&rhs));
    }
    Ok(out)
}

/// Tolerances of the inner conjugate-gradient solves.
#[derive(Clone, Copy, Debug)]
pub struct InnerSolver {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for InnerSolver {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 500 }
    }
}

/// Solves `(1 + α(A - shift)) X = B` by CG starting from `guess`.
#[allow(clippy::too_many_arguments)]
fn shifted_solve<T: Real>(
    l1: &Matrix<T>,
    l2: &Matrix<T>,
    alpha: T,
    shift: T,
    b: &Matrix<T>,
    guess: &Matrix<T>,
    solver: InnerSolver,
    depth: T,
) -> Result<Matrix<T>> {
    let n = b.rows();
    let diag = T::one() - alpha * shift;
    let apply = |x: &[T]| -> Vec<T> {
        let xm = Matrix::from_vec(n, n, x.to_vec());
        let mut y = l1.matmul(&xm);
        y.add_scaled(T::one(), &xm.matmul_transpose(l2));
        y.scale_mut(alpha);
        y.add_scaled(diag, &xm);
        y.into_vec()
    };
    let mut x = guess.as_slice().to_vec();
    let out = conjugate_gradient(apply, b.as_slice(), &mut x, T::lit(solver.tolerance), solver.max_iterations);
    if !out.converged {
        return Err(Error::ForwardStepFailure {
            depth: depth.f64(),
            iterations: out.iterations,
            residual: out.relative_residual.f64(),
        });
    }
    Ok(Matrix::from_vec(n, n, x))
}

fn check_pair<T: Real>(f1: &DnFamily<T>, f2: &DnFamily<T>, field: Option<&TensorField<T>>) -> Result<usize> {
    if f1.len() != f2.len() {
        return Err(Error::GridMismatch(format!("families of length {} and {}", f1.len(), f2.len())));
    }
    if let Some(r) = field {
        if r.len() != f1.len() {
            return Err(Error::GridMismatch(format!("field has {} slices, families {}", r.len(), f1.len())));
        }
    }
    Ok(f1.first().matrix.rows())
}

/// `(∂_t + A_t) W = rhs`, `W(0) = w0`.
pub fn evolve_tensor_forward<T: Real>(
    f1: &DnFamily<T>,
    f2: &DnFamily<T>,
    rhs: Option<&TensorField<T>>,
    w0: &Matrix<T>,
    solver: InnerSolver,
) -> Result<TensorField<T>> {
    let n = check_pair(f1, f2, rhs)?;
    if w0.shape() != (n, n) {
        return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), found: format!("{:?}", w0.shape()) });
    }
    let depths = f1.depths();
    let mut slices = vec![w0.clone()];
    for j in 0..f1.len() - 1 {
        let h = depths[j + 1] - depths[j];
        let prev = &slices[j];
        let mut b = prev.clone();
        b.add_scaled(-T::half() * h, &apply_at(&f1.matrix(j).symmetrized(), &f2.matrix(j).symmetrized(), prev)?);
        if let Some(r) = rhs {
            b.add_scaled(T::half() * h, r.slice(j));
            b.add_scaled(T::half() * h, r.slice(j + 1));
        }
        let next = shifted_solve(
            &f1.matrix(j + 1).symmetrized(),
            &f2.matrix(j + 1).symmetrized(),
            T::half() * h,
            T::zero(),
            &b,
            prev,
            solver,
            depths[j + 1],
        )?;
        slices.push(next);
    }
    Ok(TensorField { depths, slices })
}

/// `(∂_t* + A_t) Ψ = rhs` with `∂_t* = -∂_t - μ̇(x) - μ̇(y)`, `Ψ(ε) = psi_eps`,
/// integrated toward `t = 0`. `mu_dot` holds `μ̇` on the family's depth nodes.
pub fn evolve_tensor_backward<T: Real>(
    f1: &DnFamily<T>,
    f2: &DnFamily<T>,
    mu_dot: &[T],
    rhs: Option<&TensorField<T>>,
    psi_eps: &Matrix<T>,
    solver: InnerSolver,
) -> Result<TensorField<T>> {
    let n = check_pair(f1, f2, rhs)?;
    if psi_eps.shape() != (n, n) {
        return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), found: format!("{:?}", psi_eps.shape()) });
    }
    if mu_dot.len() != f1.len() {
        return Err(Error::GridMismatch(format!("{} mean-curvature samples for {} depths", mu_dot.len(), f1.len())));
    }
    let depths = f1.depths();
    let m = f1.len() - 1;
    let mut slices = vec![Matrix::zeros(n, n); m + 1];
    slices[m] = psi_eps.clone();
    for j in (0..m).rev() {
        let h = depths[j + 1] - depths[j];
        let next = &slices[j + 1];
        let mut b = next.clone();
        b.add_scaled(-T::half() * h, &apply_at(&f1.matrix(j + 1).symmetrized(), &f2.matrix(j + 1).symmetrized(), next)?);
        b.add_scaled(T::half() * h * T::two() * mu_dot[j + 1], next);
        if let Some(r) = rhs {
            b.add_scaled(T::half() * h, r.slice(j));
            b.add_scaled(T::half() * h, r.slice(j + 1));
        }
        let cur = shifted_solve(
            &f1.matrix(j).symmetrized(),
            &f2.matrix(j).symmetrized(),
            T::half() * h,
            T::two() * mu_dot[j],
            &b,
            next,
            solver,
            depths[j],
        )?;
        slices[j] = cur;
    }
    Ok(TensorField { depths, slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::{dn_family, DnOperator, Provenance};
    use crate::geometry::{build_warped_geometry, BoundaryGrid, Mode1d, ProfileSpec, WarpedGeometry};
    use crate::linalg::singular_values;
    use crate::potential::PotentialSpec;

    fn flat(n: usize, m: usize) -> (WarpedGeometry<f64>, DnFamily<f64>) {
        let g = build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n }, m, 0.3)
            .unwrap();
        let q = PotentialSpec::Zero.sample(&g).unwrap();
        let fam = dn_family(&g, &q).unwrap();
        (g, fam)
    }

    fn constant_family(depths: &[f64], m: Matrix<f64>) -> DnFamily<f64> {
        DnFamily {
            provenance: Provenance::Schur,
            geometry_hash: String::new(),
            operators: depths
                .iter()
                .enumerate()
                .map(|(j, &t)| DnOperator { depth: t, index: j, matrix: m.clone(), weight: 1.0, provenance: Provenance::Schur })
                .collect(),
        }
    }

    #[test]
    fn tautological_mode_decays_like_sinh() {
        let (g, fam) = flat(32, 128);
        let k = 2.0;
        let f: Vec<f64> = (0..32).map(|i| (k * std::f64::consts::TAU * i as f64 / 32.0).sin()).collect();
        let traj = evolve_tautological(&fam, &f).unwrap();
        for (j, u) in traj.iter().enumerate() {
            let factor = (k * (1.0 - g.depth(j))).sinh() / k.sinh();
            for (a, b) in u.iter().zip(&f) {
                assert!((a - factor * b).abs() < 1e-2 * factor);
            }
        }
    }

    #[test]
    fn zero_family_keeps_data_constant() {
        let depths: Vec<f64> = (0..=8).map(|j| j as f64 * 0.1).collect();
        let fam = constant_family(&depths, Matrix::zeros(8, 8));
        let f: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let traj = evolve_tautological(&fam, &f).unwrap();
        assert!(traj.iter().all(|u| u == &f));
    }

    #[test]
    fn rank_one_action_and_identity() {
        let (g, fam) = flat(8, 8);
        let l1 = fam.matrix(0);
        let l2 = fam.matrix(3);
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).cos()).collect();
        let v: Vec<f64> = (0..8).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let lhs = apply_at(l1, l2, &Matrix::outer(&u, &v)).unwrap();
        let mut rhs = Matrix::outer(&l1.mul_vec(&u), &v);
        rhs.add_scaled(1.0, &Matrix::outer(&u, &l2.mul_vec(&v)));
        assert!(lhs.sub(&rhs).max_abs() < 1e-13);
        let id = Matrix::identity(8);
        let w = Matrix::outer(&u, &v);
        assert!(apply_at(&id, &id, &w).unwrap().sub(&w.scaled(2.0)).max_abs() < 1e-15);
        assert!(apply_at(&id, &Matrix::identity(4), &w).is_err());
        let _ = g;
    }

    #[test]
    fn forward_rank_one_stays_rank_one() {
        let (g, fam) = flat(16, 32);
        let c = g.basis().find(&[Mode1d::Cos(1)]).unwrap();
        let u0 = g.basis().vector(c);
        let v0: Vec<f64> = (0..16).map(|i| 1.0 + 0.2 * (i as f64).sin()).collect();
        let w = evolve_tensor_forward(&fam, &fam, None, &Matrix::outer(&u0, &v0), InnerSolver::default()).unwrap();
        let u = evolve_tautological(&fam, &u0).unwrap();
        let v = evolve_tautological(&fam, &v0).unwrap();
        for j in 0..w.len() {
            let oracle = Matrix::outer(&u[j], &v[j]);
            assert!(w.slice(j).sub(&oracle).frobenius_norm() <= 1e-2 * oracle.frobenius_norm());
            let sv = singular_values(w.slice(j));
            assert!(sv[1] < 1e-6 * sv[0]);
        }
    }

    #[test]
    fn zero_operator_integrates_constant_source() {
        let depths: Vec<f64> = (0..=10).map(|j| j as f64 * 0.05).collect();
        let fam = constant_family(&depths, Matrix::zeros(8, 8));
        let c = Matrix::from_fn(8, 8, |i, j| (i * 8 + j) as f64);
        let rhs = TensorField::from_fn(&depths, |_| c.clone());
        let w = evolve_tensor_forward(&fam, &fam, Some(&rhs), &Matrix::zeros(8, 8), InnerSolver::default()).unwrap();
        for (j, s) in w.slices.iter().enumerate() {
            assert!(s.sub(&c.scaled(depths[j])).max_abs() < 1e-12);
        }
        let zero = evolve_tensor_forward(&fam, &fam, None, &Matrix::zeros(8, 8), InnerSolver::default()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn backward_zero_data_stays_zero() {
        let (g, fam) = flat(8, 8);
        let psi = evolve_tensor_backward(&fam, &fam, g.mu_dots(), None, &Matrix::zeros(8, 8), InnerSolver::default())
            .unwrap();
        assert_eq!(psi.max_abs(), 0.0);
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let (_, fam) = flat(16, 16);
        let w0 = Matrix::from_fn(16, 16, |i, j| ((i + j) as f64).cos());
        let w = evolve_tensor_forward(&fam, &fam, None, &w0, InnerSolver::default()).unwrap();
        assert!(w.slices.iter().all(|s| s.asymmetry() < 1e-9 * s.max_abs().max(1e-300)));
    }
}
