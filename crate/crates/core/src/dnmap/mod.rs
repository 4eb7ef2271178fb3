//! Depth-indexed Dirichlet-to-Neumann maps `Λ_t f = -∂_t u|_t`.

mod checks;
mod modal;
mod riccati;
mod schur;

pub use checks::{bilinear_identity_check, coercivity_probe, BilinearCheck, CoercivityFit};
pub use modal::{modal_dn_family, ModalCoefficients};
pub use riccati::{riccati_integrate, riccati_residual, RiccatiResidual};
pub use schur::{dn_family, dn_schur, solve_interior, InteriorField, SchurSweep};

use serde::Serialize;

use crate::linalg::{dot, Matrix};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Schur,
    Riccati,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Schur => "schur",
            Provenance::Riccati => "riccati",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DnOperator<T> {
    pub depth: T,
    /// Depth node the map lives on.
    pub index: usize,
    pub matrix: Matrix<T>,
    /// Quadrature weight shared by every node of the slice.
    pub weight: T,
    pub provenance: Provenance,
}

impl<T: Real> DnOperator<T> {
    /// `⟨Λu, v⟩_t`.
    pub fn pairing(&self, u: &[T], v: &[T]) -> T {
        dot(&self.matrix.mul_vec(u), v) * self.weight
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        self.matrix.mul_vec(u)
    }

    /// Bound on `|⟨Λu,v⟩_t - ⟨u,Λv⟩_t| / (‖u‖_t ‖v‖_t)`: with equal node
    /// weights this is `‖Λ - Λᵀ‖₂ ≤ ‖Λ - Λᵀ‖_F`.
    pub fn weighted_asymmetry(&self) -> T {
        self.matrix.sub(&self.matrix.transpose()).frobenius_norm()
    }
}

/// `Λ(t_j)` for `j = 0..=M`.
#[derive(Clone, Debug)]
pub struct DnFamily<T> {
    pub provenance: Provenance,
    pub geometry_hash: String,
    pub operators: Vec<DnOperator<T>>,
}

impl<T: Real> DnFamily<T> {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn matrix(&self, j: usize) -> &Matrix<T> {
        &self.operators[j].matrix
    }

    pub fn first(&self) -> &DnOperator<T> {
        &self.operators[0]
    }

    pub fn last(&self) -> &DnOperator<T> {
        self.operators.last().expect("family is never empty")
    }

    pub fn depths(&self) -> Vec<T> {
        self.operators.iter().map(|o| o.depth).collect()
    }

    /// Piecewise-linear interpolation in depth, clamped to the family's range.
    pub fn at(&self, t: T) -> Matrix<T> {
        let n = self.operators.len();
        if n == 1 || t <= self.operators[0].depth {
            return self.operators[0].matrix.clone();
        }
        if t >= self.operators[n - 1].depth {
            return self.operators[n - 1].matrix.clone();
        }
        let k = self.operators.partition_point(|o| o.depth <= t);
        let (a, b) = (&self.operators[k - 1], &self.operators[k]);
        let s = (t - a.depth) / (b.depth - a.depth);
        let mut m = a.matrix.scaled(T::one() - s);
        m.add_scaled(s, &b.matrix);
        m
    }

    /// Largest relative deviation `‖A_j - B_j‖_F / ‖B_j‖_F` against a reference family.
    pub fn max_relative_difference(&self, reference: &DnFamily<T>) -> T {
        self.operators
            .iter()
            .zip(&reference.operators)
            .map(|(a, b)| a.matrix.sub(&b.matrix).frobenius_norm() / b.matrix.frobenius_norm())
            .fold(T::zero(), T::max)
    }
}
