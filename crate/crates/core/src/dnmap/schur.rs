//! Elliptic realization: block elimination of the depth-discretized equation
//! `(ρ u')' - ρ (L + Q) u = 0` from the cap upward.

use crate::error::{Error, Result};
use crate::geometry::{Cap, WarpedGeometry};
use crate::linalg::{Lu, Matrix};
use crate::Real;

use super::{DnFamily, DnOperator, Provenance};

const PIVOT_THRESHOLD: f64 = 1e-10;

/// Transfer maps `S_i` with `u_{i+1} = S_i u_i` for every solution of the
/// discrete equation below node `i`.
#[derive(Clone, Debug)]
pub struct SchurSweep<T> {
    transfer: Vec<Matrix<T>>,
}

fn check_potential<T: Real>(geometry: &WarpedGeometry<T>, q: &Matrix<T>) -> Result<()> {
    let expected = (geometry.depths().len(), geometry.boundary_len());
    if q.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", q.rows(), q.cols()),
        });
    }
    Ok(())
}

/// `ρ_i (L_i + Q_i)`.
fn weighted_operator<T: Real>(geometry: &WarpedGeometry<T>, q: &Matrix<T>, i: usize) -> Matrix<T> {
    let mut m = geometry.laplacian(i);
    for (k, &qk) in q.row(i).iter().enumerate() {
        m[(k, k)] += qk;
    }
    m.scale_mut(geometry.rho(i));
    m
}

impl<T: Real> SchurSweep<T> {
    pub fn new(geometry: &WarpedGeometry<T>, q: &Matrix<T>) -> Result<Self> {
        check_potential(geometry, q)?;
        let last = geometry.last_index();
        let n = geometry.boundary_len();
        let d = geometry.depths();
        let mut transfer = vec![Matrix::zeros(n, n); last];
        if geometry.cap() == Cap::CenterRegular {
            transfer[last - 1] = geometry.center_closure();
        }
        let threshold = T::lit(PIVOT_THRESHOLD);
        for i in (0..last - 1).rev() {
            let node = i + 1;
            let h_minus = d[node] - d[node - 1];
            let h_plus = d[node + 1] - d[node];
            let a = geometry.rho_half(node - 1) / h_minus;
            let c = geometry.rho_half(node) / h_plus;
            let mut block = weighted_operator(geometry, q, node);
            block.scale_mut(-T::half() * (h_minus + h_plus));
            block.add_diagonal(-(a + c));
            block.add_scaled(c, &transfer[node]);
            let lu = Lu::factor(&block);
            if lu.is_singular(threshold) {
                return Err(Error::EigenvalueCollision {
                    depth: (d[node] + geometry.offset()).f64(),
                    node,
                    pivot: lu.pivot_ratio().f64(),
                });
            }
            let mut s = lu.solve_matrix(&Matrix::identity(n));
            s.scale_mut(-a);
            transfer[i] = s;
        }
        Ok(Self { transfer })
    }

    pub fn transfer(&self, i: usize) -> &Matrix<T> {
        &self.transfer[i]
    }

    /// DN map on the slice at node `j`, from the discrete flux through the
    /// first cell plus the half-cell source correction.
    pub fn dn(&self, geometry: &WarpedGeometry<T>, q: &Matrix<T>, j: usize) -> DnOperator<T> {
        let d = geometry.depths();
        let h = d[j + 1] - d[j];
        let n = geometry.boundary_len();
        let mut m = weighted_operator(geometry, q, j);
        m.scale_mut(T::half() * h);
        let mut flux = Matrix::identity(n).sub(&self.transfer[j]);
        flux.scale_mut(geometry.rho_half(j) / h);
        m.add_scaled(T::one(), &flux);
        m.scale_mut(T::one() / geometry.rho(j));
        DnOperator { depth: d[j], index: j, matrix: m, weight: geometry.weight(j), provenance: Provenance::Schur }
    }
}

/// Solution of the Dirichlet problem on `[t_j, T)` with trace `f` at `t_j`.
#[derive(Clone, Debug)]
pub struct InteriorField<T> {
    pub start: usize,
    /// Rows are depth nodes `start..=last`, columns boundary nodes.
    pub values: Matrix<T>,
}

impl<T: Real> InteriorField<T> {
    pub fn trace(&self, node: usize) -> &[T] {
        self.values.row(node - self.start)
    }
}

pub fn solve_interior<T: Real>(
    geometry: &WarpedGeometry<T>,
    q: &Matrix<T>,
    j: usize,
    f: &[T],
) -> Result<InteriorField<T>> {
    let sweep = SchurSweep::new(geometry, q)?;
    sweep.extend(geometry, j, f)
}

impl<T: Real> SchurSweep<T> {
    pub fn extend(&self, geometry: &WarpedGeometry<T>, j: usize, f: &[T]) -> Result<InteriorField<T>> {
        let last = geometry.last_index();
        if j >= last {
            return Err(Error::IndexOutOfRange { index: j, max: last - 1 });
        }
        if f.len() != geometry.boundary_len() {
            return Err(Error::ShapeMismatch { expected: geometry.boundary_len().to_string(), found: f.len().to_string() });
        }
        let n = f.len();
        let mut values = Matrix::zeros(last - j + 1, n);
        values.as_mut_slice()[..n].copy_from_slice(f);
        for i in j..last {
            let next = self.transfer[i].mul_vec(values.row(i - j));
            values.as_mut_slice()[(i - j + 1) * n..(i - j + 2) * n].copy_from_slice(&next);
        }
        Ok(InteriorField { start: j, values })
    }
}

pub fn dn_schur<T: Real>(geometry: &WarpedGeometry<T>, q: &Matrix<T>, j: usize) -> Result<DnOperator<T>> {
    if j > geometry.steps() {
        return Err(Error::IndexOutOfRange { index: j, max: geometry.steps() });
    }
    Ok(SchurSweep::new(geometry, q)?.dn(geometry, q, j))
}

/// `Λ(t_j)`, `j = 0..=M`, from a single sweep.
pub fn dn_family<T: Real>(geometry: &WarpedGeometry<T>, q: &Matrix<T>) -> Result<DnFamily<T>> {
    let sweep = SchurSweep::new(geometry, q)?;
    Ok(DnFamily {
        provenance: Provenance::Schur,
        geometry_hash: geometry.hash(),
        operators: (0..=geometry.steps()).map(|j| sweep.dn(geometry, q, j)).collect(),
    })
}
