//! Warped-product model manifolds `[0, T) × ∂M` with metric `dt² + r(t)² h`.

mod boundary;
mod conformal;
mod profile;
mod sobolev;

pub use boundary::{circle_distance, BoundaryGrid, FourierBasis, Mode1d};
pub use conformal::{conformal_potential, ConformalPotential};
pub use profile::ProfileSpec;
pub use sobolev::SobolevScale;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::Real;

/// Condition imposed where the depth grid ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cap {
    /// `u = 0` on the last node, which sits at the cap depth.
    Dirichlet,
    /// Disk center: the grid stops one cell short of `T` and the last node is
    /// tied to its neighbour through `u ∝ r^{|k|}` mode by mode.
    CenterRegular,
}

/// Discretized model manifold. Depth nodes `0..=M` are uniform on `[0, ε]`;
/// further nodes extend the grid down to the cap with a spacing close to `ε/M`.
#[derive(Clone, Debug)]
pub struct WarpedGeometry<T> {
    grid: BoundaryGrid,
    profile: ProfileSpec,
    steps: usize,
    eps: T,
    offset: T,
    cap: Cap,
    cap_depth: T,
    depths: Vec<T>,
    r: Vec<T>,
    dr: Vec<T>,
    rho: Vec<T>,
    rho_half: Vec<T>,
    mu: Vec<T>,
    mu_dot: Vec<T>,
    basis: FourierBasis<T>,
    unit_laplacian: Matrix<T>,
}

/// Per-depth data the Riccati flow and the evolution equations need.
#[derive(Clone, Debug)]
pub struct SliceData<T> {
    pub depth: T,
    pub r: T,
    /// Positive slice Laplacian, symbol `|k|²/r²`.
    pub laplacian: Matrix<T>,
    pub weights: Vec<T>,
    pub mu_dot: T,
}

pub fn build_warped_geometry<T: Real>(
    profile: &ProfileSpec,
    grid: BoundaryGrid,
    steps: usize,
    eps: T,
) -> Result<WarpedGeometry<T>> {
    WarpedGeometry::new(profile, grid, steps, eps, T::zero())
}

impl<T: Real> WarpedGeometry<T> {
    /// Geometry whose local depth `t` is the physical depth `t + offset`.
    pub fn new(profile: &ProfileSpec, grid: BoundaryGrid, steps: usize, eps: T, offset: T) -> Result<Self> {
        profile.validate()?;
        for n in grid.axis_sizes() {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidArgument(format!("boundary nodes per axis must be even and >= 8, got {n}")));
            }
        }
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 depth steps, got {steps}")));
        }
        if !(eps > T::zero()) {
            return Err(Error::InvalidArgument(format!("depth extent must be positive, got {eps}")));
        }
        if offset < T::zero() {
            return Err(Error::InvalidArgument(format!("negative depth offset {offset}")));
        }
        let cap_depth = T::lit(profile.cap_depth()) - offset;
        if eps >= cap_depth {
            return Err(Error::DepthExceedsManifold { eps: eps.f64(), cap: cap_depth.f64() });
        }
        let cap = if profile.is_center_regular() { Cap::CenterRegular } else { Cap::Dirichlet };

        let h = eps / T::from_usize_lossy(steps);
        let mut depths: Vec<T> = (0..=steps).map(|j| T::from_usize_lossy(j) * h).collect();
        depths[steps] = eps;
        let rest = cap_depth - eps;
        let min_cells = if cap == Cap::CenterRegular { 3 } else { 1 };
        let cells = (rest / h).ceil().to_usize().unwrap_or(1).max(min_cells);
        let h2 = rest / T::from_usize_lossy(cells);
        let last = if cap == Cap::CenterRegular { cells - 1 } else { cells };
        for m in 1..=last {
            depths.push(if m == cells { cap_depth } else { eps + T::from_usize_lossy(m) * h2 });
        }

        let dim = T::from_usize_lossy(grid.dimension());
        let eval = |t: T| profile.eval::<T>(t + offset);
        let r0 = eval(T::zero()).0;
        let mut r = Vec::with_capacity(depths.len());
        let mut dr = Vec::with_capacity(depths.len());
        for &t in &depths {
            let (rv, dv) = eval(t);
            if !(rv > T::zero()) && !(cap == Cap::Dirichlet && t == cap_depth) {
                return Err(Error::InvalidProfile(format!("r({}) = {} is not positive", (t + offset).f64(), rv.f64())));
            }
            r.push(rv);
            dr.push(dv);
        }
        let mu: Vec<T> = r.iter().map(|&rv| dim * (rv / r0).ln()).collect();
        let mu_dot: Vec<T> = r.iter().zip(&dr).map(|(&rv, &dv)| dim * dv / rv).collect();
        let rho: Vec<T> = r.iter().map(|&rv| (rv / r0).powf(dim)).collect();
        let rho_half: Vec<T> = depths
            .windows(2)
            .map(|w| (eval(T::half() * (w[0] + w[1])).0 / r0).powf(dim))
            .collect();

        let basis = FourierBasis::new(&grid);
        let unit_laplacian = basis.multiplier(|k2| k2);
        Ok(Self {
            grid,
            profile: profile.clone(),
            steps,
            eps,
            offset,
            cap,
            cap_depth,
            depths,
            r,
            dr,
            rho,
            rho_half,
            mu,
            mu_dot,
            basis,
            unit_laplacian,
        })
    }

    /// The same manifold with the origin moved `delta` deeper.
    pub fn rebased(&self, delta: T) -> Result<Self> {
        Self::new(&self.profile, self.grid, self.steps, self.eps, self.offset + delta)
    }

    /// Same geometry with another resolution.
    pub fn refined(&self, grid: BoundaryGrid, steps: usize) -> Result<Self> {
        Self::new(&self.profile, grid, steps, self.eps, self.offset)
    }

    pub fn grid(&self) -> BoundaryGrid {
        self.grid
    }

    pub fn boundary_len(&self) -> usize {
        self.grid.len()
    }

    pub fn profile(&self) -> &ProfileSpec {
        &self.profile
    }

    /// `M`: number of steps on `[0, ε]`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn cap(&self) -> Cap {
        self.cap
    }

    /// Cap depth in local coordinates.
    pub fn cap_depth(&self) -> T {
        self.cap_depth
    }

    pub fn step(&self) -> T {
        self.eps / T::from_usize_lossy(self.steps)
    }

    /// Index of the last depth node (the Dirichlet node or the tied center node).
    pub fn last_index(&self) -> usize {
        self.depths.len() - 1
    }

    pub fn depths(&self) -> &[T] {
        &self.depths
    }

    /// Depth grid restricted to `[0, ε]`.
    pub fn collar_depths(&self) -> &[T] {
        &self.depths[..=self.steps]
    }

    pub fn depth(&self, j: usize) -> T {
        self.depths[j]
    }

    pub fn r(&self, j: usize) -> T {
        self.r[j]
    }

    pub fn dr(&self, j: usize) -> T {
        self.dr[j]
    }

    /// Volume density `e^{μ}` relative to the outer boundary.
    pub fn rho(&self, j: usize) -> T {
        self.rho[j]
    }

    /// Volume density at the midpoint of cell `[t_j, t_{j+1}]`.
    pub fn rho_half(&self, j: usize) -> T {
        self.rho_half[j]
    }

    pub fn mu(&self, j: usize) -> T {
        self.mu[j]
    }

    pub fn mu_dot(&self, j: usize) -> T {
        self.mu_dot[j]
    }

    pub fn mu_dots(&self) -> &[T] {
        &self.mu_dot[..=self.steps]
    }

    /// Quadrature weight of each boundary node on the slice at node `j`.
    pub fn weight(&self, j: usize) -> T {
        self.r[j].powi(self.grid.dimension() as i32) * self.grid.unit_cell_measure::<T>()
    }

    pub fn weights(&self, j: usize) -> Vec<T> {
        vec![self.weight(j); self.grid.len()]
    }

    pub fn basis(&self) -> &FourierBasis<T> {
        &self.basis
    }

    /// Laplacian of the unit slice (`r = 1`).
    pub fn unit_laplacian(&self) -> &Matrix<T> {
        &self.unit_laplacian
    }

    /// Slice Laplacian at any depth node, extension nodes included.
    pub fn laplacian(&self, j: usize) -> Matrix<T> {
        let r = self.r[j];
        self.unit_laplacian.scaled(T::one() / (r * r))
    }

    /// `L_{t_j} u`; constant inputs give an exact zero.
    pub fn apply_laplacian(&self, j: usize, u: &[T]) -> Vec<T> {
        if u.iter().all(|&x| x == u[0]) {
            return vec![T::zero(); u.len()];
        }
        let r = self.r[j];
        let inv = T::one() / (r * r);
        self.unit_laplacian.mul_vec(u).into_iter().map(|x| x * inv).collect()
    }

    pub fn slice_data(&self, j: usize) -> Result<SliceData<T>> {
        if j > self.steps {
            return Err(Error::IndexOutOfRange { index: j, max: self.steps });
        }
        Ok(SliceData {
            depth: self.depths[j],
            r: self.r[j],
            laplacian: self.laplacian(j),
            weights: self.weights(j),
            mu_dot: self.mu_dot[j],
        })
    }

    /// Multiplier tying the last node to its neighbour on a center-regular cap,
    /// as a scalar for one Laplace symbol `|k|²`.
    pub fn center_ratio(&self, k2: T) -> T {
        let k = self.last_index();
        (self.r[k] / self.r[k - 1]).powf(k2.sqrt())
    }

    /// Matrix form of [`Self::center_ratio`].
    pub fn center_closure(&self) -> Matrix<T> {
        self.basis.multiplier(|k2| self.center_ratio(k2))
    }

    /// Stable identifier of the discretization.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            grid: &'a BoundaryGrid,
            profile: &'a ProfileSpec,
            steps: usize,
            eps: f64,
            offset: f64,
        }
        let key = Key {
            grid: &self.grid,
            profile: &self.profile,
            steps: self.steps,
            eps: self.eps.f64(),
            offset: self.offset.f64(),
        };
        let bytes = serde_json::to_vec(&key).expect("geometry key serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_cylinder_has_constant_warp() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 32, 0.3)
                .unwrap();
        for j in 0..=32 {
            assert_eq!(g.mu_dot(j), 0.0);
            assert!((g.weight(j) - std::f64::consts::TAU / 16.0).abs() < 1e-15);
        }
        assert_eq!(g.depth(g.last_index()), 1.0);
    }

    #[test]
    fn annulus_profile_is_analytic() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.2 }, BoundaryGrid::Circle { n: 64 }, 256, 0.3).unwrap();
        for j in 0..=256 {
            let t = g.depth(j);
            assert!((g.r(j) - (1.0 - t)).abs() < 1e-15);
            assert!((g.mu_dot(j) + 1.0 / (1.0 - t)).abs() < 1e-12);
        }
        assert!((g.cap_depth() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn negative_custom_sample_is_invalid_profile() {
        let p = ProfileSpec::Custom { depth: 1.0, samples: vec![1.0, 0.9, -0.1, 0.5] };
        let r = build_warped_geometry::<f64>(&p, BoundaryGrid::Circle { n: 16 }, 16, 0.3);
        assert!(matches!(r, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn eps_beyond_cap_is_rejected() {
        let r = build_warped_geometry::<f64>(&ProfileSpec::Annulus { rho: 0.5 }, BoundaryGrid::Circle { n: 16 }, 16, 0.5);
        assert!(matches!(r, Err(Error::DepthExceedsManifold { .. })));
    }

    #[test]
    fn slice_symbols() {
        let flat: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::FlatCylinder { depth: 1.0 }, BoundaryGrid::Circle { n: 16 }, 16, 0.5)
                .unwrap();
        let c = flat.basis().find(&[Mode1d::Cos(3)]).unwrap();
        let s = flat.slice_data(7).unwrap();
        assert!((flat.basis().mode_value(&s.laplacian, c) - 9.0).abs() < 1e-12);

        let ann: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.2 }, BoundaryGrid::Circle { n: 16 }, 10, 0.5).unwrap();
        let c = ann.basis().find(&[Mode1d::Sin(2)]).unwrap();
        let s = ann.slice_data(10).unwrap();
        assert!((ann.basis().mode_value(&s.laplacian, c) - 16.0).abs() < 1e-12);
        assert!(matches!(ann.slice_data(11), Err(Error::IndexOutOfRange { index: 11, max: 10 })));
    }

    #[test]
    fn mu_dot_is_consistent_with_mu() {
        let p = ProfileSpec::Annulus { rho: 0.2 };
        let err = |m: usize| {
            let g: WarpedGeometry<f64> = build_warped_geometry(&p, BoundaryGrid::Circle { n: 8 }, m, 0.6).unwrap();
            let h = g.step();
            (1..m)
                .map(|j| ((g.mu(j + 1) - g.mu(j - 1)) / (2.0 * h) - g.mu_dot(j)).abs())
                .fold(0.0, f64::max)
        };
        let rate = (err(32) / err(64)).log2();
        assert!(rate >= 1.8, "rate {rate}");
    }

    #[test]
    fn laplacian_is_self_adjoint_in_weighted_pairing() {
        let g: WarpedGeometry<f64> =
            build_warped_geometry(&ProfileSpec::Annulus { rho: 0.3 }, BoundaryGrid::Circle { n: 32 }, 16, 0.4).unwrap();
        let u: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 1.3).cos()).collect();
        let w = g.weights(5);
        let pair = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((x, y), z)| x * y * z).sum::<f64>();
        let lhs = pair(&g.apply_laplacian(5, &u), &v);
        let rhs = pair(&u, &g.apply_laplacian(5, &v));
        let scale = crate::linalg::norm2(&u) * crate::linalg::norm2(&v);
        assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }
}
