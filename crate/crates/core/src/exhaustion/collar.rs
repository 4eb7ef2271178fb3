//! Sampled collar map `Ψ: ∂M × [0,1) → M` on a triangle mesh, grown one
//! triangle at a time by pushing samples through the certificate edge.
//!
//! A push works in lens coordinates of the facet `ν = (p, q)` of the old face:
//! `x = (x_p, x_q)` on the facet and `t = y_o / η(x)`, `η = x_p x_q`, so that
//! `ζ(x, t) = (x(1 - tη), tη)`. The push image is written as `(s, z)`:
//! `s` the facet coordinate and `z` the signed height, negative across `ν`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::mesh::{EdgeKey, SurfaceMesh};
use super::order::{verify_order, ExhaustionOrder};
use super::smooth::smooth_min_pair;
use crate::error::{Error, Result};

/// Half-width of the `C¹` blend between the two push-through branches.
const BLEND: f64 = 0.05;
/// Parameter separation below which coincident images are not a violation.
const MIN_SEPARATION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CollarSample {
    /// Boundary parameter: edge `e` of [`SurfaceMesh::boundary_edges`] spans `[e, e+1)`.
    pub u: f64,
    /// Collar depth parameter in `[0, 1)`.
    pub t: f64,
    pub face: usize,
    /// Barycentric coordinates against `mesh.triangles[face]`.
    pub bary: [f64; 3],
    /// Step that last moved the sample; 0 is the collar.
    pub step: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityReport {
    pub tolerance: f64,
    pub violations: usize,
    /// First few offending sample pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl InjectivityReport {
    pub fn injective(&self) -> bool {
        self.violations == 0
    }
}

/// `ψ`: monotone `[1/2, 1] → [0, 1]`, identity on `[0.9, 1]`, a cubic
/// Hermite piece below (also used slightly below 1/2 inside the blend).
fn reparam(t: f64) -> f64 {
    if t >= 0.9 {
        return t;
    }
    let s = (t - 0.5) / 0.4;
    let (h10, h01, h11) = (s * (1.0 - s) * (1.0 - s), s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
    h10 * 0.4 * 2.25 + h01 * 0.9 + h11 * 0.4
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let increasing = f(hi) > f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Deep branch: `(x,0) + c·min_ε{x_i}(-1, 2)` across the facet with
/// `c = 1 - 2t` and `ε = tη`.
fn branch_low(x0: f64, t: f64) -> (f64, f64) {
    let x1 = 1.0 - x0;
    let c = 1.0 - 2.0 * t;
    let m = smooth_min_pair(x0, x1, t.max(0.0) * x0 * x1);
    let rest = 1.0 - 2.0 * c * m;
    let s = if rest > 0.0 { (x0 - c * m) / rest } else { 0.5 };
    (s, -2.0 * c * m)
}

/// Squeeze branch: `ζ(x, ψ(t))`.
fn branch_high(x0: f64, t: f64) -> (f64, f64) {
    (x0, reparam(t) * x0 * (1.0 - x0))
}

fn zeta_tilde(x0: f64, t: f64) -> (f64, f64) {
    if t >= 0.5 + BLEND {
        branch_high(x0, t)
    } else if t <= 0.5 - BLEND {
        branch_low(x0, t)
    } else {
        let r = (t - 0.5 + BLEND) / (2.0 * BLEND);
        let b = r * r * (3.0 - 2.0 * r);
        let (l, h) = (branch_low(x0, t), branch_high(x0, t));
        ((1.0 - b) * l.0 + b * h.0, (1.0 - b) * l.1 + b * h.1)
    }
}

/// Inverse of [`zeta_tilde`]: closed forms on the pure branches, polished by
/// Newton steps through the blend.
fn zeta_tilde_inv(s: f64, z: f64) -> Option<(f64, f64)> {
    let (mut x0, mut t) = if z < 0.0 {
        let x0 = s * (1.0 + z) - 0.5 * z;
        let eta = x0 * (1.0 - x0);
        let g = |t: f64| 2.0 * (1.0 - 2.0 * t) * smooth_min_pair(x0, 1.0 - x0, t * eta) + z;
        if g(0.0) < 0.0 {
            return None;
        }
        (x0, bisect(0.0, 0.5, g))
    } else {
        let eta = s * (1.0 - s);
        if eta <= 0.0 || z >= eta {
            return None;
        }
        (s, bisect(0.5, 1.0, |t| reparam(t) - z / eta))
    };
    let residual = |x0: f64, t: f64| {
        let (a, b) = zeta_tilde(x0, t);
        (a - s, b - z)
    };
    for _ in 0..50 {
        let (r0, r1) = residual(x0, t);
        if r0.abs().max(r1.abs()) < 1e-15 {
            break;
        }
        let h = 1e-7;
        let (a0, a1) = residual(x0 + h, t);
        let (b0, b1) = residual(x0, t + h);
        let j = [[(a0 - r0) / h, (b0 - r0) / h], [(a1 - r1) / h, (b1 - r1) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        x0 -= (j[1][1] * r0 - j[0][1] * r1) / det;
        t -= (j[0][0] * r1 - j[1][0] * r0) / det;
    }
    let (r0, r1) = residual(x0, t);
    (r0.abs().max(r1.abs()) < 1e-11 && (0.0..1.0).contains(&t) && x0 > 0.0 && x0 < 1.0).then_some((x0, t))
}

#[derive(Clone, Copy, Debug)]
struct Cone {
    face: usize,
    a: usize,
    b: usize,
    apex: [f64; 3],
}

#[derive(Clone, Copy, Debug)]
struct Step {
    from: usize,
    to: usize,
    edge: EdgeKey,
    step: usize,
}

fn slot(tri: [usize; 3], v: usize) -> usize {
    tri.iter().position(|&w| w == v).expect("edge vertex belongs to the face")
}

/// Lens coordinates `(x_p, t)` of barycentric `y` against facet slots `p, q`.
fn lens(y: [f64; 3], p: usize, q: usize) -> (f64, f64) {
    let o = 3 - p - q;
    let denom = 1.0 - y[o];
    let x0 = if denom > 0.0 { y[p] / denom } else { 0.0 };
    let eta = x0 * (1.0 - x0);
    (x0, if eta > 0.0 { y[o] / eta } else { f64::INFINITY })
}

fn bary_of(p: usize, q: usize, s: f64, z: f64) -> [f64; 3] {
    let mut y = [0.0; 3];
    let rest = 1.0 - z.abs();
    (y[p], y[q], y[3 - p - q]) = (s * rest, (1.0 - s) * rest, z.abs());
    y
}

pub struct CollarSampler<'a> {
    mesh: &'a SurfaceMesh,
    order: &'a ExhaustionOrder,
    samples_per_cell: usize,
    cones: Vec<Cone>,
    samples: Vec<CollarSample>,
    buckets: Vec<Vec<usize>>,
    history: Vec<Step>,
    seen: HashSet<(u64, u64)>,
    next: usize,
    covered: Vec<bool>,
}

impl<'a> CollarSampler<'a> {
    /// Samples the collar `Ψ₀`: each boundary edge is coned onto its face
    /// toward the opposite vertex. Faces with two boundary edges are split at
    /// the midpoint of the interior edge, isolated triangles at the centroid.
    pub fn new(mesh: &'a SurfaceMesh, order: &'a ExhaustionOrder, samples_per_cell: usize) -> Result<Self> {
        if samples_per_cell < 4 {
            return Err(Error::InvalidArgument(format!("samples_per_cell = {samples_per_cell} < 4")));
        }
        let check = verify_order(mesh, order);
        if !check.valid {
            return Err(Error::InvalidArgument(format!("invalid exhaustion order: {}", check.problems.join("; "))));
        }
        let cones = mesh
            .boundary_edges()
            .into_iter()
            .map(|(a, b)| {
                let face = mesh.edge_faces(a, b)[0];
                let tri = mesh.triangles[face];
                let (a, b) = (slot(tri, a), slot(tri, b));
                let interior: Vec<EdgeKey> =
                    mesh.face_edges(face).into_iter().filter(|k| !mesh.is_boundary_edge(k.0, k.1)).collect();
                let mut apex = [0.0; 3];
                match interior.len() {
                    2 => apex[3 - a - b] = 1.0,
                    // Ear: both cones end at the midpoint of the interior edge.
                    1 => {
                        apex[slot(tri, interior[0].0)] = 0.5;
                        apex[slot(tri, interior[0].1)] = 0.5;
                    }
                    _ => apex = [1.0 / 3.0; 3],
                }
                Cone { face, a, b, apex }
            })
            .collect();
        let mut sampler = Self {
            mesh,
            order,
            samples_per_cell,
            cones,
            samples: Vec::new(),
            buckets: vec![Vec::new(); mesh.len()],
            history: Vec::new(),
            seen: HashSet::new(),
            next: order.collar_len,
            covered: vec![false; mesh.len()],
        };
        let n = samples_per_cell as f64;
        for e in 0..sampler.cones.len() {
            for i in 0..samples_per_cell {
                for j in 0..samples_per_cell {
                    let s = sampler.collar_point(e as f64 + (i as f64 + 0.5) / n, (j as f64 + 0.5) / n);
                    sampler.insert(s.expect("parameter inside the collar"));
                }
            }
        }
        for &f in &order.sequence[..order.collar_len] {
            sampler.covered[f] = !sampler.buckets[f].is_empty();
        }
        Ok(sampler)
    }

    /// `Ψ₀(u, t)`, or `None` outside `[0, edges) × [0, 1)`.
    fn collar_point(&self, u: f64, t: f64) -> Option<CollarSample> {
        if !(0.0..1.0).contains(&t) || !(0.0..self.cones.len() as f64).contains(&u) {
            return None;
        }
        let cone = self.cones[u.floor() as usize];
        let s = u - u.floor();
        let mut bary = cone.apex.map(|w| t * w);
        bary[cone.a] += (1.0 - t) * (1.0 - s);
        bary[cone.b] += (1.0 - t) * s;
        Some(CollarSample { u, t, face: cone.face, bary, step: 0 })
    }

    /// Inverse of [`Self::collar_point`] on a collar face.
    fn collar_param(&self, face: usize, y: [f64; 3]) -> Option<(f64, f64)> {
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for (e, cone) in self.cones.iter().enumerate().filter(|(_, c)| c.face == face) {
            // y - e_a = t (apex - e_a) + w (e_b - e_a), w = (1 - t) s.
            let unit = |k: usize, i: usize| f64::from(u8::from(k == i));
            let col_t: [f64; 3] = std::array::from_fn(|k| cone.apex[k] - unit(k, cone.a));
            let col_w: [f64; 3] = std::array::from_fn(|k| unit(k, cone.b) - unit(k, cone.a));
            let rhs: [f64; 3] = std::array::from_fn(|k| y[k] - unit(k, cone.a));
            let (att, atw, aww) = (dot(&col_t, &col_t), dot(&col_t, &col_w), dot(&col_w, &col_w));
            let det = att * aww - atw * atw;
            if det.abs() < 1e-300 {
                continue;
            }
            let (bt, bw) = (dot(&col_t, &rhs), dot(&col_w, &rhs));
            let t = (aww * bt - atw * bw) / det;
            let w = (att * bw - atw * bt) / det;
            let s = if t < 1.0 { w / (1.0 - t) } else { f64::NAN };
            if (0.0..1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&s) {
                return Some((e as f64 + s.clamp(0.0, 1.0 - 1e-15), t));
            }
        }
        None
    }

    fn insert(&mut self, s: CollarSample) -> Option<usize> {
        if !self.seen.insert((s.u.to_bits(), s.t.to_bits())) {
            return None;
        }
        let idx = self.samples.len();
        self.buckets[s.face].push(idx);
        self.samples.push(s);
        Some(idx)
    }

    /// One application of `ζ̃ ∘ ζ⁻¹` on a sample of `st.from`; true if it
    /// crossed into `st.to`.
    fn push_one(mesh: &SurfaceMesh, s: &mut CollarSample, st: Step) -> bool {
        let (tf, tt) = (mesh.triangles[st.from], mesh.triangles[st.to]);
        let (p, q) = (slot(tf, st.edge.0), slot(tf, st.edge.1));
        let (x0, tz) = lens(s.bary, p, q);
        if tz >= 1.0 {
            return false;
        }
        let (sv, z) = zeta_tilde(x0, tz);
        s.step = st.step;
        if z >= 0.0 {
            s.bary = bary_of(p, q, sv, z);
            false
        } else {
            s.bary = bary_of(slot(tt, st.edge.0), slot(tt, st.edge.1), sv, z);
            s.face = st.to;
            true
        }
    }

    /// Collar parameter of a point of `face` in the current image, by running
    /// the history backwards.
    fn preimage(&self, mut face: usize, mut y: [f64; 3]) -> Option<(f64, f64)> {
        for st in self.history.iter().rev() {
            let tf = self.mesh.triangles[st.from];
            let (p, q) = (slot(tf, st.edge.0), slot(tf, st.edge.1));
            let (s, z) = if face == st.to {
                let tt = self.mesh.triangles[st.to];
                let (p2, q2) = (slot(tt, st.edge.0), slot(tt, st.edge.1));
                (y[p2] / (y[p2] + y[q2]), -y[3 - p2 - q2])
            } else if face == st.from && lens(y, p, q).1 < 1.0 {
                (y[p] / (y[p] + y[q]), y[3 - p - q])
            } else {
                continue;
            };
            let (x0, t) = zeta_tilde_inv(s, z)?;
            y = bary_of(p, q, x0, t * x0 * (1.0 - x0));
            face = st.from;
        }
        self.collar_param(face, y)
    }

    /// Traces `(u, t)` through the collar and every recorded step.
    fn trace(&self, u: f64, t: f64) -> Option<CollarSample> {
        let mut s = self.collar_point(u, t)?;
        for &st in &self.history {
            if s.face == st.from {
                Self::push_one(self.mesh, &mut s, st);
            }
        }
        Some(s)
    }

    /// Pushes the samples of `from` lying in the lens `ζ(ν × [0,1))` across
    /// the shared edge `edge` into `to`. Returns the number that crossed.
    pub fn push_through(&mut self, from: usize, to: usize, edge: EdgeKey, step: usize) -> usize {
        let st = Step { from, to, edge, step };
        let mut stay = Vec::new();
        let mut crossed = 0;
        for idx in std::mem::take(&mut self.buckets[from]) {
            if Self::push_one(self.mesh, &mut self.samples[idx], st) {
                self.buckets[to].push(idx);
                crossed += 1;
            } else {
                stay.push(idx);
            }
        }
        self.buckets[from] = stay;
        self.history.push(st);
        crossed
    }

    /// Adds the sample whose image is the centroid of `face`, if its
    /// preimage traces forward into `face`.
    fn seed(&mut self, face: usize) -> bool {
        let Some((u, t)) = self.preimage(face, [1.0 / 3.0; 3]) else { return false };
        match self.trace(u, t) {
            Some(s) if s.face == face => self.insert(s).is_some(),
            _ => false,
        }
    }

    /// Performs the next extension step; `false` once the order is exhausted.
    pub fn advance(&mut self) -> bool {
        let Some(&to) = self.order.sequence.get(self.next) else { return false };
        let edge = self.order.certificates[self.next].expect("tail step has a certificate");
        let from = self.mesh.neighbour(to, edge).expect("certificate edge is interior");
        let step = self.next - self.order.collar_len + 1;
        if self.push_through(from, to, edge, step) == 0 {
            self.seed(to);
        }
        self.covered[to] = !self.buckets[to].is_empty();
        self.next += 1;
        true
    }

    pub fn run(&mut self) {
        while self.advance() {}
    }

    pub fn samples(&self) -> &[CollarSample] {
        &self.samples
    }

    pub fn samples_per_cell(&self) -> usize {
        self.samples_per_cell
    }

    pub fn position(&self, s: &CollarSample) -> [f64; 3] {
        let tri = self.mesh.triangles[s.face];
        let mut x = [0.0; 3];
        for (k, &v) in tri.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(self.mesh.vertices[v]) {
                *xi += s.bary[k] * vi;
            }
        }
        x
    }

    /// Faces already reached by the order that held no sample right after
    /// their step.
    pub fn unsampled(&self) -> Vec<usize> {
        self.order.sequence[..self.next].iter().copied().filter(|&f| !self.covered[f]).collect()
    }

    /// Pairs of samples whose parameters are more than half a cell (and at
    /// least `1e-6`) apart but whose images lie within `tolerance`, found with
    /// a spatial hash.
    pub fn injectivity(&self, tolerance: f64) -> InjectivityReport {
        let cell = tolerance.max(1e-300);
        let delta = MIN_SEPARATION.max(0.5 / self.samples_per_cell as f64);
        let key = |x: [f64; 3]| x.map(|c| (c / cell).floor() as i64);
        let points: Vec<[f64; 3]> = self.samples.iter().map(|s| self.position(s)).collect();
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, &x) in points.iter().enumerate() {
            grid.entry(key(x)).or_default().push(i);
        }
        let mut violations = 0;
        let mut pairs = Vec::new();
        for (i, &x) in points.iter().enumerate() {
            let k = key(x);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                        for &j in bucket.iter().filter(|&&j| j > i) {
                            let (a, b) = (&self.samples[i], &self.samples[j]);
                            let param = (a.u - b.u).abs() + (a.t - b.t).abs();
                            let dist = (0..3).map(|c| (x[c] - points[j][c]).powi(2)).sum::<f64>().sqrt();
                            if param > delta && dist <= tolerance {
                                violations += 1;
                                if pairs.len() < 32 {
                                    pairs.push((i, j));
                                }
                            }
                        }
                    }
                }
            }
        }
        InjectivityReport { tolerance, violations, pairs }
    }

    /// `param_u,param_t,x,y,z,step` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param_u,param_t,x,y,z,step\n");
        for s in &self.samples {
            let x = self.position(s);
            let _ = writeln!(out, "{},{},{},{},{},{}", s.u, s.t, x[0], x[1], x[2], s.step);
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CollarSamples {
    pub samples: Vec<CollarSample>,
    pub unsampled: Vec<usize>,
    pub injectivity: InjectivityReport,
}

/// Runs the full push-through chain and checks coverage and injectivity at
/// tolerance `1e-9`.
pub fn collar_map_samples(mesh: &SurfaceMesh, order: &ExhaustionOrder, samples_per_cell: usize) -> Result<CollarSamples> {
    let mut sampler = CollarSampler::new(mesh, order, samples_per_cell)?;
    sampler.run();
    Ok(CollarSamples {
        unsampled: sampler.unsampled(),
        injectivity: sampler.injectivity(1e-9),
        samples: sampler.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaustion::mesh::{annulus_mesh, disk_mesh};
    use crate::exhaustion::order::exhaustion_order;

    #[test]
    fn reparam_is_monotone_and_matches_identity() {
        assert!(reparam(0.5).abs() < 1e-15);
        assert!((reparam(0.9) - 0.9).abs() < 1e-15);
        let mut prev = reparam(0.44);
        for i in 1..=600 {
            let t = 0.44 + 0.56 * i as f64 / 600.0;
            assert!(reparam(t) > prev);
            prev = reparam(t);
        }
    }

    #[test]
    fn branches_meet_on_the_facet_and_invert() {
        for x0 in [0.1, 0.5, 0.8] {
            let (s, z) = zeta_tilde(x0, 0.5);
            assert!((s - x0).abs() < 1e-15 && z.abs() < 1e-15);
            for t in [0.02, 0.3, 0.47, 0.5, 0.52, 0.7, 0.95] {
                let (s, z) = zeta_tilde(x0, t);
                let (x, tt) = zeta_tilde_inv(s, z).unwrap();
                assert!((x - x0).abs() < 1e-9 && (tt - t).abs() < 1e-9, "{x0} {t}: {x} {tt}");
            }
        }
    }

    #[test]
    fn collar_only_mesh_is_injective() {
        let m = annulus_mesh(2, 16, 0.5);
        let o = exhaustion_order(&m).unwrap();
        let out = collar_map_samples(&m, &o, 8).unwrap();
        assert!(out.unsampled.is_empty());
        assert!(out.injectivity.injective(), "{:?}", out.injectivity);
        assert_eq!(out.samples.len(), 32 * 64);
    }

    #[test]
    fn quad_push_crosses_shared_edge() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let o = exhaustion_order(&m).unwrap();
        let mut s = CollarSampler::new(&m, &o, 16).unwrap();
        s.samples.retain(|x| x.face == 0);
        s.buckets = vec![(0..s.samples.len()).collect(), Vec::new()];
        let crossed = s.push_through(0, 1, (0, 2), 1);
        assert!(crossed > 0);
        for x in s.samples().iter().filter(|x| x.face == 1) {
            let p = s.position(x);
            assert!(p[1] > p[0] - 1e-12, "{p:?} not across the diagonal");
        }
        assert!(s.injectivity(1e-9).injective());
    }

    #[test]
    fn chains_cover_every_face() {
        for m in [disk_mesh(2, 6), disk_mesh(3, 6), disk_mesh(4, 8), annulus_mesh(4, 8, 0.4)] {
            let o = exhaustion_order(&m).unwrap();
            let out = collar_map_samples(&m, &o, 8).unwrap();
            assert!(out.unsampled.is_empty(), "{} faces: {:?}", m.len(), out.unsampled);
            assert!(out.injectivity.injective(), "{:?}", out.injectivity);
        }
    }

    #[test]
    fn degenerate_triangle_is_reported() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let o = exhaustion_order(&m).unwrap();
        let out = collar_map_samples(&m, &o, 8).unwrap();
        assert!(!out.injectivity.injective());
        assert!(!out.injectivity.pairs.is_empty());
    }
}
