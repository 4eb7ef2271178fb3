use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Undirected edge key, smaller index first.
pub type EdgeKey = (usize, usize);

pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Oriented, edge-manifold triangle mesh with at least one boundary loop.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Ordered vertex cycles, each following the triangle orientation.
    pub boundary_loops: Vec<Vec<usize>>,
    edges: BTreeMap<EdgeKey, Vec<usize>>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut edges: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut flipped = None;
        for (f, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("triangle {f} references vertex {v} of {}", vertices.len())));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidArgument(format!("triangle {f} repeats a vertex: {tri:?}")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry(edge_key(a, b)).or_default().push(f);
                if directed.insert((a, b), f).is_some() {
                    flipped.get_or_insert(edge_key(a, b));
                }
            }
        }
        if let Some((&(a, b), faces)) = edges.iter().find(|(_, f)| f.len() > 2) {
            return Err(Error::NotEdgeManifold(a, b, faces.len()));
        }
        if let Some((a, b)) = flipped {
            return Err(Error::Orientation(a, b));
        }
        // Boundary edges in triangle orientation.
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (&(a, b), faces) in &edges {
            if faces.len() == 1 {
                let (from, to) = if directed.contains_key(&(a, b)) { (a, b) } else { (b, a) };
                if next.insert(from, to).is_some() {
                    return Err(Error::InvalidArgument(format!("boundary is pinched at vertex {from}")));
                }
            }
        }
        if next.is_empty() {
            return Err(Error::ClosedSurface);
        }
        let mut boundary_loops = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for &start in next.keys() {
            if seen.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            seen.insert(start);
            let mut v = next[&start];
            while v != start {
                if !seen.insert(v) {
                    return Err(Error::InvalidArgument(format!("boundary is pinched at vertex {v}")));
                }
                cycle.push(v);
                v = *next.get(&v).ok_or_else(|| Error::InvalidArgument(format!("open boundary chain at {v}")))?;
            }
            boundary_loops.push(cycle);
        }
        Ok(Self { vertices, triangles, boundary_loops, edges })
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Faces incident to an edge (one or two).
    pub fn edge_faces(&self, a: usize, b: usize) -> &[usize] {
        self.edges.get(&edge_key(a, b)).map_or(&[], Vec::as_slice)
    }

    pub fn is_boundary_edge(&self, a: usize, b: usize) -> bool {
        self.edge_faces(a, b).len() == 1
    }

    pub fn face_edges(&self, f: usize) -> [EdgeKey; 3] {
        let t = self.triangles[f];
        [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])]
    }

    /// Face across edge `e` from `f`, if any.
    pub fn neighbour(&self, f: usize, e: EdgeKey) -> Option<usize> {
        self.edge_faces(e.0, e.1).iter().copied().find(|&g| g != f)
    }

    /// Boundary edges in loop order, oriented along the loops.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        self.boundary_loops
            .iter()
            .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
            .collect()
    }

    pub fn area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangles[f].map(|v| self.vertices[v]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

pub fn parse_off(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::MeshParse { line, msg: msg.to_string() };
    let (line, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
    if header != "OFF" {
        return Err(err(line, "missing OFF header"));
    }
    let (line, counts) = lines.next().ok_or_else(|| err(line, "missing counts"))?;
    let counts: Vec<usize> =
        counts.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| err(line, "bad counts"))?;
    if counts.len() < 2 {
        return Err(err(line, "expected vertex and face counts"));
    }
    let mut vertices = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let (line, l) = lines.next().ok_or_else(|| err(line, "truncated vertex list"))?;
        let xs: Vec<f64> =
            l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| err(line, "bad vertex"))?;
        if xs.len() != 3 || xs.iter().any(|x| !x.is_finite()) {
            return Err(err(line, "vertex needs 3 finite coordinates"));
        }
        vertices.push([xs[0], xs[1], xs[2]]);
    }
    let mut triangles = Vec::with_capacity(counts[1]);
    for _ in 0..counts[1] {
        let (line, l) = lines.next().ok_or_else(|| err(line, "truncated face list"))?;
        let ix: Vec<usize> =
            l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| err(line, "bad face"))?;
        if ix.first() != Some(&3) || ix.len() != 4 {
            return Err(err(line, "only triangular faces are supported"));
        }
        triangles.push([ix[1], ix[2], ix[3]]);
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text)
}

/// Polar disk: a center fan plus `rings - 1` quad rings, `sectors` per ring.
/// `sectors + 2·sectors·(rings-1)` triangles.
pub fn disk_mesh(rings: usize, sectors: usize) -> SurfaceMesh {
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    for i in 1..=rings {
        let r = i as f64 / rings as f64;
        for s in 0..sectors {
            let a = std::f64::consts::TAU * s as f64 / sectors as f64;
            vertices.push([r * a.cos(), r * a.sin(), 0.0]);
        }
    }
    let idx = |ring: usize, s: usize| 1 + (ring - 1) * sectors + s % sectors;
    let mut triangles = Vec::new();
    for s in 0..sectors {
        triangles.push([0, idx(1, s), idx(1, s + 1)]);
    }
    for ring in 1..rings {
        for s in 0..sectors {
            let (a, b, c, d) = (idx(ring, s), idx(ring, s + 1), idx(ring + 1, s), idx(ring + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    SurfaceMesh::new(vertices, triangles).expect("disk mesh is valid")
}

/// Polar annulus between radii `inner` and 1: `2·sectors·(rings-1)` triangles.
pub fn annulus_mesh(rings: usize, sectors: usize, inner: f64) -> SurfaceMesh {
    let mut vertices = Vec::new();
    for i in 0..rings {
        let r = inner + (1.0 - inner) * i as f64 / (rings - 1) as f64;
        for s in 0..sectors {
            let a = std::f64::consts::TAU * s as f64 / sectors as f64;
            vertices.push([r * a.cos(), r * a.sin(), 0.0]);
        }
    }
    let idx = |ring: usize, s: usize| ring * sectors + s % sectors;
    let mut triangles = Vec::new();
    for ring in 0..rings - 1 {
        for s in 0..sectors {
            let (a, b, c, d) = (idx(ring, s), idx(ring, s + 1), idx(ring + 1, s), idx(ring + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    SurfaceMesh::new(vertices, triangles).expect("annulus mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_has_two_loops_and_round_trips() {
        let m = annulus_mesh(4, 12, 0.4);
        assert_eq!(m.len(), 2 * 12 * 3);
        assert_eq!(m.boundary_loops.len(), 2);
        assert!(m.boundary_loops.iter().all(|l| l.len() == 12));
        let back = parse_off(&m.to_off()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_loops, m.boundary_loops);
    }

    #[test]
    fn disk_has_one_loop() {
        let m = disk_mesh(3, 8);
        assert_eq!(m.len(), 8 + 2 * 8 * 2);
        assert_eq!(m.boundary_loops.len(), 1);
        assert_eq!(m.boundary_edges().len(), 8);
    }

    #[test]
    fn tetrahedron_is_closed() {
        let off = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n3 0 3 2\n";
        assert!(matches!(parse_off(off), Err(Error::ClosedSurface)));
    }

    #[test]
    fn quad_face_is_a_parse_error() {
        let off = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(parse_off(off), Err(Error::MeshParse { line: 7, .. })));
    }

    #[test]
    fn non_manifold_and_flipped_edges() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let t = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(matches!(SurfaceMesh::new(v.clone(), t), Err(Error::NotEdgeManifold(0, 1, 3))));
        let t = vec![[0, 1, 2], [0, 1, 3]];
        assert!(matches!(SurfaceMesh::new(v, t), Err(Error::Orientation(0, 1))));
    }
}
