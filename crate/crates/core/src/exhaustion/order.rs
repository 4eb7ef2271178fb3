use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use super::mesh::{EdgeKey, SurfaceMesh};
use crate::error::{Error, Result};

/// Triangles in exhaustion order. The first `collar_len` entries are the
/// collar (triangles with a boundary edge, by index); every later entry carries
/// the edge it shares with the union of its predecessors.
#[derive(Clone, Debug, Serialize)]
pub struct ExhaustionOrder {
    pub sequence: Vec<usize>,
    pub collar_len: usize,
    /// `None` on the collar prefix.
    pub certificates: Vec<Option<EdgeKey>>,
}

impl ExhaustionOrder {
    pub fn tail(&self) -> &[usize] {
        &self.sequence[self.collar_len..]
    }
}

fn has_boundary_edge(mesh: &SurfaceMesh, f: usize) -> bool {
    mesh.face_edges(f).iter().any(|e| mesh.is_boundary_edge(e.0, e.1))
}

/// Faces not reachable from face 0 through shared edges.
fn unreachable_faces(mesh: &SurfaceMesh) -> Vec<usize> {
    let mut seen = vec![false; mesh.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(f) = queue.pop_front() {
        for e in mesh.face_edges(f) {
            if let Some(g) = mesh.neighbour(f, e) {
                if !seen[g] {
                    seen[g] = true;
                    queue.push_back(g);
                }
            }
        }
    }
    (0..mesh.len()).filter(|&f| !seen[f]).collect()
}

/// Collar first, then facet-adjacent growth taking the lowest frontier edge.
pub fn exhaustion_order(mesh: &SurfaceMesh) -> Result<ExhaustionOrder> {
    if mesh.is_empty() {
        return Err(Error::InvalidArgument("mesh has no triangles".into()));
    }
    let lost = unreachable_faces(mesh);
    if !lost.is_empty() {
        return Err(Error::UnreachableSimplices(lost));
    }
    let mut placed = vec![false; mesh.len()];
    let mut sequence: Vec<usize> = (0..mesh.len()).filter(|&f| has_boundary_edge(mesh, f)).collect();
    let mut certificates = vec![None; sequence.len()];
    let collar_len = sequence.len();
    let mut frontier = BTreeSet::new();
    let add = |f: usize, placed: &mut Vec<bool>, frontier: &mut BTreeSet<EdgeKey>| {
        placed[f] = true;
        for e in mesh.face_edges(f) {
            match mesh.neighbour(f, e) {
                Some(g) if placed[g] => {
                    frontier.remove(&e);
                }
                Some(_) => {
                    frontier.insert(e);
                }
                None => {}
            }
        }
    };
    for &f in &sequence {
        add(f, &mut placed, &mut frontier);
    }
    while let Some(e) = frontier.pop_first() {
        let Some(&f) = mesh.edge_faces(e.0, e.1).iter().find(|&&g| !placed[g]) else {
            continue;
        };
        sequence.push(f);
        certificates.push(Some(e));
        add(f, &mut placed, &mut frontier);
    }
    let missing: Vec<usize> = (0..mesh.len()).filter(|&f| !placed[f]).collect();
    if !missing.is_empty() {
        return Err(Error::UnreachableSimplices(missing));
    }
    Ok(ExhaustionOrder { sequence, collar_len, certificates })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OrderCheck {
    pub valid: bool,
    pub problems: Vec<String>,
}

/// Re-verifies an order from scratch in O(F log F).
pub fn verify_order(mesh: &SurfaceMesh, order: &ExhaustionOrder) -> OrderCheck {
    let mut problems = Vec::new();
    let mut position = vec![usize::MAX; mesh.len()];
    if order.sequence.len() != mesh.len() || order.certificates.len() != mesh.len() {
        problems.push(format!("order has {} entries for {} faces", order.sequence.len(), mesh.len()));
    }
    for (i, &f) in order.sequence.iter().enumerate() {
        if f >= mesh.len() {
            problems.push(format!("step {i}: face {f} does not exist"));
        } else if position[f] != usize::MAX {
            problems.push(format!("step {i}: face {f} repeated"));
        } else {
            position[f] = i;
        }
    }
    if let Some(f) = position.iter().position(|&p| p == usize::MAX) {
        problems.push(format!("face {f} missing"));
    }
    for (i, &f) in order.sequence.iter().enumerate().filter(|&(_, &f)| f < mesh.len()) {
        let collar = has_boundary_edge(mesh, f);
        if i < order.collar_len {
            if !collar {
                problems.push(format!("step {i}: collar face {f} has no boundary edge"));
            }
            continue;
        }
        if collar {
            problems.push(format!("step {i}: boundary face {f} outside the collar"));
        }
        let Some(Some(e)) = order.certificates.get(i) else {
            problems.push(format!("step {i}: face {f} has no certificate"));
            continue;
        };
        if !mesh.face_edges(f).contains(e) {
            problems.push(format!("step {i}: certificate {e:?} is not an edge of face {f}"));
            continue;
        }
        let earlier = mesh.neighbour(f, *e).is_some_and(|g| position[g] < i);
        if !earlier {
            problems.push(format!("step {i}: certificate {e:?} is not shared with an earlier face"));
        }
    }
    OrderCheck { valid: problems.is_empty(), problems }
}
