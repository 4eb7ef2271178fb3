//! Boundary-collar exhaustion of a triangulated surface.

mod collar;
mod mesh;
mod order;
mod smooth;

pub use collar::{collar_map_samples, CollarSample, CollarSampler, CollarSamples, InjectivityReport};
pub use mesh::{annulus_mesh, disk_mesh, edge_key, load_mesh, parse_off, EdgeKey, SurfaceMesh};
pub use order::{exhaustion_order, verify_order, ExhaustionOrder, OrderCheck};
pub use smooth::{smooth_min, smooth_min_pair, smooth_min_pair_dx};
