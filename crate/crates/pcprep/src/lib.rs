//! Point-cloud preprocessing built on an octree spatial index.
//!
//! The crate covers the front half of a point-cloud inference pipeline at
//! library level:
//!
//! - [`geom`] / [`morton`]: points, cubic bounds, and depth-tagged SFC codes.
//! - [`octree`]: one-pass index build producing the Octree-Table and an
//!   SFC-reordered copy of the cloud, plus locate / farthest-descent /
//!   voxel-ring queries.
//! - [`sampling`]: exact farthest-point and random down-sampling baselines,
//!   and octree-indexed sampling that touches only the points it picks.
//! - [`gather`]: brute-force KNN / ball-query oracles and voxel-expanded
//!   gathering with paper-literal, strict-exact, and semi-approximate modes,
//!   plus dense feature-map assembly.
//! - [`stats`]: access counters that make the memory-traffic and workload
//!   claims measurable and comparable.
//! - [`io`]: XYZ/binary ingest, export, and synthetic cloud generation.
//! - [`container`]: versioned binary serialization of the index.

pub mod container;
pub mod error;
pub mod gather;
pub mod geom;
pub mod io;
pub mod morton;
pub mod octree;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use geom::{normalize_bounds, Aabb, Point3, PointCloud};
pub use morton::{hamming_distance, morton_decode, morton_encode, MortonCode, MAX_DEPTH};
pub use octree::{build_index, BuildConfig, LeafExclusion, LeafLookup, NodeId, NodeRecord, OctreeIndex};
pub use stats::{savings_ratio, AccessCounters, TimeMerge};
