//! Neighbor gathering: brute-force KNN / ball-query oracles and
//! voxel-expanded gathering (VEG) over the octree index.
//!
//! VEG expands Chebyshev rings of leaf voxels around the central point's
//! voxel. Three modes:
//!
//! - `Paper`: rings grow until the cumulative point count reaches K; every
//!   inner-ring point is taken without a distance evaluation and only the
//!   final ring is sorted. Fast, but a final-ring point can beat an
//!   inner-ring corner point, so exactness is measured (see [`recall`]), not
//!   guaranteed.
//! - `Strict`: also requires the K-th best distance to fall within the
//!   explored clearance (`n * leaf_edge`) and ranks every gathered
//!   candidate; output equals the brute-force result exactly.
//! - `SemiApprox`: as `Paper`, but the final-ring remainder is picked
//!   randomly with no sorting at all.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::octree::OctreeIndex;
use crate::stats::{AccessCounters, TimeMerge};

/// Guard factor on the strict-mode clearance test; absorbs quantization
/// rounding so a stop decision is never optimistic.
const CLEARANCE_SLACK: f64 = 1e-8;

/// Per-central workload accounting for one gathering run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkloadStats {
    /// Distances evaluated to select neighbors. Distances derived afterwards
    /// for the output records are not algorithm work and are not counted.
    pub distance_evals: u64,
    /// Points entering the final ranking stage.
    pub sort_candidates: u64,
    /// Last ring radius expanded.
    pub rings_expanded: u32,
}

/// Gathered neighbors of one central point, as reordered-array positions.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub central: usize,
    pub neighbors: Vec<usize>,
    pub distances: Vec<f64>,
    pub workload: WorkloadStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatherMode {
    Paper,
    Strict,
    SemiApprox,
}

fn check_centrals(cloud: &PointCloud, centrals: &[usize]) -> Result<()> {
    if let Some(&bad) = centrals.iter().find(|&&c| c >= cloud.len()) {
        return Err(Error::InvalidParams(format!("central position {bad} outside cloud")));
    }
    Ok(())
}

fn by_distance_then_position(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact K nearest neighbors by scanning every other point. The shared tie
/// rule is (distance, reordered position), output sorted by it.
pub fn brute_knn(
    cloud: &PointCloud,
    centrals: &[usize],
    k: usize,
    counters: &mut AccessCounters,
) -> Result<Vec<NeighborSet>> {
    if k == 0 {
        return Err(Error::EmptyGatherWidth);
    }
    if k > cloud.len().saturating_sub(1) {
        return Err(Error::NotEnoughPoints { needed: k, available: cloud.len() - 1 });
    }
    check_centrals(cloud, centrals)?;
    let started = Instant::now();
    let sets = centrals.iter().map(|&central| brute_knn_one(cloud, central, k, counters)).collect();
    counters.wall_time += started.elapsed();
    Ok(sets)
}

fn brute_knn_one(
    cloud: &PointCloud,
    central: usize,
    k: usize,
    counters: &mut AccessCounters,
) -> NeighborSet {
    let n = cloud.len();
    let c = cloud.point(central).clone();
    counters.add_point_reads(1);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for pos in 0..n {
        if pos == central {
            continue;
        }
        candidates.push((cloud.point(pos).dist2(&c), pos));
    }
    counters.add_point_reads((n - 1) as u64);
    counters.add_distance_evals((n - 1) as u64);
    counters.add_sort_candidates((n - 1) as u64);
    candidates.sort_unstable_by(by_distance_then_position);
    candidates.truncate(k);
    NeighborSet {
        central,
        neighbors: candidates.iter().map(|&(_, pos)| pos).collect(),
        distances: candidates.iter().map(|&(d2, _)| d2.sqrt()).collect(),
        workload: WorkloadStats {
            distance_evals: (n - 1) as u64,
            sort_candidates: (n - 1) as u64,
            rings_expanded: 0,
        },
    }
}

/// All points within `radius`, truncated to the `max_k` nearest.
pub fn brute_ball(
    cloud: &PointCloud,
    centrals: &[usize],
    radius: f64,
    max_k: usize,
    counters: &mut AccessCounters,
) -> Result<Vec<NeighborSet>> {
    if max_k == 0 {
        return Err(Error::EmptyGatherWidth);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParams("ball radius must be positive".into()));
    }
    check_centrals(cloud, centrals)?;
    let started = Instant::now();
    let r2 = radius * radius;
    let n = cloud.len();
    let mut sets = Vec::with_capacity(centrals.len());
    for &central in centrals {
        let c = cloud.point(central).clone();
        counters.add_point_reads(n as u64);
        counters.add_distance_evals((n - 1) as u64);
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&pos| pos != central)
            .map(|pos| (cloud.point(pos).dist2(&c), pos))
            .filter(|&(d2, _)| d2 <= r2)
            .collect();
        counters.add_sort_candidates(candidates.len() as u64);
        let in_radius = candidates.len() as u64;
        candidates.sort_unstable_by(by_distance_then_position);
        candidates.truncate(max_k);
        sets.push(NeighborSet {
            central,
            neighbors: candidates.iter().map(|&(_, pos)| pos).collect(),
            distances: candidates.iter().map(|&(d2, _)| d2.sqrt()).collect(),
            workload: WorkloadStats {
                distance_evals: (n - 1) as u64,
                sort_candidates: in_radius,
                rings_expanded: 0,
            },
        });
    }
    counters.wall_time += started.elapsed();
    Ok(sets)
}

/// Ring walker around one central position on the leaf-depth grid.
struct RingWalk<'a> {
    index: &'a OctreeIndex,
    central: usize,
    lo: [u32; 3],
    hi: [u32; 3],
    max_ring: u32,
    center_leaf: u32,
}

impl<'a> RingWalk<'a> {
    fn new(index: &'a OctreeIndex, central: usize, counters: &mut AccessCounters) -> Self {
        let center_leaf = index.locate_position(central, counters);
        let (lo, hi) = index.node_cell_range(center_leaf);
        let max_ring = index.max_ring(lo, hi);
        Self { index, central, lo, hi, max_ring, center_leaf }
    }

    /// Positions in ring `n`, central excluded; SFC order.
    fn positions(&self, n: u32, counters: &mut AccessCounters) -> Vec<usize> {
        let leaves = if n == 0 {
            vec![self.center_leaf]
        } else {
            self.index.ring_leaves(self.lo, self.hi, n, counters)
        };
        let mut positions = Vec::new();
        for leaf in leaves {
            let range = self.index.node(leaf).leaf_range().expect("rings hold leaves");
            positions.extend(range.filter(|&pos| pos != self.central));
        }
        positions
    }
}

fn dist2_to(cloud: &PointCloud, central: usize, pos: usize) -> f64 {
    cloud.point(pos).dist2(cloud.point(central))
}

/// Voxel-expanded K-nearest-neighbor gathering. `rng_seed` feeds the
/// semi-approximate mode only; each central derives its own stream so
/// results do not depend on the order of `centrals`.
pub fn veg_knn(
    index: &OctreeIndex,
    centrals: &[usize],
    k: usize,
    mode: GatherMode,
    rng_seed: u64,
    counters: &mut AccessCounters,
) -> Result<Vec<NeighborSet>> {
    let n = index.len();
    if k == 0 {
        return Err(Error::EmptyGatherWidth);
    }
    if k > n.saturating_sub(1) {
        return Err(Error::NotEnoughPoints { needed: k, available: n - 1 });
    }
    check_centrals(index.reordered(), centrals)?;
    let started = Instant::now();
    let mut sets = Vec::with_capacity(centrals.len());
    for &central in centrals {
        let (set, local) = veg_knn_one(index, central, k, mode, rng_seed);
        *counters = counters.merge(&local, TimeMerge::Sequential);
        sets.push(set);
    }
    counters.wall_time += started.elapsed();
    Ok(sets)
}

/// Gathers one central point; returns the neighbor set and the counters this
/// call produced, so callers may fan centrals out across workers and merge.
pub fn veg_knn_one(
    index: &OctreeIndex,
    central: usize,
    k: usize,
    mode: GatherMode,
    rng_seed: u64,
) -> (NeighborSet, AccessCounters) {
    let mut counters = AccessCounters::default();
    let cloud = index.reordered();
    counters.add_point_reads(1); // the central record
    let walk = RingWalk::new(index, central, &mut counters);
    let leaf_edge = index.leaf_edge();

    let mut workload = WorkloadStats::default();
    let neighbors: Vec<usize> = match mode {
        GatherMode::Strict => {
            let mut candidates: Vec<(f64, usize)> = Vec::new();
            let mut n = 0u32;
            loop {
                let ring = walk.positions(n, &mut counters);
                counters.add_point_reads(ring.len() as u64);
                counters.add_distance_evals(ring.len() as u64);
                candidates.extend(ring.into_iter().map(|pos| (dist2_to(cloud, central, pos), pos)));
                if candidates.len() >= k {
                    let (_, kth, _) =
                        candidates.select_nth_unstable_by(k - 1, by_distance_then_position);
                    // Everything beyond ring n is farther than n * leaf_edge
                    // from the central point; the slack absorbs cell
                    // quantization rounding.
                    let clearance = n as f64 * leaf_edge * (1.0 - CLEARANCE_SLACK);
                    if kth.0 <= clearance * clearance {
                        break;
                    }
                }
                if n >= walk.max_ring {
                    break;
                }
                n += 1;
            }
            workload.distance_evals = candidates.len() as u64;
            workload.sort_candidates = candidates.len() as u64;
            workload.rings_expanded = n;
            counters.add_sort_candidates(candidates.len() as u64);
            candidates.sort_unstable_by(by_distance_then_position);
            candidates.truncate(k);
            candidates.into_iter().map(|(_, pos)| pos).collect()
        }
        GatherMode::Paper | GatherMode::SemiApprox => {
            // Expand until the cumulative count reaches K; inner rings are
            // taken wholesale, only the final ring is ranked (or, in the
            // semi-approximate mode, picked at random).
            let mut auto: Vec<usize> = Vec::new();
            let mut n = 0u32;
            let final_ring = loop {
                let ring = walk.positions(n, &mut counters);
                if auto.len() + ring.len() >= k || n >= walk.max_ring {
                    break ring;
                }
                auto.extend(ring);
                n += 1;
            };
            counters.add_point_reads(auto.len() as u64);
            workload.rings_expanded = n;
            let remainder = k - auto.len();

            let tail: Vec<usize> = if mode == GatherMode::Paper {
                counters.add_point_reads(final_ring.len() as u64);
                counters.add_distance_evals(final_ring.len() as u64);
                counters.add_sort_candidates(final_ring.len() as u64);
                workload.distance_evals = final_ring.len() as u64;
                workload.sort_candidates = final_ring.len() as u64;
                let mut ranked: Vec<(f64, usize)> = final_ring
                    .into_iter()
                    .map(|pos| (dist2_to(cloud, central, pos), pos))
                    .collect();
                ranked.sort_unstable_by(by_distance_then_position);
                ranked.truncate(remainder);
                ranked.into_iter().map(|(_, pos)| pos).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                rng.set_stream(central as u64);
                let mut pool = final_ring;
                for i in 0..remainder {
                    let j = rng.random_range(i..pool.len());
                    pool.swap(i, j);
                }
                pool.truncate(remainder);
                counters.add_point_reads(remainder as u64);
                pool
            };

            auto.extend(tail);
            auto
        }
    };

    // Output distances come from records gathered above; deriving them here
    // is reporting, not selection work.
    let distances =
        neighbors.iter().map(|&pos| dist2_to(cloud, central, pos).sqrt()).collect();
    (NeighborSet { central, neighbors, distances, workload }, counters)
}

/// Voxel-expanded ball query: rings expand far enough that the clearance
/// covers the ball, so the result is exact with respect to [`brute_ball`].
pub fn veg_ball(
    index: &OctreeIndex,
    centrals: &[usize],
    radius: f64,
    max_k: usize,
    counters: &mut AccessCounters,
) -> Result<Vec<NeighborSet>> {
    if max_k == 0 {
        return Err(Error::EmptyGatherWidth);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParams("ball radius must be positive".into()));
    }
    check_centrals(index.reordered(), centrals)?;
    let started = Instant::now();
    let mut sets = Vec::with_capacity(centrals.len());
    for &central in centrals {
        let (set, local) = veg_ball_one(index, central, radius, max_k);
        *counters = counters.merge(&local, TimeMerge::Sequential);
        sets.push(set);
    }
    counters.wall_time += started.elapsed();
    Ok(sets)
}

/// Single-central ball query; see [`veg_knn_one`] for the fan-out contract.
pub fn veg_ball_one(
    index: &OctreeIndex,
    central: usize,
    radius: f64,
    max_k: usize,
) -> (NeighborSet, AccessCounters) {
    let mut counters = AccessCounters::default();
    let cloud = index.reordered();
    counters.add_point_reads(1);
    let walk = RingWalk::new(index, central, &mut counters);
    let leaf_edge = index.leaf_edge();
    let rings = ((radius / leaf_edge).ceil() + 1.0).min(walk.max_ring as f64) as u32;

    let r2 = radius * radius;
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let mut gathered = 0u64;
    for n in 0..=rings {
        let ring = walk.positions(n, &mut counters);
        gathered += ring.len() as u64;
        counters.add_point_reads(ring.len() as u64);
        counters.add_distance_evals(ring.len() as u64);
        candidates.extend(
            ring.into_iter()
                .map(|pos| (dist2_to(cloud, central, pos), pos))
                .filter(|&(d2, _)| d2 <= r2),
        );
    }
    counters.add_sort_candidates(candidates.len() as u64);
    let workload = WorkloadStats {
        distance_evals: gathered,
        sort_candidates: candidates.len() as u64,
        rings_expanded: rings,
    };
    candidates.sort_unstable_by(by_distance_then_position);
    candidates.truncate(max_k);
    (
        NeighborSet {
            central,
            neighbors: candidates.iter().map(|&(_, pos)| pos).collect(),
            distances: candidates.iter().map(|&(d2, _)| d2.sqrt()).collect(),
            workload,
        },
        counters,
    )
}

/// Dense input block for downstream feature computation:
/// `num_centrals x k x channels`, row-major by central, then neighbor slot,
/// then channel. Channels are the neighbor's offset from its central point
/// followed by the neighbor's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub num_centrals: usize,
    pub k: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn value(&self, central: usize, slot: usize, channel: usize) -> f64 {
        self.data[(central * self.k + slot) * self.channels + channel]
    }
}

/// Assembles gathered neighbor sets into a fixed-shape block. Sets shorter
/// than `k` (ball-query underfill) repeat their nearest member; empty sets
/// repeat the central point itself.
pub fn assemble_feature_map(
    index: &OctreeIndex,
    sets: &[NeighborSet],
    k: usize,
) -> Result<FeatureMap> {
    if k == 0 {
        return Err(Error::EmptyGatherWidth);
    }
    let cloud = index.reordered();
    let feature_dim = cloud.feature_dim()?;
    let channels = 3 + feature_dim;
    let mut data = Vec::with_capacity(sets.len() * k * channels);

    for set in sets {
        if set.central >= cloud.len() || set.neighbors.iter().any(|&pos| pos >= cloud.len()) {
            return Err(Error::InvalidParams("neighbor set references invalid position".into()));
        }
        let central = cloud.point(set.central);
        let pad = set
            .distances
            .iter()
            .zip(&set.neighbors)
            .min_by(|a, b| a.0.total_cmp(b.0).then(a.1.cmp(b.1)))
            .map(|(_, &pos)| pos)
            .unwrap_or(set.central);
        for slot in 0..k {
            let pos = set.neighbors.get(slot).copied().unwrap_or(pad);
            let p = cloud.point(pos);
            data.push(p.x - central.x);
            data.push(p.y - central.y);
            data.push(p.z - central.z);
            data.extend_from_slice(&p.feature);
        }
    }
    Ok(FeatureMap { num_centrals: sets.len(), k, channels, data })
}

/// Writes the block as packed little-endian f32 values next to a JSON
/// sidecar (`<path>.json`) holding `num_centrals`, `k`, and `channels`.
pub fn write_feature_map(path: impl AsRef<Path>, map: &FeatureMap) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    for &v in &map.data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    std::fs::write(
        sidecar,
        format!(
            "{{\n  \"num_centrals\": {},\n  \"k\": {},\n  \"channels\": {}\n}}\n",
            map.num_centrals, map.k, map.channels
        ),
    )?;
    Ok(())
}

/// Mean per-central overlap fraction between a gathering result and an
/// oracle result over the same centrals.
pub fn recall(result: &[NeighborSet], oracle: &[NeighborSet]) -> Result<f64> {
    if result.len() != oracle.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} result sets vs {} oracle sets",
            result.len(),
            oracle.len()
        )));
    }
    if result.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for (r, o) in result.iter().zip(oracle) {
        if r.central != o.central {
            return Err(Error::ShapeMismatch("result and oracle centrals differ".into()));
        }
        if o.neighbors.is_empty() {
            return Err(Error::ShapeMismatch("oracle set is empty".into()));
        }
        let mut r_sorted = r.neighbors.clone();
        let mut o_sorted = o.neighbors.clone();
        r_sorted.sort_unstable();
        o_sorted.sort_unstable();
        let mut hits = 0usize;
        let (mut i, mut j) = (0, 0);
        while i < r_sorted.len() && j < o_sorted.len() {
            match r_sorted[i].cmp(&o_sorted[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    hits += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        total += hits as f64 / o_sorted.len() as f64;
    }
    Ok(total / result.len() as f64)
}
