//! Down-sampling engines: exact farthest-point sampling and random sampling
//! as baselines, and octree-indexed sampling (OIS) over a built index.
//!
//! OIS replaces the per-iteration sweep over all point records with a
//! Hamming-distance descent through the node table: the selection loop reads
//! exactly the K point records it picks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::morton::{morton_encode_clamped, MortonCode, MAX_DEPTH};
use crate::octree::{LeafExclusion, OctreeIndex};
use crate::stats::AccessCounters;

/// Extra levels of code refinement used for the intra-leaf farthest pick.
const REFINE_LEVELS: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    Fps,
    Rs,
    Ois,
    OisApprox,
}

/// How OIS picks inside the farthest leaf: the point with the largest
/// refined-code Hamming distance, or a random unpicked point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OisMode {
    ExactLeafPick,
    ApproxRandomPick,
}

#[derive(Debug, Clone)]
pub struct SamplingConfig {
    pub k: usize,
    /// `original_index` of the first pick; defaults to point 0 so runs of
    /// different methods share a seed.
    pub seed_point: Option<usize>,
    pub rng_seed: u64,
}

impl SamplingConfig {
    pub fn new(k: usize) -> Self {
        Self { k, seed_point: None, rng_seed: 0 }
    }
}

/// Ordered record of picked positions (indices into the cloud the sampler ran
/// on; for OIS that is the index's reordered array).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPointTable {
    pub picks: Vec<usize>,
    pub k: usize,
    pub method: SamplingMethod,
    pub counters: AccessCounters,
}

fn validate_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParams("sample size must be positive".into()));
    }
    if k > n {
        return Err(Error::SampleLargerThanCloud { k, n });
    }
    Ok(())
}

/// Position of the configured seed point (by `original_index`).
fn resolve_seed(cloud: &PointCloud, cfg: &SamplingConfig) -> Result<usize> {
    let target = cfg.seed_point.unwrap_or(0);
    cloud
        .points()
        .iter()
        .position(|p| p.original_index == target)
        .ok_or_else(|| Error::InvalidParams(format!("seed point {target} not in cloud")))
}

/// Standard farthest-point sampling with cached nearest-picked distances.
/// Every iteration sweeps all N point records, so `point_reads` grows by N
/// per pick.
pub fn fps_exact(cloud: &PointCloud, cfg: &SamplingConfig) -> Result<SampledPointTable> {
    let n = cloud.len();
    validate_k(cfg.k, n)?;
    let started = Instant::now();
    let mut counters = AccessCounters::default();

    let seed_pos = resolve_seed(cloud, cfg)?;
    let mut nearest_d2 = vec![f64::INFINITY; n];
    let mut picked = vec![false; n];
    let mut picks = Vec::with_capacity(cfg.k);

    for iteration in 0..cfg.k {
        let pos = if iteration == 0 {
            seed_pos
        } else {
            // Farthest unpicked point; ties go to the smallest original_index.
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, &d2) in nearest_d2.iter().enumerate() {
                if picked[i] {
                    continue;
                }
                let orig = cloud.point(i).original_index;
                let better = match best {
                    None => true,
                    Some((bd, borig, _)) => d2 > bd || (d2 == bd && orig < borig),
                };
                if better {
                    best = Some((d2, orig, i));
                }
            }
            best.expect("unpicked point exists while picks < k").2
        };
        picked[pos] = true;
        picks.push(pos);

        let newest = cloud.point(pos).clone();
        for (i, slot) in nearest_d2.iter_mut().enumerate() {
            let d2 = cloud.point(i).dist2(&newest);
            if d2 < *slot {
                *slot = d2;
            }
        }
        counters.add_point_reads(n as u64);
    }

    counters.wall_time = started.elapsed();
    Ok(SampledPointTable { picks, k: cfg.k, method: SamplingMethod::Fps, counters })
}

/// K distinct positions via a seeded partial Fisher-Yates shuffle.
pub fn random_sample(cloud: &PointCloud, cfg: &SamplingConfig) -> Result<SampledPointTable> {
    let n = cloud.len();
    validate_k(cfg.k, n)?;
    let started = Instant::now();
    let mut counters = AccessCounters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut positions: Vec<usize> = (0..n).collect();
    for i in 0..cfg.k {
        let j = rng.random_range(i..n);
        positions.swap(i, j);
    }
    positions.truncate(cfg.k);
    counters.add_point_reads(cfg.k as u64);
    counters.wall_time = started.elapsed();
    Ok(SampledPointTable { picks: positions, k: cfg.k, method: SamplingMethod::Rs, counters })
}

/// Octree-indexed sampling. Each iteration encodes the centroid of the picks
/// as a virtual seed voxel, descends to the farthest non-exhausted leaf, and
/// picks inside it. Selection-loop point reads equal exactly K; descent work
/// is bounded by `depth` table lookups per pick.
pub fn ois_sample(
    index: &OctreeIndex,
    cfg: &SamplingConfig,
    mode: OisMode,
) -> Result<SampledPointTable> {
    let n = index.len();
    validate_k(cfg.k, n)?;
    let started = Instant::now();
    let cloud = index.reordered();
    let mut counters = AccessCounters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let refine_depth = (index.depth() + REFINE_LEVELS).min(MAX_DEPTH);
    let refine_shift = 3 * (MAX_DEPTH - refine_depth) as u32;

    let mut picked = vec![false; n];
    let mut leaf_left: Vec<u32> =
        index.nodes().iter().map(|node| node.point_count() as u32).collect();
    let mut exclusion = LeafExclusion::new(index);
    let mut picks = Vec::with_capacity(cfg.k);
    let mut coord_sums = [0.0f64; 3];

    let take = |pos: usize,
                    leaf: u32,
                    picked: &mut Vec<bool>,
                    picks: &mut Vec<usize>,
                    sums: &mut [f64; 3],
                    exclusion: &mut LeafExclusion,
                    leaf_left: &mut Vec<u32>,
                    counters: &mut AccessCounters| {
        picked[pos] = true;
        picks.push(pos);
        let p = cloud.point(pos);
        counters.add_point_reads(1);
        sums[0] += p.x;
        sums[1] += p.y;
        sums[2] += p.z;
        leaf_left[leaf as usize] -= 1;
        if leaf_left[leaf as usize] == 0 {
            exclusion.exclude(index, leaf);
        }
    };

    let seed_pos = resolve_seed(cloud, cfg)?;
    let seed_leaf = index.locate_position(seed_pos, &mut counters);
    take(
        seed_pos, seed_leaf, &mut picked, &mut picks, &mut coord_sums, &mut exclusion,
        &mut leaf_left, &mut counters,
    );

    while picks.len() < cfg.k {
        let inv = 1.0 / picks.len() as f64;
        let centroid = [coord_sums[0] * inv, coord_sums[1] * inv, coord_sums[2] * inv];
        let seed_code = morton_encode_clamped(centroid, index.bounds(), index.depth())?;
        let leaf = index.farthest_leaf(seed_code, &exclusion, &mut counters)?;
        let range = index.node(leaf).leaf_range().expect("descent ends on a leaf");

        let pos = match mode {
            OisMode::ExactLeafPick => {
                // Farthest unpicked point by refined-code Hamming distance;
                // ties go to the lowest original_index. Codes are table
                // payload, so this touches no point records.
                let seed_refined =
                    morton_encode_clamped(centroid, index.bounds(), refine_depth)?.bits();
                let mut best: Option<(u32, usize, usize)> = None;
                for pos in range {
                    if picked[pos] {
                        continue;
                    }
                    let bits = index.point_code_bits(pos) >> refine_shift;
                    let h = (bits ^ seed_refined).count_ones();
                    let orig = index.perm()[pos];
                    let better = match best {
                        None => true,
                        Some((bh, borig, _)) => h > bh || (h == bh && orig < borig),
                    };
                    if better {
                        best = Some((h, orig, pos));
                    }
                }
                best.expect("non-exhausted leaf has an unpicked point").2
            }
            OisMode::ApproxRandomPick => {
                let free: Vec<usize> = range.filter(|&pos| !picked[pos]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        take(
            pos, leaf, &mut picked, &mut picks, &mut coord_sums, &mut exclusion, &mut leaf_left,
            &mut counters,
        );
    }

    counters.wall_time = started.elapsed();
    let method =
        if mode == OisMode::ExactLeafPick { SamplingMethod::Ois } else { SamplingMethod::OisApprox };
    Ok(SampledPointTable { picks, k: cfg.k, method, counters })
}

/// Virtual summary voxel of a pick set: the centroid of the picked
/// coordinates, clamped into the root cube and encoded at index depth.
pub fn virtual_seed(index: &OctreeIndex, picks: &[usize]) -> Result<MortonCode> {
    if picks.is_empty() {
        return Err(Error::InvalidParams("virtual seed needs at least one pick".into()));
    }
    let mut sums = [0.0f64; 3];
    for &pos in picks {
        let c = index.reordered().point(pos).coords();
        for a in 0..3 {
            sums[a] += c[a];
        }
    }
    let inv = 1.0 / picks.len() as f64;
    morton_encode_clamped(
        [sums[0] * inv, sums[1] * inv, sums[2] * inv],
        index.bounds(),
        index.depth(),
    )
}

/// Largest distance from any cloud point to its nearest pick: the quality
/// functional farthest-point sampling minimizes.
pub fn coverage_radius(cloud: &PointCloud, picks: &[usize]) -> Result<f64> {
    if picks.is_empty() {
        return Err(Error::InvalidParams("coverage radius needs at least one pick".into()));
    }
    if picks.iter().any(|&p| p >= cloud.len()) {
        return Err(Error::InvalidParams("pick position outside cloud".into()));
    }
    let mut worst = 0.0f64;
    for p in cloud.points() {
        let mut nearest = f64::INFINITY;
        for &pick in picks {
            nearest = nearest.min(p.dist2(cloud.point(pick)));
        }
        worst = worst.max(nearest);
    }
    Ok(worst.sqrt())
}
