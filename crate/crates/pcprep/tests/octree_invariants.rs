//! Structural invariants of the octree index, checked against brute-force
//! oracles on randomized and degenerate clouds.

mod common;

use common::{cluster_cloud, uniform_cloud};
use pcprep::geom::{Point3, PointCloud};
use pcprep::morton::{morton_decode, morton_encode, MortonCode};
use pcprep::octree::{build_index, BuildConfig, LeafExclusion, NodeId, OctreeIndex, NO_NODE};
use pcprep::stats::AccessCounters;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn counters() -> AccessCounters {
    AccessCounters::default()
}

/// Full structural check: permutation, partition, SFC monotonicity,
/// parent-prefix consistency, and intra-leaf ordering.
fn check_structure(cloud: &PointCloud, index: &OctreeIndex) {
    let n = cloud.len();

    // Permutation: the reordered copy is the same multiset of records.
    let key = |p: &Point3| {
        (
            p.x.to_bits(),
            p.y.to_bits(),
            p.z.to_bits(),
            p.feature.iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
            p.original_index,
        )
    };
    let mut input: Vec<_> = cloud.points().iter().map(key).collect();
    let mut output: Vec<_> = index.reordered().points().iter().map(key).collect();
    input.sort();
    output.sort();
    assert_eq!(input, output, "reordered cloud must be a permutation of the input");

    // Partition: leaf ranges tile [0, N) in SFC order with no gaps.
    let mut cursor = 0usize;
    for &leaf in index.leaves() {
        let range = index.node(leaf).leaf_range().expect("leaf has a range");
        assert_eq!(range.start, cursor, "leaf ranges must be contiguous");
        assert!(range.end > range.start, "leaves are never empty");
        cursor = range.end;
    }
    assert_eq!(cursor, n, "leaf ranges must cover the whole array");

    // SFC monotonicity at index depth, and intra-leaf refined ordering.
    for pos in 1..n {
        let prev = index.point_code(pos - 1, index.depth());
        let here = index.point_code(pos, index.depth());
        assert!(prev.bits() <= here.bits(), "depth-level codes must be non-decreasing");
        let prev_key = (index.point_code_bits(pos - 1), index.perm()[pos - 1]);
        let here_key = (index.point_code_bits(pos), index.perm()[pos]);
        assert!(prev_key < here_key, "refined code with original-index tiebreak must increase");
    }

    // Node table consistency.
    for (id, node) in index.nodes().iter().enumerate() {
        assert!(node.point_count() > 0, "empty voxels must produce no nodes");
        if let Some(code) = node.code() {
            let parent = index.node(node.parent);
            assert_eq!(parent.level + 1, node.level);
            assert_eq!(
                parent.code_bits,
                code.bits() >> 3,
                "parent code is the child's prefix"
            );
        } else {
            assert_eq!(id, 0, "only the root lacks a code");
        }
        for (octant, &child) in node.children.iter().enumerate() {
            let exists = node.child_mask >> octant & 1 == 1;
            assert_eq!(exists, child != NO_NODE, "child mask matches the child slots");
            if exists {
                assert_eq!(index.node(child).parent, id as NodeId);
            }
        }
    }
}

#[test]
fn randomized_builds_hold_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..60 {
        let n = rng.random_range(1..=600);
        let cloud = if trial % 3 == 0 { cluster_cloud(n, trial) } else { uniform_cloud(n, trial) };
        let cfg = BuildConfig {
            max_depth: rng.random_range(2..=10),
            leaf_capacity: rng.random_range(1..=16),
        };
        let index = build_index(&cloud, &cfg).unwrap();
        check_structure(&cloud, &index);
    }
}

#[test]
fn degenerate_clouds_hold_invariants() {
    let single = PointCloud::from_coords([[0.4, 0.2, 0.9]]).unwrap();
    let duplicates =
        PointCloud::new((0..50).map(|i| Point3::new(0.3, 0.3, 0.3, i)).collect()).unwrap();
    let collinear =
        PointCloud::from_coords((0..64).map(|i| [i as f64 / 64.0, 0.0, 0.0]).collect::<Vec<_>>())
            .unwrap();
    for cloud in [&single, &duplicates, &collinear] {
        for cfg in [
            BuildConfig::default(),
            BuildConfig { max_depth: 3, leaf_capacity: 1 },
            BuildConfig { max_depth: 21, leaf_capacity: 2 },
        ] {
            let index = build_index(cloud, &cfg).unwrap();
            check_structure(cloud, &index);
        }
    }
}

#[test]
fn identical_builds_are_bit_identical() {
    for seed in 0..5 {
        let cloud = uniform_cloud(400, seed);
        let cfg = BuildConfig { max_depth: 8, leaf_capacity: 4 };
        let a = build_index(&cloud, &cfg).unwrap();
        let b = build_index(&cloud, &cfg).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.perm(), b.perm());
        assert_eq!(a.depth(), b.depth());
        assert_eq!(a.reordered().points(), b.reordered().points());
        let codes_a: Vec<u64> = (0..a.len()).map(|i| a.point_code_bits(i)).collect();
        let codes_b: Vec<u64> = (0..b.len()).map(|i| b.point_code_bits(i)).collect();
        assert_eq!(codes_a, codes_b);
    }
}

#[test]
fn build_cost_is_one_pass_regardless_of_depth() {
    for depth in [2u8, 6, 12, 21] {
        let cloud = uniform_cloud(1000, 77);
        let index = build_index(&cloud, &BuildConfig { max_depth: depth, leaf_capacity: 4 }).unwrap();
        assert_eq!(index.build_stats().point_reads, 1000);
        assert_eq!(index.build_stats().point_writes, 1000);
    }
}

#[test]
fn locate_matches_leaf_box_scan() {
    let cloud = uniform_cloud(800, 21);
    let index = build_index(&cloud, &BuildConfig { max_depth: 6, leaf_capacity: 4 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut c = counters();

    for _ in 0..1000 {
        let q = Point3::new(rng.random(), rng.random(), rng.random(), 0);
        if !index.bounds().contains(q.coords()) {
            continue;
        }
        let lookup = index.locate_leaf(&q, &mut c).unwrap();
        // Oracle: scan every leaf's voxel box for containment.
        let containing: Vec<NodeId> = index
            .leaves()
            .iter()
            .copied()
            .filter(|&leaf| {
                let voxel = morton_decode(index.node(leaf).code().unwrap(), index.bounds());
                voxel.contains(q.coords())
            })
            .collect();
        if lookup.empty_region {
            assert!(containing.is_empty(), "flagged empty region must have no containing leaf");
        } else {
            assert_eq!(containing, vec![lookup.node]);
        }
    }
}

/// Flat-enumeration oracle for the greedy descent: ranks every usable leaf by
/// the per-level sequence of (prefix Hamming distance, low code wins ties),
/// lexicographically from the root down. Any two leaves diverge at some
/// level, so the comparison always resolves.
fn farthest_oracle(index: &OctreeIndex, seed: MortonCode, excl: &LeafExclusion) -> Option<NodeId> {
    let key = |leaf: NodeId| -> Vec<(u32, u64)> {
        let node = index.node(leaf);
        (1..=node.level)
            .map(|level| {
                let prefix = node.code_bits >> (3 * (node.level - level) as u32);
                let seed_prefix = seed.bits() >> (3 * (seed.depth() - level) as u32);
                ((prefix ^ seed_prefix).count_ones(), prefix)
            })
            .collect()
    };
    let better = |a: &[(u32, u64)], b: &[(u32, u64)]| -> bool {
        // true when a beats b
        for (ka, kb) in a.iter().zip(b.iter()) {
            if ka.0 != kb.0 {
                return ka.0 > kb.0;
            }
            if ka.1 != kb.1 {
                return ka.1 < kb.1;
            }
        }
        false
    };
    let mut best: Option<(Vec<(u32, u64)>, NodeId)> = None;
    for &leaf in index.leaves() {
        if excl.is_excluded(leaf) {
            continue;
        }
        let k = key(leaf);
        match &best {
            None => best = Some((k, leaf)),
            Some((bk, _)) if better(&k, bk) => best = Some((k, leaf)),
            _ => {}
        }
    }
    best.map(|(_, leaf)| leaf)
}

#[test]
fn farthest_leaf_matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..60u64 {
        let n = rng.random_range(4..=300);
        let cloud = if trial % 2 == 0 { uniform_cloud(n, trial) } else { cluster_cloud(n, trial) };
        let cfg = BuildConfig { max_depth: rng.random_range(2..=4), leaf_capacity: 1 };
        let index = build_index(&cloud, &cfg).unwrap();
        let mut excl = LeafExclusion::new(&index);

        // Exclude a random subset of leaves, never all of them.
        let mut live = index.leaves().len();
        for &leaf in index.leaves() {
            if live > 1 && rng.random_bool(0.3) {
                excl.exclude(&index, leaf);
                live -= 1;
            }
        }
        for _ in 0..10 {
            let seed = MortonCode::new(
                rng.random_range(0..1u64 << (3 * index.depth())),
                index.depth(),
            )
            .unwrap();
            let got = index.farthest_leaf(seed, &excl, &mut counters()).unwrap();
            assert_eq!(got, farthest_oracle(&index, seed, &excl).unwrap());
        }
    }
}

#[test]
fn farthest_leaf_on_complete_grid_is_plain_hamming_argmax() {
    // Fully occupied depth-2 grid: greedy descent and the flat argmax over
    // full-depth Hamming distance coincide (the complement path exists).
    let mut coords = Vec::new();
    for x in 0..4u32 {
        for y in 0..4u32 {
            for z in 0..4u32 {
                coords.push([
                    (x as f64 + 0.5) / 4.0,
                    (y as f64 + 0.5) / 4.0,
                    (z as f64 + 0.5) / 4.0,
                ]);
            }
        }
    }
    let cloud = PointCloud::from_coords(coords).unwrap();
    let index = build_index(&cloud, &BuildConfig { max_depth: 2, leaf_capacity: 1 }).unwrap();
    assert_eq!(index.leaves().len(), 64);
    let excl = LeafExclusion::new(&index);

    for seed_bits in 0..64u64 {
        let seed = MortonCode::new(seed_bits, 2).unwrap();
        let got = index.farthest_leaf(seed, &excl, &mut counters()).unwrap();
        let want = index
            .leaves()
            .iter()
            .copied()
            .max_by_key(|&leaf| {
                let bits = index.node(leaf).code_bits;
                ((bits ^ seed_bits).count_ones(), std::cmp::Reverse(bits))
            })
            .unwrap();
        assert_eq!(index.node(got).code_bits, index.node(want).code_bits);
        assert_eq!(index.node(got).code_bits, seed_bits ^ 0b111111, "complement wins");
    }
}

#[test]
fn descent_child_reduction_is_parallel_safe() {
    use rayon::prelude::*;

    // The per-level child selection is a max-reduction under a total order;
    // folding the scored children in any order or in parallel must give the
    // sequential winner.
    let cloud = uniform_cloud(500, 5);
    let index = build_index(&cloud, &BuildConfig { max_depth: 3, leaf_capacity: 1 }).unwrap();
    let excl = LeafExclusion::new(&index);
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    for _ in 0..200 {
        let seed =
            MortonCode::new(rng.random_range(0..1u64 << (3 * index.depth())), index.depth())
                .unwrap();
        let sequential = index.farthest_leaf(seed, &excl, &mut counters()).unwrap();

        // Re-run the first-level selection as a rayon reduction.
        let root = index.node(0);
        let level = 1u8;
        let seed_prefix = seed.bits() >> (3 * (index.depth() - level) as u32);
        let par_best = root
            .children
            .par_iter()
            .filter(|&&c| c != NO_NODE && !excl.subtree_blocked(c))
            .map(|&c| {
                let bits = index.node(c).code_bits;
                ((bits ^ seed_prefix).count_ones(), bits, c)
            })
            .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
            .unwrap();
        // The parallel winner must sit on the sequential descent path.
        let mut on_path = false;
        let mut id = sequential;
        loop {
            if id == par_best.2 {
                on_path = true;
                break;
            }
            let parent = index.node(id).parent;
            if parent == NO_NODE {
                break;
            }
            id = parent;
        }
        assert!(on_path, "parallel first-level winner must start the sequential path");
    }
}

#[test]
fn voxel_ring_matches_all_leaf_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..40u64 {
        let n = rng.random_range(16..=500);
        let cloud = if trial % 2 == 0 { uniform_cloud(n, trial) } else { cluster_cloud(n, trial) };
        let cfg = BuildConfig {
            max_depth: rng.random_range(2..=5),
            leaf_capacity: rng.random_range(1..=4),
        };
        let index = build_index(&cloud, &cfg).unwrap();
        let leaf_pick = index.leaves()[rng.random_range(0..index.leaves().len())];
        for ring in 1..=3u32 {
            let got = index.voxel_ring(leaf_pick, ring, &mut counters()).unwrap();
            let center = index.node_cell_range(leaf_pick);
            let mut want: Vec<NodeId> = index
                .leaves()
                .iter()
                .copied()
                .filter(|&leaf| {
                    OctreeIndex::range_chebyshev(index.node_cell_range(leaf), center) == ring
                })
                .collect();
            want.sort_by_key(|&leaf| index.node(leaf).leaf_range().unwrap().start);
            assert_eq!(got, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Sorting by a depth-d code groups voxels contiguously at every
    /// shallower depth: prefix sequences stay non-decreasing.
    #[test]
    fn prefix_blocks_stay_contiguous(
        coords in prop::collection::vec(
            prop::array::uniform3(0.0f64..1.0), 2..200
        )
    ) {
        let cloud = PointCloud::from_coords(coords).unwrap();
        let index = build_index(&cloud, &BuildConfig { max_depth: 7, leaf_capacity: 1 }).unwrap();
        for depth in 1..=index.depth() {
            for pos in 1..index.len() {
                prop_assert!(
                    index.point_code(pos - 1, depth).bits() <= index.point_code(pos, depth).bits()
                );
            }
        }
    }

    /// Encode/decode round trip at arbitrary depth: the decoded voxel
    /// contains the point and re-encodes to the same code.
    #[test]
    fn encode_decode_round_trip(
        coords in prop::array::uniform3(0.0f64..1.0),
        depth in 1u8..=12,
    ) {
        let cloud = PointCloud::from_coords([coords, [0.0; 3], [1.0; 3]]).unwrap();
        let bounds = pcprep::normalize_bounds(&cloud).unwrap();
        let p = Point3::new(coords[0], coords[1], coords[2], 0);
        let code = morton_encode(&p, &bounds, depth).unwrap();
        let voxel = morton_decode(code, &bounds);
        prop_assert!(voxel.contains(p.coords()));
        let center = Point3::new(voxel.center()[0], voxel.center()[1], voxel.center()[2], 0);
        prop_assert_eq!(morton_encode(&center, &bounds, depth).unwrap(), code);
    }

    /// Equal-depth codes form a metric space under Hamming distance.
    #[test]
    fn hamming_triangle_inequality(
        a in 0u64..512, b in 0u64..512, c in 0u64..512,
    ) {
        let (ca, cb, cc) = (
            MortonCode::new(a, 3).unwrap(),
            MortonCode::new(b, 3).unwrap(),
            MortonCode::new(c, 3).unwrap(),
        );
        let ab = pcprep::hamming_distance(ca, cb).unwrap();
        let ac = pcprep::hamming_distance(ca, cc).unwrap();
        let cb_ = pcprep::hamming_distance(cc, cb).unwrap();
        prop_assert!(ab <= ac + cb_);
        prop_assert_eq!(ab, pcprep::hamming_distance(cb, ca).unwrap());
        prop_assert_eq!(a == b, ab == 0);
    }

    /// Parent-prefix property across the whole code range.
    #[test]
    fn truncation_is_parent(bits in 0u64..(1 << 12), ) {
        let code = MortonCode::new(bits, 4).unwrap();
        let parent = code.parent().unwrap();
        prop_assert_eq!(parent.bits(), bits >> 3);
        prop_assert_eq!(code.prefix(3), parent);
    }
}
