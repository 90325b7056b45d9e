//! Octree index over a point cloud: a flattened node table plus the
//! SFC-reordered copy of the points.
//!
//! Construction touches each point record exactly once to compute its full-
//! depth code; everything else (sort, node derivation) is index arithmetic.
//! A finished index is immutable and safe for any number of readers.

use std::ops::Range;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geom::{normalize_bounds, Aabb, Point3, PointCloud};
use crate::morton::{morton_encode, MortonCode, MAX_DEPTH};
use crate::stats::AccessCounters;

pub type NodeId = u32;
pub const NO_NODE: NodeId = u32::MAX;

/// Build parameters: subdivide while a voxel holds more than `leaf_capacity`
/// points and its level is below `max_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildConfig {
    pub max_depth: u8,
    pub leaf_capacity: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self { max_depth: 12, leaf_capacity: 8 }
    }
}

/// One Octree-Table entry. Leaves carry a half-open range into the reordered
/// point array; internal nodes carry their subtree's covering range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    /// Voxel code, `3 * level` significant bits (0 for the root).
    pub code_bits: u64,
    pub level: u8,
    pub parent: NodeId,
    /// Bit `i` set iff child octant `i` exists.
    pub child_mask: u8,
    pub children: [NodeId; 8],
    pub(crate) range_start: u32,
    pub(crate) range_end: u32,
}

impl NodeRecord {
    pub fn is_leaf(&self) -> bool {
        self.child_mask == 0
    }

    /// Reordered-array range of the points in this leaf; `None` for internal
    /// nodes.
    pub fn leaf_range(&self) -> Option<Range<usize>> {
        if self.is_leaf() {
            Some(self.range_start as usize..self.range_end as usize)
        } else {
            None
        }
    }

    /// Covering range of the whole subtree (equals `leaf_range` on leaves).
    pub fn point_range(&self) -> Range<usize> {
        self.range_start as usize..self.range_end as usize
    }

    pub fn point_count(&self) -> usize {
        (self.range_end - self.range_start) as usize
    }

    /// Voxel code of this node; `None` for the root, which has no code bits.
    pub fn code(&self) -> Option<MortonCode> {
        if self.level == 0 {
            None
        } else {
            Some(MortonCode::new(self.code_bits, self.level).expect("node code is valid"))
        }
    }
}

/// Result of a point location: the containing leaf, or the deepest existing
/// ancestor when the query falls into an empty region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafLookup {
    pub node: NodeId,
    pub empty_region: bool,
}

/// Octree-Table plus the SFC-reordered copy of the cloud.
#[derive(Debug, Clone)]
pub struct OctreeIndex {
    nodes: Vec<NodeRecord>,
    leaves: Vec<NodeId>,
    depth: u8,
    reordered: PointCloud,
    perm: Vec<usize>,
    /// Full-depth code bits per reordered point, kept as table payload so
    /// code-space queries never touch point records.
    point_codes: Vec<u64>,
    bounds: Aabb,
    build_stats: AccessCounters,
}

struct TreeBuilder<'a> {
    codes: &'a [u64],
    leaf_capacity: usize,
    max_depth: u8,
    nodes: Vec<NodeRecord>,
    leaves: Vec<NodeId>,
    deepest: u8,
}

impl TreeBuilder<'_> {
    fn build(&mut self, level: u8, parent: NodeId, code_bits: u64, range: Range<u32>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(NodeRecord {
            code_bits,
            level,
            parent,
            child_mask: 0,
            children: [NO_NODE; 8],
            range_start: range.start,
            range_end: range.end,
        });
        let len = (range.end - range.start) as usize;
        if len <= self.leaf_capacity || level == self.max_depth {
            self.leaves.push(id);
            self.deepest = self.deepest.max(level);
            return id;
        }
        let shift = 3 * (MAX_DEPTH - level - 1) as u32;
        let mut start = range.start;
        while start < range.end {
            let octant = (self.codes[start as usize] >> shift) & 7;
            let mut end = start + 1;
            while end < range.end && (self.codes[end as usize] >> shift) & 7 == octant {
                end += 1;
            }
            let child = self.build(level + 1, id, (code_bits << 3) | octant, start..end);
            self.nodes[id as usize].children[octant as usize] = child;
            self.nodes[id as usize].child_mask |= 1 << octant;
            start = end;
        }
        id
    }
}

/// Builds the index in one pass over the point records: encode every point at
/// full depth, stable-sort by `(code, original_index)`, then derive the node
/// table from code prefixes.
pub fn build_index(cloud: &PointCloud, cfg: &BuildConfig) -> Result<OctreeIndex> {
    if cfg.max_depth == 0 || cfg.max_depth > MAX_DEPTH {
        return Err(Error::DepthExceedsCodeWidth { depth: cfg.max_depth, max: MAX_DEPTH });
    }
    if cfg.leaf_capacity == 0 {
        return Err(Error::InvalidParams("leaf_capacity must be at least 1".into()));
    }
    if cloud.len() > u32::MAX as usize {
        return Err(Error::InvalidParams("cloud exceeds u32 positions".into()));
    }
    let started = Instant::now();
    let n = cloud.len();
    let bounds = normalize_bounds(cloud)?;

    let mut stats = AccessCounters::default();
    let full_codes: Vec<u64> = cloud
        .points()
        .iter()
        .map(|p| morton_encode(p, &bounds, MAX_DEPTH).map(|c| c.bits()))
        .collect::<Result<_>>()?;
    stats.add_point_reads(n as u64);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by_key(|&i| (full_codes[i as usize], cloud.point(i as usize).original_index));

    let reordered_points: Vec<Point3> =
        order.iter().map(|&i| cloud.point(i as usize).clone()).collect();
    stats.add_point_writes(n as u64);
    let point_codes: Vec<u64> = order.iter().map(|&i| full_codes[i as usize]).collect();
    let perm: Vec<usize> = reordered_points.iter().map(|p| p.original_index).collect();

    let mut builder = TreeBuilder {
        codes: &point_codes,
        leaf_capacity: cfg.leaf_capacity,
        max_depth: cfg.max_depth,
        nodes: Vec::new(),
        leaves: Vec::new(),
        deepest: 0,
    };
    builder.build(0, NO_NODE, 0, 0..n as u32);

    stats.wall_time = started.elapsed();
    log::debug!(
        "octree build: N={} depth={} nodes={} leaves={}",
        n,
        builder.deepest.max(1),
        builder.nodes.len(),
        builder.leaves.len()
    );
    Ok(OctreeIndex {
        nodes: builder.nodes,
        leaves: builder.leaves,
        depth: builder.deepest.max(1),
        reordered: PointCloud::new(reordered_points)?,
        perm,
        point_codes,
        bounds,
        build_stats: stats,
    })
}

impl OctreeIndex {
    pub fn len(&self) -> usize {
        self.reordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reordered.is_empty()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id as usize]
    }

    /// Leaves in SFC order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Deepest leaf level; the uniform grid for voxel rings lives at this
    /// resolution.
    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn reordered(&self) -> &PointCloud {
        &self.reordered
    }

    /// Maps reordered position to the point's original input index.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn build_stats(&self) -> &AccessCounters {
        &self.build_stats
    }

    /// Cells per axis of the leaf-depth grid.
    pub fn grid_side(&self) -> u32 {
        1 << self.depth
    }

    /// Edge length of one cell of the leaf-depth grid.
    pub fn leaf_edge(&self) -> f64 {
        self.bounds.edge / (1u64 << self.depth) as f64
    }

    /// A reordered point's voxel code at the requested depth.
    pub fn point_code(&self, pos: usize, depth: u8) -> MortonCode {
        debug_assert!(depth >= 1 && depth <= MAX_DEPTH);
        MortonCode::new(self.point_codes[pos] >> (3 * (MAX_DEPTH - depth)), depth)
            .expect("stored point code is valid")
    }

    /// Full-depth code bits of a reordered point.
    pub fn point_code_bits(&self, pos: usize) -> u64 {
        self.point_codes[pos]
    }

    pub(crate) fn from_parts(
        nodes: Vec<NodeRecord>,
        depth: u8,
        reordered: PointCloud,
        point_codes: Vec<u64>,
        bounds: Aabb,
        build_stats: AccessCounters,
    ) -> Self {
        let leaves = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| i as NodeId)
            .collect();
        let perm = reordered.points().iter().map(|p| p.original_index).collect();
        OctreeIndex { nodes, leaves, depth, reordered, perm, point_codes, bounds, build_stats }
    }

    fn descend(&self, full_code_bits: u64, counters: &mut AccessCounters) -> LeafLookup {
        let mut id: NodeId = 0;
        loop {
            let node = &self.nodes[id as usize];
            if node.is_leaf() {
                return LeafLookup { node: id, empty_region: false };
            }
            counters.add_table_lookups(1);
            let octant = (full_code_bits >> (3 * (MAX_DEPTH - node.level - 1) as u32)) & 7;
            let child = node.children[octant as usize];
            if child == NO_NODE {
                return LeafLookup { node: id, empty_region: true };
            }
            id = child;
        }
    }

    /// Finds the leaf containing a query point. Queries in empty regions
    /// return the deepest existing ancestor with `empty_region` set.
    pub fn locate_leaf(&self, p: &Point3, counters: &mut AccessCounters) -> Result<LeafLookup> {
        let code = morton_encode(p, &self.bounds, MAX_DEPTH)?;
        Ok(self.descend(code.bits(), counters))
    }

    /// Leaf holding the reordered position `pos`; always exact.
    pub fn locate_position(&self, pos: usize, counters: &mut AccessCounters) -> NodeId {
        let lookup = self.descend(self.point_codes[pos], counters);
        debug_assert!(!lookup.empty_region);
        debug_assert!(self.nodes[lookup.node as usize].point_range().contains(&pos));
        lookup.node
    }

    /// Greedy per-level descent to the leaf whose code is farthest from the
    /// seed in Hamming distance. At each level the existing, non-excluded
    /// child with the largest prefix distance wins; ties go to the smallest
    /// code. Visits at most `depth` levels.
    pub fn farthest_leaf(
        &self,
        seed: MortonCode,
        exclusion: &LeafExclusion,
        counters: &mut AccessCounters,
    ) -> Result<NodeId> {
        if seed.depth() != self.depth {
            return Err(Error::IncomparableCodes { a: seed.depth(), b: self.depth });
        }
        if exclusion.subtree_blocked(0) {
            return Err(Error::CloudExhausted);
        }
        let mut id: NodeId = 0;
        loop {
            let node = &self.nodes[id as usize];
            if node.is_leaf() {
                return Ok(id);
            }
            counters.add_table_lookups(1);
            let level = node.level + 1;
            let seed_prefix = seed.bits() >> (3 * (self.depth - level) as u32);
            // Deterministic max-reduction over child scores; evaluation
            // order must not matter, so the comparison is a total order on
            // (distance, code).
            let best = node
                .children
                .iter()
                .filter(|&&c| c != NO_NODE && !exclusion.subtree_blocked(c))
                .map(|&c| {
                    let bits = self.nodes[c as usize].code_bits;
                    ((bits ^ seed_prefix).count_ones(), bits, c)
                })
                .reduce(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
            match best {
                Some((_, _, child)) => id = child,
                None => return Err(Error::CloudExhausted),
            }
        }
    }

    /// Cell range `[lo, hi]` (inclusive) covered by a node on the leaf-depth
    /// grid.
    pub fn node_cell_range(&self, id: NodeId) -> ([u32; 3], [u32; 3]) {
        let node = &self.nodes[id as usize];
        let span = self.depth - node.level;
        let cell = if node.level == 0 {
            [0, 0, 0]
        } else {
            MortonCode::new(node.code_bits, node.level).expect("node code is valid").cell()
        };
        let lo = [cell[0] << span, cell[1] << span, cell[2] << span];
        let width = (1u32 << span) - 1;
        (lo, [lo[0] + width, lo[1] + width, lo[2] + width])
    }

    /// Chebyshev distance between two inclusive cell ranges on the leaf grid.
    pub fn range_chebyshev(a: ([u32; 3], [u32; 3]), b: ([u32; 3], [u32; 3])) -> u32 {
        (0..3)
            .map(|axis| {
                if a.1[axis] < b.0[axis] {
                    b.0[axis] - a.1[axis]
                } else if b.1[axis] < a.0[axis] {
                    a.0[axis] - b.1[axis]
                } else {
                    0
                }
            })
            .max()
            .unwrap()
    }

    /// Largest ring radius around `(lo, hi)` that can still contain grid
    /// cells.
    pub fn max_ring(&self, lo: [u32; 3], hi: [u32; 3]) -> u32 {
        let side = self.grid_side();
        (0..3).map(|a| lo[a].max(side - 1 - hi[a])).max().unwrap()
    }

    fn locate_cell(&self, cell: [u32; 3], counters: &mut AccessCounters) -> Option<NodeId> {
        let code = MortonCode::from_cell(cell, self.depth).ok()?;
        let bits = code.bits() << (3 * (MAX_DEPTH - self.depth) as u32);
        let lookup = self.descend(bits, counters);
        if lookup.empty_region {
            None
        } else {
            Some(lookup.node)
        }
    }

    /// Existing leaves whose cell range sits at Chebyshev grid distance
    /// exactly `n` from the center range, in SFC order.
    ///
    /// For small shells the cells of the ring are enumerated and located
    /// individually; when the shell has more cells than the tree has leaves,
    /// a whole-leaf scan is cheaper and yields the same set.
    pub fn ring_leaves(
        &self,
        lo: [u32; 3],
        hi: [u32; 3],
        n: u32,
        counters: &mut AccessCounters,
    ) -> Vec<NodeId> {
        debug_assert!(n >= 1);
        let side = self.grid_side() as i64;
        let clipped_volume = |r: u32| -> i64 {
            (0..3)
                .map(|a| {
                    let l = (lo[a] as i64 - r as i64).max(0);
                    let h = (hi[a] as i64 + r as i64).min(side - 1);
                    (h - l + 1).max(0)
                })
                .product()
        };
        let shell_cells = clipped_volume(n) - clipped_volume(n - 1);

        let mut found: Vec<NodeId> = Vec::new();
        if shell_cells > self.leaves.len() as i64 {
            counters.add_table_lookups(self.leaves.len() as u64);
            for &leaf in &self.leaves {
                if Self::range_chebyshev(self.node_cell_range(leaf), (lo, hi)) == n {
                    found.push(leaf);
                }
            }
            return found;
        }

        let l = [lo[0] as i64 - n as i64, lo[1] as i64 - n as i64, lo[2] as i64 - n as i64];
        let h = [hi[0] as i64 + n as i64, hi[1] as i64 + n as i64, hi[2] as i64 + n as i64];
        let clip = |v: i64| v.clamp(0, side - 1);
        let visit = |index: &Self, cells: [i64; 3], out: &mut Vec<NodeId>, c: &mut AccessCounters| {
            let cell = [cells[0] as u32, cells[1] as u32, cells[2] as u32];
            if let Some(leaf) = index.locate_cell(cell, c) {
                out.push(leaf);
            }
        };
        // Two X faces, then Y faces (X interior), then Z faces (X and Y
        // interior), so every shell cell is visited once. With n >= 1 the
        // opposing faces never coincide.
        for &x in &[l[0], h[0]] {
            if x < 0 || x >= side {
                continue;
            }
            for y in clip(l[1])..=clip(h[1]) {
                for z in clip(l[2])..=clip(h[2]) {
                    visit(self, [x, y, z], &mut found, counters);
                }
            }
        }
        for &y in &[l[1], h[1]] {
            if y < 0 || y >= side {
                continue;
            }
            for x in clip(l[0] + 1)..=clip(h[0] - 1) {
                for z in clip(l[2])..=clip(h[2]) {
                    visit(self, [x, y, z], &mut found, counters);
                }
            }
        }
        for &z in &[l[2], h[2]] {
            if z < 0 || z >= side {
                continue;
            }
            for x in clip(l[0] + 1)..=clip(h[0] - 1) {
                for y in clip(l[1] + 1)..=clip(h[1] - 1) {
                    visit(self, [x, y, z], &mut found, counters);
                }
            }
        }

        found.sort_unstable();
        found.dedup();
        // Shallow leaves overlapping an inner ring belong to that ring, not
        // this one.
        found.retain(|&leaf| Self::range_chebyshev(self.node_cell_range(leaf), (lo, hi)) == n);
        found.sort_unstable_by_key(|&leaf| self.nodes[leaf as usize].range_start);
        found
    }

    /// Ring of existing leaves at Chebyshev distance exactly `n` around a
    /// center leaf, in SFC order.
    pub fn voxel_ring(
        &self,
        center_leaf: NodeId,
        n: u32,
        counters: &mut AccessCounters,
    ) -> Result<Vec<NodeId>> {
        let node = &self.nodes[center_leaf as usize];
        if !node.is_leaf() {
            return Err(Error::InvalidParams(format!("node {center_leaf} is not a leaf")));
        }
        if n == 0 {
            return Err(Error::InvalidParams("ring radius must be at least 1".into()));
        }
        let (lo, hi) = self.node_cell_range(center_leaf);
        Ok(self.ring_leaves(lo, hi, n, counters))
    }
}

/// Exclusion state for descent: tracks which leaves are spent and how many
/// usable leaves remain below every node.
#[derive(Debug, Clone)]
pub struct LeafExclusion {
    excluded: Vec<bool>,
    remaining: Vec<u32>,
}

impl LeafExclusion {
    pub fn new(index: &OctreeIndex) -> Self {
        let mut remaining = vec![0u32; index.nodes().len()];
        // Nodes are stored in preorder, so children have larger ids than
        // their parent and a reverse sweep sees them first.
        for (id, node) in index.nodes().iter().enumerate().rev() {
            if node.is_leaf() {
                remaining[id] = 1;
            } else {
                remaining[id] = node
                    .children
                    .iter()
                    .filter(|&&c| c != NO_NODE)
                    .map(|&c| remaining[c as usize])
                    .sum();
            }
        }
        Self { excluded: vec![false; index.nodes().len()], remaining }
    }

    /// Marks a leaf as spent; ancestors with no usable leaves left become
    /// blocked for descent. Idempotent.
    pub fn exclude(&mut self, index: &OctreeIndex, leaf: NodeId) {
        assert!(index.node(leaf).is_leaf(), "only leaves can be excluded");
        if self.excluded[leaf as usize] {
            return;
        }
        self.excluded[leaf as usize] = true;
        let mut id = leaf;
        loop {
            self.remaining[id as usize] -= 1;
            let parent = index.node(id).parent;
            if parent == NO_NODE {
                break;
            }
            id = parent;
        }
    }

    pub fn is_excluded(&self, leaf: NodeId) -> bool {
        self.excluded[leaf as usize]
    }

    /// True when no usable leaf remains under `node`.
    pub fn subtree_blocked(&self, node: NodeId) -> bool {
        self.remaining[node as usize] == 0
    }
}
