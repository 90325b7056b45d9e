//! Versioned binary container for a serialized [`OctreeIndex`].
//!
//! All integers and reals are little-endian. Layout, in file order:
//!
//! ```text
//! magic        4 bytes   "PCOT"
//! version      u32       currently 1
//! n            u64       point count
//! depth        u8        deepest leaf level
//! bounds       4 x f64   root cube min x, y, z, then edge
//! feature_dim  u32       feature channels per point
//! build_stats  5 x u64   point_reads, point_writes, table_lookups,
//!                        distance_evals, sort_candidates (wall time is not
//!                        stored; it is not part of the index identity)
//! node_count   u64
//! nodes        node_count records of 54 bytes:
//!                code_bits u64, level u8, parent u32, child_mask u8,
//!                children 8 x u32 (0xffffffff = none),
//!                range_start u32, range_end u32
//! perm         n x u64   original index per reordered position
//! point_codes  n x u64   full-depth code bits per reordered position
//! points       n x (3 + feature_dim) x f64   x, y, z, features
//! ```
//!
//! A round trip (`read` after `write`) reproduces the byte stream exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};
use crate::morton::MAX_DEPTH;
use crate::octree::{NodeRecord, OctreeIndex, NO_NODE};
use crate::stats::AccessCounters;

const MAGIC: &[u8; 4] = b"PCOT";
const VERSION: u32 = 1;

pub fn write_index<W: Write>(mut w: W, index: &OctreeIndex) -> Result<()> {
    let n = index.len() as u64;
    let feature_dim = index.reordered().feature_dim()? as u32;

    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&[index.depth()])?;
    for v in index.bounds().min {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&index.bounds().edge.to_le_bytes())?;
    w.write_all(&feature_dim.to_le_bytes())?;
    let stats = index.build_stats();
    for v in [
        stats.point_reads,
        stats.point_writes,
        stats.table_lookups,
        stats.distance_evals,
        stats.sort_candidates,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }

    w.write_all(&(index.nodes().len() as u64).to_le_bytes())?;
    for node in index.nodes() {
        w.write_all(&node.code_bits.to_le_bytes())?;
        w.write_all(&[node.level])?;
        w.write_all(&node.parent.to_le_bytes())?;
        w.write_all(&[node.child_mask])?;
        for child in node.children {
            w.write_all(&child.to_le_bytes())?;
        }
        let range = node.point_range();
        w.write_all(&(range.start as u32).to_le_bytes())?;
        w.write_all(&(range.end as u32).to_le_bytes())?;
    }

    for &orig in index.perm() {
        w.write_all(&(orig as u64).to_le_bytes())?;
    }
    for pos in 0..index.len() {
        w.write_all(&index.point_code_bits(pos).to_le_bytes())?;
    }
    for p in index.reordered().points() {
        for v in [p.x, p.y, p.z] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &f in &p.feature {
            w.write_all(&f.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn u8(&mut self) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.inner.read_exact(&mut buf)?;
        Ok(buf[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.inner.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.inner.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    }
}

pub fn read_index<R: Read>(r: R) -> Result<OctreeIndex> {
    let mut r = Reader { inner: r };
    let mut magic = [0u8; 4];
    r.inner.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadContainer(format!("bad magic {magic:?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::BadContainer(format!("unsupported version {version}")));
    }
    let n = r.u64()? as usize;
    let depth = r.u8()?;
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::BadContainer(format!("depth {depth} out of range")));
    }
    let bounds = Aabb {
        min: [r.f64()?, r.f64()?, r.f64()?],
        edge: r.f64()?,
    };
    let feature_dim = r.u32()? as usize;
    let build_stats = AccessCounters {
        point_reads: r.u64()?,
        point_writes: r.u64()?,
        table_lookups: r.u64()?,
        distance_evals: r.u64()?,
        sort_candidates: r.u64()?,
        ..AccessCounters::default()
    };

    let node_count = r.u64()? as usize;
    let mut nodes = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let code_bits = r.u64()?;
        let level = r.u8()?;
        let parent = r.u32()?;
        let child_mask = r.u8()?;
        let mut children = [NO_NODE; 8];
        for slot in &mut children {
            *slot = r.u32()?;
        }
        let range_start = r.u32()?;
        let range_end = r.u32()?;
        if range_start > range_end
            || range_end as usize > n
            || children
                .iter()
                .any(|&c| c != NO_NODE && c as usize >= node_count)
        {
            return Err(Error::BadContainer("node record out of range".into()));
        }
        nodes.push(NodeRecord {
            code_bits,
            level,
            parent,
            child_mask,
            children,
            range_start,
            range_end,
        });
    }

    let mut perm = Vec::with_capacity(n);
    for _ in 0..n {
        perm.push(r.u64()? as usize);
    }
    let mut point_codes = Vec::with_capacity(n);
    for _ in 0..n {
        point_codes.push(r.u64()?);
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y, z) = (r.f64()?, r.f64()?, r.f64()?);
        let mut feature = Vec::with_capacity(feature_dim);
        for _ in 0..feature_dim {
            feature.push(r.f64()?);
        }
        points.push(Point3::with_feature(x, y, z, feature, perm[i]));
    }
    let reordered = PointCloud::new(points)?;
    Ok(OctreeIndex::from_parts(nodes, depth, reordered, point_codes, bounds, build_stats))
}

pub fn save_index(path: impl AsRef<Path>, index: &OctreeIndex) -> Result<()> {
    write_index(BufWriter::new(File::create(path)?), index)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<OctreeIndex> {
    read_index(BufReader::new(File::open(path)?))
}
