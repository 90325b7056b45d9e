//! Depth-tagged Morton codes on the space-filling-curve order.
//!
//! Each tree level contributes three bits, most significant level first.
//! Within a level the first bit is the X half, the second Y, the third Z, so
//! a code reads as the octant path from the root down to the voxel.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};

/// Deepest representable level: 3 bits per level in a 64-bit word.
pub const MAX_DEPTH: u8 = 21;

/// Voxel identifier on the SFC: `3 * depth` significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MortonCode {
    bits: u64,
    depth: u8,
}

impl MortonCode {
    pub fn new(bits: u64, depth: u8) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::DepthExceedsCodeWidth { depth, max: MAX_DEPTH });
        }
        if bits >> (3 * depth as u32) != 0 {
            return Err(Error::InvalidParams(format!(
                "code {bits:#o} has more than {} significant bits",
                3 * depth
            )));
        }
        Ok(Self { bits, depth })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    /// Enclosing voxel's code one level up, or `None` at the first level.
    pub fn parent(&self) -> Option<MortonCode> {
        if self.depth == 1 {
            None
        } else {
            Some(Self { bits: self.bits >> 3, depth: self.depth - 1 })
        }
    }

    /// Truncation to a shallower depth (the enclosing voxel at that level).
    pub fn prefix(&self, depth: u8) -> MortonCode {
        assert!(depth >= 1 && depth <= self.depth);
        Self { bits: self.bits >> (3 * (self.depth - depth)), depth }
    }

    /// Grid cell coordinates of the voxel at this code's depth.
    pub fn cell(&self) -> [u32; 3] {
        [compact_bits(self.bits >> 2), compact_bits(self.bits >> 1), compact_bits(self.bits)]
    }

    pub fn from_cell(cell: [u32; 3], depth: u8) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::DepthExceedsCodeWidth { depth, max: MAX_DEPTH });
        }
        let side = 1u32 << depth;
        if cell.iter().any(|&c| c >= side) {
            return Err(Error::InvalidParams(format!("cell {cell:?} outside {side}^3 grid")));
        }
        Ok(Self { bits: interleave(cell), depth })
    }
}

/// Spread the low 21 bits of `x` so bit `i` lands at position `3 * i`.
fn spread_bits(x: u32) -> u64 {
    let mut x = x as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x1f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

/// Inverse of `spread_bits`: collect every third bit.
fn compact_bits(x: u64) -> u32 {
    let mut x = x & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x1f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x1f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

fn interleave(cell: [u32; 3]) -> u64 {
    (spread_bits(cell[0]) << 2) | (spread_bits(cell[1]) << 1) | spread_bits(cell[2])
}

fn quantize(coord: f64, min: f64, edge: f64, depth: u8) -> u32 {
    let side = 1u64 << depth;
    let cell = ((coord - min) / edge * side as f64).floor();
    // Points on internal boundaries fall in the higher cell via floor; the
    // top clamp only absorbs float rounding at the far corner.
    (cell.max(0.0) as u64).min(side - 1) as u32
}

/// Encodes a point's voxel at the given depth inside the root cube.
pub fn morton_encode(p: &Point3, bounds: &Aabb, depth: u8) -> Result<MortonCode> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::DepthExceedsCodeWidth { depth, max: MAX_DEPTH });
    }
    let c = p.coords();
    if !bounds.contains(c) {
        return Err(Error::OutOfBounds { x: p.x, y: p.y, z: p.z });
    }
    Ok(MortonCode {
        bits: interleave([
            quantize(c[0], bounds.min[0], bounds.edge, depth),
            quantize(c[1], bounds.min[1], bounds.edge, depth),
            quantize(c[2], bounds.min[2], bounds.edge, depth),
        ]),
        depth,
    })
}

/// As `morton_encode`, but clamps the coordinates into the cube first.
/// Used for synthetic query points (e.g. pick centroids) that may sit on or
/// just outside the boundary.
pub fn morton_encode_clamped(c: [f64; 3], bounds: &Aabb, depth: u8) -> Result<MortonCode> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::DepthExceedsCodeWidth { depth, max: MAX_DEPTH });
    }
    let q = |a: usize| {
        let v = c[a].max(bounds.min[a]).min(bounds.min[a] + bounds.edge);
        quantize(v, bounds.min[a], bounds.edge, depth)
    };
    Ok(MortonCode { bits: interleave([q(0), q(1), q(2)]), depth })
}

/// The voxel cell identified by a code: a sub-cube of the root cube.
pub fn morton_decode(code: MortonCode, bounds: &Aabb) -> Aabb {
    let cell = code.cell();
    let edge = bounds.edge / (1u64 << code.depth()) as f64;
    Aabb {
        min: [
            bounds.min[0] + cell[0] as f64 * edge,
            bounds.min[1] + cell[1] as f64 * edge,
            bounds.min[2] + cell[2] as f64 * edge,
        ],
        edge,
    }
}

/// Population count of the XOR of two equal-depth codes.
pub fn hamming_distance(a: MortonCode, b: MortonCode) -> Result<u32> {
    if a.depth != b.depth {
        return Err(Error::IncomparableCodes { a: a.depth, b: b.depth });
    }
    Ok((a.bits ^ b.bits).count_ones())
}
