//! Geometry primitives: points, clouds, and the cubic root bounding box.

use crate::error::{Error, Result};

/// Relative padding applied to the tight bounding extent so that every input
/// point lands strictly inside the half-open root cell.
pub const BOUNDS_PADDING: f64 = 1e-9;

/// Edge length used for degenerate clouds whose tight extent is zero.
pub const MIN_EDGE: f64 = 1e-12;

/// One point: 3-D coordinates, an optional feature vector, and the point's
/// position in the raw input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Per-point feature channels; empty when the source carries none.
    pub feature: Vec<f64>,
    pub original_index: usize,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, original_index: usize) -> Self {
        Self { x, y, z, feature: Vec::new(), original_index }
    }

    pub fn with_feature(x: f64, y: f64, z: f64, feature: Vec<f64>, original_index: usize) -> Self {
        Self { x, y, z, feature, original_index }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Squared Euclidean distance on coordinates (features do not participate).
    pub fn dist2(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.feature.iter().all(|f| f.is_finite())
    }
}

/// An ordered, validated point set. `original_index` values always form a
/// permutation of `0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Validates the cloud invariants: non-empty, finite values, and
    /// `original_index` a permutation of `0..N`.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = vec![false; points.len()];
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidCoordinate { index: i });
            }
            if p.original_index >= points.len() || seen[p.original_index] {
                return Err(Error::InvalidParams(format!(
                    "original_index {} is not a permutation entry",
                    p.original_index
                )));
            }
            seen[p.original_index] = true;
        }
        Ok(Self { points })
    }

    /// Builds a cloud from bare coordinates, assigning input order as
    /// `original_index`.
    pub fn from_coords<I: IntoIterator<Item = [f64; 3]>>(coords: I) -> Result<Self> {
        let points = coords
            .into_iter()
            .enumerate()
            .map(|(i, [x, y, z])| Point3::new(x, y, z, i))
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    /// Feature width shared by every point, or an error when widths differ.
    pub fn feature_dim(&self) -> Result<usize> {
        let dim = self.points[0].feature.len();
        if self.points.iter().any(|p| p.feature.len() != dim) {
            return Err(Error::ShapeMismatch(
                "points carry feature vectors of different widths".into(),
            ));
        }
        Ok(dim)
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// Axis-aligned cube; points are contained in the half-open box
/// `[min, min + edge)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub edge: f64,
}

impl Aabb {
    pub fn max_corner(&self) -> [f64; 3] {
        [self.min[0] + self.edge, self.min[1] + self.edge, self.min[2] + self.edge]
    }

    pub fn center(&self) -> [f64; 3] {
        let h = self.edge * 0.5;
        [self.min[0] + h, self.min[1] + h, self.min[2] + h]
    }

    pub fn contains(&self, c: [f64; 3]) -> bool {
        (0..3).all(|a| c[a] >= self.min[a] && c[a] - self.min[a] < self.edge)
    }
}

/// Smallest axis-aligned cube containing every point of the cloud, padded by
/// `BOUNDS_PADDING` relative to the widest extent so the half-open
/// containment rule holds for the extreme points.
pub fn normalize_bounds(cloud: &PointCloud) -> Result<Aabb> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (i, p) in cloud.points().iter().enumerate() {
        let c = p.coords();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoordinate { index: i });
        }
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    let edge = if extent > 0.0 { extent * (1.0 + BOUNDS_PADDING) } else { MIN_EDGE };
    Ok(Aabb { min: lo, edge })
}
