//! Frame ingestion, export, and synthetic cloud generation.
//!
//! Two on-disk formats:
//!
//! - `XYZ_ASCII`: whitespace-separated reals, one point per line, `#`
//!   comments; fields beyond x y z become the feature vector.
//! - `BIN_F32X4`: packed little-endian f32 quadruples (x, y, z, intensity),
//!   no header; intensity becomes a one-dimensional feature.
//!
//! Coordinates are held as f64 internally even when stored as f32.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

/// Supported frame encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    XyzAscii,
    BinF32x4,
}

impl FrameFormat {
    /// Guesses the format from a file extension; `.bin` and `.f32` are
    /// binary, everything else is ASCII.
    pub fn from_path(path: &Path) -> FrameFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("f32") => FrameFormat::BinF32x4,
            _ => FrameFormat::XyzAscii,
        }
    }
}

/// Reads a whitespace-separated ASCII frame. Lines starting with `#` and
/// blank lines are skipped; remaining lines need at least three real fields.
pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let reader = BufReader::new(File::open(path)?);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = Vec::new();
        for token in trimmed.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| Error::ParseLine {
                line: lineno + 1,
                message: format!("not a real number: {token:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::ParseLine {
                    line: lineno + 1,
                    message: format!("non-finite value: {token:?}"),
                });
            }
            fields.push(value);
        }
        if fields.len() < 3 {
            return Err(Error::ParseLine {
                line: lineno + 1,
                message: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let feature = fields.split_off(3);
        points.push(Point3::with_feature(fields[0], fields[1], fields[2], feature, points.len()));
    }
    PointCloud::new(points)
}

/// Writes an ASCII frame in input order; values use the shortest exact
/// representation so a round trip reproduces them bit-for-bit.
pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in cloud.points() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        for f in &p.feature {
            write!(w, " {f}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

const BIN_STRIDE: usize = 16;

/// Reads packed little-endian f32 quadruples; the fourth channel becomes a
/// one-dimensional feature.
pub fn read_bin_f32x4(path: impl AsRef<Path>) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bytes.len() % BIN_STRIDE != 0 {
        return Err(Error::TruncatedRecord { len: bytes.len() as u64, stride: BIN_STRIDE as u64 });
    }
    let mut points = Vec::with_capacity(bytes.len() / BIN_STRIDE);
    for record in bytes.chunks_exact(BIN_STRIDE) {
        let field = |i: usize| {
            f32::from_le_bytes([record[4 * i], record[4 * i + 1], record[4 * i + 2], record[4 * i + 3]])
                as f64
        };
        points.push(Point3::with_feature(
            field(0),
            field(1),
            field(2),
            vec![field(3)],
            points.len(),
        ));
    }
    PointCloud::new(points)
}

/// Writes packed f32 quadruples; the first feature channel (or zero)
/// provides the intensity slot.
pub fn write_bin_f32x4(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in cloud.points() {
        for v in [p.x, p.y, p.z, p.feature.first().copied().unwrap_or(0.0)] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One isotropic component of a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub sigma: f64,
}

/// Synthetic cloud generators; mixtures emulate the uneven density that
/// drives octree depth up.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Uniform fill of the unit cube.
    Uniform,
    GaussianMixture(Vec<MixtureComponent>),
}

/// Deterministic synthetic cloud for a fixed seed.
pub fn generate(generator: &Generator, n: usize, rng_seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParams("generator needs N >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    match generator {
        Generator::Uniform => PointCloud::from_coords(
            (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect::<Vec<_>>(),
        ),
        Generator::GaussianMixture(components) => {
            if components.is_empty() {
                return Err(Error::InvalidParams("mixture needs at least one component".into()));
            }
            let weight_sum: f64 = components.iter().map(|c| c.weight).sum();
            if (weight_sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "mixture weights sum to {weight_sum}, expected 1"
                )));
            }
            for c in components {
                if c.weight < 0.0 || !c.sigma.is_finite() || c.sigma <= 0.0
                    || c.mean.iter().any(|m| !m.is_finite())
                {
                    return Err(Error::InvalidParams("invalid mixture component".into()));
                }
            }
            let normals: Vec<[Normal<f64>; 3]> = components
                .iter()
                .map(|c| {
                    [
                        Normal::new(c.mean[0], c.sigma).expect("validated sigma"),
                        Normal::new(c.mean[1], c.sigma).expect("validated sigma"),
                        Normal::new(c.mean[2], c.sigma).expect("validated sigma"),
                    ]
                })
                .collect();
            let coords: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = components.len() - 1;
                    for (i, c) in components.iter().enumerate() {
                        acc += c.weight;
                        if u < acc {
                            chosen = i;
                            break;
                        }
                    }
                    let nd = &normals[chosen];
                    [nd[0].sample(&mut rng), nd[1].sample(&mut rng), nd[2].sample(&mut rng)]
                })
                .collect();
            PointCloud::from_coords(coords)
        }
    }
}
