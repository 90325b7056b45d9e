//! Shared helpers for the oracle test suites.

use pcprep::geom::{Point3, PointCloud};
use pcprep::io::{generate, Generator, MixtureComponent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(dead_code)]
pub fn uniform_cloud(n: usize, seed: u64) -> PointCloud {
    generate(&Generator::Uniform, n, seed).unwrap()
}

#[allow(dead_code)]
pub fn cluster_cloud(n: usize, seed: u64) -> PointCloud {
    let gen = Generator::GaussianMixture(vec![
        MixtureComponent { weight: 0.45, mean: [0.2, 0.2, 0.3], sigma: 0.02 },
        MixtureComponent { weight: 0.35, mean: [0.7, 0.8, 0.6], sigma: 0.05 },
        MixtureComponent { weight: 0.2, mean: [0.5, 0.1, 0.9], sigma: 0.01 },
    ]);
    generate(&gen, n, seed).unwrap()
}

/// Embeds a 2-D quad code (per-level x, y bit pairs) as the planar 3-D code
/// with all z bits zero.
#[allow(dead_code)]
pub fn embed_quad(levels: &[(u64, u64)]) -> u64 {
    levels.iter().fold(0, |acc, &(x, y)| (acc << 3) | (x << 2) | (y << 1))
}

/// Depth-3 planar grid cell (x, y) for a quad code given per level.
#[allow(dead_code)]
pub fn quad_cell(levels: &[(u64, u64)]) -> (u32, u32) {
    let mut x = 0u32;
    let mut y = 0u32;
    for &(bx, by) in levels {
        x = (x << 1) | bx as u32;
        y = (y << 1) | by as u32;
    }
    (x, y)
}

/// A planar point-cloud scenario mirroring a two-level worked example: the
/// seed sits in the low corner cell, one subtree across the diagonal holds
/// five leaves, a four-point leaf hides in the seed's own quadrant, and an
/// anchor pins the cube edge to 1.
///
/// Returns the cloud; the point with `original_index` 0 is the seed. Build
/// with `max_depth: 3, leaf_capacity: 1`.
#[allow(dead_code)]
pub fn planar_scenario_cloud() -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut points: Vec<Point3> = Vec::new();
    let mut push_cell = |points: &mut Vec<Point3>, cell: (u32, u32), count: usize| {
        for _ in 0..count {
            // Scatter inside the depth-3 cell, well away from its walls.
            let jitter_x = 0.2 + 0.6 * rng.random::<f64>();
            let jitter_y = 0.2 + 0.6 * rng.random::<f64>();
            let idx = points.len();
            points.push(Point3::new(
                (cell.0 as f64 + jitter_x) / 8.0,
                (cell.1 as f64 + jitter_y) / 8.0,
                0.0,
                idx,
            ));
        }
    };

    // Seed point: exact low corner, cell (0, 0), original_index 0.
    points.push(Point3::new(0.0, 0.0, 0.0, 0));
    // Quad leaves 110001, 110010 (x2), 110011, 110100 (x2), 110101.
    push_cell(&mut points, quad_cell(&[(1, 1), (0, 0), (0, 1)]), 1);
    push_cell(&mut points, quad_cell(&[(1, 1), (0, 0), (1, 0)]), 2);
    push_cell(&mut points, quad_cell(&[(1, 1), (0, 0), (1, 1)]), 1);
    push_cell(&mut points, quad_cell(&[(1, 1), (0, 1), (0, 0)]), 2);
    push_cell(&mut points, quad_cell(&[(1, 1), (0, 1), (0, 1)]), 1);
    // Quad leaf 001101 with four points, inside the seed's quadrant.
    push_cell(&mut points, quad_cell(&[(0, 0), (1, 1), (0, 1)]), 4);
    // Edge anchor at (1, 0): pins the cube edge without entering the
    // diagonal subtree.
    let idx = points.len();
    points.push(Point3::new(1.0, 0.0, 0.0, idx));

    PointCloud::new(points).unwrap()
}
