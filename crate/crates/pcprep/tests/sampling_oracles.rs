//! Sampling oracles: an independent quadratic FPS reimplementation, seeded
//! statistics for random sampling, and the indexed-sampling access contract.

mod common;

use common::{cluster_cloud, uniform_cloud};
use pcprep::geom::PointCloud;
use pcprep::morton::morton_decode;
use pcprep::octree::{build_index, BuildConfig};
use pcprep::sampling::{
    coverage_radius, fps_exact, ois_sample, random_sample, virtual_seed, OisMode, SamplingConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent oracle: quadratic farthest-point sampling with no distance
/// caching. Each iteration recomputes every unpicked point's distance to the
/// whole picked set.
fn fps_quadratic_oracle(cloud: &PointCloud, k: usize, seed_original_index: usize) -> Vec<usize> {
    let n = cloud.len();
    let seed_pos = cloud
        .points()
        .iter()
        .position(|p| p.original_index == seed_original_index)
        .expect("seed exists");
    let mut picks = vec![seed_pos];
    let mut picked = vec![false; n];
    picked[seed_pos] = true;

    while picks.len() < k {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if picked[i] {
                continue;
            }
            let mut to_set = f64::INFINITY;
            for &p in &picks {
                to_set = to_set.min(cloud.point(i).dist2(cloud.point(p)));
            }
            let orig = cloud.point(i).original_index;
            let better = match best {
                None => true,
                Some((bd, borig, _)) => to_set > bd || (to_set == bd && orig < borig),
            };
            if better {
                best = Some((to_set, orig, i));
            }
        }
        let (_, _, pos) = best.unwrap();
        picked[pos] = true;
        picks.push(pos);
    }
    picks
}

#[test]
fn fps_matches_quadratic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..20u64 {
        let n = rng.random_range(50..=1000);
        let cloud = uniform_cloud(n, trial + 500);
        let k = rng.random_range(1..=64.min(n));
        let table = fps_exact(&cloud, &SamplingConfig::new(k)).unwrap();
        assert_eq!(table.picks, fps_quadratic_oracle(&cloud, k, 0), "n={n} k={k}");
    }
}

#[test]
fn fps_coordinates_survive_input_shuffling() {
    let cloud = uniform_cloud(300, 17);
    let mut shuffled_points = cloud.points().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    shuffled_points.shuffle(&mut rng);
    let shuffled = PointCloud::new(shuffled_points).unwrap();

    let cfg = SamplingConfig { k: 32, seed_point: Some(0), rng_seed: 0 };
    let a = fps_exact(&cloud, &cfg).unwrap();
    let b = fps_exact(&shuffled, &cfg).unwrap();
    let coords = |cloud: &PointCloud, picks: &[usize]| {
        picks.iter().map(|&p| cloud.point(p).coords()).collect::<Vec<_>>()
    };
    assert_eq!(coords(&cloud, &a.picks), coords(&shuffled, &b.picks));
}

#[test]
fn random_sample_inclusion_frequencies_are_binomial() {
    let n = 10_000;
    let k = 1_000;
    let runs = 100u64;
    let cloud = uniform_cloud(n, 3);
    let mut hits = vec![0u32; n];
    for seed in 0..runs {
        let cfg = SamplingConfig { k, seed_point: None, rng_seed: seed };
        for &p in &random_sample(&cloud, &cfg).unwrap().picks {
            hits[p] += 1;
        }
    }
    // Per-point inclusion is Binomial(runs, k/n). With 10^4 points a few
    // 3-sigma outliers are expected; none should pass 5 sigma, and the
    // 3-sigma exceedance rate stays below 1%.
    let p = k as f64 / n as f64;
    let sigma = (p * (1.0 - p) / runs as f64).sqrt();
    let mut outside3 = 0usize;
    for &h in &hits {
        let freq = h as f64 / runs as f64;
        let dev = (freq - p).abs();
        assert!(dev <= 5.0 * sigma, "frequency {freq} deviates beyond 5 sigma");
        if dev > 3.0 * sigma {
            outside3 += 1;
        }
    }
    assert!(
        (outside3 as f64) < 0.01 * n as f64,
        "{outside3} points outside 3 sigma"
    );
}

#[test]
fn ois_reads_k_records_and_stays_within_descent_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..30u64 {
        let n = rng.random_range(100..=3000);
        let cloud = if trial % 2 == 0 { uniform_cloud(n, trial) } else { cluster_cloud(n, trial) };
        let index = build_index(&cloud, &BuildConfig::default()).unwrap();
        let k = rng.random_range(1..=n);
        let mode = if trial % 3 == 0 { OisMode::ApproxRandomPick } else { OisMode::ExactLeafPick };
        let cfg = SamplingConfig { k, seed_point: None, rng_seed: trial };
        let table = ois_sample(&index, &cfg, mode).unwrap();

        assert_eq!(table.picks.len(), k);
        let mut sorted = table.picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), k, "picks must be distinct");
        assert_eq!(table.counters.point_reads, k as u64, "selection loop reads K records");
        assert!(table.counters.table_lookups <= (k as u64) * index.depth() as u64);
    }
}

#[test]
fn ois_is_deterministic_per_config() {
    let cloud = uniform_cloud(2000, 9);
    let index = build_index(&cloud, &BuildConfig::default()).unwrap();
    for mode in [OisMode::ExactLeafPick, OisMode::ApproxRandomPick] {
        let cfg = SamplingConfig { k: 128, seed_point: None, rng_seed: 5 };
        let a = ois_sample(&index, &cfg, mode).unwrap();
        let b = ois_sample(&index, &cfg, mode).unwrap();
        assert_eq!(a.picks, b.picks);
    }
}

#[test]
fn fps_to_ois_read_ratio_lands_in_the_expected_window() {
    let n = 20_000;
    let k = 512;
    let cloud = uniform_cloud(n, 12);
    let index = build_index(&cloud, &BuildConfig::default()).unwrap();
    let cfg = SamplingConfig::new(k);

    let fps = fps_exact(index.reordered(), &cfg).unwrap();
    let ois = ois_sample(&index, &cfg, OisMode::ExactLeafPick).unwrap();
    assert_eq!(fps.counters.point_reads, (n * k) as u64);

    // OIS total includes the N-read build attribution.
    let ois_reads = ois.counters.point_reads + index.build_stats().point_reads;
    let ratio = fps.counters.point_reads as f64 / ois_reads as f64;
    let k = k as f64;
    assert!(ratio >= 0.1 * k && ratio <= 10.0 * k, "ratio {ratio} outside [0.1K, 10K]");
}

#[test]
fn virtual_seed_voxel_contains_the_centroid() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cloud = uniform_cloud(500, 14);
    let index = build_index(&cloud, &BuildConfig::default()).unwrap();
    for _ in 0..50 {
        let picks: Vec<usize> = (0..5).map(|_| rng.random_range(0..index.len())).collect();
        let code = virtual_seed(&index, &picks).unwrap();
        let mut centroid = [0.0f64; 3];
        for &p in &picks {
            let c = index.reordered().point(p).coords();
            for a in 0..3 {
                centroid[a] += c[a] / picks.len() as f64;
            }
        }
        let voxel = morton_decode(code, index.bounds());
        assert!(voxel.contains(centroid));
    }
}

#[test]
fn coverage_radius_of_full_sample_is_zero() {
    let cloud = uniform_cloud(200, 2);
    let all: Vec<usize> = (0..cloud.len()).collect();
    assert_eq!(coverage_radius(&cloud, &all).unwrap(), 0.0);
}
