//! Stage runners shared by the pipeline and bench commands.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pcprep::gather::{
    assemble_feature_map, brute_ball, brute_knn, recall, veg_ball, veg_ball_one, veg_knn,
    veg_knn_one, FeatureMap, GatherMode, NeighborSet,
};
use pcprep::geom::{Point3, PointCloud};
use pcprep::io::{generate, read_bin_f32x4, read_xyz, FrameFormat, Generator, MixtureComponent};
use pcprep::octree::{build_index, BuildConfig, OctreeIndex};
use pcprep::sampling::{
    coverage_radius, fps_exact, ois_sample, random_sample, OisMode, SampledPointTable,
    SamplingConfig,
};
use pcprep::stats::{AccessCounters, TimeMerge};

use crate::report::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SampleArg {
    Fps,
    Rs,
    Ois,
    OisApprox,
}

impl SampleArg {
    pub fn name(&self) -> &'static str {
        match self {
            SampleArg::Fps => "fps",
            SampleArg::Rs => "rs",
            SampleArg::Ois => "ois",
            SampleArg::OisApprox => "ois-approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Paper,
    Strict,
    SemiApprox,
}

impl ModeArg {
    pub fn name(&self) -> &'static str {
        match self {
            ModeArg::Paper => "paper",
            ModeArg::Strict => "strict",
            ModeArg::SemiApprox => "semi-approx",
        }
    }

    pub fn to_mode(self) -> GatherMode {
        match self {
            ModeArg::Paper => GatherMode::Paper,
            ModeArg::Strict => GatherMode::Strict,
            ModeArg::SemiApprox => GatherMode::SemiApprox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Modelnet40,
    Shapenet,
    S3dis,
    Kitti,
}

impl Preset {
    /// Input sizes of the preset tasks.
    pub fn k(&self) -> usize {
        match self {
            Preset::Modelnet40 => 1024,
            Preset::Shapenet => 2048,
            Preset::S3dis => 4096,
            Preset::Kitti => 16384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatherMethod {
    VegKnn,
    VegBall,
    BruteKnn,
    BruteBall,
}

impl GatherMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GatherMethod::VegKnn => "veg-knn",
            GatherMethod::VegBall => "veg-ball",
            GatherMethod::BruteKnn => "brute-knn",
            GatherMethod::BruteBall => "brute-ball",
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self, GatherMethod::VegBall | GatherMethod::BruteBall)
    }
}

/// Parsed `--gather METHOD[:K]` value.
#[derive(Debug, Clone, Copy)]
pub struct GatherSpec {
    pub method: GatherMethod,
    pub k: usize,
}

pub fn parse_gather_spec(text: &str) -> Result<GatherSpec> {
    let (name, k) = match text.split_once(':') {
        Some((name, k)) => {
            (name, k.parse::<usize>().with_context(|| format!("bad gather width {k:?}"))?)
        }
        None => (text, 32),
    };
    let method = match name {
        "veg-knn" => GatherMethod::VegKnn,
        "veg-ball" => GatherMethod::VegBall,
        "brute-knn" => GatherMethod::BruteKnn,
        "brute-ball" => GatherMethod::BruteBall,
        other => bail!("unknown gather method {other:?} (expected veg-knn, veg-ball, brute-knn, brute-ball)"),
    };
    Ok(GatherSpec { method, k })
}

/// Parsed `--gen KIND:...` value.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub n: usize,
    pub generator: Generator,
    pub text: String,
}

/// `uniform:N` or `gaussian_mixture:N:COMPONENTS:SIGMA` (component centers
/// are drawn deterministically from the run seed).
pub fn parse_gen_spec(text: &str, rng_seed: u64) -> Result<GenSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["uniform", n] => Ok(GenSpec {
            n: n.parse().with_context(|| format!("bad point count {n:?}"))?,
            generator: Generator::Uniform,
            text: text.to_string(),
        }),
        ["gaussian_mixture", n, comps, sigma] => {
            let n: usize = n.parse().with_context(|| format!("bad point count {n:?}"))?;
            let comps: usize = comps.parse().with_context(|| format!("bad component count"))?;
            let sigma: f64 = sigma.parse().with_context(|| format!("bad sigma {sigma:?}"))?;
            if comps == 0 {
                bail!("gaussian_mixture needs at least one component");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x6d69_7874_7572_6573);
            let components = (0..comps)
                .map(|_| MixtureComponent {
                    weight: 1.0 / comps as f64,
                    mean: [rng.random(), rng.random(), rng.random()],
                    sigma,
                })
                .collect();
            Ok(GenSpec { n, generator: Generator::GaussianMixture(components), text: text.to_string() })
        }
        _ => bail!("bad --gen spec {text:?} (expected uniform:N or gaussian_mixture:N:COMPONENTS:SIGMA)"),
    }
}

pub struct IngestOutcome {
    pub cloud: PointCloud,
    pub report: IngestReport,
}

pub fn ingest(
    input: &Option<PathBuf>,
    gen: &Option<GenSpec>,
    frame_seed: u64,
) -> Result<IngestOutcome> {
    let started = Instant::now();
    let (cloud, source) = match (input, gen) {
        (Some(path), None) => {
            let cloud = match FrameFormat::from_path(path) {
                FrameFormat::XyzAscii => read_xyz(path),
                FrameFormat::BinF32x4 => read_bin_f32x4(path),
            }
            .with_context(|| format!("reading {}", path.display()))?;
            (cloud, path.display().to_string())
        }
        (None, Some(spec)) => {
            let cloud = generate(&spec.generator, spec.n, frame_seed)?;
            (cloud, spec.text.clone())
        }
        _ => return Err(anyhow!("exactly one of --in or --gen is required")),
    };
    let feature_dim = cloud.feature_dim()?;
    let report = IngestReport {
        source,
        n: cloud.len(),
        feature_dim,
        wall_time_ns: started.elapsed().as_nanos() as u64,
    };
    Ok(IngestOutcome { cloud, report })
}

pub fn build_stage(cloud: &PointCloud, cfg: &BuildConfig) -> Result<(OctreeIndex, IndexReport)> {
    let index = build_index(cloud, cfg)?;
    let report = IndexReport {
        depth: index.depth(),
        nodes: index.nodes().len(),
        leaves: index.leaves().len(),
        counters: CountersReport::from(index.build_stats()),
    };
    Ok((index, report))
}

pub struct SampleOutcome {
    pub table: SampledPointTable,
    pub report: SampleReport,
}

/// Runs one sampling method. Coverage is computed when `with_coverage` is
/// set; the FPS reference (for coverage ratios and savings) is reused across
/// methods when provided.
pub fn sample_stage(
    index: &OctreeIndex,
    method: SampleArg,
    k: usize,
    rng_seed: u64,
    with_coverage: bool,
    fps_reference: Option<&SampleOutcome>,
) -> Result<SampleOutcome> {
    let cfg = SamplingConfig { k, seed_point: None, rng_seed };
    let table = match method {
        SampleArg::Fps => fps_exact(index.reordered(), &cfg)?,
        SampleArg::Rs => random_sample(index.reordered(), &cfg)?,
        SampleArg::Ois => ois_sample(index, &cfg, OisMode::ExactLeafPick)?,
        SampleArg::OisApprox => ois_sample(index, &cfg, OisMode::ApproxRandomPick)?,
    };

    let coverage = if with_coverage {
        Some(coverage_radius(index.reordered(), &table.picks)?)
    } else {
        None
    };
    let coverage_ratio = match (coverage, fps_reference) {
        (Some(cov), Some(reference)) => {
            reference.report.coverage_radius.map(|fps_cov| cov / fps_cov)
        }
        _ => None,
    };

    let is_indexed = matches!(method, SampleArg::Ois | SampleArg::OisApprox);
    let build_overhead = is_indexed.then(|| {
        let build = index.build_stats();
        let build_reads = build.point_reads as f64;
        let select_reads = table.counters.point_reads as f64;
        let build_wall = build.wall_time.as_secs_f64();
        let select_wall = table.counters.wall_time.as_secs_f64();
        BuildOverheadReport {
            access_fraction: build_reads / (build_reads + select_reads),
            wall_fraction: if build_wall + select_wall > 0.0 {
                build_wall / (build_wall + select_wall)
            } else {
                0.0
            },
            reference_band: "0.25-0.8",
        }
    });

    // Memory-access saving of an indexed run against the FPS baseline: the
    // candidate side carries the selection reads plus the N-read build
    // attribution.
    let savings = match (is_indexed, fps_reference) {
        (true, Some(reference)) => {
            let n = index.len() as f64;
            let kf = k as f64;
            let baseline = reference.table.counters.accesses();
            let candidate =
                table.counters.point_reads + index.build_stats().point_reads;
            Some(SavingsReport {
                baseline: reference.report.method.clone(),
                candidate: method.name().to_string(),
                baseline_accesses: baseline,
                candidate_accesses_incl_build: candidate,
                ratio: baseline as f64 / candidate as f64,
                closed_form: kf * n / (n + kf),
            })
        }
        _ => None,
    };

    let report = SampleReport {
        method: method.name().to_string(),
        k,
        counters: CountersReport::from(&table.counters),
        coverage_radius: coverage,
        coverage_ratio_vs_fps: coverage_ratio,
        build_overhead,
        savings_vs_fps: savings,
    };
    Ok(SampleOutcome { table, report })
}

/// Picks `count` distinct central positions from the base cloud.
pub fn pick_centrals(n: usize, count: usize, rng_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(0xCE57A15);
    let mut positions: Vec<usize> = (0..n).collect();
    let take = count.min(n);
    for i in 0..take {
        let j = rng.random_range(i..n);
        positions.swap(i, j);
    }
    positions.truncate(take);
    positions
}

pub struct GatherOutcome {
    pub sets: Vec<NeighborSet>,
    pub report: GatherReport,
}

pub fn gather_stage(
    index: &OctreeIndex,
    spec: &GatherSpec,
    mode: ModeArg,
    radius: Option<f64>,
    centrals: &[usize],
    rng_seed: u64,
    workers: usize,
    verify: bool,
) -> Result<GatherOutcome> {
    let started = Instant::now();
    let mut counters = AccessCounters::default();
    let sets: Vec<NeighborSet> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .context("building worker pool")?;
        let results: Vec<pcprep::Result<(NeighborSet, AccessCounters)>> = pool.install(|| {
            centrals
                .par_iter()
                .map(|&central| match spec.method {
                    GatherMethod::VegKnn => {
                        Ok(veg_knn_one(index, central, spec.k, mode.to_mode(), rng_seed))
                    }
                    GatherMethod::VegBall => {
                        Ok(veg_ball_one(index, central, radius.expect("validated"), spec.k))
                    }
                    GatherMethod::BruteKnn => {
                        let mut local = AccessCounters::default();
                        let mut sets =
                            brute_knn(index.reordered(), &[central], spec.k, &mut local)?;
                        Ok((sets.remove(0), local))
                    }
                    GatherMethod::BruteBall => {
                        let mut local = AccessCounters::default();
                        let mut sets = brute_ball(
                            index.reordered(),
                            &[central],
                            radius.expect("validated"),
                            spec.k,
                            &mut local,
                        )?;
                        Ok((sets.remove(0), local))
                    }
                })
                .collect()
        });
        let mut sets = Vec::with_capacity(centrals.len());
        for result in results {
            let (set, local) = result?;
            counters = counters.merge(&local, TimeMerge::Parallel);
            sets.push(set);
        }
        sets
    } else {
        match spec.method {
            GatherMethod::VegKnn => {
                veg_knn(index, centrals, spec.k, mode.to_mode(), rng_seed, &mut counters)?
            }
            GatherMethod::VegBall => {
                veg_ball(index, centrals, radius.expect("validated"), spec.k, &mut counters)?
            }
            GatherMethod::BruteKnn => {
                brute_knn(index.reordered(), centrals, spec.k, &mut counters)?
            }
            GatherMethod::BruteBall => brute_ball(
                index.reordered(),
                centrals,
                radius.expect("validated"),
                spec.k,
                &mut counters,
            )?,
        }
    };
    counters.wall_time = started.elapsed();

    let per_central: Vec<u64> = sets.iter().map(|s| s.workload.sort_candidates).collect();
    let n_sets = sets.len().max(1) as f64;
    let workload = WorkloadReport {
        mean_sort_candidates: per_central.iter().sum::<u64>() as f64 / n_sets,
        max_sort_candidates: per_central.iter().copied().max().unwrap_or(0),
        mean_distance_evals: sets.iter().map(|s| s.workload.distance_evals).sum::<u64>() as f64
            / n_sets,
        mean_rings_expanded: sets.iter().map(|s| s.workload.rings_expanded as u64).sum::<u64>()
            as f64
            / n_sets,
        sort_candidates_per_central: per_central,
    };

    // Oracle verification: compare against the brute-force route.
    let (recall_value, equivalence, oracle_counters) = if verify {
        let mut oracle_c = AccessCounters::default();
        let oracle = if spec.method.is_ball() {
            brute_ball(index.reordered(), centrals, radius.expect("validated"), spec.k, &mut oracle_c)?
        } else {
            brute_knn(index.reordered(), centrals, spec.k, &mut oracle_c)?
        };
        let equal = sets.iter().zip(&oracle).all(|(a, b)| {
            let mut x = a.neighbors.clone();
            let mut y = b.neighbors.clone();
            x.sort_unstable();
            y.sort_unstable();
            x == y
        });
        let r = recall(&sets, &oracle)?;
        (Some(r), Some(equal), Some(CountersReport::from(&oracle_c)))
    } else {
        (None, None, None)
    };

    let report = GatherReport {
        method: spec.method.name().to_string(),
        mode: (!spec.method.is_ball()).then(|| mode.name().to_string()),
        k: spec.k,
        radius,
        centrals: centrals.len(),
        counters: CountersReport::from(&counters),
        workload,
        recall_vs_oracle: recall_value,
        equivalence_vs_oracle: equivalence,
        oracle_counters,
    };
    Ok(GatherOutcome { sets, report })
}

pub struct FeatureMapOutcome {
    pub map: FeatureMap,
    pub report: FeatureMapReport,
}

pub fn feature_map_stage(
    index: &OctreeIndex,
    sets: &[NeighborSet],
    k: usize,
) -> Result<FeatureMapOutcome> {
    let map = assemble_feature_map(index, sets, k)?;
    let report = FeatureMapReport {
        num_centrals: map.num_centrals,
        k: map.k,
        channels: map.channels,
        values: map.data.len(),
    };
    Ok(FeatureMapOutcome { map, report })
}

/// Builds the sampled sub-cloud (fresh original indices in pick order).
pub fn sampled_subcloud(index: &OctreeIndex, table: &SampledPointTable) -> Result<PointCloud> {
    let points: Vec<Point3> = table
        .picks
        .iter()
        .enumerate()
        .map(|(i, &pos)| {
            let p = index.reordered().point(pos);
            Point3::with_feature(p.x, p.y, p.z, p.feature.clone(), i)
        })
        .collect();
    Ok(PointCloud::new(points)?)
}
