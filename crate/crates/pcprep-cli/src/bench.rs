//! Benchmark harness: a method-by-frame grid with medians, savings ratios,
//! workload statistics, and throughput.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;

use pcprep::octree::BuildConfig;

use crate::report::*;
use crate::stages::*;

pub struct BenchPlan {
    pub input: Option<PathBuf>,
    pub gen: Option<GenSpec>,
    pub build_cfg: BuildConfig,
    pub methods: Vec<SampleArg>,
    pub k: usize,
    pub frames: usize,
    pub gather: Option<GatherSpec>,
    pub mode: ModeArg,
    pub radius: Option<f64>,
    pub centrals: usize,
    pub rng_seed: u64,
    pub verify: bool,
    pub workers: usize,
    pub config_echo: serde_json::Value,
}

fn run_frame(plan: &BenchPlan, frame: usize) -> Result<FrameReport> {
    let frame_seed = plan.rng_seed.wrapping_add(frame as u64);
    let ingested = ingest(&plan.input, &plan.gen, frame_seed)?;
    let (index, index_report) = build_stage(&ingested.cloud, &plan.build_cfg)?;

    // FPS runs first when requested so indexed methods can report coverage
    // ratios and savings against it; report order follows the flag order.
    let mut samples: Vec<Option<SampleReport>> = vec![None; plan.methods.len()];
    let fps_outcome = if plan.methods.contains(&SampleArg::Fps) {
        Some(sample_stage(&index, SampleArg::Fps, plan.k, frame_seed, true, None)?)
    } else {
        None
    };
    for (slot, &method) in plan.methods.iter().enumerate() {
        if method == SampleArg::Fps {
            samples[slot] = fps_outcome.as_ref().map(|o| o.report.clone());
        } else {
            let outcome =
                sample_stage(&index, method, plan.k, frame_seed, true, fps_outcome.as_ref())?;
            samples[slot] = Some(outcome.report);
        }
    }
    let samples: Vec<SampleReport> = samples.into_iter().flatten().collect();

    // Bench gathers over the full frame, independent of the sampling grid.
    let (gather_report, feature_map_report) = match &plan.gather {
        Some(spec) => {
            let centrals = pick_centrals(index.len(), plan.centrals, frame_seed);
            let outcome = gather_stage(
                &index,
                spec,
                plan.mode,
                plan.radius,
                &centrals,
                frame_seed,
                1,
                plan.verify,
            )?;
            let fm = feature_map_stage(&index, &outcome.sets, spec.k)?;
            (Some(outcome.report), Some(fm.report))
        }
        None => (None, None),
    };

    Ok(FrameReport {
        frame,
        ingest: ingested.report,
        index: index_report,
        samples,
        gather_index: None,
        gather: gather_report,
        feature_map: feature_map_report,
    })
}

pub fn run(plan: &BenchPlan) -> Result<RunReport> {
    let started = Instant::now();
    let frames: Vec<FrameReport> = if plan.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .context("building worker pool")?;
        pool.install(|| {
            (0..plan.frames)
                .into_par_iter()
                .map(|f| run_frame(plan, f))
                .collect::<Result<Vec<FrameReport>>>()
        })?
    } else {
        (0..plan.frames).map(|f| run_frame(plan, f)).collect::<Result<_>>()?
    };
    let elapsed = started.elapsed().as_secs_f64();

    let mut methods = Vec::new();
    for (slot, &method) in plan.methods.iter().enumerate() {
        let per_frame: Vec<&SampleReport> = frames.iter().map(|f| &f.samples[slot]).collect();
        let mut reads: Vec<u64> = per_frame.iter().map(|s| s.counters.point_reads).collect();
        let mut coverage: Vec<f64> =
            per_frame.iter().filter_map(|s| s.coverage_radius).collect();
        let mut ratios: Vec<f64> =
            per_frame.iter().filter_map(|s| s.coverage_ratio_vs_fps).collect();
        let mut savings: Vec<f64> =
            per_frame.iter().filter_map(|s| s.savings_vs_fps.as_ref().map(|v| v.ratio)).collect();
        methods.push(MethodAggregate {
            method: method.name().to_string(),
            median_point_reads: median_u64(&mut reads),
            median_coverage_radius: median_f64(&mut coverage),
            median_coverage_ratio_vs_fps: median_f64(&mut ratios),
            median_savings_vs_fps: median_f64(&mut savings),
        });
    }

    let gather = plan.gather.as_ref().map(|_| {
        let all: Vec<&GatherReport> = frames.iter().filter_map(|f| f.gather.as_ref()).collect();
        let total_centrals: u64 =
            all.iter().map(|g| g.workload.sort_candidates_per_central.len() as u64).sum();
        let total_sort: u64 = all
            .iter()
            .map(|g| g.workload.sort_candidates_per_central.iter().sum::<u64>())
            .sum();
        let mut recalls: Vec<f64> = all.iter().filter_map(|g| g.recall_vs_oracle).collect();
        GatherAggregate {
            mean_sort_candidates: total_sort as f64 / total_centrals.max(1) as f64,
            max_sort_candidates: all
                .iter()
                .map(|g| g.workload.max_sort_candidates)
                .max()
                .unwrap_or(0),
            mean_rings_expanded: all.iter().map(|g| g.workload.mean_rings_expanded).sum::<f64>()
                / all.len().max(1) as f64,
            median_recall: median_f64(&mut recalls),
        }
    });

    Ok(RunReport {
        tool: ToolInfo { name: "pcprep", version: env!("CARGO_PKG_VERSION") },
        command: "bench".into(),
        config: plan.config_echo.clone(),
        aggregate: AggregateReport {
            frames: frames.len(),
            frames_per_second: if elapsed > 0.0 { frames.len() as f64 / elapsed } else { 0.0 },
            methods,
            gather,
        },
        frames,
    })
}
