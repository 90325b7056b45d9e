//! The chained pipeline: ingest -> index -> sample -> gather -> feature map.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use pcprep::container::save_index;
use pcprep::gather::write_feature_map;
use pcprep::octree::BuildConfig;

use crate::report::*;
use crate::stages::*;

pub struct PipelinePlan {
    pub input: Option<PathBuf>,
    pub gen: Option<GenSpec>,
    pub build_cfg: BuildConfig,
    pub sample: Option<(SampleArg, usize)>,
    pub gather: Option<GatherSpec>,
    pub mode: ModeArg,
    pub radius: Option<f64>,
    pub centrals: usize,
    pub rng_seed: u64,
    pub verify: bool,
    pub workers: usize,
    pub export_index: Option<PathBuf>,
    pub export_featuremap: Option<PathBuf>,
    pub config_echo: serde_json::Value,
}

pub fn run(plan: &PipelinePlan) -> Result<RunReport> {
    let started = Instant::now();
    let ingested = ingest(&plan.input, &plan.gen, plan.rng_seed)?;
    let (index, index_report) = build_stage(&ingested.cloud, &plan.build_cfg)?;
    if let Some(path) = &plan.export_index {
        save_index(path, &index).with_context(|| format!("exporting {}", path.display()))?;
    }

    let mut samples = Vec::new();
    let mut sample_outcome = None;
    if let Some((method, k)) = plan.sample {
        // Under --verify an FPS run serves as the coverage reference.
        let reference = if plan.verify && method != SampleArg::Fps {
            Some(sample_stage(&index, SampleArg::Fps, k, plan.rng_seed, true, None)?)
        } else {
            None
        };
        let outcome =
            sample_stage(&index, method, k, plan.rng_seed, plan.verify, reference.as_ref())?;
        samples.push(outcome.report.clone());
        sample_outcome = Some(outcome);
    }

    // Gathering runs over the down-sampled cloud when a sampling stage is
    // present, otherwise over the input cloud.
    let mut gather_report = None;
    let mut gather_index_report = None;
    let mut feature_map_report = None;
    if let Some(spec) = &plan.gather {
        let (base_index, base_report) = match &sample_outcome {
            Some(outcome) => {
                let subcloud = sampled_subcloud(&index, &outcome.table)?;
                let (sub_index, sub_report) = build_stage(&subcloud, &plan.build_cfg)?;
                (sub_index, Some(sub_report))
            }
            None => (index, None),
        };
        gather_index_report = base_report;
        let centrals = pick_centrals(base_index.len(), plan.centrals, plan.rng_seed);
        let outcome = gather_stage(
            &base_index,
            spec,
            plan.mode,
            plan.radius,
            &centrals,
            plan.rng_seed,
            plan.workers,
            plan.verify,
        )?;
        let fm = feature_map_stage(&base_index, &outcome.sets, spec.k)?;
        if let Some(path) = &plan.export_featuremap {
            write_feature_map(path, &fm.map)
                .with_context(|| format!("exporting {}", path.display()))?;
        }
        feature_map_report = Some(fm.report);
        gather_report = Some(outcome.report);
    }

    let elapsed = started.elapsed().as_secs_f64();
    let aggregate = AggregateReport {
        frames: 1,
        frames_per_second: if elapsed > 0.0 { 1.0 / elapsed } else { 0.0 },
        methods: samples
            .iter()
            .map(|s| MethodAggregate {
                method: s.method.clone(),
                median_point_reads: s.counters.point_reads,
                median_coverage_radius: s.coverage_radius,
                median_coverage_ratio_vs_fps: s.coverage_ratio_vs_fps,
                median_savings_vs_fps: s.savings_vs_fps.as_ref().map(|v| v.ratio),
            })
            .collect(),
        gather: gather_report.as_ref().map(|g| GatherAggregate {
            mean_sort_candidates: g.workload.mean_sort_candidates,
            max_sort_candidates: g.workload.max_sort_candidates,
            mean_rings_expanded: g.workload.mean_rings_expanded,
            median_recall: g.recall_vs_oracle,
        }),
    };

    Ok(RunReport {
        tool: ToolInfo { name: "pcprep", version: env!("CARGO_PKG_VERSION") },
        command: "pipeline".into(),
        config: plan.config_echo.clone(),
        frames: vec![FrameReport {
            frame: 0,
            ingest: ingested.report,
            index: index_report,
            samples,
            gather_index: gather_index_report,
            gather: gather_report,
            feature_map: feature_map_report,
        }],
        aggregate,
    })
}
