//! JSON report schema. Field names ending in `wall_time_ns`, the
//! `wall_fraction` entries, and `frames_per_second` are informative timings;
//! everything else is deterministic for a fixed seed and flag set.

use pcprep::stats::AccessCounters;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CountersReport {
    pub point_reads: u64,
    pub point_writes: u64,
    pub table_lookups: u64,
    pub distance_evals: u64,
    pub sort_candidates: u64,
    pub saturated: bool,
    pub wall_time_ns: u64,
}

impl From<&AccessCounters> for CountersReport {
    fn from(c: &AccessCounters) -> Self {
        Self {
            point_reads: c.point_reads,
            point_writes: c.point_writes,
            table_lookups: c.table_lookups,
            distance_evals: c.distance_evals,
            sort_candidates: c.sort_candidates,
            saturated: c.saturated,
            wall_time_ns: c.wall_time.as_nanos() as u64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub source: String,
    pub n: usize,
    pub feature_dim: usize,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub depth: u8,
    pub nodes: usize,
    pub leaves: usize,
    pub counters: CountersReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildOverheadReport {
    /// Build point reads over build-plus-selection point reads.
    pub access_fraction: f64,
    /// Same split measured on wall time; informative only.
    pub wall_fraction: f64,
    /// Band observed on the reference hardware campaign, for comparison.
    pub reference_band: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SavingsReport {
    pub baseline: String,
    pub candidate: String,
    pub baseline_accesses: u64,
    /// Candidate traffic including the index-build read attribution.
    pub candidate_accesses_incl_build: u64,
    pub ratio: f64,
    /// K*N/(N+K) under the stated counting rules.
    pub closed_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub method: String,
    pub k: usize,
    pub counters: CountersReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_ratio_vs_fps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_overhead: Option<BuildOverheadReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub savings_vs_fps: Option<SavingsReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkloadReport {
    pub mean_sort_candidates: f64,
    pub max_sort_candidates: u64,
    pub mean_distance_evals: f64,
    pub mean_rings_expanded: f64,
    /// Per-central final-sort sizes, in central order.
    pub sort_candidates_per_central: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GatherReport {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub centrals: usize,
    pub counters: CountersReport,
    pub workload: WorkloadReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall_vs_oracle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence_vs_oracle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_counters: Option<CountersReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureMapReport {
    pub num_centrals: usize,
    pub k: usize,
    pub channels: usize,
    pub values: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameReport {
    pub frame: usize,
    pub ingest: IngestReport,
    pub index: IndexReport,
    pub samples: Vec<SampleReport>,
    /// Index built over the down-sampled cloud when gathering follows a
    /// sampling stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gather_index: Option<IndexReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gather: Option<GatherReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<FeatureMapReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodAggregate {
    pub method: String,
    pub median_point_reads: u64,
    pub median_coverage_radius: Option<f64>,
    pub median_coverage_ratio_vs_fps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_savings_vs_fps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GatherAggregate {
    pub mean_sort_candidates: f64,
    pub max_sort_candidates: u64,
    pub mean_rings_expanded: f64,
    pub median_recall: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub frames: usize,
    pub frames_per_second: f64,
    pub methods: Vec<MethodAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gather: Option<GatherAggregate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub command: String,
    pub config: serde_json::Value,
    pub frames: Vec<FrameReport>,
    pub aggregate: AggregateReport,
}

pub fn median_u64(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[values.len() / 2]
}

pub fn median_f64(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[values.len() / 2])
}
