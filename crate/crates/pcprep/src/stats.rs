//! Access counters that make memory-traffic and workload claims measurable.
//!
//! "Memory access" here means point-record reads/writes (coordinates plus
//! features). Table lookups are tracked separately: the index tables are
//! small, point records are the bulk payload.

use std::time::Duration;

use crate::error::{Error, Result};

/// Per-run (or per-worker) access totals. Counts only grow while a run is in
/// progress; workers keep private counters and merge them afterwards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccessCounters {
    /// Point-record reads (one per record, not per byte).
    pub point_reads: u64,
    /// Point-record writes, e.g. placing the reordered copy.
    pub point_writes: u64,
    /// Index-table node visits (descent and locate steps).
    pub table_lookups: u64,
    /// Point-to-central distance computations used to select neighbors.
    /// Distances recomputed for reporting on already-read records do not
    /// count.
    pub distance_evals: u64,
    /// Candidates entering a ranking/sort stage.
    pub sort_candidates: u64,
    /// Informative only; excluded from determinism comparisons.
    pub wall_time: Duration,
    /// Set when any counter saturated instead of overflowing.
    pub saturated: bool,
}

/// How `merge` combines wall time: workers that ran side by side take the
/// max, stages that ran back to back add up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMerge {
    Sequential,
    Parallel,
}

impl AccessCounters {
    pub fn add_point_reads(&mut self, n: u64) {
        let (v, sat) = self.point_reads.overflowing_add(n);
        self.point_reads = if sat { u64::MAX } else { v };
        self.saturated |= sat;
    }

    pub fn add_point_writes(&mut self, n: u64) {
        let (v, sat) = self.point_writes.overflowing_add(n);
        self.point_writes = if sat { u64::MAX } else { v };
        self.saturated |= sat;
    }

    pub fn add_table_lookups(&mut self, n: u64) {
        let (v, sat) = self.table_lookups.overflowing_add(n);
        self.table_lookups = if sat { u64::MAX } else { v };
        self.saturated |= sat;
    }

    pub fn add_distance_evals(&mut self, n: u64) {
        let (v, sat) = self.distance_evals.overflowing_add(n);
        self.distance_evals = if sat { u64::MAX } else { v };
        self.saturated |= sat;
    }

    pub fn add_sort_candidates(&mut self, n: u64) {
        let (v, sat) = self.sort_candidates.overflowing_add(n);
        self.sort_candidates = if sat { u64::MAX } else { v };
        self.saturated |= sat;
    }

    /// Total point-record traffic.
    pub fn accesses(&self) -> u64 {
        self.point_reads.saturating_add(self.point_writes)
    }

    /// Field-wise sum; saturates on overflow and flags it.
    pub fn merge(&self, other: &AccessCounters, time: TimeMerge) -> AccessCounters {
        let mut saturated = self.saturated || other.saturated;
        let mut add = |a: u64, b: u64| {
            let (v, sat) = a.overflowing_add(b);
            saturated |= sat;
            if sat {
                u64::MAX
            } else {
                v
            }
        };
        let point_reads = add(self.point_reads, other.point_reads);
        let point_writes = add(self.point_writes, other.point_writes);
        let table_lookups = add(self.table_lookups, other.table_lookups);
        let distance_evals = add(self.distance_evals, other.distance_evals);
        let sort_candidates = add(self.sort_candidates, other.sort_candidates);
        AccessCounters {
            point_reads,
            point_writes,
            table_lookups,
            distance_evals,
            sort_candidates,
            wall_time: match time {
                TimeMerge::Sequential => self.wall_time.saturating_add(other.wall_time),
                TimeMerge::Parallel => self.wall_time.max(other.wall_time),
            },
            saturated,
        }
    }
}

/// Memory-access saving of `candidate` relative to `baseline`:
/// baseline traffic divided by candidate traffic (reads + writes).
pub fn savings_ratio(baseline: &AccessCounters, candidate: &AccessCounters) -> Result<f64> {
    let denom = candidate.accesses();
    if denom == 0 {
        return Err(Error::InvalidParams(
            "candidate counters carry no point accesses".into(),
        ));
    }
    Ok(baseline.accesses() as f64 / denom as f64)
}
