use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wall-clock time per stage, in milliseconds from a monotonic clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load_ms: f64,
    pub sample_ms: f64,
    pub extract_ms: f64,
    pub dedup_ms: f64,
    pub classify_ms: f64,
    pub assemble_ms: f64,
    pub write_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaneCounts {
    pub uv: usize,
    pub ut: usize,
    pub vt: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub objects: usize,
    pub workers: usize,
    /// Grasp candidates generated over all objects.
    pub candidates: usize,
    /// Draws rejected for a degenerate normal.
    pub candidates_skipped: usize,
    /// Candidates whose closing volume holds no object point.
    pub regions_empty: usize,
    /// Candidates with at least one point in the closing volume.
    pub regions_extracted: usize,
    /// Extracted regions dropped for having fewer than `min_points` points.
    pub regions_below_min_points: usize,
    /// Grids entering deduplication (one per kept region).
    pub grids_total: usize,
    pub grids_unique: usize,
    /// `grids_unique / grids_total`; absent when nothing was extracted.
    pub dedup_ratio: Option<f64>,
    /// `grids_total / grids_unique`.
    pub compression_factor: Option<f64>,
    /// Size of the grid-set file holding every grid.
    pub naive_bytes: u64,
    /// Size of the grid-set file holding the unique grids.
    pub unique_bytes: u64,
    /// `naive_bytes / unique_bytes`.
    pub storage_factor: Option<f64>,
    pub composite_points: usize,
    pub plane_counts: PlaneCounts,
    pub timings: StageTimings,
    pub warnings: Vec<String>,
}

pub const NO_INTERSECTIONS_WARNING: &str =
    "no intersections: no grasp candidate's closing volume contained an object point";

impl StatsReport {
    /// Fills in the ratio fields and warnings from the counts.
    pub fn finalize(&mut self) {
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        self.dedup_ratio = ratio(self.grids_unique as f64, self.grids_total as f64);
        self.compression_factor = ratio(self.grids_total as f64, self.grids_unique as f64);
        self.storage_factor = ratio(self.naive_bytes as f64, self.unique_bytes as f64);
        if self.regions_extracted == 0 && !self.warnings.iter().any(|w| w == NO_INTERSECTIONS_WARNING)
        {
            self.warnings.push(NO_INTERSECTIONS_WARNING.to_owned());
        }
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.digits$}"))
}

/// Human-readable summary plus the JSON form of the report.
pub fn report_stats(report: &StatsReport) -> Result<(String, String)> {
    let r = report;
    let t = &r.timings;
    let mut s = String::new();
    let _ = writeln!(s, "objects            {:>12}", r.objects);
    let _ = writeln!(s, "workers            {:>12}", r.workers);
    let _ = writeln!(s, "grasp candidates   {:>12}  (skipped {})", r.candidates, r.candidates_skipped);
    let _ = writeln!(
        s,
        "regions            {:>12}  extracted, {} empty, {} below min_points",
        r.regions_extracted, r.regions_empty, r.regions_below_min_points
    );
    let _ = writeln!(s, "grids              {:>12}  total", r.grids_total);
    let _ = writeln!(s, "                   {:>12}  unique", r.grids_unique);
    let _ = writeln!(s, "dedup ratio        {:>12}", opt(r.dedup_ratio, 4));
    let _ = writeln!(s, "compression factor {:>12}", opt(r.compression_factor, 2));
    let _ = writeln!(s, "storage naive      {:>12}  bytes", r.naive_bytes);
    let _ = writeln!(s, "storage unique     {:>12}  bytes  (factor {})", r.unique_bytes, opt(r.storage_factor, 2));
    let _ = writeln!(
        s,
        "plane classes      uv {} / ut {} / vt {}",
        r.plane_counts.uv, r.plane_counts.ut, r.plane_counts.vt
    );
    let _ = writeln!(s, "composite points   {:>12}", r.composite_points);
    let _ = writeln!(s, "timings (ms)");
    for (name, ms) in [
        ("load", t.load_ms),
        ("sample", t.sample_ms),
        ("extract", t.extract_ms),
        ("dedup", t.dedup_ms),
        ("classify", t.classify_ms),
        ("assemble", t.assemble_ms),
        ("write", t.write_ms),
        ("total", t.total_ms),
    ] {
        let _ = writeln!(s, "  {name:<16} {ms:>12.1}");
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let mut json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Serialization(e.to_string()))?;
    json.push('\n');
    Ok((s, json))
}
