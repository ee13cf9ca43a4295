//! Evaluation reports and their aggregation into result tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snoic_core::metrics::MetricsReport;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::io;

pub const VERSION: &str = concat!("snoic ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineReport {
    pub threshold: f64,
    pub metrics: MetricsReport,
}

/// Everything measured by one evaluation, together with the configuration
/// that produced the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub dataset: String,
    pub r: f64,
    pub variant: String,
    pub seed: u64,
    pub split_digest: String,
    /// Accuracy of the (M+1)-way predictions on test examples of known intents.
    pub known_accuracy: f64,
    pub model: MetricsReport,
    pub baseline: BaselineReport,
    pub config: ExperimentConfig,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// Mean metrics of all runs sharing a dataset, ratio and variant, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub r: f64,
    pub variant: String,
    pub runs: usize,
    pub accuracy: f64,
    pub f1_all: f64,
    pub f1_known: f64,
    pub f1_open: f64,
}

fn percent(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}

/// Groups reports by (dataset, r, variant) and averages them; rows are
/// sorted by r, then dataset, then variant.
pub fn aggregate(reports: &[RunReport]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(u64, &str, &str), Vec<&MetricsReport>> = BTreeMap::new();
    for rep in reports {
        // non-negative floats order like their bit patterns
        groups.entry((rep.r.to_bits(), &rep.dataset, &rep.variant)).or_default().push(&rep.model);
    }
    groups
        .into_iter()
        .map(|((r, dataset, variant), runs)| {
            let mean = |f: fn(&MetricsReport) -> f64| percent(runs.iter().map(|m| f(m)).sum::<f64>() / runs.len() as f64);
            ReportRow {
                dataset: dataset.into(),
                r: f64::from_bits(r),
                variant: variant.into(),
                runs: runs.len(),
                accuracy: mean(|m| m.accuracy),
                f1_all: mean(|m| m.f1_all),
                f1_known: mean(|m| m.f1_known),
                f1_open: mean(|m| m.f1_open),
            }
        })
        .collect()
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "r", "variant", "accuracy", "f1_all", "f1_known", "f1_open"]).expect("in-memory csv");
    for row in rows {
        w.write_record([
            row.dataset.clone(),
            row.r.to_string(),
            row.variant.clone(),
            format!("{:.2}", row.accuracy),
            format!("{:.2}", row.f1_all),
            format!("{:.2}", row.f1_known),
            format!("{:.2}", row.f1_open),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Report files matching a glob pattern, in path order.
pub fn load_reports(pattern: &str) -> Result<Vec<(PathBuf, RunReport)>> {
    let paths = glob::glob(pattern).map_err(|e| Error::Usage(format!("bad glob {pattern}: {e}")))?;
    let mut paths: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("no files match {pattern}")));
    }
    paths.into_iter().map(|p| io::read_json(&p).map(|r| (p, r))).collect()
}

pub fn save_table(dir: &Path, rows: &[ReportRow]) -> Result<()> {
    io::write_bytes(&dir.join("report.csv"), &rows_to_csv(rows))?;
    io::write_json(&dir.join("report.json"), &rows)
}
