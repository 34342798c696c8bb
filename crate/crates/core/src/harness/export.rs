use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::trainer::EvalReport;

/// Evaluations averaged for the per-run summary.
pub const SUMMARY_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub evaluations: usize,
    pub window: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_aa: f64,
    pub mean_ae: f64,
}

impl RunSummary {
    pub fn of(report: &EvalReport, window: usize) -> Self {
        let start = report.rows.len().saturating_sub(window);
        let tail = &report.rows[start..];
        let n = tail.len() as f64;
        let (mean_reward, std_reward) = report.last_stats(window);
        Self {
            variant: report.variant.clone(),
            gamma: report.gamma,
            seed: report.seed,
            evaluations: report.rows.len(),
            window: tail.len(),
            mean_reward,
            std_reward,
            mean_aa: tail.iter().map(|r| r.aa).sum::<f64>() / n,
            mean_ae: tail.iter().map(|r| r.ae).sum::<f64>() / n,
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    step: u64,
    avg_reward: f64,
    aa: f64,
    ae: f64,
    seed: u64,
    variant: &'a str,
    gamma: Option<f64>,
}

const CSV_HEADER: [&str; 7] = ["step", "avg_reward", "aa", "ae", "seed", "variant", "gamma"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            what: "metrics csv",
            detail: format!("{}: {other:?}", path.display()),
        },
    }
}

/// One row per evaluation of every report.
pub fn write_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for rep in reports {
        for r in &rep.rows {
            w.serialize(CsvRow {
                step: r.step,
                avg_reward: r.avg_reward,
                aa: r.aa,
                ae: r.ae,
                seed: rep.seed,
                variant: &rep.variant,
                gamma: rep.gamma,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn summaries_to_json(summaries: &[RunSummary]) -> String {
    serde_json::to_string_pretty(summaries).expect("summaries serialize")
}

pub fn summaries_from_json(text: &str) -> Result<Vec<RunSummary>> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        what: "metrics summary",
        detail: e.to_string(),
    })
}

/// Writes the per-evaluation CSV and the per-run JSON summary (mean and std
/// over the last [`SUMMARY_WINDOW`] evaluations).
pub fn export_metrics(reports: &[EvalReport], csv_path: &Path, json_path: &Path) -> Result<()> {
    write_csv(reports, csv_path)?;
    let summaries: Vec<RunSummary> = reports
        .iter()
        .map(|r| RunSummary::of(r, SUMMARY_WINDOW))
        .collect();
    std::fs::write(json_path, summaries_to_json(&summaries)).map_err(|e| Error::io(json_path, e))
}
