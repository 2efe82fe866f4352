//! CSV logs and JSON summaries. The CSV carries no wall-clock data, so a
//! rerun of the same configuration writes the same bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bplambda::metrics::mean_sem;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::runner::{metric_name, SeedResult};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes every seed's rows under a `# config_hash=… config=…` line.
pub fn write_csv<W: Write>(cfg: &ExperimentConfig, results: &[SeedResult], mut out: W) -> Result<()> {
    writeln!(out, "# config_hash={} config={}", cfg.hash(), cfg.to_json())?;
    let width = results
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| row.cosines.len()))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["seed", "learner", "epoch", "batch", "length", "loss", "metric"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=width).map(|t| format!("cos_{t}")));
    w.write_record(&header)?;
    for r in results {
        for row in &r.rows {
            let mut rec = vec![
                r.seed.to_string(),
                r.learner.clone(),
                row.epoch.to_string(),
                row.batch.to_string(),
                row.length.to_string(),
                row.loss.to_string(),
                opt(row.metric),
            ];
            rec.extend((0..width).map(|t| opt(row.cosines.get(t).copied().flatten())));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub learner: String,
    pub config_hash: String,
    pub metric: String,
    pub mean: f64,
    pub sem: f64,
    pub seeds: Vec<SeedResult>,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig, results: &[SeedResult]) -> Self {
        let ok: Vec<f64> = results
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| r.final_metric)
            .collect();
        let (mean, sem) = mean_sem(&ok);
        Self {
            name: cfg.name.clone(),
            learner: cfg.learner.label(),
            config_hash: cfg.hash(),
            metric: metric_name(&cfg.task).into(),
            mean,
            sem,
            seeds: results.to_vec(),
        }
    }
}

/// `stem` with `suffix` appended; dots already in the stem are kept.
pub fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `<stem>.csv` and `<stem>.summary.json` next to each other.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[SeedResult], stem: &Path) -> Result<Summary> {
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let csv_path = with_suffix(stem, ".csv");
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(cfg, results, std::io::BufWriter::new(file))?;
    let summary = Summary::new(cfg, results);
    let json_path = with_suffix(stem, ".summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok(summary)
}
