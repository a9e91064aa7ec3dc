//! Long-format plot data: exact objective against cumulative oracle calls.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use crate::run::read_summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub scheme: String,
    pub problem: String,
    pub seed: u64,
    pub k: usize,
    /// Component-oracle calls up to and including iteration `k`.
    pub calls: u64,
    pub exact_f: f64,
}

#[derive(Debug, Deserialize)]
struct TraceCosts {
    k: usize,
    size_g: u64,
    #[serde(rename = "size_B")]
    size_b: u64,
    size_h: u64,
    exact_f: Option<f64>,
}

/// Reads the per-cell traces named in `dir/summary.csv`, one row per
/// iteration. Cells without a trace (failed before running) are skipped.
pub fn plot_rows(dir: &Path) -> Result<Vec<PlotRow>> {
    let mut rows = Vec::new();
    for s in read_summary(&dir.join("summary.csv"))? {
        let path = dir.join(format!("{}__{}__s{}.csv", s.problem, s.scheme, s.seed));
        if !path.exists() {
            continue;
        }
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut calls = 0u64;
        for rec in r.deserialize() {
            let t: TraceCosts = rec.with_context(|| format!("parsing {}", path.display()))?;
            calls += 2 * t.size_h + t.size_g + t.size_b;
            let exact_f = t.exact_f.ok_or_else(|| anyhow!("{}: row {} has no exact_f", path.display(), t.k))?;
            rows.push(PlotRow {
                scheme: s.scheme.clone(),
                problem: s.problem.clone(),
                seed: s.seed,
                k: t.k,
                calls,
                exact_f,
            });
        }
    }
    Ok(rows)
}

/// Writes `dir/plotdata.csv` and returns the number of rows.
pub fn emit_plot_data(dir: &Path) -> Result<usize> {
    let rows = plot_rows(dir)?;
    let path = dir.join("plotdata.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows.len())
}
