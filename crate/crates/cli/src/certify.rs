//! Re-running a saved cell and checking it against the analysis bounds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use strarc::certify::{certify_sarc_trace, certify_str_trace, tally, CertifyContext, Check, Tally};

use crate::config::{ExperimentConfig, SolverChoice};
use crate::run::{render_trace, run_cell};

pub struct CertifyOutcome {
    pub stem: String,
    /// The regenerated trace matched the saved file byte for byte.
    pub trace_matches: bool,
    pub checks: Vec<Check>,
    pub tally: BTreeMap<&'static str, Tally>,
}

/// Rebuilds the cell named by the trace file (`<problem>__<scheme>__s<seed>.csv`),
/// reruns it, verifies the trace bytes and evaluates every check.
/// `seed` replaces the seed in the file name.
pub fn certify_trace(cfg: &ExperimentConfig, trace: &Path, seed: Option<u64>) -> Result<CertifyOutcome> {
    let stem = trace
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("cannot read a cell name from {}", trace.display()))?;
    let mut cell = cfg.find_cell(stem)?;
    if let Some(s) = seed {
        cell.seed = s;
    }
    let problem = cfg.problems[cell.problem].build()?;
    let run = run_cell(cfg, &problem, &cell);
    let report = run.report.with_context(|| format!("rerunning {stem}"))?;
    let saved = fs::read(trace).with_context(|| format!("reading {}", trace.display()))?;
    let trace_matches = saved == render_trace(&report.trace)?;

    let checks = match cfg.schemes[cell.scheme].solver_config(&cfg.solver)? {
        SolverChoice::Tr(c) => {
            let ctx = CertifyContext::for_str(&c, problem.n(), *problem.constants());
            certify_str_trace(&report.trace, &ctx)
        }
        SolverChoice::Arc(c) => {
            let ctx = CertifyContext::for_sarc(&c, problem.n(), *problem.constants());
            certify_sarc_trace(&report.trace, &ctx)
        }
    };
    let tally = tally(&checks);
    Ok(CertifyOutcome { stem: run.stem, trace_matches, checks, tally })
}

impl CertifyOutcome {
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.certify.csv", self.stem));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["check", "k", "status", "margin"])?;
        for c in &self.checks {
            let status = serde_json::to_value(c.status)?;
            w.write_record([
                c.name.to_string(),
                c.k.to_string(),
                status.as_str().unwrap_or_default().to_string(),
                if c.margin.is_nan() { String::new() } else { c.margin.to_string() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<26} {:>7} {:>7} {:>7} {:>7}\n", "check", "passed", "failed", "n/a", "missing");
        for (name, t) in &self.tally {
            s +=
                &format!("{name:<26} {:>7} {:>7} {:>7} {:>7}\n", t.passed, t.failed, t.not_applicable, t.missing_input);
        }
        s
    }

    pub fn ensure_trace_matches(&self) -> Result<()> {
        if !self.trace_matches {
            bail!("{}: the rerun trace differs from the saved file", self.stem);
        }
        Ok(())
    }
}
