//! Running cells and writing trace, summary and timing CSVs.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strarc::subproblem::smallest_eigenpair;
use strarc::{sarc_solve, str_solve, FiniteSumProblem, IterationRecord, SeedPath, SolveReport, SolveStatus};

use crate::config::{Cell, ExperimentConfig, SolverChoice};

pub const TRACE_HEADER: [&str; 15] = [
    "k",
    "delta_or_sigma",
    "rho_tilde",
    "rho",
    "success",
    "size_g",
    "size_B",
    "size_h",
    "step_norm",
    "sampled_grad_norm",
    "sampled_lambda_min",
    "exact_f",
    "exact_grad_norm",
    "exact_lambda_min",
    "method",
];

/// Per-cell results. Wall time is kept out of `summary.csv` so that file
/// stays reproducible; it goes to `timings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub scheme: String,
    pub seed: u64,
    pub status: String,
    pub iterations: Option<usize>,
    pub successful: Option<usize>,
    pub f_calls: Option<u64>,
    pub grad_calls: Option<u64>,
    pub hess_calls: Option<u64>,
    pub total_calls: Option<u64>,
    pub final_f: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub final_lambda_min: Option<f64>,
    pub error: String,
    #[serde(skip)]
    pub wall: Duration,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        self.status == "failed" || self.status.starts_with("aborted")
    }
}

pub struct CellRun {
    pub cell: Cell,
    pub stem: String,
    pub report: Result<SolveReport>,
    pub wall: Duration,
}

/// Runs one cell with the problem already built.
pub fn run_cell(cfg: &ExperimentConfig, problem: &FiniteSumProblem, cell: &Cell) -> CellRun {
    let start = Instant::now();
    let report = (|| {
        let entry = &cfg.problems[cell.problem];
        let x0 = entry.start(problem.dim())?;
        let stream = SeedPath::new(cell.seed);
        Ok(match cfg.schemes[cell.scheme].solver_config(&cfg.solver)? {
            SolverChoice::Tr(c) => str_solve(problem, &c, &x0, &stream)?,
            SolverChoice::Arc(c) => sarc_solve(problem, &c, &x0, &stream)?,
        })
    })();
    CellRun { cell: cell.clone(), stem: cfg.cell_stem(cell), report, wall: start.elapsed() }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trace_row(r: &IterationRecord) -> [String; 15] {
    let e = r.exact;
    [
        r.k.to_string(),
        r.radius.to_string(),
        r.rho_tilde.to_string(),
        r.rho.to_string(),
        r.success.to_string(),
        r.size_g.to_string(),
        r.size_b.to_string(),
        r.size_h.to_string(),
        r.step_norm.to_string(),
        r.sampled_grad_norm.to_string(),
        r.sampled_lambda_min.to_string(),
        fmt_opt(e.map(|e| e.f)),
        fmt_opt(e.map(|e| e.grad_norm)),
        fmt_opt(e.map(|e| e.lambda_min)),
        r.method_str().to_string(),
    ]
}

/// The trace CSV as bytes; floats use the shortest round-trip form.
pub fn render_trace(trace: &[IterationRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record(trace_row(r))?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn summarize(cfg: &ExperimentConfig, problem: Option<&FiniteSumProblem>, run: &CellRun) -> RunSummary {
    let mut s = RunSummary {
        problem: cfg.problems[run.cell.problem].name.clone(),
        scheme: cfg.schemes[run.cell.scheme].label(),
        seed: run.cell.seed,
        status: "failed".into(),
        iterations: None,
        successful: None,
        f_calls: None,
        grad_calls: None,
        hess_calls: None,
        total_calls: None,
        final_f: None,
        final_grad_norm: None,
        final_lambda_min: None,
        error: String::new(),
        wall: run.wall,
    };
    let rep = match &run.report {
        Ok(rep) => rep,
        Err(e) => {
            s.error = format!("{e:#}");
            return s;
        }
    };
    s.status = match &rep.status {
        SolveStatus::Aborted(msg) => {
            s.error = msg.clone();
            "aborted".into()
        }
        other => other.as_str().into(),
    };
    let (f, g, h) = rep.oracle_calls();
    s.iterations = Some(rep.iterations());
    s.successful = Some(rep.successful());
    (s.f_calls, s.grad_calls, s.hess_calls, s.total_calls) = (Some(f), Some(g), Some(h), Some(f + g + h));
    let exact = rep.final_exact.or_else(|| {
        let p = problem?;
        Some(strarc::ExactDiagnostics {
            f: p.full_value(&rep.x).ok()?,
            grad_norm: p.full_gradient(&rep.x).ok()?.norm(),
            lambda_min: smallest_eigenpair(&p.full_hessian(&rep.x).ok()?).ok()?.0,
            grad_error: f64::NAN,
            hess_error: f64::NAN,
            f_trial: None,
        })
    });
    if let Some(e) = exact {
        (s.final_f, s.final_grad_norm, s.final_lambda_min) = (Some(e.f), Some(e.grad_norm), Some(e.lambda_min));
    }
    s
}

pub struct ExperimentOutput {
    pub summaries: Vec<RunSummary>,
    pub runs: Vec<CellRun>,
}

/// Runs every cell on a pool of `jobs` threads (all cores when `None`) and
/// writes `<stem>.csv` per cell, `summary.csv`, `timings.csv` and
/// `plotdata.csv` into `out`. Failed cells are recorded and the rest still run.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build()?;

    let (problems, runs) = pool.install(|| {
        let problems: Vec<Result<FiniteSumProblem>> = cfg.problems.par_iter().map(|p| p.build()).collect();
        let runs: Vec<CellRun> = cfg
            .cells()
            .par_iter()
            .map(|cell| match &problems[cell.problem] {
                Ok(p) => run_cell(cfg, p, cell),
                Err(e) => CellRun {
                    cell: cell.clone(),
                    stem: cfg.cell_stem(cell),
                    report: Err(anyhow::anyhow!("{e:#}")),
                    wall: Duration::ZERO,
                },
            })
            .collect();
        (problems, runs)
    });

    let mut summaries = Vec::with_capacity(runs.len());
    for run in &runs {
        if let Ok(rep) = &run.report {
            let path = out.join(format!("{}.csv", run.stem));
            fs::write(&path, render_trace(&rep.trace)?).with_context(|| format!("writing {}", path.display()))?;
        }
        summaries.push(summarize(cfg, problems[run.cell.problem].as_ref().ok(), run));
    }
    write_summary(&out.join("summary.csv"), &summaries)?;
    write_timings(&out.join("timings.csv"), &summaries)?;
    crate::plot::emit_plot_data(out)?;
    Ok(ExperimentOutput { summaries, runs })
}

pub fn write_summary(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn write_timings(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(f, "problem,scheme,seed,wall_seconds")?;
    for r in rows {
        writeln!(f, "{},{},{},{:.6}", r.problem, r.scheme, r.seed, r.wall.as_secs_f64())?;
    }
    Ok(())
}
