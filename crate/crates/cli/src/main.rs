use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use strarc_cli::certify::certify_trace;
use strarc_cli::plot::emit_plot_data;
use strarc_cli::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "strarc", version, about = "Run and check STR/SARC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (problem, scheme, seed) cell of a config.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Rerun the cell behind a saved trace and evaluate the per-iteration checks.
    Certify {
        config: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `<cell>.certify.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild `plotdata.csv` from the summary and traces in a run directory.
    Plotdata {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, out, seed, jobs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let res = run_experiment(&cfg, &out, jobs)?;
            let failed = res.summaries.iter().filter(|s| s.failed()).count();
            for s in &res.summaries {
                println!(
                    "{:<16} {:<14} s{:<4} {:<17} iters {:>5}  calls {:>12}  f {}",
                    s.problem,
                    s.scheme,
                    s.seed,
                    s.status,
                    s.iterations.unwrap_or(0),
                    s.total_calls.unwrap_or(0),
                    s.final_f.map(|f| format!("{f:.6e}")).unwrap_or_else(|| "-".into()),
                );
            }
            println!("wrote {} cells to {}", res.summaries.len(), out.display());
            Ok(if failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Certify { config, trace, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let res = certify_trace(&cfg, &trace, seed)?;
            print!("{}", res.table());
            if let Some(dir) = out {
                res.write_csv(&dir)?;
            }
            res.ensure_trace_matches()?;
            println!("trace reproduced byte for byte");
            Ok(ExitCode::SUCCESS)
        }
        Command::Plotdata { out } => {
            let n = emit_plot_data(&out)?;
            println!("wrote {n} rows to {}", out.join("plotdata.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
