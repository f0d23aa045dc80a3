//! `shanks`: runs an experiment file and writes one run record per method.
//!
//! Exit status is 0 when every run converged, 2 when any run diverged and
//! 1 otherwise (errors, exhausted budgets, failed runs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use shanks_core::experiment::{emit_records, run_experiment, ExperimentConfig, RecordFormat};
use shanks_core::{Method, RunRecord, RunStatus};

#[derive(Debug, Parser)]
#[command(name = "shanks", version, about = "Accelerated fixed-point experiment runner")]
struct Cli {
    /// Experiment file (TOML).
    #[arg(long, required_unless_present = "list_methods")]
    config: Option<PathBuf>,
    /// Output file; defaults to the experiment's `output.path`, then `records.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record format: csv or json.
    #[arg(long)]
    format: Option<RecordFormat>,
    /// Overrides the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the available methods and exit.
    #[arg(long)]
    list_methods: bool,
    /// Directory the output file is written to, replacing the directory part
    /// of the resolved output path.
    #[arg(long, env = "SHANKS_OUT_DIR", hide = true)]
    out_dir: Option<PathBuf>,
}

fn list_methods() {
    println!("{:<22} {:<16} description", "key", "label");
    for m in Method::ALL {
        println!("{:<22} {:<16} {}", m.key(), m.label(), m.description());
    }
}

fn output_path(cli: &Cli, cfg: &ExperimentConfig, format: RecordFormat) -> PathBuf {
    let path = cli
        .out
        .clone()
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("records.{format}")));
    match &cli.out_dir {
        Some(dir) => dir.join(path.file_name().unwrap_or(path.as_os_str())),
        None => path,
    }
}

fn summarize(records: &[RunRecord]) {
    println!("{:<20} {:<18} {:>8} {:>12}", "method", "status", "evals", "residual");
    for r in records {
        let residual = r.final_residual().map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!("{:<20} {:<18} {:>8} {:>12}", r.method, r.status.as_str(), r.g_eval_count, residual);
        if let RunStatus::Failed { message } = &r.status {
            eprintln!("{}: {message}", r.method);
        }
    }
}

fn exit_code(records: &[RunRecord]) -> u8 {
    if records.iter().any(|r| r.status == RunStatus::Diverged) {
        2
    } else if records.iter().all(RunRecord::converged) {
        0
    } else {
        1
    }
}

fn run(cli: &Cli, config: &Path) -> Result<u8, Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let format = cli.format.unwrap_or(cfg.output.format);
    let records = run_experiment(&cfg)?;
    let out = output_path(cli, &cfg, format);
    emit_records(&records, format, &out)?;
    summarize(&records);
    println!("records written to {}", out.display());
    Ok(exit_code(&records))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.list_methods {
        list_methods();
        return ExitCode::SUCCESS;
    }
    let config = cli.config.clone().expect("clap enforces --config");
    match run(&cli, &config) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
