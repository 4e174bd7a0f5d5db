//! Command-line front end: build complexity tables, run experiments, roll
//! reports into summaries, and re-check golden artifacts.
//!
//! Exit codes are a stable contract for CI: 0 all rows pass, 2 some row
//! failed (or a golden file drifted), 3 configuration problems, 4 an
//! execution budget ran out.

use clap::{Parser, Subcommand};
use mclab::harness::{
    atomic_write, emit_summary, error_exit_code, report_from_json, run_experiment,
    verify_golden, write_report, ExperimentConfig, ExperimentReport, HarnessError,
};
use mclab::utm::{build_oracle, export_csv, save_oracle};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mclab", version, about = "desk-scale hardness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Oracle-table maintenance.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Run one experiment and write its report.
    Run {
        /// Experiment id (E1..E6); optional when --config names one.
        #[arg(long)]
        experiment: Option<String>,
        /// TOML config; defaults apply to anything it leaves out.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll every report-*.json in a directory into summary.csv/summary.json.
    Summarize {
        dir: PathBuf,
    },
    /// Re-run each golden config and byte-compare against its stored report.
    VerifyGolden {
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Enumerate programs and persist the complexity table.
    Build {
        /// TOML config whose [oracle] section sizes the table.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where the table lands.
        #[arg(long, default_value = "oracle.tbl")]
        out: PathBuf,
        /// Also write a CSV view next to the table.
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}

fn dispatch() -> Result<ExitCode, HarnessError> {
    match Cli::parse().command {
        Command::Oracle { command: OracleCommand::Build { config, out, csv } } => {
            oracle_build(config.as_deref(), &out, csv)
        }
        Command::Run { experiment, config, seed, out } => {
            run(experiment.as_deref(), config.as_deref(), seed, out.as_deref())
        }
        Command::Summarize { dir } => summarize(&dir),
        Command::VerifyGolden { dir } => verify(&dir),
    }
}

/// Settings shared by `oracle build` and `run`: a config file when given,
/// otherwise defaults (the experiment id only matters for `run`).
fn load_config(
    experiment: Option<&str>,
    config: Option<&Path>,
) -> Result<ExperimentConfig, HarnessError> {
    match (config, experiment) {
        (Some(path), id) => {
            let cfg = ExperimentConfig::from_path(path)?;
            if let Some(id) = id {
                if cfg.experiment != id {
                    return Err(HarnessError::ConfigInvalid(format!(
                        "--experiment {id} disagrees with {} in {}",
                        cfg.experiment,
                        path.display()
                    )));
                }
            }
            Ok(cfg)
        }
        (None, Some(id)) => Ok(ExperimentConfig::new(id, 0)),
        (None, None) => Err(HarnessError::ConfigInvalid(
            "pass --experiment, --config, or both".into(),
        )),
    }
}

fn oracle_build(config: Option<&Path>, out: &Path, csv: bool) -> Result<ExitCode, HarnessError> {
    let cfg = match config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::new("E3", 0),
    };
    let table = build_oracle(&cfg.oracle.utm_config()?)?;
    save_oracle(&table, out)?;
    println!("table: {}", out.display());
    println!("fingerprint: {:016x}", table.fingerprint());
    println!(
        "l_max: {}  step_cap: {}  max_output_len: {}",
        table.l_max(),
        table.step_cap(),
        table.max_output_len()
    );
    if csv {
        let mut buf = Vec::new();
        export_csv(&table, &mut buf)?;
        let csv_path = out.with_extension("csv");
        atomic_write(&csv_path, &buf)?;
        println!("csv: {}", csv_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run(
    experiment: Option<&str>,
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExitCode, HarnessError> {
    let mut cfg = load_config(experiment, config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg)?;
    for row in &report.rows {
        let verdict = if row.pass { "pass" } else { "FAIL" };
        println!(
            "[{verdict}] {} n={} measured={} bound={}",
            row.claim, row.n, row.measured, row.bound
        );
    }
    let dir: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = config
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| report.experiment.to_lowercase());
    let path = write_report(&report, &dir, &stem)?;
    println!("report: {}", path.display());
    println!("all_pass: {}", report.all_pass);
    Ok(if report.all_pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn summarize(dir: &Path) -> Result<ExitCode, HarnessError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .map(|s| s.to_string_lossy())
                .is_some_and(|s| s.starts_with("report-") && s.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut reports: Vec<ExperimentReport> = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path)?;
        reports.push(report_from_json(&text)?);
    }
    let summary = emit_summary(&reports)?;
    atomic_write(&dir.join("summary.csv"), summary.csv.as_bytes())?;
    atomic_write(&dir.join("summary.json"), summary.json.as_bytes())?;
    print!("{}", summary.csv);
    Ok(ExitCode::SUCCESS)
}

fn verify(dir: &Path) -> Result<ExitCode, HarnessError> {
    let checks = verify_golden(dir)?;
    let mut all = true;
    for check in &checks {
        let verdict = if check.matched { "match" } else { "DRIFT" };
        println!("[{verdict}] {}", check.name);
        all &= check.matched;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
