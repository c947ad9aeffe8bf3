use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use feedbin_cli::commands;
use feedbin_cli::exit;
use feedbin_cli::output::write_atomic;
use feedbin_cli::ExperimentConfig;
use feedbin_core::verify::{VerifyOptions, CATALOG, DEFAULT_SEED};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Experiments with the two-bin balls-and-bins process with feedback.
///
/// Exit status: 0 on success or a definite verdict, 1 on failure or error,
/// 2 when the result is indeterminate.
#[derive(Parser, Debug)]
#[command(name = "feedbin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `run.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write one CSV per replication with every step.
    #[arg(long, global = true)]
    dump_trajectories: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict dominance and monopoly for the configured model; prints JSON.
    Classify,
    /// Run the configured ensemble and write summary and record files.
    Simulate,
    /// Run a reference experiment (or `all`) and report observed vs. required.
    Verify {
        /// Catalog id; omit to list the catalog.
        id: Option<String>,
    },
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.output.dump_trajectories |= cli.dump_trajectories;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8> {
    let threads = cli.threads.unwrap_or(0);
    match &cli.command {
        Command::Classify => {
            let cfg = load(cli)?;
            let (verdict, code) = commands::classify(&cfg)?;
            emit(&(serde_json::to_string_pretty(&verdict)? + "\n"))?;
            Ok(code)
        }
        Command::Simulate => {
            let cfg = load(cli)?;
            let outcome = commands::simulate(&cfg, threads, &cfg.output.dir)?;
            let s = &outcome.summary;
            eprintln!(
                "{} replications, {} certified, {} partial; wrote {} files to {}",
                s.reps,
                s.certified_count,
                s.partial_count,
                outcome.files.len(),
                cfg.output.dir.display()
            );
            if let Some(n) = s.float_switch_step {
                eprintln!("counts switched to log representation from step {n}");
            }
            Ok(if s.partial_count > 0 { exit::INDETERMINATE } else { exit::OK })
        }
        Command::Verify { id: None } => {
            let list: String = CATALOG.iter().map(|e| format!("{:<32} {}\n", e.id, e.summary)).collect();
            emit(&list)?;
            Ok(exit::OK)
        }
        Command::Verify { id: Some(id) } => {
            let opts = VerifyOptions {
                seed: cli.seed.unwrap_or(DEFAULT_SEED),
                threads,
            };
            let reports = commands::verify(id, opts)?;
            for r in &reports {
                emit(&commands::render_report(r))?;
                if let Some(dir) = &cli.out {
                    let mut bytes = serde_json::to_vec_pretty(r)?;
                    bytes.push(b'\n');
                    write_atomic(&dir.join(format!("verify-{}.json", r.id)), &bytes)?;
                }
            }
            Ok(if reports.iter().all(|r| r.pass) { exit::OK } else { exit::FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::FAIL)
        }
    }
}
