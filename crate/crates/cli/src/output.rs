//! Files written by `simulate`: `summary.json`, `records.csv`,
//! `records.json` and `trajectories/rep_NNNNNN.csv`. See `docs/formats.md`.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use feedbin_core::count::Count;
use feedbin_core::dynamics::StepRow;
use feedbin_core::montecarlo::{KsResult, Reference};
use feedbin_core::{EnsembleSummary, TrajectoryRecord, Winner, SCHEMA_VERSION};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Exact counts wider than this are written as logs only.
pub const MAX_DECIMAL_BITS: u64 = 4096;

#[derive(Serialize)]
pub struct SummaryFile<'a> {
    pub schema: &'static str,
    pub code_version: &'static str,
    pub config: &'a ExperimentConfig,
    pub summary: &'a EnsembleSummary,
    pub limit_distribution: Option<LimitReport>,
}

#[derive(Serialize)]
pub struct LimitReport {
    pub reference: Reference,
    #[serde(flatten)]
    pub result: KsResult,
}

pub fn summary_file<'a>(
    config: &'a ExperimentConfig,
    summary: &'a EnsembleSummary,
    limit_distribution: Option<LimitReport>,
) -> SummaryFile<'a> {
    SummaryFile {
        schema: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION"),
        config,
        summary,
        limit_distribution,
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn count_text(c: &Count) -> String {
    c.decimal(MAX_DECIMAL_BITS).unwrap_or_default()
}

pub const RECORD_HEADER: [&str; 30] = [
    "replication_id",
    "master_seed",
    "final_n",
    "final_theta",
    "ln_theta",
    "ln_1m_theta",
    "min_side",
    "ln_min_side",
    "ln_min_side_half",
    "winner",
    "last_crossing",
    "monopoly_onset",
    "certified",
    "certificate_step",
    "certificate_loser_bin",
    "certificate_loser_count",
    "certificate_epsilon",
    "certificate_ln_epsilon",
    "certificate_violated",
    "noise_steps",
    "noise_mean",
    "noise_var",
    "trailing_hits",
    "trailing_steps",
    "deviation_count",
    "deviation_count_second_half",
    "deviation_first",
    "deviation_last",
    "float_switch_step",
    "partial",
];

fn winner_text(w: Winner) -> &'static str {
    match w {
        Winner::Bin1 => "bin1",
        Winner::Bin2 => "bin2",
        Winner::Undecided => "undecided",
    }
}

pub fn records_csv(records: &[TrajectoryRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER)?;
    for r in records {
        let c = r.certificate.as_ref();
        w.write_record([
            r.replication_id.to_string(),
            r.master_seed.to_string(),
            r.final_n.to_string(),
            fmt_f64(r.final_theta),
            fmt_f64(r.ln_theta),
            fmt_f64(r.ln_1m_theta),
            fmt_f64(r.min_side),
            fmt_f64(r.ln_min_side),
            fmt_f64(r.ln_min_side_half),
            winner_text(r.winner).to_string(),
            opt(r.last_crossing),
            opt(r.monopoly_onset),
            c.is_some().to_string(),
            opt(c.map(|c| c.at_step)),
            opt(c.map(|c| c.loser_bin)),
            opt(c.map(|c| count_text(&c.loser_count))),
            opt(c.map(|c| fmt_f64(c.epsilon_bound))),
            opt(c.map(|c| fmt_f64(c.ln_epsilon_bound))),
            r.certificate_violated.to_string(),
            r.noise_steps.to_string(),
            opt(r.noise_mean.map(fmt_f64)),
            opt(r.noise_var.map(fmt_f64)),
            r.trailing_hits.to_string(),
            r.trailing_steps.to_string(),
            r.deviations.count.to_string(),
            r.deviations.count_second_half.to_string(),
            opt(r.deviations.first),
            opt(r.deviations.last),
            opt(r.float_switch_step),
            r.partial.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub const TRAJECTORY_HEADER: [&str; 8] = ["n", "t", "tau", "ln_t", "ln_tau", "b", "epsilon", "mode"];

pub fn trajectory_csv(rows: &[StepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER)?;
    for row in rows {
        w.write_record([
            row.n.to_string(),
            count_text(&row.t),
            count_text(&row.tau),
            fmt_f64(row.ln_t),
            fmt_f64(row.ln_tau),
            count_text(&row.b),
            fmt_f64(row.epsilon),
            match row.mode {
                feedbin_core::Mode::Exact => "exact",
                feedbin_core::Mode::Float => "float",
            }
            .to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn trajectory_file_name(rep: u64) -> String {
    format!("rep_{rep:06}.csv")
}
