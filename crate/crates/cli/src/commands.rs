use crate::config::{ExperimentConfig, Format};
use crate::exit;
use crate::output::{self, LimitReport};
use anyhow::Result;
use feedbin_core::classifier::{classify_sequence, ClassifyOptions, RegimeVerdict};
use feedbin_core::montecarlo::{limit_distribution_test, run_replications, Reference};
use feedbin_core::verify::{self, VerifyOptions, VerifyReport, CATALOG};
use feedbin_core::EnsembleSummary;
use std::path::{Path, PathBuf};

pub fn classify(cfg: &ExperimentConfig) -> Result<(RegimeVerdict, u8)> {
    let n_max = cfg.analysis.classify_n_max;
    let seq = cfg.sequence(n_max + 1)?;
    let verdict = classify_sequence(
        &seq,
        cfg.model.alpha,
        n_max,
        ClassifyOptions {
            strict: cfg.analysis.strict,
        },
    )?;
    let code = if verdict.is_definite() { exit::OK } else { exit::INDETERMINATE };
    Ok((verdict, code))
}

pub struct SimulateOutcome {
    pub summary: EnsembleSummary,
    pub files: Vec<PathBuf>,
}

/// Run the configured ensemble and write its files under `out`.
pub fn simulate(cfg: &ExperimentConfig, threads: usize, out: &Path) -> Result<SimulateOutcome> {
    let params = cfg.params()?;
    let run = run_replications(&params, &cfg.run_options(threads))?;
    let limit = if params.alpha == 1.0 {
        // the uniform law is only known for the classical urn
        let ks = limit_distribution_test(&run.records, Reference::Uniform01, &params)?;
        ks.warning.is_none().then_some(LimitReport {
            reference: Reference::Uniform01,
            result: ks,
        })
    } else if 2 * params.t0 == params.seq.tau0() {
        Some(LimitReport {
            reference: Reference::TwoPointHalfHalf,
            result: limit_distribution_test(&run.records, Reference::TwoPointHalfHalf, &params)?,
        })
    } else {
        None
    };

    let mut files = Vec::new();
    let mut write = |name: PathBuf, bytes: Vec<u8>| -> Result<()> {
        let path = out.join(name);
        output::write_atomic(&path, &bytes)?;
        files.push(path);
        Ok(())
    };
    for format in &cfg.output.formats {
        match format {
            Format::Csv => write("records.csv".into(), output::records_csv(&run.records)?)?,
            Format::Json => write("records.json".into(), serde_json::to_vec_pretty(&run.records)?)?,
        }
    }
    if let Some(trajectories) = &run.trajectories {
        for (rep, rows) in trajectories.iter().enumerate() {
            let name = Path::new("trajectories").join(output::trajectory_file_name(rep as u64));
            write(name, output::trajectory_csv(rows)?)?;
        }
    }
    let summary = output::summary_file(cfg, &run.summary, limit);
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    write("summary.json".into(), bytes)?;
    Ok(SimulateOutcome {
        summary: run.summary,
        files,
    })
}

/// Run one catalog entry, or all of them for `"all"`.
pub fn verify(id: &str, opts: VerifyOptions) -> Result<Vec<VerifyReport>> {
    if id == "all" {
        CATALOG.iter().map(|e| Ok(verify::run(e.id, opts)?)).collect()
    } else {
        Ok(vec![verify::run(id, opts)?])
    }
}

pub fn render_report(r: &VerifyReport) -> String {
    let mut s = format!(
        "{} {} ({:.2} s, seed {})\n",
        if r.pass { "PASS" } else { "FAIL" },
        r.id,
        r.runtime_secs,
        r.seed
    );
    for c in &r.checks {
        s.push_str(&format!(
            "  [{}] {}: observed {}, required {}\n",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.observed,
            c.required
        ));
    }
    s
}
