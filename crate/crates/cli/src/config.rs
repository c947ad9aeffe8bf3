//! Experiment configuration: a TOML file with a strict schema.
//!
//! Unknown keys anywhere are rejected. Everything except `model.alpha` and the
//! family has a default, and the fully resolved configuration is echoed into
//! every summary.

use anyhow::{bail, Context, Result};
use feedbin_core::dynamics::SamplerConfig;
use feedbin_core::montecarlo::{RunOptions, DEFAULT_DELTA_GRID};
use feedbin_core::sequences::{AnalyticAsymptotics, GrowthSequence, DEFAULT_BIT_BUDGET};
use feedbin_core::{Kernel, ModelParams};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Feedback exponent, at least 1.
    pub alpha: f64,
    /// Initial balls in bin 1; `0 < t0 < tau0`.
    #[serde(default = "one")]
    pub t0: u64,
    /// Initial total. Derived for `doubly-exponential-tau` (`⌊e^{θ₀}⌋`) and
    /// may be omitted there; required otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<u64>,
    #[serde(default)]
    pub kernel: Kernel,
    pub family: FamilyConfig,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `σ_n = value`
    Constant { value: u64 },
    /// `σ_n = coeff · n^degree`
    Polynomial { coeff: u64, degree: u32 },
    /// `σ_n = coeff · ratio^n`
    Geometric { coeff: u64, ratio: u64 },
    /// `σ_n = n!`
    Factorial,
    /// `τ_n = ⌊bⁿ e^{θ₀ growthⁿ}⌋`; `growth` defaults to `alpha`.
    DoublyExponentialTau {
        b: f64,
        theta0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        growth: Option<f64>,
    },
    /// Explicit `σ_1, σ_2, …` as decimal strings, inline or from a file with
    /// one integer per line (relative to the config file).
    Custom {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sigma: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        analytic: Option<AnalyticAsymptotics>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Steps per replication.
    pub horizon: usize,
    pub reps: u64,
    pub master_seed: u64,
    /// Counts above this many bits switch from exact integers to logs.
    pub bit_budget: u64,
    /// Cap on total steps over all replications; runs beyond it are flagged
    /// partial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    pub sampler: SamplerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 1000,
            reps: 100,
            master_seed: 1,
            bit_budget: DEFAULT_BIT_BUDGET,
            max_steps: None,
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Thresholds δ for the empirical `P(min(Θ, 1-Θ) < δ)`.
    pub delta_grid: Vec<f64>,
    /// Certificates are issued once the bound drops below this.
    pub confidence_eps: f64,
    /// Explicit summation limit for certificate bounds; defaults to the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_horizon: Option<usize>,
    /// Terms used for numeric asymptotics when no closed form is attached.
    pub classify_n_max: usize,
    /// Refuse to classify from numeric estimates.
    pub strict: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            delta_grid: DEFAULT_DELTA_GRID.to_vec(),
            confidence_eps: 1e-3,
            tail_horizon: None,
            classify_n_max: 64,
            strict: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record formats; `summary.json` is always written.
    pub formats: Vec<Format>,
    pub dump_trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv],
            dump_trajectories: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse `path`; a relative `sigma_file` is resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let FamilyConfig::Custom {
            sigma_file: Some(file), ..
        } = &mut cfg.model.family
        {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(m.alpha.is_finite() && m.alpha >= 1.0) {
            bail!("model.alpha must be finite and >= 1, got {}", m.alpha);
        }
        match (&m.family, m.tau0) {
            (FamilyConfig::DoublyExponentialTau { .. }, _) => {}
            (_, None) => bail!("model.tau0 is required for this family"),
            _ => {}
        }
        if let FamilyConfig::Custom { sigma, sigma_file, .. } = &m.family {
            if sigma.is_empty() == sigma_file.is_none() {
                bail!("custom family needs exactly one of `sigma` and `sigma_file`");
            }
        }
        if self.run.horizon == 0 || self.run.reps == 0 {
            bail!("run.horizon and run.reps must be at least 1");
        }
        if self.run.bit_budget < 64 {
            bail!("run.bit_budget must be at least 64");
        }
        let a = &self.analysis;
        if !(a.confidence_eps > 0.0 && a.confidence_eps < 1.0) {
            bail!("analysis.confidence_eps must lie in (0, 1)");
        }
        if a.delta_grid.is_empty() || a.delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 0.5)) {
            bail!("analysis.delta_grid needs values in (0, 1/2]");
        }
        if a.classify_n_max < 8 {
            bail!("analysis.classify_n_max must be at least 8");
        }
        Ok(())
    }

    /// The growth sequence, with table validation up to `n_max` for families
    /// that can fail there.
    pub fn sequence(&self, n_max: usize) -> Result<GrowthSequence> {
        let m = &self.model;
        let budget = self.run.bit_budget;
        let tau0 = || m.tau0.expect("validated");
        let seq = match &m.family {
            FamilyConfig::Constant { value } => GrowthSequence::constant(*value, tau0())?,
            FamilyConfig::Polynomial { coeff, degree } => GrowthSequence::polynomial(*coeff, *degree, tau0())?,
            FamilyConfig::Geometric { coeff, ratio } => GrowthSequence::geometric(*coeff, *ratio, tau0())?,
            FamilyConfig::Factorial => GrowthSequence::factorial(tau0())?,
            FamilyConfig::DoublyExponentialTau { b, theta0, growth } => {
                let seq = GrowthSequence::doubly_exponential_tau_with_budget(*b, *theta0, growth.unwrap_or(m.alpha), n_max, budget)?;
                if let Some(t) = m.tau0 {
                    if t != seq.tau0() {
                        bail!("model.tau0 = {t} disagrees with ⌊e^θ₀⌋ = {}", seq.tau0());
                    }
                }
                return Ok(seq);
            }
            FamilyConfig::Custom {
                sigma,
                sigma_file,
                analytic,
            } => {
                let values = match sigma_file {
                    Some(file) => read_sigma_file(file)?,
                    None => parse_sigma(sigma.iter().map(String::as_str))?,
                };
                GrowthSequence::custom(values, tau0(), analytic.clone())?
            }
        };
        Ok(seq.with_bit_budget(budget))
    }

    pub fn params(&self) -> Result<ModelParams> {
        let seq = Arc::new(self.sequence(self.run.horizon + 1)?);
        Ok(ModelParams::new(self.model.alpha, self.model.t0, seq, self.model.kernel)?.with_sampler(self.run.sampler))
    }

    pub fn run_options(&self, threads: usize) -> RunOptions {
        let mut o = RunOptions::new(self.run.horizon, self.run.reps, self.run.master_seed);
        o.confidence_eps = self.analysis.confidence_eps;
        o.tail_horizon = self.analysis.tail_horizon.unwrap_or(self.run.horizon).max(self.run.horizon);
        o.delta_grid = self.analysis.delta_grid.clone();
        o.threads = threads;
        o.max_steps = self.run.max_steps;
        o.dump_trajectories = self.output.dump_trajectories;
        o
    }
}

fn parse_sigma<'a>(items: impl Iterator<Item = &'a str>) -> Result<Vec<BigUint>> {
    items
        .map(|s| {
            s.trim()
                .parse::<BigUint>()
                .with_context(|| format!("σ entry {s:?} is not a nonnegative integer"))
        })
        .collect()
}

fn read_sigma_file(path: &Path) -> Result<Vec<BigUint>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading σ file {}", path.display()))?;
    parse_sigma(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
}
