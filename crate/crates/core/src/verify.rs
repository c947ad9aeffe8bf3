//! Catalog of reference experiments with pass/fail thresholds.
//!
//! Each entry runs a fixed experiment from a single master seed and compares
//! what it observes with what the theory requires.

use crate::classifier::{classify_sequence, ClassifyOptions, Dominance, Monopoly, Regime};
use crate::count::Count;
use crate::dynamics::{psi, step_in_place, Kernel, ModelParams, ProcessState};
use crate::error::{invalid, Result};
use crate::floorexp::floor_b_pow_exp;
use crate::montecarlo::{
    limit_distribution_test, replication_rng, run_replications, DeviationTracker, Reference, RunOptions,
};
use crate::sequences::{
    check_identity_1101, largest_exact_index, AnalyticAsymptotics, ExtReal, GrowthSequence, RhoClass, SeriesVerdict,
};
use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 1;

/// Largest index tried by the exact identity check.
pub const IDENTITY_CAP: usize = 1000;

#[derive(Clone, Copy, Debug)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub summary: &'static str,
    pub runtime_limit: Option<Duration>,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

pub const CATALOG: [CatalogEntry; 9] = [
    CatalogEntry {
        id: "classifier-table",
        summary: "regime verdicts for the built-in catalog",
        runtime_limit: secs(1),
    },
    CatalogEntry {
        id: "polya-uniform",
        summary: "α=1, σ≡1, symmetric start: final Θ is uniform",
        runtime_limit: secs(120),
    },
    CatalogEntry {
        id: "subcritical-monopoly",
        summary: "α=2, σ≡1: certified monopoly in at least 90% of runs",
        runtime_limit: secs(300),
    },
    CatalogEntry {
        id: "supercritical-no-monopoly",
        summary: "α=2, τ_n=⌊e^{3ⁿ}⌋: no certificate, loser keeps receiving balls, dominance",
        runtime_limit: secs(60),
    },
    CatalogEntry {
        id: "critical-dichotomy",
        summary: "α=2, τ_n=⌊bⁿe^{2ⁿ}⌋: certificates for b=2, none for b=1",
        runtime_limit: secs(120),
    },
    CatalogEntry {
        id: "no-dominance-without-feedback",
        summary: "α=1, σ_n=2ⁿ: no dominance; bulk placement dominates",
        runtime_limit: None,
    },
    CatalogEntry {
        id: "identity-1101",
        summary: "Σ -ln(1-σ_k/τ_k) = ln(τ_n/τ₀) for every built-in family",
        runtime_limit: secs(1),
    },
    CatalogEntry {
        id: "psi-noise",
        summary: "ψ bounds and symmetry; normalised noise has mean 0 and variance 1",
        runtime_limit: secs(30),
    },
    CatalogEntry {
        id: "deviation-tracking",
        summary: "α=2, σ≡1: every run has a step with |Θ_n - 1/2| > 1/ln²τ_n",
        runtime_limit: secs(30),
    },
];

pub fn entry(id: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.id == id)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: String,
    pub required: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, observed: impl ToString, required: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            observed: observed.to_string(),
            required: required.into(),
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub id: String,
    pub summary: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub runtime_secs: f64,
    pub runtime_limit_secs: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Worker threads for the Monte Carlo entries; 0 uses every core.
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: DEFAULT_SEED,
            threads: 0,
        }
    }
}

/// Run catalog entry `id`. Unknown ids are an error; a failed check is not.
pub fn run(id: &str, opts: VerifyOptions) -> Result<VerifyReport> {
    let Some(e) = entry(id) else {
        let ids: Vec<_> = CATALOG.iter().map(|e| e.id).collect();
        return invalid(format!("unknown experiment {id:?}; known: {}", ids.join(", ")));
    };
    let start = Instant::now();
    let mut checks = match e.id {
        "classifier-table" => classifier_table()?,
        "polya-uniform" => polya_uniform(opts)?,
        "subcritical-monopoly" => subcritical_monopoly(opts)?,
        "supercritical-no-monopoly" => supercritical_no_monopoly(opts)?,
        "critical-dichotomy" => critical_dichotomy(opts)?,
        "no-dominance-without-feedback" => no_dominance_without_feedback(opts)?,
        "identity-1101" => identity_1101()?,
        "psi-noise" => psi_noise(opts)?,
        "deviation-tracking" => deviation_tracking(opts)?,
        _ => unreachable!("catalog and dispatch disagree"),
    };
    let elapsed = start.elapsed();
    if let Some(limit) = e.runtime_limit {
        checks.push(Check::new(
            "runtime",
            format!("{:.3} s", elapsed.as_secs_f64()),
            format!("< {} s", limit.as_secs_f64()),
            elapsed < limit,
        ));
    }
    Ok(VerifyReport {
        id: e.id.to_string(),
        summary: e.summary.to_string(),
        seed: opts.seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
        runtime_secs: elapsed.as_secs_f64(),
        runtime_limit_secs: e.runtime_limit.map(|d| d.as_secs_f64()),
    })
}

fn run_options(horizon: usize, reps: u64, opts: VerifyOptions) -> RunOptions {
    let mut o = RunOptions::new(horizon, reps, opts.seed);
    o.threads = opts.threads;
    o
}

fn sigma_one() -> Result<Arc<GrowthSequence>> {
    Ok(Arc::new(GrowthSequence::constant(1, 2)?))
}

struct Expected {
    label: &'static str,
    alpha: f64,
    seq: GrowthSequence,
    regime: Regime,
    dominance: Dominance,
    monopoly: Monopoly,
}

/// `σ_n = ⌊e^{2ⁿ}⌋` for `n = 1..=len`.
fn exp_pow2_sigma(len: u32) -> Vec<BigUint> {
    (1..=len).map(|n| floor_b_pow_exp(1.0, n, 1.0, 2.0)).collect()
}

fn classifier_catalog() -> Result<Vec<Expected>> {
    let critical_lambda_one = AnalyticAsymptotics {
        theta: ExtReal::new(1.0),
        lambda: ExtReal::new(1.0),
        rho_class: RhoClass::TendsToInfinity,
        series_sigma_tau_alpha: SeriesVerdict::Diverges,
        series_tau_tau_alpha: SeriesVerdict::Diverges,
        condition_s: true,
        condition_r: true,
    };
    let supercritical = AnalyticAsymptotics {
        theta: ExtReal::INFINITY,
        lambda: ExtReal::INFINITY,
        ..critical_lambda_one.clone()
    };
    let tau3 = GrowthSequence::doubly_exponential_tau(1.0, 1.0, 3.0, 6)?;
    let sigma3: Vec<BigUint> = (1..=6).map(|n| tau3.sigma(n).map(|s| s.exact().unwrap().clone())).collect::<Result<_>>()?;
    let e = |label, alpha, seq, regime, dominance, monopoly| Expected {
        label,
        alpha,
        seq,
        regime,
        dominance,
        monopoly,
    };
    use Dominance as D;
    use Monopoly as M;
    Ok(vec![
        e("α=1 constant", 1.0, GrowthSequence::constant(1, 2)?, Regime::NoFeedback, D::Never, M::Never),
        e("α=1 geometric r=2", 1.0, GrowthSequence::geometric(1, 2, 2)?, Regime::NoFeedback, D::Never, M::Never),
        e("α=1 factorial", 1.0, GrowthSequence::factorial(2)?, Regime::NoFeedback, D::Never, M::Never),
        e("α=2 constant", 2.0, GrowthSequence::constant(1, 2)?, Regime::SubcriticalBoundedRho, D::AlmostSure, M::AlmostSure),
        e("α=2 polynomial n²", 2.0, GrowthSequence::polynomial(1, 2, 2)?, Regime::SubcriticalBoundedRho, D::AlmostSure, M::AlmostSure),
        e("α=2 factorial", 2.0, GrowthSequence::factorial(2)?, Regime::SubcriticalFastRho, D::AlmostSure, M::AlmostSure),
        e(
            "α=2 σ_n=⌊e^{2ⁿ}⌋, λ=1",
            2.0,
            GrowthSequence::custom(exp_pow2_sigma(6), 2, Some(critical_lambda_one))?,
            Regime::Critical,
            D::AlmostSure,
            M::Never,
        ),
        e("α=2 doubly exponential b=0.5", 2.0, GrowthSequence::doubly_exponential_tau(0.5, 1.0, 2.0, 4)?, Regime::Critical, D::AlmostSure, M::Never),
        e("α=2 doubly exponential b=1", 2.0, GrowthSequence::doubly_exponential_tau(1.0, 1.0, 2.0, 4)?, Regime::Critical, D::AlmostSure, M::Never),
        e("α=2 doubly exponential b=2", 2.0, GrowthSequence::doubly_exponential_tau(2.0, 1.0, 2.0, 4)?, Regime::Critical, D::AlmostSure, M::StrictlyBetween),
        e(
            "α=2 custom θ=∞",
            2.0,
            GrowthSequence::custom(sigma3, tau3.tau0(), Some(supercritical))?,
            Regime::Supercritical,
            D::AlmostSure,
            M::Never,
        ),
    ])
}

fn classifier_table() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut subset_ok = true;
    for case in classifier_catalog()? {
        let v = match classify_sequence(&case.seq, case.alpha, 64, ClassifyOptions { strict: true }) {
            Ok(v) => v,
            Err(err) => {
                checks.push(Check::new(case.label, format!("error: {err}"), "a verdict", false));
                continue;
            }
        };
        let pass = v.regime == case.regime && v.dominance == case.dominance && v.monopoly == case.monopoly;
        subset_ok &= !(v.monopoly == Monopoly::AlmostSure && v.dominance != Dominance::AlmostSure);
        checks.push(Check::new(
            case.label,
            format!("{:?}/{:?}/{:?} via {}", v.regime, v.dominance, v.monopoly, v.provenance.rule),
            format!("{:?}/{:?}/{:?}", case.regime, case.dominance, case.monopoly),
            pass,
        ));
    }
    checks.push(Check::new(
        "monopoly implies dominance",
        if subset_ok { "holds" } else { "violated" },
        "holds",
        subset_ok,
    ));
    Ok(checks)
}

fn polya_uniform(opts: VerifyOptions) -> Result<Vec<Check>> {
    let params = ModelParams::new(1.0, 1, sigma_one()?, Kernel::IndependentBinomial)?;
    let out = run_replications(&params, &run_options(10_000, 2000, opts))?;
    let ks = limit_distribution_test(&out.records, Reference::Uniform01, &params)?;
    Ok(vec![Check::new(
        "KS distance to Uniform(0,1)",
        format!("{:.4} (p = {:.3})", ks.ks_stat, ks.p_value),
        "< 0.05",
        ks.ks_stat < 0.05,
    )])
}

fn subcritical_monopoly(opts: VerifyOptions) -> Result<Vec<Check>> {
    let params = ModelParams::new(2.0, 1, sigma_one()?, Kernel::IndependentBinomial)?;
    let mut o = run_options(100_000, 500, opts);
    o.confidence_eps = 1e-3;
    let s = run_replications(&params, &o)?.summary;
    Ok(vec![
        Check::new(
            "certified fraction",
            format!("{:.3} ({}/{})", s.certified_fraction, s.certified_count, s.reps),
            ">= 0.90",
            s.certified_fraction >= 0.90,
        ),
        Check::new(
            "loser balls after certificate",
            s.certificate_violations,
            "0",
            s.certificate_violations == 0,
        ),
    ])
}

fn supercritical_no_monopoly(opts: VerifyOptions) -> Result<Vec<Check>> {
    let horizon = 25;
    let seq = Arc::new(GrowthSequence::doubly_exponential_tau(1.0, 1.0, 3.0, horizon + 1)?);
    let params = ModelParams::new(2.0, 1, seq, Kernel::IndependentBinomial)?;
    let s = run_replications(&params, &run_options(horizon, 500, opts))?.summary;
    let trailing = s.trailing_hit_fraction.unwrap_or(0.0);
    Ok(vec![
        Check::new("certificates issued", s.certified_count, "0", s.certified_count == 0),
        Check::new(
            "steps n>=5 where the loser gains",
            format!("{trailing:.4}"),
            ">= 0.99",
            trailing >= 0.99,
        ),
        Check::new(
            "median min(Θ,1-Θ) at horizon",
            format!("e^{:.4e}", s.dominance.median_ln_min_side),
            "< 1e-3",
            s.dominance.median_ln_min_side < 1e-3f64.ln(),
        ),
        Check::new(
            "float mode reached",
            s.float_switch_step.map_or("never".into(), |n| format!("step {n}")),
            "some step",
            s.float_switch_step.is_some(),
        ),
    ])
}

fn critical_dichotomy(opts: VerifyOptions) -> Result<Vec<Check>> {
    let horizon = 25;
    let mut checks = Vec::new();
    for b in [2.0, 1.0] {
        let seq = Arc::new(GrowthSequence::doubly_exponential_tau(b, 1.0, 2.0, horizon + 1)?);
        let params = ModelParams::new(2.0, 1, seq, Kernel::IndependentBinomial)?;
        let mut o = run_options(horizon, 1000, opts);
        o.confidence_eps = 1e-3;
        let s = run_replications(&params, &o)?.summary;
        let observed = format!("{}/{} certified", s.certified_count, s.reps);
        checks.push(if b > 1.0 {
            Check::new("b=2 certified runs", observed, ">= 1", s.certified_count >= 1)
        } else {
            Check::new("b=1 certified runs", observed, "0", s.certified_count == 0)
        });
    }
    Ok(checks)
}

fn no_dominance_without_feedback(opts: VerifyOptions) -> Result<Vec<Check>> {
    let seq = Arc::new(GrowthSequence::geometric(1, 2, 2)?);
    let o = run_options(200, 2000, opts);
    let binomial = run_replications(&ModelParams::new(1.0, 1, seq.clone(), Kernel::IndependentBinomial)?, &o)?;
    let bulk = run_replications(&ModelParams::new(1.0, 1, seq, Kernel::BulkPlacement)?, &o)?.summary;
    let tiny = binomial.records.iter().filter(|r| r.ln_min_side < 1e-4f64.ln()).count() as f64 / binomial.records.len() as f64;
    let mut checks = vec![Check::new(
        "binomial: fraction with min(Θ,1-Θ) < 1e-4",
        format!("{tiny:.4}"),
        "<= 0.01",
        tiny <= 0.01,
    )];
    for (g, b) in binomial.summary.dominance.p_below.iter().zip(&bulk.dominance.p_below) {
        let b = b.fraction;
        checks.push(Check::new(
            format!("bulk vs binomial below δ={:e}", g.delta),
            format!("{b:.4} vs {:.4}", g.fraction),
            "bulk strictly larger",
            b > g.fraction,
        ));
    }
    Ok(checks)
}

fn identity_1101() -> Result<Vec<Check>> {
    let families: Vec<(&str, GrowthSequence)> = vec![
        ("constant", GrowthSequence::constant(1, 2)?),
        ("polynomial n²", GrowthSequence::polynomial(1, 2, 2)?),
        ("geometric 2ⁿ", GrowthSequence::geometric(1, 2, 2)?),
        ("factorial", GrowthSequence::factorial(2)?),
        ("doubly exponential b=0.5", GrowthSequence::doubly_exponential_tau(0.5, 1.0, 2.0, 1)?),
        ("doubly exponential b=1", GrowthSequence::doubly_exponential_tau(1.0, 1.0, 2.0, 1)?),
        ("doubly exponential b=2", GrowthSequence::doubly_exponential_tau(2.0, 1.0, 2.0, 1)?),
        ("doubly exponential growth 3", GrowthSequence::doubly_exponential_tau(1.0, 1.0, 3.0, 1)?),
    ];
    let mut checks = Vec::new();
    for (label, seq) in families {
        let n = largest_exact_index(&seq, IDENTITY_CAP)?;
        let d = check_identity_1101(&seq, n)?;
        checks.push(Check::new(format!("{label} at n={n}"), format!("{d:.3e}"), "< 1e-9", d < 1e-9));
    }
    Ok(checks)
}

fn psi_noise(opts: VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = replication_rng(opts.seed, 0);
    let samples = 100_000;
    let (mut worst_low, mut worst_high, mut worst_sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let x: f64 = rng.random();
        let alpha = 5.0 - 4.0 * rng.random::<f64>();
        let p = psi(x, alpha)?;
        let lower = x.powf(alpha);
        let upper = 2f64.powf(alpha - 1.0) * lower;
        // relative shortfall below the lower bound / excess over the upper one
        if lower > 0.0 {
            worst_low = worst_low.max((lower - p) / lower);
            worst_high = worst_high.max((p - upper) / upper);
        }
        worst_sym = worst_sym.max((p + psi(1.0 - x, alpha)? - 1.0).abs());
    }
    let mut checks = vec![
        Check::new("x^α <= ψ(x), worst relative excess", format!("{worst_low:.2e}"), "<= 1e-12", worst_low <= 1e-12),
        Check::new("ψ(x) <= 2^{α-1}x^α, worst relative excess", format!("{worst_high:.2e}"), "<= 1e-12", worst_high <= 1e-12),
        Check::new("|ψ(x) + ψ(1-x) - 1|", format!("{worst_sym:.2e}"), "<= 1e-14", worst_sym <= 1e-14),
    ];

    // Fixed state Θ = 0.4 with α = 2 (P ≈ 0.31) and batches of 50 balls.
    let seq = Arc::new(GrowthSequence::constant(50, 10)?);
    let params = ModelParams::new(2.0, 4, seq.clone(), Kernel::IndependentBinomial)?;
    let table = seq.table(1)?;
    let start = ProcessState::from_bins(0, Count::from_u64(4), Count::from_u64(6));
    let steps = 10_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..steps {
        let mut s = start.clone();
        let e = step_in_place(&mut s, &params, &table, &mut rng)?.noise.epsilon;
        sum += e;
        sum_sq += e * e;
    }
    let n = steps as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    let tol = 4.0 / n.sqrt();
    checks.push(Check::new("noise mean", format!("{mean:.4}"), format!("|·| <= {tol}"), mean.abs() <= tol));
    checks.push(Check::new("noise variance", format!("{var:.4}"), "within 0.05 of 1", (var - 1.0).abs() <= 0.05));
    Ok(checks)
}

fn deviation_tracking(opts: VerifyOptions) -> Result<Vec<Check>> {
    let params = ModelParams::new(2.0, 1, sigma_one()?, Kernel::IndependentBinomial)?;
    let out = run_replications(&params, &run_options(1000, 200, opts))?;
    let with_dev = out.records.iter().filter(|r| r.deviations.count > 0).count();
    let delta = DeviationTracker::delta(10_002f64.ln());
    Ok(vec![
        Check::new(
            "runs with a deviation step",
            format!("{with_dev}/{}", out.records.len()),
            "all",
            with_dev == out.records.len(),
        ),
        Check::new("δ_n at τ=10002", format!("{delta:.4}"), "≈ 0.0118", (delta - 0.0118).abs() < 5e-5),
    ])
}
