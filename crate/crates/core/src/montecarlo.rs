//! Replication engine, monopoly certificates and ensemble estimators.

use crate::count::Count;
use crate::dynamics::{step_in_place, Kernel, Mode, ModelParams, ProcessState, StepRow};
use crate::error::{invalid, Error, Result};
use crate::logspace::{ln_1m_exp, log_add_exp};
use crate::sequences::{Family, SeriesKind, Table};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

pub const SCHEMA_VERSION: &str = "v1";
pub const DEFAULT_DELTA_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-6];
/// Steps whose smaller placement probability is below this are left out of
/// the noise moments.
pub const NOISE_MIN_P: f64 = 1e-6;
/// Relative slack added to every certificate bound to absorb rounding in the
/// log-space sums.
const CERTIFICATE_SAFETY: f64 = 1e-6;
/// Trailing-bin hit statistics start at this step.
pub const TRAILING_FROM: usize = 5;

/// Independent stream for one replication: the master seed keys the
/// generator and the replication index selects the stream.
pub fn replication_rng(master_seed: u64, replication_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication_id);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    Bin1,
    Bin2,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailTerms {
    pub tail_horizon: usize,
    /// `ln` of the closed-form bound on the series beyond `tail_horizon`.
    pub ln_tail_bound: f64,
}

/// Upper bound on the probability that the trailing bin ever receives another
/// ball, given the state at `at_step`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonopolyCertificate {
    pub at_step: usize,
    pub loser_bin: u8,
    pub loser_count: Count,
    pub epsilon_bound: f64,
    pub ln_epsilon_bound: f64,
    pub tail_terms: TailTerms,
}

/// Suffix sums `ln Σ_{i>=n} σ_{i+1}/τ_i^α` for `n <= tail_horizon`, the part
/// beyond `tail_horizon` replaced by its closed-form bound.
#[derive(Clone, Debug)]
pub struct CertificateTable {
    alpha: f64,
    suffix: Vec<f64>,
    tail: TailTerms,
}

impl CertificateTable {
    /// `None` when no rigorous tail bound is available: then no certificate is
    /// ever issued.
    pub fn build(params: &ModelParams, tail_horizon: usize) -> Result<Option<Self>> {
        let alpha = params.alpha;
        let Some(ln_tail) = params.seq.ln_tail_bound(alpha, SeriesKind::SigmaOverTauAlpha, tail_horizon + 1)? else {
            return Ok(None);
        };
        let table = params.seq.table(tail_horizon + 1)?;
        let mut suffix = vec![0.0; tail_horizon + 1];
        let mut acc = ln_tail;
        for i in (0..=tail_horizon).rev() {
            acc = log_add_exp(acc, table.term(i + 1).ln_sigma - alpha * table.term(i).ln_tau);
            suffix[i] = acc;
        }
        Ok(Some(CertificateTable {
            alpha,
            suffix,
            tail: TailTerms {
                tail_horizon,
                ln_tail_bound: ln_tail,
            },
        }))
    }

    /// `ln` of `c·L^α Σ_{i>=n} σ_{i+1}/τ_i^α`, inflated by the safety margin.
    ///
    /// While the loser holds `L` balls its share at `i >= n` is
    /// `x_i = L/τ_i <= x_n <= 1/2`, and both `ψ(x) <= 2^{α-1}x^α` and
    /// `ψ(x) <= (x/(1-x))^α <= x^α (1-x_n)^{-α}` hold; `c` is the smaller
    /// constant.
    pub fn ln_epsilon(&self, n: usize, ln_loser: f64, ln_share: f64) -> Option<f64> {
        let s = *self.suffix.get(n)?;
        let ln_c = ((self.alpha - 1.0) * LN_2).min(-self.alpha * ln_1m_exp(ln_share));
        Some(ln_c + self.alpha * ln_loser + s + CERTIFICATE_SAFETY.ln_1p())
    }

    pub fn tail_horizon(&self) -> usize {
        self.tail.tail_horizon
    }
}

/// Issue a certificate for `state` if the bound is below `confidence_eps`.
pub fn monopoly_certificate(
    state: &ProcessState,
    table: &CertificateTable,
    confidence_eps: f64,
) -> Option<MonopolyCertificate> {
    let (bin, loser) = state.loser();
    let ln_eps = table.ln_epsilon(state.n, loser.ln(), state.ln_min_side())?;
    (ln_eps < confidence_eps.ln()).then(|| MonopolyCertificate {
        at_step: state.n,
        loser_bin: bin,
        loser_count: loser.clone(),
        epsilon_bound: ln_eps.exp(),
        ln_epsilon_bound: ln_eps,
        tail_terms: table.tail.clone(),
    })
}

/// Counts steps with `|Θ_n - 1/2| > δ_n`, `δ_n = 1/ln²τ_n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DeviationTracker {
    pub count: u64,
    /// Deviations at steps after `half`.
    pub count_second_half: u64,
    pub first: Option<usize>,
    pub last: Option<usize>,
    #[serde(skip)]
    half: usize,
}

impl DeviationTracker {
    pub fn new(horizon: usize) -> Self {
        DeviationTracker {
            half: horizon / 2,
            ..Default::default()
        }
    }

    pub fn delta(ln_tau: f64) -> f64 {
        1.0 / (ln_tau * ln_tau)
    }

    pub fn observe(&mut self, n: usize, theta: f64, ln_tau: f64) -> bool {
        let hit = (theta - 0.5).abs() > Self::delta(ln_tau);
        if hit {
            self.count += 1;
            if n > self.half {
                self.count_second_half += 1;
            }
            self.first.get_or_insert(n);
            self.last = Some(n);
        }
        hit
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub replication_id: u64,
    pub master_seed: u64,
    pub final_n: usize,
    pub final_theta: f64,
    pub ln_theta: f64,
    pub ln_1m_theta: f64,
    pub min_side: f64,
    pub ln_min_side: f64,
    /// `ln min(Θ, 1-Θ)` at step `final_n / 2`.
    pub ln_min_side_half: f64,
    pub winner: Winner,
    pub last_crossing: Option<usize>,
    pub monopoly_onset: Option<usize>,
    pub certificate: Option<MonopolyCertificate>,
    pub certificate_violated: bool,
    pub noise_sum: f64,
    pub noise_sum_sq: f64,
    pub noise_steps: u64,
    pub noise_mean: Option<f64>,
    pub noise_var: Option<f64>,
    pub trailing_hits: u64,
    pub trailing_steps: u64,
    pub deviations: DeviationTracker,
    pub float_switch_step: Option<usize>,
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub horizon: usize,
    pub reps: u64,
    pub master_seed: u64,
    pub confidence_eps: f64,
    /// Explicit summation limit for certificates; at least `horizon`.
    pub tail_horizon: usize,
    pub delta_grid: Vec<f64>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Cap on the total number of steps across replications.
    pub max_steps: Option<u64>,
    pub dump_trajectories: bool,
}

impl RunOptions {
    pub fn new(horizon: usize, reps: u64, master_seed: u64) -> Self {
        RunOptions {
            horizon,
            reps,
            master_seed,
            confidence_eps: 1e-3,
            tail_horizon: horizon,
            delta_grid: DEFAULT_DELTA_GRID.to_vec(),
            threads: 0,
            max_steps: None,
            dump_trajectories: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub delta: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceStats {
    pub p_below: Vec<GridPoint>,
    pub median_min_side: f64,
    pub median_min_side_half: f64,
    /// Logs of the two medians; they stay finite when the values underflow.
    pub median_ln_min_side: f64,
    pub median_ln_min_side_half: f64,
    /// Median `min(Θ, 1-Θ)` strictly smaller at the horizon than halfway.
    pub trend_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub schema: &'static str,
    pub reps: u64,
    pub horizon: usize,
    pub master_seed: u64,
    pub kernel: Kernel,
    pub dominance: DominanceStats,
    pub certified_count: u64,
    pub certified_fraction: f64,
    pub certificate_violations: u64,
    pub certificates_possible: bool,
    pub winner_bin1: u64,
    pub winner_bin2: u64,
    pub undecided: u64,
    pub noise_steps: u64,
    pub noise_mean: Option<f64>,
    pub noise_var: Option<f64>,
    pub deviation_any_fraction: f64,
    pub deviation_second_half_fraction: f64,
    pub trailing_hit_fraction: Option<f64>,
    pub float_switch_step: Option<usize>,
    pub partial_count: u64,
    pub total_steps: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub summary: EnsembleSummary,
    /// Per-replication step rows, when requested.
    pub trajectories: Option<Vec<Vec<StepRow>>>,
}

/// Run `reps` independent trajectories and aggregate them. The result does
/// not depend on the number of threads.
pub fn run_replications(params: &ModelParams, opts: &RunOptions) -> Result<RunOutput> {
    if opts.reps == 0 || opts.horizon == 0 {
        return invalid("reps and horizon must both be at least 1");
    }
    if !(opts.confidence_eps > 0.0 && opts.confidence_eps < 1.0) {
        return invalid(format!("confidence_eps must lie in (0, 1), got {}", opts.confidence_eps));
    }
    if opts.delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 0.5)) {
        return invalid("δ-grid values must lie in (0, 1/2]");
    }
    let table = params.seq.table(opts.horizon + 1)?;
    let certs = CertificateTable::build(params, opts.tail_horizon.max(opts.horizon))?;
    let budget_for = |rep: u64| -> usize {
        match opts.max_steps {
            None => opts.horizon,
            Some(max) => {
                let used = rep.saturating_mul(opts.horizon as u64);
                max.saturating_sub(used).min(opts.horizon as u64) as usize
            }
        }
    };
    let work = |rep: u64| simulate_one(params, &table, certs.as_ref(), opts, rep, budget_for(rep));
    let results: Vec<(TrajectoryRecord, Option<Vec<StepRow>>)> = if opts.threads == 1 {
        (0..opts.reps).map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| (0..opts.reps).into_par_iter().map(work).collect::<Result<_>>())?
    };
    let mut records = Vec::with_capacity(results.len());
    let mut trajectories = opts.dump_trajectories.then(Vec::new);
    for (rec, rows) in results {
        records.push(rec);
        if let (Some(all), Some(rows)) = (trajectories.as_mut(), rows) {
            all.push(rows);
        }
    }
    let summary = summarize(params, opts, &records, certs.is_some());
    Ok(RunOutput {
        records,
        summary,
        trajectories,
    })
}

fn sign(state: &ProcessState) -> i8 {
    match state.bin1.cmp_value(&state.bin2) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    }
}

/// Simulate replication `rep` for `steps` steps.
pub fn simulate_one(
    params: &ModelParams,
    table: &Table,
    certs: Option<&CertificateTable>,
    opts: &RunOptions,
    rep: u64,
    steps: usize,
) -> Result<(TrajectoryRecord, Option<Vec<StepRow>>)> {
    let mut rng = replication_rng(opts.master_seed, rep);
    let mut state = ProcessState::initial(params);
    let mut rows = opts.dump_trajectories.then(|| vec![StepRow::new(&state, Count::zero(), 0.0)]);
    let ln_noise_min = NOISE_MIN_P.ln();
    let half = steps / 2;
    let mut ln_min_side_half = state.ln_min_side();
    let mut last_sign = sign(&state);
    let mut last_crossing = None;
    let mut last_hit = [0usize; 2];
    let mut certificate = certs.and_then(|c| monopoly_certificate(&state, c, opts.confidence_eps));
    let mut violated = false;
    let (mut noise_sum, mut noise_sum_sq, mut noise_steps) = (0.0, 0.0, 0u64);
    let (mut trailing_hits, mut trailing_steps) = (0u64, 0u64);
    let mut deviations = DeviationTracker::new(steps);
    let mut float_switch_step = None;

    for _ in 0..steps {
        let (loser_before, _) = state.loser();
        let out = step_in_place(&mut state, params, table, &mut rng)?;
        let n = state.n;
        let got1 = !out.b.is_zero();
        let got2 = !out.b2.is_zero();
        if got1 {
            last_hit[0] = n;
        }
        if got2 {
            last_hit[1] = n;
        }
        if out.ln_p_small >= ln_noise_min {
            noise_sum += out.noise.epsilon;
            noise_sum_sq += out.noise.epsilon * out.noise.epsilon;
            noise_steps += 1;
        }
        if n >= TRAILING_FROM {
            trailing_steps += 1;
            let hit = if loser_before == 1 { got1 } else { got2 };
            trailing_hits += u64::from(hit);
        }
        let s = sign(&state);
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                last_crossing = Some(n);
            }
            last_sign = s;
        }
        deviations.observe(n, state.theta(), state.ln_tau());
        if n == half {
            ln_min_side_half = state.ln_min_side();
        }
        if float_switch_step.is_none() && state.mode() == Mode::Float {
            float_switch_step = Some(n);
        }
        match &certificate {
            Some(c) => {
                let loser_got = if c.loser_bin == 1 { got1 } else { got2 };
                violated |= loser_got;
            }
            None => {
                certificate = certs.and_then(|c| monopoly_certificate(&state, c, opts.confidence_eps));
            }
        }
        if let Some(rows) = rows.as_mut() {
            rows.push(StepRow::new(&state, out.b, out.noise.epsilon));
        }
    }

    let s = sign(&state);
    let winner = match s {
        1 => Winner::Bin1,
        -1 => Winner::Bin2,
        _ => Winner::Undecided,
    };
    let monopoly_onset = match s {
        1 => Some(last_hit[1]),
        -1 => Some(last_hit[0]),
        _ => None,
    }
    .filter(|&k| k < state.n);
    let noise_mean = (noise_steps > 0).then(|| noise_sum / noise_steps as f64);
    let noise_var = (noise_steps > 1).then(|| {
        let m = noise_sum / noise_steps as f64;
        (noise_sum_sq - noise_steps as f64 * m * m) / (noise_steps - 1) as f64
    });
    let ln_min_side = state.ln_min_side();
    let record = TrajectoryRecord {
        replication_id: rep,
        master_seed: opts.master_seed,
        final_n: state.n,
        final_theta: state.theta(),
        ln_theta: state.ln_theta(),
        ln_1m_theta: state.ln_1m_theta(),
        min_side: ln_min_side.exp(),
        ln_min_side,
        ln_min_side_half,
        winner,
        last_crossing,
        monopoly_onset,
        certificate,
        certificate_violated: violated,
        noise_sum,
        noise_sum_sq,
        noise_steps,
        noise_mean,
        noise_var,
        trailing_hits,
        trailing_steps,
        deviations,
        float_switch_step,
        partial: steps < opts.horizon,
    };
    Ok((record, rows))
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Empirical `P(min(Θ, 1-Θ) < δ)` over the grid plus the halfway trend.
pub fn dominance_stats(records: &[TrajectoryRecord], delta_grid: &[f64]) -> DominanceStats {
    let n = records.len().max(1) as f64;
    let p_below = delta_grid
        .iter()
        .map(|&delta| GridPoint {
            delta,
            fraction: records.iter().filter(|r| r.ln_min_side < delta.ln()).count() as f64 / n,
        })
        .collect();
    let ln_median = median(records.iter().map(|r| r.ln_min_side).collect());
    let ln_median_half = median(records.iter().map(|r| r.ln_min_side_half).collect());
    DominanceStats {
        p_below,
        median_min_side: ln_median.exp(),
        median_min_side_half: ln_median_half.exp(),
        median_ln_min_side: ln_median,
        median_ln_min_side_half: ln_median_half,
        trend_decreasing: ln_median < ln_median_half,
    }
}

fn summarize(params: &ModelParams, opts: &RunOptions, records: &[TrajectoryRecord], certificates_possible: bool) -> EnsembleSummary {
    let reps = records.len() as u64;
    let count = |f: &dyn Fn(&TrajectoryRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let certified_count = count(&|r| r.certificate.is_some());
    let noise_steps: u64 = records.iter().map(|r| r.noise_steps).sum();
    let noise_sum: f64 = records.iter().map(|r| r.noise_sum).sum();
    let noise_sum_sq: f64 = records.iter().map(|r| r.noise_sum_sq).sum();
    let noise_mean = (noise_steps > 0).then(|| noise_sum / noise_steps as f64);
    let noise_var = (noise_steps > 1).then(|| {
        let m = noise_sum / noise_steps as f64;
        (noise_sum_sq - noise_steps as f64 * m * m) / (noise_steps - 1) as f64
    });
    let trailing_steps: u64 = records.iter().map(|r| r.trailing_steps).sum();
    let trailing_hits: u64 = records.iter().map(|r| r.trailing_hits).sum();
    EnsembleSummary {
        schema: SCHEMA_VERSION,
        reps,
        horizon: opts.horizon,
        master_seed: opts.master_seed,
        kernel: params.kernel,
        dominance: dominance_stats(records, &opts.delta_grid),
        certified_count,
        certified_fraction: certified_count as f64 / reps as f64,
        certificate_violations: count(&|r| r.certificate_violated),
        certificates_possible,
        winner_bin1: count(&|r| r.winner == Winner::Bin1),
        winner_bin2: count(&|r| r.winner == Winner::Bin2),
        undecided: count(&|r| r.winner == Winner::Undecided),
        noise_steps,
        noise_mean,
        noise_var,
        deviation_any_fraction: count(&|r| r.deviations.count > 0) as f64 / reps as f64,
        deviation_second_half_fraction: count(&|r| r.deviations.count_second_half > 0) as f64 / reps as f64,
        trailing_hit_fraction: (trailing_steps > 0).then(|| trailing_hits as f64 / trailing_steps as f64),
        float_switch_step: records.iter().filter_map(|r| r.float_switch_step).min(),
        partial_count: count(&|r| r.partial),
        total_steps: records.iter().map(|r| r.final_n as u64).sum(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Uniform01,
    /// Half the mass at 0 and half at 1; compared on `[η, 1-η]`.
    TwoPointHalfHalf,
}

/// Edge width excluded when comparing against the two-point law, whose CDF
/// jumps at the endpoints.
pub const TWO_POINT_MARGIN: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub ks_stat: f64,
    pub p_value: f64,
    pub samples: usize,
    pub warning: Option<String>,
}

/// Two-sided Kolmogorov–Smirnov distance of the final `Θ` values to `reference`.
pub fn limit_distribution_test(records: &[TrajectoryRecord], reference: Reference, params: &ModelParams) -> Result<KsResult> {
    if records.is_empty() {
        return invalid("KS test needs at least one record");
    }
    let mut xs: Vec<f64> = records.iter().map(|r| r.final_theta).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks_stat = match reference {
        Reference::Uniform01 => xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
            .fold(0.0, f64::max),
        Reference::TwoPointHalfHalf => {
            // F_n is a step function, so the supremum over [η, 1-η] is attained
            // at η or just after a sample inside the window.
            let below = |x: f64| xs.partition_point(|&v| v <= x) as f64 / n;
            let lo = TWO_POINT_MARGIN;
            let hi = 1.0 - TWO_POINT_MARGIN;
            let mut d = (below(lo) - 0.5).abs();
            let start = xs.partition_point(|&v| v < lo);
            for (i, &x) in xs.iter().enumerate().skip(start) {
                if x > hi {
                    break;
                }
                d = d.max((i as f64 / n - 0.5).abs()).max(((i + 1) as f64 / n - 0.5).abs());
            }
            d
        }
    };
    let warning = (reference == Reference::Uniform01 && !is_classical(params)).then(|| {
        "the uniform reference is exact only for α = 1, σ ≡ 1, τ₀ = 2, T₀ = 1".to_string()
    });
    Ok(KsResult {
        ks_stat,
        p_value: kolmogorov_p_value(ks_stat, xs.len()),
        samples: xs.len(),
        warning,
    })
}

fn is_classical(params: &ModelParams) -> bool {
    params.alpha == 1.0
        && params.t0 == 1
        && params.seq.tau0() == 2
        && matches!(params.seq.family(), Family::Constant { value: 1 } | Family::Polynomial { coeff: 1, degree: 0 })
}

/// Asymptotic Kolmogorov tail probability with the usual small-sample
/// correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::GrowthSequence;
    use std::sync::Arc;

    fn params(alpha: f64) -> ModelParams {
        ModelParams::new(alpha, 1, Arc::new(GrowthSequence::constant(1, 2).unwrap()), Kernel::IndependentBinomial).unwrap()
    }

    #[test]
    fn delta_example() {
        let d = DeviationTracker::delta(10002f64.ln());
        assert!((d - 0.0118).abs() < 5e-5);
        let mut t = DeviationTracker::new(10);
        for n in 1..=10 {
            assert!(!t.observe(n, 0.5, 3.0));
        }
        assert_eq!(t.count, 0);
    }

    #[test]
    fn certificate_example() {
        // L = 1, α = 2, σ ≡ 1, τ_n = 1000: 2 Σ_{i>=n} 1/τ_i² <= 2/999 < 1e-2
        let p = params(2.0);
        let certs = CertificateTable::build(&p, 2000).unwrap().unwrap();
        let state = ProcessState::from_bins(998, Count::from_u64(1), Count::from_u64(999));
        let c = monopoly_certificate(&state, &certs, 1e-2).expect("certificate");
        // true value Σ_{k>=1000} 1/k² > 1/1000; the bound must sit above it
        assert!(c.epsilon_bound > 1.0 / 1000.0 && c.epsilon_bound < 2.0 / 999.0);
        assert!(monopoly_certificate(&state, &certs, 1e-3).is_none());
        // frozen loser: the bound shrinks as τ grows
        let later = ProcessState::from_bins(1500, Count::from_u64(1), Count::from_u64(1501));
        assert!(monopoly_certificate(&later, &certs, 1e-2).unwrap().epsilon_bound < c.epsilon_bound);
    }

    #[test]
    fn no_certificates_without_a_tail_bound() {
        let seq = Arc::new(GrowthSequence::doubly_exponential_tau(1.0, 1.0, 2.0, 12).unwrap());
        let p = ModelParams::new(2.0, 1, seq, Kernel::IndependentBinomial).unwrap();
        assert!(CertificateTable::build(&p, 10).unwrap().is_none());
    }

    #[test]
    fn point_mass_ks() {
        let p = params(1.0);
        let (rec, _) = simulate_one(&p, &p.seq.table(2).unwrap(), None, &RunOptions::new(1, 1, 0), 0, 0).unwrap();
        assert_eq!(rec.final_theta, 0.5);
        let ks = limit_distribution_test(&[rec], Reference::Uniform01, &p).unwrap();
        assert!((ks.ks_stat - 0.5).abs() < 1e-15);
        assert!(ks.warning.is_none());
    }

    #[test]
    fn determinism_and_thread_independence() {
        let p = params(2.0);
        let mut opts = RunOptions::new(300, 6, 42);
        opts.threads = 1;
        let a = run_replications(&p, &opts).unwrap();
        opts.threads = 3;
        let b = run_replications(&p, &opts).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn step_budget_marks_partial() {
        let p = params(2.0);
        let mut opts = RunOptions::new(100, 4, 1);
        opts.max_steps = Some(250);
        let out = run_replications(&p, &opts).unwrap();
        let steps: Vec<usize> = out.records.iter().map(|r| r.final_n).collect();
        assert_eq!(steps, vec![100, 100, 50, 0]);
        assert_eq!(out.summary.partial_count, 2);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.049
        let p = kolmogorov_p_value(1.36 / (1e6f64).sqrt(), 1_000_000);
        assert!((p - 0.0494).abs() < 1e-3);
    }
}
