//! The stochastic kernel `T_{n+1} = T_n + B_{n+1}`, `B_{n+1} ~ Bin(σ_{n+1}, ψ(Θ_n))`,
//! and the bulk-placement comparison kernel.
//!
//! Both bins are tracked as separate [`Count`]s so the trailing bin keeps an
//! exact integer value long after the total has left exact range.

use crate::count::Count;
use crate::error::{invalid, Result};
use crate::logspace::{ln_1m_exp, log_add_exp, mul_exp_floor, softplus};
use crate::sequences::{GrowthSequence, Table};
use num_bigint::{BigInt, BigUint, Sign};
use num_traits::FromPrimitive;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `ψ(x) = x^α / (x^α + (1-x)^α)`.
pub fn psi(x: f64, alpha: f64) -> Result<f64> {
    if x.is_nan() || alpha.is_nan() {
        return invalid("ψ of NaN");
    }
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("ψ needs x in [0, 1], got {x}"));
    }
    if x == 0.0 || x == 1.0 || alpha == 1.0 {
        return Ok(x);
    }
    let t = alpha * ((-x).ln_1p() - x.ln());
    Ok(1.0 / (1.0 + t.exp()))
}

/// `ln ψ(x)` from `ln x` and `ln(1-x)`; stays accurate when `x` underflows.
pub fn log_psi(log_x: f64, log_1mx: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return log_x;
    }
    if log_x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    -softplus(alpha * (log_1mx - log_x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    IndependentBinomial,
    /// The whole batch joins bin 1 with probability `ψ(Θ_n)`, else bin 2.
    BulkPlacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Sizes up to this are sampled exactly.
    pub exact_max: u64,
    /// Above `exact_max`, means up to this use the Poisson approximation.
    pub poisson_max_mean: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            exact_max: 1_000_000,
            poisson_max_mean: 1e3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub alpha: f64,
    pub t0: u64,
    pub seq: Arc<GrowthSequence>,
    pub kernel: Kernel,
    pub sampler: SamplerConfig,
}

impl ModelParams {
    pub fn new(alpha: f64, t0: u64, seq: Arc<GrowthSequence>, kernel: Kernel) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return invalid(format!("α must be finite and >= 1, got {alpha}"));
        }
        if t0 == 0 || t0 >= seq.tau0() {
            return invalid(format!("T₀ must satisfy 0 < T₀ < τ₀ = {}, got {t0}", seq.tau0()));
        }
        Ok(ModelParams {
            alpha,
            t0,
            seq,
            kernel,
            sampler: SamplerConfig::default(),
        })
    }

    pub fn with_sampler(mut self, sampler: SamplerConfig) -> Self {
        self.sampler = sampler;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Float,
}

/// State after `n` steps: bin 1 holds `T_n`, bin 2 holds `τ_n - T_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessState {
    pub n: usize,
    pub bin1: Count,
    pub bin2: Count,
    ln_theta: f64,
    ln_1m_theta: f64,
    ln_tau: f64,
}

impl ProcessState {
    pub fn initial(params: &ModelParams) -> Self {
        Self::from_bins(0, Count::from_u64(params.t0), Count::from_u64(params.seq.tau0() - params.t0))
    }

    pub fn from_bins(n: usize, bin1: Count, bin2: Count) -> Self {
        let l1 = bin1.ln();
        let l2 = bin2.ln();
        let ln_tau = log_add_exp(l1, l2);
        ProcessState {
            n,
            bin1,
            bin2,
            ln_theta: l1 - ln_tau,
            ln_1m_theta: l2 - ln_tau,
            ln_tau,
        }
    }

    fn refresh(&mut self) {
        *self = Self::from_bins(self.n, std::mem::replace(&mut self.bin1, Count::zero()), std::mem::replace(&mut self.bin2, Count::zero()));
    }

    /// `T_n`.
    pub fn t(&self) -> &Count {
        &self.bin1
    }

    pub fn tau(&self) -> Count {
        self.bin1.add(&self.bin2)
    }

    pub fn ln_tau(&self) -> f64 {
        self.ln_tau
    }

    pub fn theta(&self) -> f64 {
        self.ln_theta.exp()
    }

    pub fn ln_theta(&self) -> f64 {
        self.ln_theta
    }

    pub fn ln_1m_theta(&self) -> f64 {
        self.ln_1m_theta
    }

    /// `ln min(Θ, 1-Θ)`.
    pub fn ln_min_side(&self) -> f64 {
        self.ln_theta.min(self.ln_1m_theta)
    }

    /// Count in the trailing bin (bin 2 on ties).
    pub fn loser(&self) -> (u8, &Count) {
        if self.bin1.cmp_value(&self.bin2).is_lt() {
            (1, &self.bin1)
        } else {
            (2, &self.bin2)
        }
    }

    pub fn mode(&self) -> Mode {
        if self.bin1.is_exact() && self.bin2.is_exact() {
            Mode::Exact
        } else {
            Mode::Float
        }
    }

    /// `(ln P_n, ln(1-P_n))` with `P_n = ψ(Θ_n)`.
    pub fn ln_p(&self, alpha: f64) -> (f64, f64) {
        (
            log_psi(self.ln_theta, self.ln_1m_theta, alpha),
            log_psi(self.ln_1m_theta, self.ln_theta, alpha),
        )
    }
}

/// Normalised fluctuation `ε_n = (B_n - σ_n P_{n-1}) / sqrt(σ_n P_{n-1}(1-P_{n-1}))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepNoise {
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Balls added to bin 1.
    pub b: Count,
    /// Balls added to bin 2.
    pub b2: Count,
    pub noise: StepNoise,
    /// `ln min(P_n, 1-P_n)` before the step.
    pub ln_p_small: f64,
}

/// One binomial draw and its standardised deviation from the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub count: Count,
    pub epsilon: f64,
}

/// Sample `Bin(size, e^{ln_p})`: exactly for small sizes, otherwise through a
/// Poisson or Gaussian approximation depending on the mean.
pub fn sample_binomial<R: Rng + ?Sized>(size: &Count, ln_p: f64, rng: &mut R, cfg: &SamplerConfig) -> Result<Draw> {
    if ln_p.is_nan() || ln_p > 1e-12 {
        return invalid(format!("binomial probability e^{ln_p} outside [0, 1]"));
    }
    let ln_p = ln_p.min(0.0);
    if size.is_zero() || ln_p == f64::NEG_INFINITY {
        return Ok(Draw {
            count: Count::zero(),
            epsilon: 0.0,
        });
    }
    let p = ln_p.exp();
    if let Some(n) = size.to_u64().filter(|&n| n <= cfg.exact_max) {
        let k = if n == 1 {
            u64::from(rng.random::<f64>() < p)
        } else {
            Binomial::new(n, p).expect("validated probability").sample(rng)
        };
        let mean = n as f64 * p;
        let sd = (mean * (1.0 - p)).sqrt();
        let epsilon = if sd > 0.0 { (k as f64 - mean) / sd } else { 0.0 };
        return Ok(Draw {
            count: Count::from_u64(k),
            epsilon,
        });
    }
    let ln_q = ln_1m_exp(ln_p);
    let ln_mean = size.ln() + ln_p;
    if ln_mean <= cfg.poisson_max_mean.ln() {
        let mean = ln_mean.exp();
        let k = if mean < 1e-12 {
            // P(k >= 2) is below 1e-24
            u64::from(rng.random::<f64>() < mean)
        } else {
            Poisson::new(mean).expect("positive mean").sample(rng) as u64
        };
        let count = clamp(Count::from_u64(k), size);
        let sd = (mean * ln_q.exp()).sqrt();
        let epsilon = if sd > 0.0 { (count.to_f64() - mean) / sd } else { 0.0 };
        return Ok(Draw { count, epsilon });
    }
    let z: f64 = rng.sample(StandardNormal);
    let ln_sd = 0.5 * (ln_mean + ln_q);
    let mean = ln_mean.exp();
    let sd = ln_sd.exp();
    if mean < 2f64.powi(52) {
        let v = (mean + z * sd).round().max(0.0);
        let count = clamp(Count::from_u64(v as u64), size);
        let epsilon = (count.to_f64() - mean) / sd;
        return Ok(Draw { count, epsilon });
    }
    if let Count::Exact(s) = size {
        let floor_mean = BigInt::from(mul_exp_floor(s, ln_p));
        let shift = BigInt::from_f64((z * sd).round()).unwrap_or_default();
        let v = floor_mean + shift;
        let v = match v.sign() {
            Sign::Minus => BigUint::default(),
            _ => v.to_biguint().unwrap(),
        };
        let count = clamp(Count::Exact(v), size);
        // the standardised value is z unless clamping intervened
        let epsilon = if count == *size { (size.ln() - ln_mean).exp_m1() * mean / sd } else { z };
        return Ok(Draw { count, epsilon });
    }
    let rel = z * (ln_sd - ln_mean).exp();
    if rel <= -1.0 {
        return Ok(Draw {
            count: Count::zero(),
            epsilon: -mean / sd,
        });
    }
    let ln_v = (ln_mean + rel.ln_1p()).min(size.ln());
    let count = if ln_v < 52.0 * std::f64::consts::LN_2 {
        Count::from_u64(ln_v.exp().round() as u64)
    } else {
        Count::Approx(ln_v)
    };
    Ok(Draw { count, epsilon: z })
}

fn clamp(v: Count, size: &Count) -> Count {
    if v.cmp_value(size).is_gt() {
        size.clone()
    } else {
        v
    }
}

/// Advance `state` by one step in place. `table` must cover index `state.n + 1`.
pub fn step_in_place<R: Rng + ?Sized>(
    state: &mut ProcessState,
    params: &ModelParams,
    table: &Table,
    rng: &mut R,
) -> Result<StepOutcome> {
    let sigma = &table.term(state.n + 1).sigma;
    let (ln_p1, ln_p2) = state.ln_p(params.alpha);
    let (b1, b2, epsilon) = match params.kernel {
        Kernel::IndependentBinomial => {
            // sample the less likely side; it is the one that may stay exact
            let bin1_small = ln_p1 <= ln_p2;
            let draw = sample_binomial(sigma, ln_p1.min(ln_p2), rng, &params.sampler)?;
            let rest = sigma.saturating_sub(&draw.count);
            if bin1_small {
                (draw.count, rest, draw.epsilon)
            } else {
                (rest, draw.count, -draw.epsilon)
            }
        }
        Kernel::BulkPlacement => {
            let p = ln_p1.exp();
            let to_bin1 = rng.random::<f64>() < p;
            let epsilon = if ln_p1 == f64::NEG_INFINITY || ln_p2 == f64::NEG_INFINITY {
                0.0
            } else {
                let indicator = if to_bin1 { 1.0 } else { 0.0 };
                (0.5 * sigma.ln()).exp() * (indicator - p) / (p * ln_p2.exp()).sqrt()
            };
            if to_bin1 {
                (sigma.clone(), Count::zero(), epsilon)
            } else {
                (Count::zero(), sigma.clone(), epsilon)
            }
        }
    };
    state.bin1.add_assign(&b1);
    state.bin2.add_assign(&b2);
    let budget = params.seq.bit_budget() as f64;
    for bin in [&mut state.bin1, &mut state.bin2] {
        if bin.is_exact() && bin.bits() > budget {
            *bin = Count::Approx(bin.ln());
        }
    }
    state.n += 1;
    state.refresh();
    Ok(StepOutcome {
        b: b1,
        b2,
        noise: StepNoise { epsilon },
        ln_p_small: ln_p1.min(ln_p2),
    })
}

/// Pure form of [`step_in_place`].
pub fn step<R: Rng + ?Sized>(state: &ProcessState, params: &ModelParams, rng: &mut R) -> Result<(ProcessState, StepOutcome)> {
    let table = params.seq.table(state.n + 1)?;
    let mut next = state.clone();
    let outcome = step_in_place(&mut next, params, &table, rng)?;
    Ok((next, outcome))
}

/// One line of a trajectory dump.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub n: usize,
    pub t: Count,
    pub tau: Count,
    pub ln_t: f64,
    pub ln_tau: f64,
    pub b: Count,
    pub epsilon: f64,
    pub mode: Mode,
}

impl StepRow {
    pub fn new(state: &ProcessState, b: Count, epsilon: f64) -> Self {
        StepRow {
            n: state.n,
            t: state.bin1.clone(),
            tau: state.tau(),
            ln_t: state.bin1.ln(),
            ln_tau: state.ln_tau(),
            b,
            epsilon,
            mode: state.mode(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.5, 3.7).unwrap(), 0.5);
        assert!((psi(1.0 / 3.0, 2.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(psi(0.0, 1.5).unwrap(), 0.0);
        assert_eq!(psi(1.0, 1.5).unwrap(), 1.0);
        assert!(psi(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn log_psi_examples() {
        let lx = 1e-200f64.ln();
        let got = log_psi(lx, 0.0, 2.0);
        assert!((got - 2.0 * lx).abs() <= (2.0 * lx).abs() * 1e-12);
        let h = 0.5f64.ln();
        assert!((log_psi(h, h, 2.5) - h).abs() < 1e-15);
        let (x, a) = (0.3f64, 3.0);
        let v = log_psi(x.ln(), (1.0 - x).ln(), a);
        assert!(v >= a * x.ln() && v <= 2.0 * 2f64.ln() + a * x.ln());
    }

    #[test]
    fn binomial_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SamplerConfig::default();
        let d = sample_binomial(&Count::zero(), 0.5f64.ln(), &mut rng, &cfg).unwrap();
        assert!(d.count.is_zero());
        let huge = Count::Approx(100.0 * std::f64::consts::LN_10);
        let d = sample_binomial(&huge, -250.0 * std::f64::consts::LN_10, &mut rng, &cfg).unwrap();
        assert!(d.count.is_zero());
        assert!(sample_binomial(&Count::from_u64(3), 0.1, &mut rng, &cfg).is_err());
        assert!(sample_binomial(&Count::from_u64(3), f64::NAN, &mut rng, &cfg).is_err());
    }

    #[test]
    fn gaussian_branch_on_exact_huge_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let size = BigUint::from(1u32) << 200u32;
        let d = sample_binomial(&Count::Exact(size.clone()), 0.25f64.ln(), &mut rng, &SamplerConfig::default()).unwrap();
        let v = d.count.exact().unwrap();
        let expected = &size >> 2u32;
        // within 10 sd of the mean
        let sd = (2f64.powi(200) * 0.25 * 0.75).sqrt();
        let diff = (v.to_f64().unwrap() - expected.to_f64().unwrap()).abs();
        assert!(diff < 10.0 * sd);
        assert!(d.epsilon.abs() < 10.0);
    }

    #[test]
    fn bulk_example() {
        let seq = Arc::new(GrowthSequence::constant(8, 8).unwrap());
        let params = ModelParams::new(1.0, 2, seq, Kernel::BulkPlacement).unwrap();
        let state = ProcessState::initial(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = 0;
        let draws = 20_000;
        for _ in 0..draws {
            let (_, out) = step(&state, &params, &mut rng).unwrap();
            let b = out.b.to_u64().unwrap();
            assert!(b == 0 || b == 8);
            hits += usize::from(b == 8);
        }
        let frac = hits as f64 / draws as f64;
        let se = (0.25f64 * 0.75 / draws as f64).sqrt();
        assert!((frac - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn rejects_bad_params() {
        let seq = Arc::new(GrowthSequence::constant(1, 2).unwrap());
        assert!(ModelParams::new(0.5, 1, seq.clone(), Kernel::default()).is_err());
        assert!(ModelParams::new(2.0, 0, seq.clone(), Kernel::default()).is_err());
        assert!(ModelParams::new(2.0, 2, seq, Kernel::default()).is_err());
    }

    #[test]
    fn float_mode_keeps_loser_exact() {
        let seq = Arc::new(GrowthSequence::geometric(1, 2, 2).unwrap().with_bit_budget(64));
        let params = ModelParams::new(3.0, 1, seq.clone(), Kernel::default()).unwrap();
        let table = seq.table(150).unwrap();
        let mut state = ProcessState::initial(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..150 {
            step_in_place(&mut state, &params, &table, &mut rng).unwrap();
        }
        assert_eq!(state.mode(), Mode::Float);
        assert!((state.ln_tau() - table.term(150).ln_tau).abs() < 1e-9 * table.term(150).ln_tau);
        assert!(state.loser().1.is_exact());
    }
}
