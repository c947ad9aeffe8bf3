//! Growth sequences `(σ_n)`: exact evaluation of `σ_n` and `τ_n`, the growth
//! functionals `θ` and `λ`, and the two series tests that drive the regime
//! classification.
//!
//! Values are arbitrary-precision integers until `τ_n` exceeds the bit budget.
//! From then on only `ln σ_n` and `ln τ_n` are tracked, which is all the
//! functionals and the kernel need.

use crate::count::Count;
use crate::error::{invalid, Error, Result};
use crate::floorexp::{floor_b_pow_exp, log2_estimate};
use crate::logspace::{ln_1m_exp, ln_big, log_add_exp, log_sum_exp, LnSplit};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::LN_2;
use std::fmt;
use std::sync::{Arc, RwLock};

pub const DEFAULT_BIT_BUDGET: u64 = 1_000_000;

/// Relative tolerance on successive `α^{-n} log τ_n` values.
pub const THETA_TOLERANCE: f64 = 1e-4;
/// Relative movement of the running maximum tolerated in the `λ` window.
pub const LAMBDA_WINDOW_TOLERANCE: f64 = 0.01;

/// A nonnegative real that may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal(0.0);
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);

    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "ExtReal cannot hold NaN");
        ExtReal(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) if v >= 0.0 => Ok(ExtReal(v)),
            Repr::Num(v) => Err(serde::de::Error::custom(format!("negative value {v}"))),
            Repr::Text(t) if t == "inf" || t == "infinity" => Ok(ExtReal::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhoClass {
    /// `ρ_n <= bound` for every `n >= 0`.
    Bounded { bound: f64 },
    TendsToInfinity,
    Irregular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesVerdict {
    Converges,
    Diverges,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    /// `Σ σ_{n+1} / τ_n^α`
    SigmaOverTauAlpha,
    /// `Σ τ_{n+1} / τ_n^α`
    TauOverTauAlpha,
}

/// Closed-form asymptotics of a sequence for one fixed `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticAsymptotics {
    pub theta: ExtReal,
    pub lambda: ExtReal,
    pub rho_class: RhoClass,
    pub series_sigma_tau_alpha: SeriesVerdict,
    pub series_tau_tau_alpha: SeriesVerdict,
    pub condition_s: bool,
    pub condition_r: bool,
}

impl AnalyticAsymptotics {
    /// Reject metadata that contradicts the bounded-ρ lemma (`ρ` bounded forces
    /// `θ = 0` when `α > 1`).
    pub fn validate(&self, alpha: f64) -> Result<()> {
        if alpha > 1.0 {
            if let RhoClass::Bounded { .. } = self.rho_class {
                if !self.theta.is_zero() {
                    return Err(Error::Contradiction(format!(
                        "bounded (ρ_n) forces θ = 0, but θ = {} was supplied",
                        self.theta
                    )));
                }
            }
        }
        if let RhoClass::Bounded { bound } = self.rho_class {
            if !(bound.is_finite() && bound > 0.0) {
                return Err(Error::Contradiction(format!("ρ bound must be positive and finite, got {bound}")));
            }
        }
        Ok(())
    }

    pub fn series(&self, kind: SeriesKind) -> SeriesVerdict {
        match kind {
            SeriesKind::SigmaOverTauAlpha => self.series_sigma_tau_alpha,
            SeriesKind::TauOverTauAlpha => self.series_tau_tau_alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    Analytic,
    NumericStable,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: ExtReal,
    pub confidence: Confidence,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Constant { value: u64 },
    /// `σ_n = coeff · n^degree`
    Polynomial { coeff: u64, degree: u32 },
    /// `σ_n = coeff · ratio^n`
    Geometric { coeff: u64, ratio: u64 },
    /// `σ_n = n!`
    Factorial,
    /// `τ_n = ⌊b^n e^{θ₀ growth^n}⌋`; `growth` is normally the feedback
    /// exponent itself.
    DoublyExponentialTau { b: f64, theta0: f64, growth: f64 },
    /// Explicit `σ_1, σ_2, …` with optional asymptotics for the configured `α`.
    Custom {
        sigma: Vec<BigUint>,
        analytic: Option<AnalyticAsymptotics>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant { .. } => "constant",
            Family::Polynomial { .. } => "polynomial",
            Family::Geometric { .. } => "geometric",
            Family::Factorial => "factorial",
            Family::DoublyExponentialTau { .. } => "doubly-exponential-tau",
            Family::Custom { .. } => "custom",
        }
    }
}

/// One evaluated index: `σ_n`, `τ_n` and their logarithms. `σ_0` is zero.
#[derive(Clone, Debug)]
pub struct Term {
    pub sigma: Count,
    pub tau: Count,
    pub ln_sigma: f64,
    pub ln_tau: f64,
}

impl Term {
    pub fn is_exact(&self) -> bool {
        self.tau.is_exact()
    }
}

/// Evaluated prefix `0..len` of a sequence.
#[derive(Clone, Debug, Default)]
pub struct Table {
    terms: Vec<Term>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, n: usize) -> &Term {
        &self.terms[n]
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// First index whose `τ_n` is no longer exact.
    pub fn first_approx(&self) -> Option<usize> {
        self.terms.iter().position(|t| !t.is_exact())
    }
}

/// A growth sequence with a lazily extended, shareable evaluation cache.
pub struct GrowthSequence {
    family: Family,
    tau0: u64,
    bit_budget: u64,
    use_analytic: bool,
    cache: RwLock<Arc<Table>>,
}

impl Clone for GrowthSequence {
    fn clone(&self) -> Self {
        GrowthSequence {
            family: self.family.clone(),
            tau0: self.tau0,
            bit_budget: self.bit_budget,
            use_analytic: self.use_analytic,
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

impl fmt::Debug for GrowthSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthSequence")
            .field("family", &self.family)
            .field("tau0", &self.tau0)
            .field("bit_budget", &self.bit_budget)
            .finish()
    }
}

impl GrowthSequence {
    pub fn new(family: Family, tau0: u64) -> Result<Self> {
        if tau0 < 2 {
            return invalid(format!("τ₀ must be at least 2, got {tau0}"));
        }
        match &family {
            Family::Constant { value } if *value == 0 => return invalid("constant σ must be >= 1"),
            Family::Polynomial { coeff, .. } if *coeff == 0 => return invalid("polynomial coefficient must be >= 1"),
            Family::Geometric { coeff, ratio } if *coeff == 0 || *ratio == 0 => {
                return invalid("geometric coefficient and ratio must be >= 1")
            }
            Family::Custom { sigma, .. } if sigma.iter().any(|s| s.is_zero()) => {
                return invalid("custom σ values must all be >= 1")
            }
            Family::DoublyExponentialTau { .. } => {
                return invalid("use GrowthSequence::doubly_exponential_tau for this family")
            }
            _ => {}
        }
        let seq = GrowthSequence::raw(family, tau0);
        Ok(seq)
    }

    fn raw(family: Family, tau0: u64) -> Self {
        let first = Term {
            sigma: Count::zero(),
            tau: Count::from_u64(tau0),
            ln_sigma: f64::NEG_INFINITY,
            ln_tau: (tau0 as f64).ln(),
        };
        GrowthSequence {
            family,
            tau0,
            bit_budget: DEFAULT_BIT_BUDGET,
            use_analytic: true,
            cache: RwLock::new(Arc::new(Table { terms: vec![first] })),
        }
    }

    pub fn constant(value: u64, tau0: u64) -> Result<Self> {
        Self::new(Family::Constant { value }, tau0)
    }

    pub fn polynomial(coeff: u64, degree: u32, tau0: u64) -> Result<Self> {
        Self::new(Family::Polynomial { coeff, degree }, tau0)
    }

    pub fn geometric(coeff: u64, ratio: u64, tau0: u64) -> Result<Self> {
        Self::new(Family::Geometric { coeff, ratio }, tau0)
    }

    pub fn factorial(tau0: u64) -> Result<Self> {
        Self::new(Family::Factorial, tau0)
    }

    pub fn custom(sigma: Vec<BigUint>, tau0: u64, analytic: Option<AnalyticAsymptotics>) -> Result<Self> {
        Self::new(Family::Custom { sigma, analytic }, tau0)
    }

    /// `τ_n = ⌊b^n e^{θ₀ growth^n}⌋`, so `τ₀ = ⌊e^{θ₀}⌋`. The sequence is
    /// evaluated up to `horizon` and rejected if `σ_n < 1` anywhere on it.
    pub fn doubly_exponential_tau(b: f64, theta0: f64, growth: f64, horizon: usize) -> Result<Self> {
        Self::doubly_exponential_tau_with_budget(b, theta0, growth, horizon, DEFAULT_BIT_BUDGET)
    }

    pub fn doubly_exponential_tau_with_budget(
        b: f64,
        theta0: f64,
        growth: f64,
        horizon: usize,
        bit_budget: u64,
    ) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return invalid(format!("b must be positive and finite, got {b}"));
        }
        if !(theta0.is_finite() && theta0 > 0.0) {
            return invalid(format!("θ₀ must be positive and finite, got {theta0}"));
        }
        if !(growth.is_finite() && growth > 1.0) {
            return invalid(format!("growth base must exceed 1, got {growth}"));
        }
        let tau0 = floor_b_pow_exp(1.0, 0, theta0, growth);
        let tau0 = tau0.to_u64().filter(|&t| t >= 2).ok_or_else(|| {
            Error::InvalidParameter(format!("τ₀ = ⌊e^θ₀⌋ must be at least 2 (θ₀ = {theta0})"))
        })?;
        let seq = GrowthSequence::raw(Family::DoublyExponentialTau { b, theta0, growth }, tau0).with_bit_budget(bit_budget);
        seq.table(horizon)?;
        Ok(seq)
    }

    pub fn with_bit_budget(mut self, bits: u64) -> Self {
        self.bit_budget = bits.max(64);
        let first = self.cache.read().unwrap().terms[0].clone();
        self.cache = RwLock::new(Arc::new(Table { terms: vec![first] }));
        self
    }

    /// Drop attached closed forms so every functional is estimated numerically.
    pub fn without_analytic(mut self) -> Self {
        self.use_analytic = false;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tau0(&self) -> u64 {
        self.tau0
    }

    pub fn bit_budget(&self) -> u64 {
        self.bit_budget
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.family, Family::Custom { .. })
    }

    /// Snapshot of the table with at least `n_max + 1` terms.
    pub fn table(&self, n_max: usize) -> Result<Arc<Table>> {
        {
            let cached = self.cache.read().unwrap();
            if cached.len() > n_max {
                return Ok(Arc::clone(&cached));
            }
        }
        let mut guard = self.cache.write().unwrap();
        if guard.len() > n_max {
            return Ok(Arc::clone(&guard));
        }
        let table = Arc::make_mut(&mut guard);
        while table.terms.len() <= n_max {
            let n = table.terms.len();
            let next = self.next_term(table.terms.last().unwrap(), n)?;
            table.terms.push(next);
        }
        Ok(Arc::clone(&guard))
    }

    /// `σ_n` for `n >= 1`.
    pub fn sigma(&self, n: usize) -> Result<Count> {
        if n == 0 {
            return invalid("σ_n is defined for n >= 1");
        }
        Ok(self.table(n)?.term(n).sigma.clone())
    }

    /// `τ_n = τ₀ + σ_1 + … + σ_n`.
    pub fn tau(&self, n: usize) -> Result<Count> {
        Ok(self.table(n)?.term(n).tau.clone())
    }

    fn next_term(&self, prev: &Term, n: usize) -> Result<Term> {
        if let Family::DoublyExponentialTau { b, theta0, growth } = self.family {
            return self.next_doubly_exponential(prev, n, b, theta0, growth);
        }
        if let Family::Custom { sigma, .. } = &self.family {
            if n > sigma.len() {
                return Err(Error::OutOfRange { n, last: sigma.len() });
            }
        }
        if let Count::Exact(prev_tau) = &prev.tau {
            let sigma = self.exact_sigma(n, prev);
            let tau = prev_tau + &sigma;
            if tau.bits() <= self.bit_budget {
                return Ok(Term {
                    ln_sigma: ln_big(&sigma),
                    ln_tau: ln_big(&tau),
                    sigma: Count::Exact(sigma),
                    tau: Count::Exact(tau),
                });
            }
        }
        let ln_sigma = self.ln_sigma_formula(n);
        let ln_tau = log_add_exp(prev.ln_tau, ln_sigma);
        if !ln_tau.is_finite() {
            return Err(Error::Overflow { n });
        }
        let sigma = match self.cheap_exact_sigma(n) {
            Some(s) if s.bits() <= self.bit_budget => Count::Exact(s),
            _ => Count::Approx(ln_sigma),
        };
        Ok(Term {
            sigma,
            tau: Count::Approx(ln_tau),
            ln_sigma,
            ln_tau,
        })
    }

    fn exact_sigma(&self, n: usize, prev: &Term) -> BigUint {
        match (&self.family, &prev.sigma) {
            (Family::Geometric { ratio, .. }, Count::Exact(p)) if n > 1 => p * BigUint::from(*ratio),
            (Family::Factorial, Count::Exact(p)) if n > 1 => p * BigUint::from(n),
            (Family::Geometric { coeff, ratio }, _) => BigUint::from(*coeff) * BigUint::from(*ratio).pow(n as u32),
            (Family::Factorial, _) => (1..=n as u64).fold(BigUint::one(), |acc, k| acc * k),
            _ => self.cheap_exact_sigma(n).expect("σ-defined family"),
        }
    }

    fn cheap_exact_sigma(&self, n: usize) -> Option<BigUint> {
        match &self.family {
            Family::Constant { value } => Some(BigUint::from(*value)),
            Family::Polynomial { coeff, degree } => Some(BigUint::from(*coeff) * BigUint::from(n).pow(*degree)),
            Family::Custom { sigma, .. } => sigma.get(n - 1).cloned(),
            _ => None,
        }
    }

    fn ln_sigma_formula(&self, n: usize) -> f64 {
        match &self.family {
            Family::Constant { value } => (*value as f64).ln(),
            Family::Polynomial { coeff, degree } => (*coeff as f64).ln() + *degree as f64 * (n as f64).ln(),
            Family::Geometric { coeff, ratio } => (*coeff as f64).ln() + n as f64 * (*ratio as f64).ln(),
            Family::Factorial => ln_gamma(n as f64 + 1.0),
            Family::Custom { sigma, .. } => ln_big(&sigma[n - 1]),
            Family::DoublyExponentialTau { .. } => unreachable!("τ-defined family"),
        }
    }

    fn next_doubly_exponential(&self, prev: &Term, n: usize, b: f64, theta0: f64, growth: f64) -> Result<Term> {
        let est_bits = log2_estimate(b, n as u32, theta0, growth);
        if !est_bits.is_finite() || n > u32::MAX as usize {
            return Err(Error::Overflow { n });
        }
        if let Count::Exact(prev_tau) = &prev.tau {
            if est_bits <= self.bit_budget as f64 + 1.0 {
                let tau = floor_b_pow_exp(b, n as u32, theta0, growth);
                if tau.bits() <= self.bit_budget {
                    if &tau <= prev_tau {
                        return Err(Error::NonIncreasing { n });
                    }
                    let sigma = &tau - prev_tau;
                    return Ok(Term {
                        ln_sigma: ln_big(&sigma),
                        ln_tau: ln_big(&tau),
                        sigma: Count::Exact(sigma),
                        tau: Count::Exact(tau),
                    });
                }
            }
        }
        // Beyond the budget ⌊v⌋ and v agree to a relative 2^{-budget}.
        let ln_tau = n as f64 * b.ln() + theta0 * growth.powi(n as i32);
        if !ln_tau.is_finite() {
            return Err(Error::Overflow { n });
        }
        if ln_tau <= prev.ln_tau {
            return Err(Error::NonIncreasing { n });
        }
        let ln_sigma = ln_tau + ln_1m_exp(prev.ln_tau - ln_tau);
        if ln_sigma < 0.0 {
            return Err(Error::NonIncreasing { n });
        }
        Ok(Term {
            sigma: Count::Approx(ln_sigma),
            tau: Count::Approx(ln_tau),
            ln_sigma,
            ln_tau,
        })
    }

    /// Global bound `ρ̄ >= ρ_n` for every `n`, where one is known.
    pub fn rho_bound(&self) -> Option<f64> {
        let tau0 = self.tau0 as f64;
        match &self.family {
            Family::Constant { value } => Some(*value as f64 / tau0),
            Family::Polynomial { coeff, degree } => {
                let d = *degree as f64;
                Some((*coeff as f64 / tau0).max((d + 1.0) * 2f64.powf(d)))
            }
            Family::Geometric { coeff, ratio } => {
                let r = *ratio as f64;
                if *ratio == 1 {
                    Some(*coeff as f64 / tau0)
                } else {
                    Some((*coeff as f64 * r / tau0).max(r))
                }
            }
            Family::Custom {
                analytic: Some(AnalyticAsymptotics {
                    rho_class: RhoClass::Bounded { bound },
                    ..
                }),
                ..
            } => Some(*bound),
            _ => None,
        }
    }

    /// Bound on `ρ_n` valid for every `n >= m`; tighter than
    /// [`rho_bound`](Self::rho_bound) far out.
    pub fn rho_bound_from(&self, m: usize) -> Result<Option<f64>> {
        let Some(global) = self.rho_bound() else {
            return Ok(None);
        };
        if m == 0 {
            return Ok(Some(global));
        }
        let mf = m as f64;
        let local = match &self.family {
            // ρ_n = c/τ_n decreases
            Family::Constant { value } | Family::Geometric { coeff: value, ratio: 1 } => {
                *value as f64 / self.table(m)?.term(m).ln_tau.exp()
            }
            // τ_n >= c n^{d+1}/(d+1), so ρ_n <= (d+1)(1+1/n)^d / n
            Family::Polynomial { degree, .. } => {
                let d = *degree as f64;
                (d + 1.0) * (1.0 + 1.0 / mf).powf(d) / mf
            }
            // τ_n >= c r (r^n - 1)/(r - 1), so ρ_n <= (r-1)/(1 - r^{-n})
            Family::Geometric { ratio, .. } => {
                let r = *ratio as f64;
                (r - 1.0) / (-(r.powf(-mf))).ln_1p().exp()
            }
            _ => global,
        };
        Ok(Some(local.min(global)))
    }

    /// Closed-form asymptotics for the given `α >= 1`, when attached.
    pub fn analytic(&self, alpha: f64) -> Option<AnalyticAsymptotics> {
        if !self.use_analytic {
            return None;
        }
        let supercritical_if = |cond: bool| if cond { SeriesVerdict::Converges } else { SeriesVerdict::Diverges };
        let feedback = alpha > 1.0;
        let theta_sub = if feedback { ExtReal::ZERO } else { ExtReal::INFINITY };
        let bounded = RhoClass::Bounded {
            bound: self.rho_bound().unwrap_or(f64::INFINITY),
        };
        let a = match &self.family {
            Family::Constant { .. } | Family::Geometric { ratio: 1, .. } => AnalyticAsymptotics {
                theta: theta_sub,
                lambda: ExtReal::new(1.0),
                rho_class: bounded,
                series_sigma_tau_alpha: supercritical_if(feedback),
                series_tau_tau_alpha: supercritical_if(alpha > 2.0),
                condition_s: true,
                condition_r: true,
            },
            Family::Polynomial { degree, .. } => {
                let d = *degree as f64;
                AnalyticAsymptotics {
                    theta: theta_sub,
                    lambda: ExtReal::new(1.0),
                    rho_class: bounded,
                    series_sigma_tau_alpha: supercritical_if(feedback),
                    series_tau_tau_alpha: supercritical_if((d + 1.0) * (alpha - 1.0) > 1.0),
                    condition_s: true,
                    condition_r: true,
                }
            }
            Family::Geometric { ratio, .. } => AnalyticAsymptotics {
                theta: theta_sub,
                lambda: ExtReal::new((*ratio as f64).powf(1.0 - alpha)),
                rho_class: bounded,
                series_sigma_tau_alpha: supercritical_if(feedback),
                series_tau_tau_alpha: supercritical_if(feedback),
                condition_s: true,
                condition_r: true,
            },
            Family::Factorial => AnalyticAsymptotics {
                theta: theta_sub,
                lambda: if feedback { ExtReal::ZERO } else { ExtReal::new(1.0) },
                rho_class: RhoClass::TendsToInfinity,
                series_sigma_tau_alpha: supercritical_if(feedback),
                series_tau_tau_alpha: supercritical_if(feedback),
                condition_s: true,
                condition_r: true,
            },
            Family::DoublyExponentialTau { b, theta0, growth } => {
                let (theta, lambda, converges) = if *growth > alpha {
                    (ExtReal::INFINITY, ExtReal::INFINITY, false)
                } else if *growth < alpha {
                    (ExtReal::ZERO, ExtReal::ZERO, true)
                } else {
                    (ExtReal::new(*theta0), ExtReal::new(b.powf(1.0 - alpha)), *b > 1.0)
                };
                AnalyticAsymptotics {
                    theta,
                    lambda,
                    rho_class: RhoClass::TendsToInfinity,
                    series_sigma_tau_alpha: supercritical_if(converges),
                    series_tau_tau_alpha: supercritical_if(converges),
                    condition_s: true,
                    condition_r: true,
                }
            }
            Family::Custom { analytic, .. } => return analytic.clone(),
        };
        Some(a)
    }

    /// Natural log of an upper bound on `Σ_{n >= m}` of the series `kind`,
    /// when a rigorous closed-form tail is available.
    pub fn ln_tail_bound(&self, alpha: f64, kind: SeriesKind, m: usize) -> Result<Option<f64>> {
        if alpha <= 1.0 {
            return Ok(None);
        }
        match &self.family {
            Family::DoublyExponentialTau { b, theta0, growth } => {
                Ok(doubly_exponential_tail(alpha, *b, *theta0, *growth, m))
            }
            Family::Factorial if kind == SeriesKind::SigmaOverTauAlpha => {
                // term_i <= (i+1)·(i!)^{1-α}; successive bound ratios
                // (i+2)/(i+1)^α decrease in i.
                let mf = m as f64;
                let q = (mf + 2.0) / (mf + 1.0).powf(alpha);
                if q >= 1.0 {
                    return Ok(None);
                }
                Ok(Some((mf + 1.0).ln() + (1.0 - alpha) * ln_gamma(mf + 1.0) - (1.0 - q).ln()))
            }
            _ if kind == SeriesKind::SigmaOverTauAlpha => match self.rho_bound_from(m)? {
                // Σ_{n>=m} σ_{n+1}/τ_n^α <= (1+ρ̄)^α/(α-1) · τ_m^{1-α} whenever
                // ρ_n <= ρ̄ for all n >= m
                Some(rho) => {
                    let ln_tau_m = self.table(m)?.term(m).ln_tau;
                    Ok(Some(alpha * (1.0 + rho).ln() - (alpha - 1.0).ln() - (alpha - 1.0) * ln_tau_m))
                }
                None => Ok(None),
            },
            _ => Ok(None),
        }
    }
}

/// Tail of `Σ τ_{i+1}/τ_i^α` (which dominates the σ-series) for
/// `τ_i = ⌊b^i e^{θ₀β^i}⌋`, using `τ_{i+1} <= b^{i+1}e^{θ₀β^{i+1}}`,
/// `τ_i >= b^i e^{θ₀β^i}(1-δ_i)` with `δ_i = b^{-i}e^{-θ₀β^i}`, and a geometric
/// bound on successive ratios. Needs `β <= α`.
fn doubly_exponential_tail(alpha: f64, b: f64, theta0: f64, beta: f64, m: usize) -> Option<f64> {
    if beta > alpha {
        return None;
    }
    let mf = m as f64;
    let beta_m = beta.powf(mf);
    let ln_b = b.ln();
    // ratio of consecutive bounds for i >= m
    let ln_q = (1.0 - alpha) * ln_b + theta0 * (beta - alpha) * beta_m * (beta - 1.0);
    if ln_q.is_nan() || ln_q >= 0.0 {
        return None;
    }
    // δ_i must be nonincreasing from m on
    if -ln_b > theta0 * beta_m * (beta - 1.0) {
        return None;
    }
    let ln_delta = -mf * ln_b - theta0 * beta_m;
    if ln_delta.is_nan() || ln_delta >= 0.0 {
        return None;
    }
    let ln_u = (1.0 + mf * (1.0 - alpha)) * ln_b + theta0 * beta_m * (beta - alpha);
    Some(ln_u - alpha * ln_1m_exp(ln_delta) - ln_1m_exp(ln_q))
}

fn ln_term(table: &Table, alpha: f64, kind: SeriesKind, n: usize) -> f64 {
    let next = table.term(n + 1);
    let head = match kind {
        SeriesKind::SigmaOverTauAlpha => next.ln_sigma,
        SeriesKind::TauOverTauAlpha => next.ln_tau,
    };
    head - alpha * table.term(n).ln_tau
}

/// `α^{-n} log τ_n` limit.
pub fn estimate_theta(seq: &GrowthSequence, alpha: f64, n_max: usize) -> Result<Estimate> {
    if let Some(a) = seq.analytic(alpha) {
        return Ok(Estimate {
            value: a.theta,
            confidence: Confidence::Analytic,
        });
    }
    numeric_theta(seq, alpha, n_max)
}

pub fn numeric_theta(seq: &GrowthSequence, alpha: f64, n_max: usize) -> Result<Estimate> {
    if alpha.is_nan() || alpha <= 1.0 {
        return invalid(format!("θ needs α > 1, got {alpha}"));
    }
    if n_max < 8 {
        return invalid(format!("θ needs n_max >= 8, got {n_max}"));
    }
    let table = seq.table(n_max)?;
    let g = |n: usize| {
        let scale = alpha.powi(n as i32);
        let v = table.term(n).ln_tau / scale;
        if scale.is_infinite() {
            0.0
        } else {
            v
        }
    };
    let last = g(n_max);
    let prev = g(n_max - 1);
    let confidence = if (last - prev).abs() < THETA_TOLERANCE * last.abs().max(1.0) {
        Confidence::NumericStable
    } else {
        Confidence::Inconclusive
    };
    // values below the tolerance are indistinguishable from a zero limit
    let value = if last < THETA_TOLERANCE { 0.0 } else { last };
    Ok(Estimate {
        value: ExtReal::new(value),
        confidence,
    })
}

/// `ln λ_n = ln σ_{n+1} + α ln σ_{n-1} - (α+1) ln σ_n`, for `n >= 2`.
pub fn ln_lambda_n(table: &Table, alpha: f64, n: usize) -> f64 {
    table.term(n + 1).ln_sigma + alpha * table.term(n - 1).ln_sigma - (alpha + 1.0) * table.term(n).ln_sigma
}

/// `limsup σ_{n+1}σ_{n-1}^α / σ_n^{α+1}`.
pub fn estimate_lambda(seq: &GrowthSequence, alpha: f64, n_max: usize) -> Result<Estimate> {
    if n_max < 4 {
        return invalid(format!("λ needs n_max >= 4, got {n_max}"));
    }
    if let Some(a) = seq.analytic(alpha) {
        return Ok(Estimate {
            value: a.lambda,
            confidence: Confidence::Analytic,
        });
    }
    numeric_lambda(seq, alpha, n_max)
}

pub fn numeric_lambda(seq: &GrowthSequence, alpha: f64, n_max: usize) -> Result<Estimate> {
    if n_max < 4 {
        return invalid(format!("λ needs n_max >= 4, got {n_max}"));
    }
    let table = seq.table(n_max + 1)?;
    let start = (n_max / 2).max(2);
    let early_end = start + (n_max - start) * 3 / 4;
    let mut early_max = f64::NEG_INFINITY;
    let mut full_max = f64::NEG_INFINITY;
    for n in start..=n_max {
        let v = ln_lambda_n(&table, alpha, n);
        if n <= early_end {
            early_max = early_max.max(v);
        }
        full_max = full_max.max(v);
    }
    let moving = full_max - early_max > LAMBDA_WINDOW_TOLERANCE.ln_1p();
    Ok(Estimate {
        value: ExtReal::new(full_max.exp()),
        confidence: if moving {
            Confidence::Inconclusive
        } else {
            Confidence::NumericStable
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesTail {
    pub partial_sum: f64,
    pub ln_partial_sum: f64,
    pub tail_bound: Option<f64>,
    pub verdict: SeriesVerdict,
}

/// Partial sum of the series `kind` over `from..=horizon`, a closed-form
/// bound on the rest where one exists, and a convergence verdict.
pub fn series_tail(seq: &GrowthSequence, alpha: f64, kind: SeriesKind, from: usize, horizon: usize) -> Result<SeriesTail> {
    if horizon <= from {
        return invalid(format!("horizon {horizon} must exceed from {from}"));
    }
    let table = seq.table(horizon + 1)?;
    let ln_terms: Vec<f64> = (from..=horizon).map(|n| ln_term(&table, alpha, kind, n)).collect();
    let ln_partial_sum = log_sum_exp(ln_terms.iter().copied());
    let tail_bound = seq.ln_tail_bound(alpha, kind, horizon + 1)?.map(f64::exp);
    let verdict = match seq.analytic(alpha) {
        Some(a) => a.series(kind),
        None if seq.is_custom() => SeriesVerdict::Unknown,
        None => ratio_heuristic(&ln_terms),
    };
    Ok(SeriesTail {
        partial_sum: ln_partial_sum.exp(),
        ln_partial_sum,
        tail_bound,
        verdict,
    })
}

/// Ratio test on the last quarter of the terms: all ratios at most 0.999
/// reads as convergence, no decrease at all as divergence.
fn ratio_heuristic(ln_terms: &[f64]) -> SeriesVerdict {
    let quarter = &ln_terms[ln_terms.len() * 3 / 4..];
    if quarter.len() < 2 {
        return SeriesVerdict::Unknown;
    }
    let ln_ratios: Vec<f64> = quarter.windows(2).map(|w| w[1] - w[0]).collect();
    let max = ln_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ln_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.999f64.ln() {
        SeriesVerdict::Converges
    } else if min >= 0.0 {
        SeriesVerdict::Diverges
    } else {
        SeriesVerdict::Unknown
    }
}

/// Largest `n <= cap` whose `τ_n` is still exact.
pub fn largest_exact_index(seq: &GrowthSequence, cap: usize) -> Result<usize> {
    let mut n = 0;
    while n < cap {
        let table = match seq.table(n + 1) {
            Ok(t) => t,
            Err(Error::OutOfRange { .. }) => break,
            Err(e) => return Err(e),
        };
        if !table.term(n + 1).is_exact() {
            break;
        }
        n += 1;
    }
    Ok(n)
}

/// `|Σ_{k=1..n} -log(1 - σ_k/τ_k) - log(τ_n/τ₀)|`. The two sides are equal,
/// so the result is pure rounding error. Needs exact terms up to `n`.
pub fn check_identity_1101(seq: &GrowthSequence, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("identity check needs n >= 1");
    }
    let table = seq.table(n)?;
    let mut bits: i64 = 0;
    let mut frac = NeumaierSum::default();
    for k in 1..=n {
        let term = table.term(k);
        let (Some(sigma), Some(tau)) = (term.sigma.exact(), term.tau.exact()) else {
            return invalid(format!("identity check needs exact terms; τ_{k} is beyond the bit budget"));
        };
        if sigma * 2u32 <= *tau {
            let ln_u = LnSplit::of(sigma).ratio(LnSplit::of(tau));
            frac.add(-(-ln_u.exp()).ln_1p());
        } else {
            // 1 - σ_k/τ_k = (τ_k - σ_k)/τ_k, formed exactly
            let rest = LnSplit::of(&(tau - sigma));
            let whole = LnSplit::of(tau);
            bits += whole.bits - rest.bits;
            frac.add(whole.frac - rest.frac);
        }
    }
    let last = LnSplit::of(table.term(n).tau.exact().unwrap());
    let first = LnSplit::of(&BigUint::from(seq.tau0()));
    let bit_gap = (bits - (last.bits - first.bits)) as f64 * LN_2;
    frac.add(-(last.frac - first.frac));
    Ok((bit_gap + frac.total()).abs())
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(c: Count) -> BigUint {
        c.exact().cloned().expect("exact")
    }

    #[test]
    fn sigma_examples() {
        let c = GrowthSequence::constant(1, 2).unwrap();
        assert_eq!(exact(c.sigma(17).unwrap()), BigUint::from(1u32));
        let f = GrowthSequence::factorial(2).unwrap();
        assert_eq!(exact(f.sigma(5).unwrap()), BigUint::from(120u32));
        assert!(c.sigma(0).is_err());
    }

    #[test]
    fn doubly_exponential_sigma_is_difference_of_floors() {
        let seq = GrowthSequence::doubly_exponential_tau(2.0, 1.0, 2.0, 4).unwrap();
        // ⌊8e^8⌋ - ⌊4e^4⌋ = 23847 - 218
        assert_eq!(exact(seq.sigma(3).unwrap()), BigUint::from(23847u32 - 218));
        assert_eq!(seq.tau0(), 2);
    }

    #[test]
    fn tau_examples() {
        let c = GrowthSequence::constant(1, 2).unwrap();
        assert_eq!(exact(c.tau(10).unwrap()), BigUint::from(12u32));
        assert_eq!(exact(c.tau(0).unwrap()), BigUint::from(2u32));
        let g = GrowthSequence::geometric(1, 2, 1);
        // τ₀ >= 2 is required, so the hand example with τ₀ = 1 is rejected...
        assert!(g.is_err());
        // ...and the same sum shifted by one ball checks the prefix sums.
        let g = GrowthSequence::geometric(1, 2, 2).unwrap();
        assert_eq!(exact(g.tau(3).unwrap()), BigUint::from(16u32));
    }

    #[test]
    fn custom_out_of_range() {
        let s = GrowthSequence::custom(vec![BigUint::from(3u32); 4], 2, None).unwrap();
        assert!(s.sigma(4).is_ok());
        assert!(matches!(s.sigma(5), Err(Error::OutOfRange { n: 5, .. })));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GrowthSequence::constant(0, 2).is_err());
        assert!(GrowthSequence::constant(1, 1).is_err());
        assert!(GrowthSequence::custom(vec![BigUint::zero()], 2, None).is_err());
        // θ₀ = 0.5 gives τ₀ = ⌊e^0.5⌋ = 1
        assert!(GrowthSequence::doubly_exponential_tau(2.0, 0.5, 2.0, 3).is_err());
        // b tiny makes τ_1 = ⌊0.01·e^2⌋ = 0 < τ₀
        assert!(matches!(
            GrowthSequence::doubly_exponential_tau(0.01, 1.0, 2.0, 3),
            Err(Error::NonIncreasing { n: 1 })
        ));
        assert!(GrowthSequence::doubly_exponential_tau(1.0, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn switches_to_log_mode_past_budget() {
        let s = GrowthSequence::geometric(1, 2, 2).unwrap().with_bit_budget(100);
        let t = s.table(200).unwrap();
        let first = t.first_approx().unwrap();
        assert!(first > 90 && first < 101);
        // τ_n = 2^{n+1} exactly in this family
        for n in [first, 150, 200] {
            let expected = (n as f64 + 1.0) * LN_2;
            assert!((t.term(n).ln_tau - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn theta_examples() {
        let c = GrowthSequence::constant(1, 2).unwrap();
        let e = estimate_theta(&c, 2.0, 20).unwrap();
        assert_eq!(e.confidence, Confidence::Analytic);
        assert!(e.value.is_zero());
        let g = GrowthSequence::geometric(1, 2, 2).unwrap();
        assert!(estimate_theta(&g, 2.0, 20).unwrap().value.is_zero());
        let n = numeric_theta(&GrowthSequence::constant(1, 2).unwrap(), 2.0, 30).unwrap();
        assert_eq!(n.confidence, Confidence::NumericStable);
        assert!(n.value.is_zero());
    }

    #[test]
    fn numeric_theta_doubly_exponential() {
        let s = GrowthSequence::doubly_exponential_tau(1.0, 1.0, 2.0, 20).unwrap().without_analytic();
        let e = estimate_theta(&s, 2.0, 20).unwrap();
        assert_eq!(e.confidence, Confidence::NumericStable);
        assert!((e.value.value() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lambda_examples() {
        let c = GrowthSequence::constant(5, 2).unwrap().without_analytic();
        let e = estimate_lambda(&c, 2.0, 40).unwrap();
        assert!((e.value.value() - 1.0).abs() < 1e-12);
        assert_eq!(e.confidence, Confidence::NumericStable);
        let f = GrowthSequence::factorial(2).unwrap();
        assert!(estimate_lambda(&f, 2.0, 40).unwrap().value.is_zero());
        let t = f.table(12).unwrap();
        for n in 2..=10 {
            let direct = (n as f64 + 1.0) / (n as f64 * n as f64);
            assert!((ln_lambda_n(&t, 2.0, n).exp() - direct).abs() < 1e-12 * direct);
        }
        assert!(estimate_lambda(&f, 2.0, 3).is_err());
    }

    #[test]
    fn lambda_of_exp_family_tends_to_one() {
        // σ_n = ⌊e^{0.5·2^n}⌋
        let sigma: Vec<BigUint> = (1..=16).map(|n| floor_b_pow_exp(1.0, n, 0.5, 2.0)).collect();
        let s = GrowthSequence::custom(sigma, 2, None).unwrap();
        let t = s.table(16).unwrap();
        assert!((ln_lambda_n(&t, 2.0, 14).exp() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn series_examples() {
        let c = GrowthSequence::constant(1, 2).unwrap();
        let s = series_tail(&c, 2.0, SeriesKind::SigmaOverTauAlpha, 0, 10_000).unwrap();
        assert_eq!(s.verdict, SeriesVerdict::Converges);
        // Σ_{n>=0} 1/(n+2)^2 = π²/6 - 1
        let total = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        assert!(s.partial_sum < total);
        assert!(s.partial_sum + s.tail_bound.unwrap() >= total);

        let d1 = GrowthSequence::doubly_exponential_tau(1.0, 1.0, 2.0, 30).unwrap();
        let v = series_tail(&d1, 2.0, SeriesKind::TauOverTauAlpha, 0, 25).unwrap();
        assert_eq!(v.verdict, SeriesVerdict::Diverges);
        assert!(v.tail_bound.is_none());
        let d2 = GrowthSequence::doubly_exponential_tau(2.0, 1.0, 2.0, 30).unwrap();
        let v = series_tail(&d2, 2.0, SeriesKind::TauOverTauAlpha, 0, 25).unwrap();
        assert_eq!(v.verdict, SeriesVerdict::Converges);
        assert!(v.tail_bound.is_some());
    }

    #[test]
    fn ratio_heuristic_without_metadata() {
        let g = GrowthSequence::geometric(1, 2, 2).unwrap().without_analytic();
        let s = series_tail(&g, 2.0, SeriesKind::SigmaOverTauAlpha, 0, 200).unwrap();
        assert_eq!(s.verdict, SeriesVerdict::Converges);
        let d = GrowthSequence::doubly_exponential_tau(1.0, 1.0, 3.0, 12).unwrap().without_analytic();
        let s = series_tail(&d, 2.0, SeriesKind::SigmaOverTauAlpha, 0, 10).unwrap();
        assert_eq!(s.verdict, SeriesVerdict::Diverges);
        let custom = GrowthSequence::custom(vec![BigUint::from(1u32); 300], 2, None).unwrap();
        let s = series_tail(&custom, 2.0, SeriesKind::SigmaOverTauAlpha, 0, 200).unwrap();
        assert_eq!(s.verdict, SeriesVerdict::Unknown);
    }

    #[test]
    fn identity_examples() {
        let c = GrowthSequence::constant(1, 2).unwrap();
        assert!(check_identity_1101(&c, 1000).unwrap() < 1e-9);
        let f = GrowthSequence::factorial(2).unwrap();
        assert!(check_identity_1101(&f, 15).unwrap() < 1e-9);
        let g = GrowthSequence::geometric(1, 3, 2).unwrap();
        assert!(check_identity_1101(&g, 30).unwrap() < 1e-9);
    }

    #[test]
    fn contradictory_metadata_is_rejected() {
        let bad = AnalyticAsymptotics {
            theta: ExtReal::new(1.0),
            lambda: ExtReal::new(1.0),
            rho_class: RhoClass::Bounded { bound: 1.0 },
            series_sigma_tau_alpha: SeriesVerdict::Converges,
            series_tau_tau_alpha: SeriesVerdict::Converges,
            condition_s: true,
            condition_r: true,
        };
        assert!(matches!(bad.validate(2.0), Err(Error::Contradiction(_))));
    }

    #[test]
    fn ext_real_serde() {
        assert_eq!(serde_json::to_string(&ExtReal::INFINITY).unwrap(), "\"inf\"");
        let v: ExtReal = serde_json::from_str("\"inf\"").unwrap();
        assert!(v.is_infinite());
        let v: ExtReal = serde_json::from_str("0.5").unwrap();
        assert_eq!(v.value(), 0.5);
    }
}
