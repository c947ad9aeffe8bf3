//! Maps `α` and the asymptotics of a growth sequence to dominance and
//! monopoly verdicts.
//!
//! Rules are applied in a fixed order; every verdict records the rule that
//! fired and the inputs it saw.

use crate::error::{invalid, Error, Result};
use crate::sequences::{
    estimate_lambda, estimate_theta, series_tail, AnalyticAsymptotics, Confidence, Estimate, ExtReal, GrowthSequence,
    RhoClass, SeriesKind, SeriesVerdict,
};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    NoFeedback,
    Supercritical,
    SubcriticalBoundedRho,
    SubcriticalFastRho,
    Critical,
    Unclassifiable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominance {
    AlmostSure,
    Never,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monopoly {
    AlmostSure,
    Never,
    StrictlyBetween,
    Unknown,
}

/// Everything the rule table reads.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierInput {
    pub theta: Estimate,
    pub lambda: Estimate,
    pub rho_class: RhoClass,
    pub rho_confidence: Confidence,
    pub series_sigma_tau_alpha: SeriesVerdict,
    pub series_tau_tau_alpha: SeriesVerdict,
    pub condition_s: bool,
    pub condition_r: bool,
}

impl From<&AnalyticAsymptotics> for ClassifierInput {
    fn from(a: &AnalyticAsymptotics) -> Self {
        let analytic = |value| Estimate {
            value,
            confidence: Confidence::Analytic,
        };
        ClassifierInput {
            theta: analytic(a.theta),
            lambda: analytic(a.lambda),
            rho_class: a.rho_class,
            rho_confidence: Confidence::Analytic,
            series_sigma_tau_alpha: a.series_sigma_tau_alpha,
            series_tau_tau_alpha: a.series_tau_tau_alpha,
            condition_s: a.condition_s,
            condition_r: a.condition_r,
        }
    }
}

impl ClassifierInput {
    /// Closed forms when the sequence carries them, numeric estimates up to
    /// `n_max` otherwise.
    pub fn gather(seq: &GrowthSequence, alpha: f64, n_max: usize) -> Result<Self> {
        if let Some(a) = seq.analytic(alpha) {
            a.validate(alpha)?;
            return Ok(ClassifierInput::from(&a));
        }
        if alpha <= 1.0 {
            return invalid("numeric estimates need α > 1");
        }
        let table = seq.table(n_max + 1)?;
        let ln_rho: Vec<f64> = (0..=n_max).map(|n| table.term(n + 1).ln_sigma - table.term(n).ln_tau).collect();
        let ln_sigma: Vec<f64> = (1..=n_max + 1).map(|n| table.term(n).ln_sigma).collect();
        let half = n_max / 2;
        let rho_class = numeric_rho_class(&ln_rho, half);
        Ok(ClassifierInput {
            theta: estimate_theta(seq, alpha, n_max)?,
            lambda: estimate_lambda(seq, alpha, n_max)?,
            rho_class,
            rho_confidence: Confidence::NumericStable,
            series_sigma_tau_alpha: series_tail(seq, alpha, SeriesKind::SigmaOverTauAlpha, 0, n_max)?.verdict,
            series_tau_tau_alpha: series_tail(seq, alpha, SeriesKind::TauOverTauAlpha, 0, n_max)?.verdict,
            condition_s: eventually_monotone(&ln_sigma[half..]),
            condition_r: eventually_monotone(&ln_rho[half..]),
        })
    }

    fn confidence(&self) -> Confidence {
        [self.theta.confidence, self.lambda.confidence, self.rho_confidence]
            .into_iter()
            .max_by_key(|c| match c {
                Confidence::Analytic => 0,
                Confidence::NumericStable => 1,
                Confidence::Inconclusive => 2,
            })
            .unwrap()
    }

    fn is_analytic(&self) -> bool {
        self.confidence() == Confidence::Analytic
    }
}

fn numeric_rho_class(ln_rho: &[f64], half: usize) -> RhoClass {
    let first_max = ln_rho[..half].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let second_max = ln_rho[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = &ln_rho[ln_rho.len() * 3 / 4..];
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    if increasing && *ln_rho.last().unwrap() > ln_rho[half] + 10f64.ln() {
        RhoClass::TendsToInfinity
    } else if second_max <= first_max + 0.01f64.ln_1p() {
        RhoClass::Bounded {
            bound: first_max.max(second_max).exp(),
        }
    } else {
        RhoClass::Irregular
    }
}

/// Nondecreasing or nonincreasing throughout: read as "bounded or divergent".
fn eventually_monotone(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0]) || xs.windows(2).all(|w| w[1] <= w[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    /// Which rule of the table produced the monopoly verdict.
    pub rule: String,
    /// The result that rule rests on.
    pub theorem: String,
    pub inputs: ClassifierInput,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub dominance: Dominance,
    pub monopoly: Monopoly,
    /// Weakest confidence among the inputs that were read.
    pub confidence: Confidence,
    pub provenance: Provenance,
}

impl RegimeVerdict {
    /// A verdict without any `Unknown` or `Unclassifiable` component.
    pub fn is_definite(&self) -> bool {
        self.regime != Regime::Unclassifiable && self.dominance != Dominance::Unknown && self.monopoly != Monopoly::Unknown
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassifyOptions {
    /// Refuse to classify from numeric estimates.
    pub strict: bool,
}

pub fn classify(alpha: f64, input: &ClassifierInput, options: ClassifyOptions) -> Result<RegimeVerdict> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return invalid(format!("α must be finite and >= 1, got {alpha}"));
    }
    let verdict = |regime, dominance, monopoly, rule: &str, theorem: &str| RegimeVerdict {
        regime,
        dominance,
        monopoly,
        confidence: input.confidence(),
        provenance: Provenance {
            rule: rule.to_string(),
            theorem: theorem.to_string(),
            inputs: input.clone(),
        },
    };

    if alpha == 1.0 {
        return Ok(verdict(
            Regime::NoFeedback,
            Dominance::Never,
            Monopoly::Never,
            "no-feedback",
            "linear-feedback-limit",
        ));
    }
    // bounded ρ forces θ = 0: an error in closed forms, an unconverged
    // estimate otherwise
    let theta_disagrees = matches!(input.rho_class, RhoClass::Bounded { .. }) && !input.theta.value.is_zero();
    if theta_disagrees && input.theta.confidence == Confidence::Analytic && input.rho_confidence == Confidence::Analytic {
        return Err(Error::Contradiction(format!(
            "bounded (ρ_n) forces θ = 0, but θ = {} was supplied",
            input.theta.value
        )));
    }
    if options.strict && !input.is_analytic() {
        return Ok(verdict(
            Regime::Unclassifiable,
            Dominance::Unknown,
            Monopoly::Unknown,
            "strict-requires-analytic",
            "none",
        ));
    }

    let dominance = if input.condition_s && input.condition_r {
        Dominance::AlmostSure
    } else {
        Dominance::Unknown
    };

    let theta = input.theta.value;
    let mut v = if input.theta.confidence == Confidence::Inconclusive || theta_disagrees {
        verdict(Regime::Unclassifiable, dominance, Monopoly::Unknown, "theta-inconclusive", "none")
    } else if theta.is_infinite() {
        verdict(Regime::Supercritical, dominance, Monopoly::Never, "supercritical", "supercritical-no-monopoly")
    } else if theta.is_zero() {
        subcritical(input, dominance, &verdict)
    } else {
        let monopoly = match input.series_tau_tau_alpha {
            SeriesVerdict::Diverges => Monopoly::Never,
            SeriesVerdict::Converges => Monopoly::StrictlyBetween,
            SeriesVerdict::Unknown => Monopoly::Unknown,
        };
        verdict(Regime::Critical, dominance, monopoly, "critical-series", "critical-dichotomy")
    };

    if input.series_sigma_tau_alpha == SeriesVerdict::Diverges {
        match v.monopoly {
            Monopoly::AlmostSure | Monopoly::StrictlyBetween => {
                return Err(Error::RuleConflict(format!(
                    "Σ σ_(n+1)/τ_n^α diverges, yet rule {} gave monopoly {:?}",
                    v.provenance.rule, v.monopoly
                )))
            }
            Monopoly::Unknown => {
                v.monopoly = Monopoly::Never;
                v.provenance.rule = "divergent-series".into();
                v.provenance.theorem = "divergent-series-no-monopoly".into();
            }
            Monopoly::Never => {}
        }
    }
    // monopoly is a sub-event of dominance
    if v.monopoly == Monopoly::AlmostSure {
        v.dominance = Dominance::AlmostSure;
    }
    Ok(v)
}

fn subcritical<F>(input: &ClassifierInput, dominance: Dominance, verdict: &F) -> RegimeVerdict
where
    F: Fn(Regime, Dominance, Monopoly, &str, &str) -> RegimeVerdict,
{
    const THEOREM: &str = "subcritical-monopoly";
    let regime = match input.rho_class {
        RhoClass::Bounded { .. } => Regime::SubcriticalBoundedRho,
        RhoClass::TendsToInfinity => Regime::SubcriticalFastRho,
        RhoClass::Irregular => Regime::Unclassifiable,
    };
    if !input.condition_s {
        return verdict(regime, dominance, Monopoly::Unknown, "subcritical-needs-condition-s", THEOREM);
    }
    match input.rho_class {
        RhoClass::Bounded { .. } => verdict(regime, dominance, Monopoly::AlmostSure, "subcritical-bounded-rho", THEOREM),
        RhoClass::Irregular => verdict(regime, dominance, Monopoly::Unknown, "rho-irregular", "none"),
        RhoClass::TendsToInfinity => {
            let lambda = input.lambda.value;
            let monopoly = if input.lambda.confidence == Confidence::Inconclusive {
                Monopoly::Unknown
            } else if lambda < ExtReal::new(1.0) {
                Monopoly::AlmostSure
            } else if lambda > ExtReal::new(1.0) {
                Monopoly::Never
            } else {
                Monopoly::Unknown
            };
            verdict(regime, dominance, monopoly, "subcritical-fast-rho", THEOREM)
        }
    }
}

/// Classify a sequence, estimating numerically where no closed form is
/// attached.
pub fn classify_sequence(seq: &GrowthSequence, alpha: f64, n_max: usize, options: ClassifyOptions) -> Result<RegimeVerdict> {
    if alpha == 1.0 {
        // the linear case reads no asymptotics
        let input = match seq.analytic(alpha) {
            Some(a) => ClassifierInput::from(&a),
            None => ClassifierInput {
                theta: Estimate {
                    value: ExtReal::INFINITY,
                    confidence: Confidence::Analytic,
                },
                lambda: Estimate {
                    value: ExtReal::new(1.0),
                    confidence: Confidence::Analytic,
                },
                rho_class: RhoClass::Irregular,
                rho_confidence: Confidence::Analytic,
                series_sigma_tau_alpha: SeriesVerdict::Unknown,
                series_tau_tau_alpha: SeriesVerdict::Unknown,
                condition_s: false,
                condition_r: false,
            },
        };
        return classify(alpha, &input, options);
    }
    classify(alpha, &ClassifierInput::gather(seq, alpha, n_max)?, options)
}
