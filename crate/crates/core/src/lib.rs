//! Two-bin balls-and-bins process with feedback.
//!
//! Batches of `σ_n` balls arrive at step `n`; each ball joins a bin with
//! probability `ψ(x) = x^α / (x^α + (1-x)^α)` of that bin's current share `x`.
//! The crate provides the growth sequences, the step kernel, a rule table that
//! predicts dominance and monopoly from the asymptotics of `τ_n = Σ σ_k`, and a
//! replication engine with rigorous finite-horizon monopoly certificates.

pub mod classifier;
pub mod count;
pub mod dynamics;
pub mod error;
pub mod floorexp;
pub mod logspace;
pub mod montecarlo;
pub mod sequences;
pub mod verify;

pub use classifier::{classify, classify_sequence, ClassifierInput, ClassifyOptions, Dominance, Monopoly, Regime, RegimeVerdict};
pub use count::Count;
pub use dynamics::{psi, Kernel, Mode, ModelParams, ProcessState, SamplerConfig};
pub use error::{Error, Result};
pub use montecarlo::{
    run_replications, EnsembleSummary, MonopolyCertificate, Reference, RunOptions, RunOutput, TrajectoryRecord, Winner,
    SCHEMA_VERSION,
};
pub use sequences::{AnalyticAsymptotics, Confidence, ExtReal, Family, GrowthSequence, RhoClass, SeriesVerdict};
