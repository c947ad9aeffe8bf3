//! Statistical checks of the sampler and the replication engine.

use feedbin_core::count::Count;
use feedbin_core::dynamics::{sample_binomial, step_in_place, Kernel, ModelParams, ProcessState, SamplerConfig};
use feedbin_core::montecarlo::{replication_rng, run_replications, RunOptions};
use feedbin_core::sequences::GrowthSequence;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::sync::Arc;

#[test]
fn binomial_mean_at_the_exact_cutoff() {
    let mut rng = replication_rng(11, 0);
    let cfg = SamplerConfig::default();
    let size = Count::from_u64(1_000_000);
    let draws = 10_000;
    let mean: f64 = (0..draws)
        .map(|_| sample_binomial(&size, 0.5f64.ln(), &mut rng, &cfg).unwrap().count.to_f64())
        .sum::<f64>()
        / draws as f64;
    let sd = (1e6f64 * 0.25).sqrt();
    assert!((mean - 5e5).abs() <= 4.0 * sd / (draws as f64).sqrt(), "mean {mean}");
}

#[test]
fn approximate_branches_track_the_mean() {
    let mut rng = replication_rng(12, 0);
    let cfg = SamplerConfig::default();
    // Poisson branch: size 1e7, mean 50; Gaussian branch: size 1e7, mean 1e6
    for (p, draws) in [(5e-6f64, 4000), (0.1, 4000)] {
        let size = Count::from_u64(10_000_000);
        let mean: f64 = (0..draws)
            .map(|_| sample_binomial(&size, p.ln(), &mut rng, &cfg).unwrap().count.to_f64())
            .sum::<f64>()
            / draws as f64;
        let mu = 1e7 * p;
        let sd = (mu * (1.0 - p)).sqrt();
        assert!((mean - mu).abs() <= 4.0 * sd / (draws as f64).sqrt(), "p={p}: mean {mean} vs {mu}");
    }
}

/// Both kernels with `σ ≡ 1` place one ball into bin 1 with probability
/// `ψ(Θ)`. A 2×2 homogeneity test must not reject.
#[test]
fn kernels_agree_when_batches_are_single_balls() {
    let seq = Arc::new(GrowthSequence::constant(1, 5).unwrap());
    let draws = 100_000u64;
    let mut hits = [0u64; 2];
    for (i, kernel) in [Kernel::IndependentBinomial, Kernel::BulkPlacement].into_iter().enumerate() {
        let params = ModelParams::new(2.0, 2, seq.clone(), kernel).unwrap();
        let table = seq.table(1).unwrap();
        let start = ProcessState::initial(&params);
        let mut rng = replication_rng(21, i as u64);
        for _ in 0..draws {
            let mut s = start.clone();
            let out = step_in_place(&mut s, &params, &table, &mut rng).unwrap();
            hits[i] += out.b.to_u64().unwrap();
        }
    }
    let total = 2.0 * draws as f64;
    let p = (hits[0] + hits[1]) as f64 / total;
    let mut chi2 = 0.0;
    for h in hits {
        for (obs, prob) in [(h as f64, p), ((draws - h) as f64, 1.0 - p)] {
            let exp = draws as f64 * prob;
            chi2 += (obs - exp).powi(2) / exp;
        }
    }
    let p_value = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "χ² = {chi2}, p = {p_value}, hits {hits:?}");
    // ψ(2/5) with α = 2 is 4/13
    assert!((p - 4.0 / 13.0).abs() < 4.0 * (p * (1.0 - p) / total).sqrt());
}

#[test]
fn linear_feedback_step_is_a_martingale() {
    let seq = Arc::new(GrowthSequence::constant(10, 7).unwrap());
    let params = ModelParams::new(1.0, 2, seq.clone(), Kernel::IndependentBinomial).unwrap();
    let table = seq.table(1).unwrap();
    let start = ProcessState::initial(&params);
    let mut rng = replication_rng(31, 0);
    let draws = 100_000;
    let thetas: Vec<f64> = (0..draws)
        .map(|_| {
            let mut s = start.clone();
            step_in_place(&mut s, &params, &table, &mut rng).unwrap();
            s.theta()
        })
        .collect();
    let mean = thetas.iter().sum::<f64>() / draws as f64;
    let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - start.theta()).abs() <= 4.0 * se, "{mean} vs {}", start.theta());
}

#[test]
fn winners_split_evenly_from_a_symmetric_start() {
    let seq = Arc::new(GrowthSequence::constant(1, 2).unwrap());
    let params = ModelParams::new(2.0, 1, seq, Kernel::IndependentBinomial).unwrap();
    let reps = 2000u64;
    let s = run_replications(&params, &RunOptions::new(300, reps, 41)).unwrap().summary;
    let decided = s.winner_bin1 + s.winner_bin2;
    assert!(decided >= reps * 99 / 100);
    let half = decided as f64 / 2.0;
    assert!((s.winner_bin1 as f64 - half).abs() <= 4.0 * (decided as f64).sqrt() / 2.0, "{} vs {}", s.winner_bin1, s.winner_bin2);
}

#[test]
fn ensemble_noise_is_normalised() {
    let seq = Arc::new(GrowthSequence::polynomial(1, 1, 4).unwrap());
    let params = ModelParams::new(1.5, 2, seq, Kernel::IndependentBinomial).unwrap();
    let s = run_replications(&params, &RunOptions::new(200, 200, 51)).unwrap().summary;
    let n = s.noise_steps as f64;
    assert!(n > 1e4);
    assert!(s.noise_mean.unwrap().abs() <= 4.0 / n.sqrt(), "{:?}", s.noise_mean);
    assert!((s.noise_var.unwrap() - 1.0).abs() <= 0.05, "{:?}", s.noise_var);
}

#[test]
fn same_seed_same_records() {
    let seq = Arc::new(GrowthSequence::geometric(1, 2, 2).unwrap());
    let params = ModelParams::new(1.5, 1, seq, Kernel::IndependentBinomial).unwrap();
    let mut o = RunOptions::new(120, 8, 99);
    o.dump_trajectories = true;
    let a = run_replications(&params, &o).unwrap();
    let b = run_replications(&params, &o).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.trajectories, b.trajectories);
    o.master_seed = 100;
    let c = run_replications(&params, &o).unwrap();
    assert_ne!(a.records, c.records);
}
