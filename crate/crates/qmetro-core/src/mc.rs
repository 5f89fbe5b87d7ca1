//! Monte Carlo sampling of protocol outcomes, field estimation from counts,
//! and empirical audits that achieved uncertainties respect the information
//! bounds.
//!
//! Randomness is counter-based: every trial draws from a ChaCha stream keyed
//! by `(seed, trial index)`, so results are bit-identical regardless of how
//! trials are scheduled across threads.

use crate::fisher::{self, LinearizedDistribution};
use crate::math;
use crate::protocol::ProtocolSpec;
use crate::{eig, Error, Result};
use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linearization guard: warn when `|b|·τ·(Λ−λ)` exceeds this.
pub const LINEARIZATION_GUARD: f64 = 0.1;
/// Audit slack multiplier: the empirical deviation may undershoot a bound by
/// `slack_z / √(2M)` standard errors before the audit fails.
pub const AUDIT_SLACK_Z: f64 = 4.0;

/// How a field estimate is read off the outcome counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Maximum likelihood under the linearized outcome model.
    Mle,
    /// Mean of the score-weighted readout observable.
    ObservableMean,
}

/// One trial's stream, independent of every other trial's.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform draw on `[0, 1)` with 53-bit resolution.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Draws `n` outcomes from the probability table by inverse CDF.
pub fn sample_counts(probs: &[f64], n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(Error::InvalidState("empty probability table"));
    }
    if n == 0 {
        return Err(Error::CapExceeded { name: "n_shots" });
    }
    let total: f64 = probs.iter().sum();
    if math::abs(total - 1.0) > 1e-9 || probs.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidState("unnormalized probability table"));
    }
    let mut counts = alloc::vec![0u64; probs.len()];
    for _ in 0..n {
        let u = uniform_f64(rng) * total;
        let mut acc = 0.0;
        let mut hit = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                hit = i;
                break;
            }
        }
        counts[hit] += 1;
    }
    Ok(counts)
}

/// Aggregated result of repeated sampling runs of one protocol.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub seed: u64,
    pub b_true: f64,
    pub n_shots: u64,
    pub repeats: u64,
    pub estimator: Estimator,
    pub outcome_labels: Vec<String>,
    /// Counts summed over all repeats.
    pub total_counts: Vec<u64>,
    /// One field estimate per repeat, in trial order.
    pub estimates: Vec<f64>,
    pub mean_estimate: f64,
    /// Sample standard deviation of the estimates (zero for one repeat).
    pub empirical_sd: f64,
    pub fisher_per_shot: f64,
    /// Information floor `1/√(n·F)` for a single repeat.
    pub fisher_bound: f64,
    /// Spectral floor `1/(τ·√(n·rounds)·(Λ−λ))`.
    pub quantum_bound: f64,
    pub z_fisher: f64,
    pub z_quantum: f64,
    pub linearization_warning: bool,
}

/// Standardized excess of the empirical deviation over a bound, using the
/// large-sample standard error of a standard deviation, `bound/√(2M)`.
pub fn z_score(sd: f64, bound: f64, repeats: u64) -> f64 {
    if !bound.is_finite() || bound <= 0.0 || repeats < 2 {
        return f64::NAN;
    }
    let se = bound / math::sqrt(2.0 * repeats as f64);
    (sd - bound) / se
}

/// Samples the protocol `repeats` times with `n_shots` each and estimates the
/// field from every repeat's counts.
pub fn run_experiment(
    spec: &ProtocolSpec,
    b_true: f64,
    n_shots: u64,
    repeats: u64,
    seed: u64,
    estimator: Estimator,
    strict: bool,
) -> Result<ExperimentRun> {
    if repeats == 0 {
        return Err(Error::CapExceeded { name: "repeats" });
    }
    let dist = spec.distribution(b_true)?;
    let lin = dist.linearized()?;
    let probs = dist.probabilities();
    let report = dist.fisher(n_shots, strict)?;

    let spread = eig::spectral_spread(&spec.hamiltonian)?;
    let linearization_warning = math::abs(b_true) * spec.round_time * spread > LINEARIZATION_GUARD;
    let quantum_bound = if spread < 1e-12 {
        f64::INFINITY
    } else {
        fisher::quantum_crb(
            &spec.hamiltonian,
            spec.round_time,
            n_shots * spec.rounds() as u64,
        )?
    };

    let mut total_counts = alloc::vec![0u64; probs.len()];
    let mut estimates = Vec::with_capacity(repeats as usize);
    for trial in 0..repeats {
        let mut rng = trial_rng(seed, trial);
        let counts = sample_counts(&probs, n_shots, &mut rng)?;
        for (t, c) in total_counts.iter_mut().zip(&counts) {
            *t += c;
        }
        let estimate = match estimator {
            Estimator::Mle => fisher::mle_estimate(&lin, &counts)?,
            Estimator::ObservableMean => score_mean_estimate(&lin, &counts)?,
        };
        estimates.push(estimate);
    }

    let m = repeats as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let empirical_sd = if repeats < 2 {
        0.0
    } else {
        let ss: f64 = estimates.iter().map(|e| (e - mean) * (e - mean)).sum();
        math::sqrt(ss / (m - 1.0))
    };

    Ok(ExperimentRun {
        seed,
        b_true,
        n_shots,
        repeats,
        estimator,
        outcome_labels: lin.labels.clone(),
        total_counts,
        estimates,
        mean_estimate: mean,
        empirical_sd,
        fisher_per_shot: report.fisher_per_shot,
        fisher_bound: fisher::finite_trial_bound(report.fisher_per_shot, n_shots)?,
        quantum_bound,
        z_fisher: z_score(empirical_sd, fisher::finite_trial_bound(report.fisher_per_shot, n_shots)?, repeats),
        z_quantum: z_score(empirical_sd, quantum_bound, repeats),
        linearization_warning,
    })
}

/// Estimate through the score-weighted observable: average `dp/p0` over the
/// observed frequencies and divide by its slope. Agrees with the linearized
/// MLE whenever the slopes sum to zero.
pub fn score_mean_estimate(dist: &LinearizedDistribution, counts: &[u64]) -> Result<f64> {
    if counts.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.len(),
            got: counts.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::CapExceeded { name: "counts" });
    }
    let mut mean = 0.0;
    let mut mean0 = 0.0;
    let mut slope = 0.0;
    for i in dist.included() {
        let w = dist.dp[i] / dist.p0[i];
        let f = counts[i] as f64 / n as f64;
        mean += w * f;
        mean0 += w * dist.p0[i];
        slope += w * dist.dp[i];
    }
    if slope < 1e-300 {
        return Err(Error::ZeroInformation);
    }
    Ok((mean - mean0) / slope)
}

/// Verdict of an empirical bound check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditVerdict {
    Pass,
    Fail,
    /// Every applicable bound was infinite (zero-information protocol).
    NonInformative,
}

/// Outcome of auditing a run's empirical deviation against its bounds.
#[derive(Debug, Clone, Copy)]
pub struct BoundAudit {
    pub verdict: AuditVerdict,
    pub slack_factor: f64,
    pub z_fisher: f64,
    pub z_quantum: f64,
}

/// Checks that the run's empirical standard deviation respects each finite
/// bound up to statistical slack `1 − z/√(2M)`.
pub fn bound_audit(run: &ExperimentRun) -> BoundAudit {
    let m = run.repeats as f64;
    let slack_factor = (1.0 - AUDIT_SLACK_Z / math::sqrt(2.0 * m)).max(0.0);
    let mut informative = false;
    let mut pass = true;
    for bound in [run.fisher_bound, run.quantum_bound] {
        if bound.is_finite() && bound > 0.0 {
            informative = true;
            if run.empirical_sd < bound * slack_factor {
                pass = false;
            }
        }
    }
    let verdict = if !informative {
        AuditVerdict::NonInformative
    } else if pass {
        AuditVerdict::Pass
    } else {
        AuditVerdict::Fail
    };
    BoundAudit {
        verdict,
        slack_factor,
        z_fisher: run.z_fisher,
        z_quantum: run.z_quantum,
    }
}

/// Pearson statistic and degrees of freedom against expected probabilities;
/// outcomes with fewer than five expected counts are pooled into their
/// successor.
pub fn chi_square_statistic(counts: &[u64], probs: &[f64]) -> Result<(f64, usize)> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: counts.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::CapExceeded { name: "counts" });
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pool_c = 0.0;
    let mut pool_e = 0.0;
    for i in 0..counts.len() {
        pool_c += counts[i] as f64;
        pool_e += probs[i] * n as f64;
        if pool_e >= 5.0 {
            stat += (pool_c - pool_e) * (pool_c - pool_e) / pool_e;
            cells += 1;
            pool_c = 0.0;
            pool_e = 0.0;
        }
    }
    if pool_e > 0.0 && cells > 0 {
        stat += (pool_c - pool_e) * (pool_c - pool_e) / pool_e;
    }
    if cells < 2 {
        return Err(Error::ZeroInformation);
    }
    Ok((stat, cells - 1))
}

/// Wilson-Hilferty normal approximation of the chi-square upper tail; the
/// statistic is acceptable when the z-value stays below the threshold.
pub fn chi_square_z(stat: f64, dof: usize) -> f64 {
    let d = dof as f64;
    let cube = math::cbrt(stat / d);
    (cube - (1.0 - 2.0 / (9.0 * d))) / math::sqrt(2.0 / (9.0 * d))
}
