//! The four commands: spectral bound, Fisher analysis, Monte Carlo
//! simulation, and optimal-configuration search.

use crate::config::{
    estimator_from_config, matrix_to_dto, to_hamiltonian, to_protocol, ConfigDto,
};
use crate::report::{document, key_value_csv, table_csv, CommandOutput};
use crate::CliError;
use qmetro_core::eig;
use qmetro_core::fisher::{self, LinearizedDistribution};
use qmetro_core::mc::{self, Estimator};
use qmetro_core::protocol::OutcomeDistribution;
use serde_json::json;

fn experiment_field<T>(
    cfg: &ConfigDto,
    get: impl Fn(&crate::config::ExperimentDto) -> Option<T>,
) -> Option<T> {
    cfg.experiment.as_ref().and_then(get)
}

fn round_time(cfg: &ConfigDto) -> Option<f64> {
    cfg.protocol.as_ref().map(|p| p.round_time)
}

/// Spectral bound on the sensitivity: extremal eigenvalues, spread, and the
/// uncertainty floor for the configured interrogation time and shot budget.
pub fn cmd_bound(cfg: &ConfigDto) -> Result<CommandOutput, CliError> {
    let h = to_hamiltonian(cfg)?;
    let tau = experiment_field(cfg, |e| e.time)
        .or_else(|| round_time(cfg))
        .ok_or_else(|| CliError::Config("bound needs [experiment] time or a protocol".into()))?;
    let shots = experiment_field(cfg, |e| e.shots)
        .ok_or_else(|| CliError::Config("bound needs [experiment] shots".into()))?;

    let es = eig::eig_hermitian(&h)?;
    let delta_b = fisher::quantum_crb(&h, tau, shots)?;
    let payload = json!({
        "dim": h.dim(),
        "tau": tau,
        "shots": shots,
        "lambda_max": es.max(),
        "lambda_min": es.min(),
        "spread": es.spread(),
        "delta_b_min": delta_b,
    });
    let csv = key_value_csv(&[
        ("lambda_max", format!("{:.17e}", es.max())),
        ("lambda_min", format!("{:.17e}", es.min())),
        ("spread", format!("{:.17e}", es.spread())),
        ("delta_b_min", format!("{delta_b:.17e}")),
    ]);
    Ok(CommandOutput {
        report: document("bound", payload),
        csv,
    })
}

fn distribution_rows(dist: &OutcomeDistribution, counts: Option<&[u64]>) -> Vec<serde_json::Value> {
    dist.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = json!({
                "label": r.history.to_string(),
                "probability": r.probability,
                "p0": r.p0,
                "dp": r.dp,
                "dp_analytic": r.dp_analytic,
                "pruned": r.pruned,
            });
            if let Some(c) = counts {
                row.as_object_mut()
                    .unwrap()
                    .insert("count".into(), json!(c[i]));
            }
            row
        })
        .collect()
}

/// Exact outcome distribution and its classical information content.
pub fn cmd_fisher(cfg: &ConfigDto, strict: bool) -> Result<CommandOutput, CliError> {
    let spec = to_protocol(cfg)?;
    let b_true = experiment_field(cfg, |e| e.b_true).unwrap_or(0.0);
    let shots = experiment_field(cfg, |e| e.shots).unwrap_or(1);

    let dist = spec.distribution(b_true)?;
    let report = dist.fisher(shots, strict)?;
    let spread = eig::spectral_spread(&spec.hamiltonian)?;
    let quantum_bound = if spread < 1e-12 {
        f64::INFINITY
    } else {
        fisher::quantum_crb(
            &spec.hamiltonian,
            spec.round_time,
            shots * spec.rounds() as u64,
        )?
    };
    let residual = dist
        .records
        .iter()
        .map(|r| (r.dp - r.dp_analytic).abs())
        .fold(0.0f64, f64::max);

    let payload = json!({
        "b_true": b_true,
        "shots": shots,
        "outcomes": distribution_rows(&dist, None),
        "fisher_per_shot": report.fisher_per_shot,
        "delta_b_min": report.delta_b_min,
        "quantum_bound": quantum_bound,
        "regular": report.regular,
        "excluded": report.excluded,
        "cross_check_residual": residual,
    });
    let rows: Vec<Vec<String>> = dist
        .records
        .iter()
        .map(|r| {
            vec![
                r.history.to_string(),
                format!("{:.17e}", r.p0),
                format!("{:.17e}", r.dp),
                format!("{:.17e}", r.dp_analytic),
                format!("{:.17e}", r.probability),
                r.pruned.to_string(),
            ]
        })
        .collect();
    Ok(CommandOutput {
        report: document("fisher", payload),
        csv: table_csv("label,p0,dp,dp_analytic,probability,pruned", &rows),
    })
}

struct TrialOutcome {
    trial: u64,
    estimate: f64,
    counts: Vec<u64>,
}

fn thread_count(repeats: u64) -> usize {
    let configured = std::env::var("QMETRO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let n = configured.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|v| v.get())
            .unwrap_or(1)
    });
    n.min(repeats.max(1) as usize)
}

/// Runs every trial on a fixed per-trial stream; the thread layout cannot
/// change any number.
fn run_trials(
    probs: &[f64],
    lin: &LinearizedDistribution,
    estimator: Estimator,
    n_shots: u64,
    repeats: u64,
    seed: u64,
) -> Result<Vec<TrialOutcome>, CliError> {
    let threads = thread_count(repeats);
    let chunks: Vec<Result<Vec<TrialOutcome>, qmetro_core::Error>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|offset| {
                    scope.spawn(move || {
                        let mut local = Vec::new();
                        let mut trial = offset;
                        while trial < repeats {
                            let mut rng = mc::trial_rng(seed, trial);
                            let counts = mc::sample_counts(probs, n_shots, &mut rng)?;
                            let estimate = match estimator {
                                Estimator::Mle => fisher::mle_estimate(lin, &counts)?,
                                Estimator::ObservableMean => {
                                    mc::score_mean_estimate(lin, &counts)?
                                }
                            };
                            local.push(TrialOutcome {
                                trial,
                                estimate,
                                counts,
                            });
                            trial += threads as u64;
                        }
                        Ok(local)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial thread panicked"))
                .collect()
        });
    let mut all = Vec::with_capacity(repeats as usize);
    for chunk in chunks {
        all.extend(chunk?);
    }
    all.sort_by_key(|t| t.trial);
    Ok(all)
}

/// Samples the protocol, estimates the field per repeat, and audits the
/// spread of the estimates against the information bounds.
pub fn cmd_simulate(
    cfg: &ConfigDto,
    cli_seed: Option<u64>,
    strict: bool,
) -> Result<CommandOutput, CliError> {
    let spec = to_protocol(cfg)?;
    let seed = cli_seed
        .or_else(|| experiment_field(cfg, |e| e.seed))
        .ok_or_else(|| {
            CliError::Config("simulate needs an explicit seed (--seed or [experiment] seed)".into())
        })?;
    let n_shots = experiment_field(cfg, |e| e.shots)
        .ok_or_else(|| CliError::Config("simulate needs [experiment] shots".into()))?;
    let repeats = experiment_field(cfg, |e| e.repeats).unwrap_or(1);
    if repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let b_true = experiment_field(cfg, |e| e.b_true).unwrap_or(0.0);
    let estimator = estimator_from_config(cfg)?;

    let dist = spec.distribution(b_true)?;
    let lin = dist.linearized()?;
    let probs = dist.probabilities();
    let report = dist.fisher(n_shots, strict)?;

    let trials = run_trials(&probs, &lin, estimator, n_shots, repeats, seed)?;
    let mut total_counts = vec![0u64; probs.len()];
    let mut estimates = Vec::with_capacity(trials.len());
    for t in &trials {
        for (acc, c) in total_counts.iter_mut().zip(&t.counts) {
            *acc += c;
        }
        estimates.push(t.estimate);
    }
    let m = repeats as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let empirical_sd = if repeats < 2 {
        0.0
    } else {
        (estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1.0)).sqrt()
    };

    let spread = eig::spectral_spread(&spec.hamiltonian)?;
    let quantum_bound = if spread < 1e-12 {
        f64::INFINITY
    } else {
        fisher::quantum_crb(
            &spec.hamiltonian,
            spec.round_time,
            n_shots * spec.rounds() as u64,
        )?
    };
    let fisher_bound = fisher::finite_trial_bound(report.fisher_per_shot, n_shots)?;
    let run = mc::ExperimentRun {
        seed,
        b_true,
        n_shots,
        repeats,
        estimator,
        outcome_labels: lin.labels.clone(),
        total_counts: total_counts.clone(),
        estimates: estimates.clone(),
        mean_estimate: mean,
        empirical_sd,
        fisher_per_shot: report.fisher_per_shot,
        fisher_bound,
        quantum_bound,
        z_fisher: mc::z_score(empirical_sd, fisher_bound, repeats),
        z_quantum: mc::z_score(empirical_sd, quantum_bound, repeats),
        linearization_warning: b_true.abs() * spec.round_time * spread > mc::LINEARIZATION_GUARD,
    };
    let audit = mc::bound_audit(&run);
    let verdict = match audit.verdict {
        mc::AuditVerdict::Pass => "pass",
        mc::AuditVerdict::Fail => "fail",
        mc::AuditVerdict::NonInformative => "non_informative",
    };

    let payload = json!({
        "seed": seed,
        "b_true": b_true,
        "shots": n_shots,
        "repeats": repeats,
        "estimator": match estimator {
            Estimator::Mle => "mle",
            Estimator::ObservableMean => "observable_mean",
        },
        "outcomes": distribution_rows(&dist, Some(&total_counts)),
        "mean_estimate": mean,
        "empirical_sd": empirical_sd,
        "fisher_per_shot": report.fisher_per_shot,
        "fisher_bound": fisher_bound,
        "quantum_bound": quantum_bound,
        "z_fisher": run.z_fisher,
        "z_quantum": run.z_quantum,
        "audit": verdict,
        "slack_factor": audit.slack_factor,
        "linearization_warning": run.linearization_warning,
        "estimates": estimates,
    });
    let rows: Vec<Vec<String>> = dist
        .records
        .iter()
        .zip(&total_counts)
        .map(|(r, c)| {
            vec![
                r.history.to_string(),
                c.to_string(),
                format!("{:.17e}", r.probability),
                format!("{:.17e}", r.p0),
                format!("{:.17e}", r.dp),
            ]
        })
        .collect();
    Ok(CommandOutput {
        report: document("simulate", payload),
        csv: table_csv("label,count,probability,p0,dp", &rows),
    })
}

/// Optimal probe/readout search: the closed-form two-level scan when the
/// generator is a qubit, and the spectral construction in any dimension.
pub fn cmd_optimize(cfg: &ConfigDto) -> Result<CommandOutput, CliError> {
    let h = to_hamiltonian(cfg)?;
    let tau = experiment_field(cfg, |e| e.time)
        .or_else(|| round_time(cfg))
        .unwrap_or(1.0);
    let shots = experiment_field(cfg, |e| e.shots).unwrap_or(1);

    let (state, obs) = fisher::optimal_configuration(&h)?;
    let sens = fisher::sensitivity_from_observable(&state, &h, &obs, tau, shots)?;
    let spread = eig::spectral_spread(&h)?;
    let amps = state.as_pure().expect("optimal probe is pure");
    let analytic = json!({
        "state_re": amps.iter().map(|a| a.re).collect::<Vec<_>>(),
        "state_im": amps.iter().map(|a| a.im).collect::<Vec<_>>(),
        "observable": matrix_to_dto(obs.matrix()),
        "delta_b": sens.delta_b,
        "saturation_ratio": sens.slope / (tau * sens.deviation),
        "spread": spread,
    });

    let mut payload = json!({
        "dim": h.dim(),
        "tau": tau,
        "shots": shots,
        "analytic": analytic,
    });
    let mut rows = vec![
        ("delta_b", format!("{:.17e}", sens.delta_b)),
        (
            "saturation_ratio",
            format!("{:.17e}", sens.slope / (tau * sens.deviation)),
        ),
        ("spread", format!("{spread:.17e}")),
    ];

    let mut scan_cells = None;
    if h.dim() == 2 {
        let grid = cfg.scan.as_ref().and_then(|s| s.grid).unwrap_or(721);
        let phase = cfg
            .scan
            .as_ref()
            .and_then(|s| s.phase)
            .unwrap_or(qmetro_core::math::PI);
        let scan = qmetro_core::scan::two_level_optimum_scan(&h, grid, phase, tau, shots)?;
        payload.as_object_mut().unwrap().insert(
            "scan".into(),
            json!({
                "grid": grid,
                "phase": phase,
                "alpha": scan.alpha,
                "theta": scan.theta,
                "delta_b": scan.delta_b,
            }),
        );
        scan_cells = Some([
            ("scan_alpha", format!("{:.17e}", scan.alpha)),
            ("scan_theta", format!("{:.17e}", scan.theta)),
            ("scan_delta_b", format!("{:.17e}", scan.delta_b)),
        ]);
    }
    if let Some(cells) = &scan_cells {
        for (k, v) in cells {
            rows.push((k, v.clone()));
        }
    }

    Ok(CommandOutput {
        report: document("optimize", payload),
        csv: key_value_csv(&rows),
    })
}
