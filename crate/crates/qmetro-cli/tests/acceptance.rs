//! Acceptance gate: every numbered check prints one PASS/FAIL line with the
//! measured figure and its elapsed time, then asserts.

use std::time::Instant;

use num_complex::Complex64 as C64;
use qmetro_core::ancilla::build_ancilla_protocol;
use qmetro_core::control::{average_hamiltonian, echo_schedule};
use qmetro_core::eig::spectral_spread;
use qmetro_core::fisher::{
    classical_fisher, derived_operator, linearize_povm, mle_estimate, optimal_configuration,
    sensitivity_from_observable,
};
use qmetro_core::mat::ComplexMatrix;
use qmetro_core::mc::{self, Estimator, ExperimentRun};
use qmetro_core::povm::Povm;
use qmetro_core::protocol::ProtocolSpec;
use qmetro_core::scan::two_level_optimum_scan;
use qmetro_core::state::QuantumState;
use qmetro_core::subspace::reduce_to_subspace;
use qmetro_core::synth;

const GOF_Z: f64 = 3.090232;

fn half_z() -> ComplexMatrix {
    ComplexMatrix::diag_real(&[0.5, -0.5])
}

fn report(id: u32, ok: bool, detail: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id:02} {verdict}: {detail} ({dt:.2}s)");
    assert!(ok, "criterion {id:02} failed: {detail}");
    assert!(
        dt < budget_s,
        "criterion {id:02} exceeded its {budget_s}s budget: {dt:.2}s"
    );
}

#[test]
fn criterion_01_bound_command_value() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bound.toml");
    std::fs::write(
        &path,
        r#"
schema_version = 1

[hamiltonian]
re = [[0.5, 0.0], [0.0, -0.5]]

[experiment]
time = 1.0
shots = 100
"#,
    )
    .unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_qmetro"))
        .args(["bound", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let delta = parsed["delta_b_min"].as_f64().unwrap();
    let err = (delta - 0.1).abs();
    let ok = out.status.code() == Some(0) && err <= 1e-9;
    report(
        1,
        ok,
        &format!("bound command delta_b_min={delta:.6} err={err:.1e}"),
        t0,
        1.0,
    );
}

#[test]
fn criterion_02_two_level_scan_optimum() {
    let t0 = Instant::now();
    let scan = two_level_optimum_scan(&half_z(), 721, qmetro_core::math::PI, 1.0, 1).unwrap();
    let quarter = qmetro_core::math::PI / 2.0;
    let da = (scan.alpha - quarter).abs();
    let dt = (scan.theta - quarter).abs();
    let db = (scan.delta_b - 1.0).abs();
    let ok = da <= 0.005 && dt <= 0.005 && db <= 1e-4;
    report(
        2,
        ok,
        &format!(
            "scan optimum alpha_err={da:.2e} theta_err={dt:.2e} delta_b_err={db:.2e} over 721^2 grid"
        ),
        t0,
        10.0,
    );
}

#[test]
fn criterion_03_spectral_saturation() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut n = 0u32;
    for dim in 2usize..=6 {
        for i in 0..50u64 {
            let h = synth::random_hermitian(&mut synth::rng(dim as u64 * 1000 + i), dim, 1.0);
            let spread = spectral_spread(&h).unwrap();
            let (state, obs) = optimal_configuration(&h).unwrap();
            let rep = sensitivity_from_observable(&state, &h, &obs, 1.0, 1).unwrap();
            let rel = ((rep.slope / rep.deviation - spread) / spread).abs();
            worst = worst.max(rel);
            n += 1;
        }
    }
    let ok = n == 250 && worst <= 1e-9;
    report(
        3,
        ok,
        &format!("commutator ratio matches the spread on {n} instances, worst rel err {worst:.1e}"),
        t0,
        30.0,
    );
}

#[test]
fn criterion_04_subspace_information_equality() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut done = 0u32;
    let mut seed = 0u64;
    while done < 200 {
        seed += 1;
        let dim = 2 + (seed % 5) as usize;
        let mut rng = synth::rng(seed);
        let h = synth::random_hermitian(&mut rng, dim, 1.0);
        let state = synth::random_pure_state(&mut rng, dim);
        let povm = synth::random_povm(&mut rng, dim, 3);
        let reduced = match reduce_to_subspace(&state, &h, &povm) {
            Ok(r) => r,
            Err(qmetro_core::Error::EigenstateInput) => continue,
            Err(e) => panic!("reduction failed: {e}"),
        };
        let full = linearize_povm(&state, &h, &povm, 1.0).unwrap();
        let small = linearize_povm(&reduced.state, &reduced.hamiltonian, &reduced.povm, 1.0)
            .unwrap();
        let f_full = classical_fisher(&full, 1, false).unwrap().fisher_per_shot;
        let f_small = classical_fisher(&small, 1, false).unwrap().fisher_per_shot;
        worst = worst.max((f_full - f_small).abs() / f_full.max(1e-12));
        done += 1;
    }
    let ok = worst <= 1e-9;
    report(
        4,
        ok,
        &format!("two-level reduction preserves information on 200 instances, worst rel err {worst:.1e}"),
        t0,
        60.0,
    );
}

#[test]
fn criterion_05_average_hamiltonian_contraction() {
    let t0 = Instant::now();
    let mut violations = 0u32;
    for seed in 0..500u64 {
        let dim = 2 + (seed % 4) as usize;
        let mut rng = synth::rng(seed.wrapping_mul(2654435761).wrapping_add(17));
        let h = synth::random_hermitian(&mut rng, dim, 1.0);
        let segments = 1 + (seed % 4) as usize;
        let schedule = synth::random_schedule(&mut rng, dim, 1.0, segments, 1.5);
        let avg = average_hamiltonian(&h, &schedule, 1.0, 192).unwrap();
        if spectral_spread(&avg).unwrap() > spectral_spread(&h).unwrap() + 1e-8 {
            violations += 1;
        }
    }
    let h = half_z();
    let echo = echo_schedule(1.0, 0.05).unwrap();
    let effective = spectral_spread(&average_hamiltonian(&h, &echo, 1.0, 2000).unwrap()).unwrap();
    let original = spectral_spread(&h).unwrap();
    let ok = violations == 0 && effective < 0.05 * original;
    report(
        5,
        ok,
        &format!(
            "averaging never widened the spectrum in 500 draws ({violations} violations); echo leaves {:.4} of the bare spread",
            effective / original
        ),
        t0,
        60.0,
    );
}

#[test]
fn criterion_06_mixture_convexity() {
    let t0 = Instant::now();
    let mut violations = 0u32;
    for seed in 0..300u64 {
        let dim = 2 + (seed % 4) as usize;
        let mut rng = synth::rng(seed.wrapping_mul(77001) ^ 0xABCD);
        let h = synth::random_hermitian(&mut rng, dim, 1.0);
        let povm = synth::random_povm(&mut rng, dim, 3);
        let parts: Vec<QuantumState> =
            (0..3).map(|_| synth::random_pure_state(&mut rng, dim)).collect();
        let weights = [0.5, 0.3, 0.2];
        let decomposition: Vec<(f64, Vec<C64>)> = weights
            .iter()
            .zip(&parts)
            .map(|(w, s)| (*w, s.as_pure().unwrap().to_vec()))
            .collect();
        let mixed = QuantumState::mixed_from_decomposition(decomposition).unwrap();
        let f_mixed = classical_fisher(&linearize_povm(&mixed, &h, &povm, 1.0).unwrap(), 1, false)
            .unwrap()
            .fisher_per_shot;
        let f_best = parts
            .iter()
            .map(|s| {
                classical_fisher(&linearize_povm(s, &h, &povm, 1.0).unwrap(), 1, false)
                    .unwrap()
                    .fisher_per_shot
            })
            .fold(0.0f64, f64::max);
        if f_mixed > f_best + 1e-9 {
            violations += 1;
        }
    }
    let ok = violations == 0;
    report(
        6,
        ok,
        &format!("mixing never increased information in 300 draws ({violations} violations)"),
        t0,
        60.0,
    );
}

#[test]
fn criterion_07_feedback_information_ceiling() {
    let t0 = Instant::now();
    let mut violations = 0u32;
    for seed in 0..200u64 {
        let dim = 2 + (seed % 3) as usize;
        let steps = 1 + (seed % 3) as usize;
        let outcomes = 2 + (seed % 2) as usize;
        let spec = synth::random_protocol(seed ^ 0x5EED, dim, steps, outcomes, 1.0, true);
        let f = spec
            .distribution(0.0)
            .unwrap()
            .fisher(1, false)
            .unwrap()
            .fisher_per_shot;
        let spread = spectral_spread(&spec.hamiltonian).unwrap();
        if f > spread * spread + 1e-9 {
            violations += 1;
        }
    }
    let mut two_round_violations = 0u32;
    for seed in 0..100u64 {
        let dim = 2 + (seed % 2) as usize;
        let spec = synth::random_two_round(seed ^ 0x2B0B, dim, 2, 1.0, true);
        let f = spec
            .distribution(0.0)
            .unwrap()
            .fisher(1, false)
            .unwrap()
            .fisher_per_shot;
        let spread = spectral_spread(&spec.hamiltonian).unwrap();
        if f > 2.0 * spread * spread + 1e-9 {
            two_round_violations += 1;
        }
    }
    let ok = violations == 0 && two_round_violations == 0;
    report(
        7,
        ok,
        &format!(
            "200 feedback protocols stayed under the one-round ceiling ({violations} violations); 100 adaptive pairs under the two-round ceiling ({two_round_violations} violations)"
        ),
        t0,
        300.0,
    );
}

#[test]
fn criterion_08_entangled_register_scaling() {
    let t0 = Instant::now();
    let mut worst_rel = 0.0f64;
    let mut worst_sd = 0.0f64;
    for k in 0usize..=6 {
        let spec = build_ancilla_protocol(k, 1.0, 1.0).unwrap();
        let target = 1.0 / ((1 + k) as f64 * 100.0);
        let rep = spec
            .distribution(0.0)
            .unwrap()
            .fisher(10_000, false)
            .unwrap();
        worst_rel = worst_rel.max(((rep.delta_b_min - target) / target).abs());

        let run = mc::run_experiment(
            &spec,
            0.0,
            10_000,
            200,
            9_100 + k as u64,
            Estimator::Mle,
            false,
        )
        .unwrap();
        worst_sd = worst_sd.max((run.empirical_sd / target - 1.0).abs());
    }
    let ok = worst_rel <= 1e-9 && worst_sd <= 0.15;
    report(
        8,
        ok,
        &format!(
            "register sizes 0..=6 hit the 1/((1+K) tau sqrt(N)) floor, worst analytic rel err {worst_rel:.1e}, worst sampled sd deviation {:.1}%",
            worst_sd * 100.0
        ),
        t0,
        300.0,
    );
}

#[test]
fn criterion_09_estimator_agreement() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut done = 0u32;
    let mut seed = 0u64;
    while done < 100 {
        seed += 1;
        let dim = 2 + (seed % 3) as usize;
        let outcomes = 2 + (seed % 3) as usize;
        let mut rng = synth::rng(seed.wrapping_mul(31).wrapping_add(5));
        let h = synth::random_hermitian(&mut rng, dim, 1.0);
        let state = synth::random_pure_state(&mut rng, dim);
        let povm = synth::random_povm(&mut rng, dim, outcomes);
        let lin = linearize_povm(&state, &h, &povm, 1.0).unwrap();
        let counts = mc::sample_counts(&lin.p0, 2_000, &mut mc::trial_rng(seed, 0)).unwrap();
        let mle = match mle_estimate(&lin, &counts) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let op = derived_operator(&povm, &lin)
            .unwrap()
            .estimate(&lin, &counts)
            .unwrap();
        let score = mc::score_mean_estimate(&lin, &counts).unwrap();
        let scale = 1.0f64.max(mle.abs());
        worst = worst.max((mle - op).abs() / scale);
        worst = worst.max((mle - score).abs() / scale);
        done += 1;
    }
    let ok = worst <= 1e-10;
    report(
        9,
        ok,
        &format!("likelihood and operator estimates agree on 100 sampled tables, worst diff {worst:.1e}"),
        t0,
        30.0,
    );
}

#[test]
fn criterion_10_sampling_floors() {
    let t0 = Instant::now();
    let mut runs: Vec<ExperimentRun> = Vec::new();
    for k in 0usize..=6 {
        let spec = build_ancilla_protocol(k, 1.0, 1.0).unwrap();
        runs.push(
            mc::run_experiment(
                &spec,
                0.0,
                10_000,
                200,
                9_100 + k as u64,
                Estimator::Mle,
                false,
            )
            .unwrap(),
        );
    }
    for s in 0..33u64 {
        let dim = 2 + (s % 3) as usize;
        let h = synth::random_hermitian(&mut synth::rng(s.wrapping_mul(991) ^ 0xF00D), dim, 1.0);
        let (state, obs) = optimal_configuration(&h).unwrap();
        let (povm, _) = Povm::projective_from_observable(&obs).unwrap();
        let tau = 0.5 + 0.5 * (s % 4) as f64;
        let spec = ProtocolSpec::simple(state, h, povm, tau).unwrap();
        let estimator = if s % 2 == 0 {
            Estimator::Mle
        } else {
            Estimator::ObservableMean
        };
        runs.push(
            mc::run_experiment(&spec, 0.0, 400, 150, 40_000 + s, estimator, false).unwrap(),
        );
    }
    let mut min_z = f64::INFINITY;
    let mut checked = 0u32;
    for run in &runs {
        for z in [run.z_fisher, run.z_quantum] {
            if z.is_finite() {
                min_z = min_z.min(z);
                checked += 1;
            }
        }
    }
    let ok = !runs.is_empty() && checked > 0 && min_z >= -GOF_Z;
    report(
        10,
        ok,
        &format!(
            "no sampled spread undercut its floor across {} runs ({checked} bound checks, min z {min_z:.2}, threshold -{GOF_Z})",
            runs.len()
        ),
        t0,
        900.0,
    );
}
