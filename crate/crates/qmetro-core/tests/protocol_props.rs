//! Randomized invariants of the outcome-tree engine: information bounds for
//! adaptive single- and multi-round protocols, slope bookkeeping, and the
//! distribution-preserving protocol rewrites.

use proptest::prelude::*;
use qmetro_core::eig::spectral_spread;
use qmetro_core::protocol::{
    absorb_constant_control, step_information_profile, strip_feedback,
};
use qmetro_core::synth;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn feedback_never_beats_the_spectral_bound(seed in any::<u64>(), dim in 2usize..=4,
                                               steps in 1usize..=3, outcomes in 2usize..=3,
                                               tau in 0.4f64..1.5) {
        let spec = synth::random_protocol(seed, dim, steps, outcomes, tau, true);
        let dist = spec.distribution(0.0).unwrap();
        let fisher = dist.fisher(1, false).unwrap().fisher_per_shot;
        let spread = spectral_spread(&spec.hamiltonian).unwrap();
        prop_assert!(fisher <= tau * tau * spread * spread + 1e-9,
                     "F = {fisher}, cap = {}", tau * tau * spread * spread);
    }

    #[test]
    fn analytic_slopes_sum_to_zero(seed in any::<u64>(), dim in 2usize..=4,
                                   steps in 1usize..=3, outcomes in 2usize..=3) {
        let spec = synth::random_protocol(seed, dim, steps, outcomes, 1.0, true);
        let dist = spec.distribution(0.0).unwrap();
        let total: f64 = dist.records.iter().map(|r| r.dp_analytic).sum();
        let weight: f64 = dist.records.iter().map(|r| r.dp_analytic.abs()).sum();
        prop_assert!(total.abs() <= 1e-9 * weight.max(1.0), "Σdp = {total}");
    }

    #[test]
    fn slopes_cross_check_against_finite_differences(seed in any::<u64>(), dim in 2usize..=4,
                                                     steps in 1usize..=2) {
        let spec = synth::random_protocol(seed, dim, steps, 2, 1.0, true);
        let dist = spec.distribution(0.0).unwrap();
        for rec in &dist.records {
            if !rec.pruned {
                let scale = rec.dp.abs().max(rec.dp_analytic.abs()).max(1.0);
                prop_assert!((rec.dp - rec.dp_analytic).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn leaf_probabilities_are_normalized(seed in any::<u64>(), dim in 2usize..=4,
                                         steps in 1usize..=3, b in -0.3f64..0.3) {
        let spec = synth::random_protocol(seed, dim, steps, 2, 1.0, true);
        let dist = spec.distribution(b).unwrap();
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn two_round_protocols_respect_the_additive_bound(seed in any::<u64>(), dim in 2usize..=3,
                                                      outcomes in 2usize..=3, tau in 0.4f64..1.2,
                                                      adaptive in any::<bool>()) {
        let spec = synth::random_two_round(seed, dim, outcomes, tau, adaptive);
        let dist = spec.distribution(0.0).unwrap();
        let fisher = dist.fisher(1, false).unwrap().fisher_per_shot;
        let spread = spectral_spread(&spec.hamiltonian).unwrap();
        prop_assert!(fisher <= 2.0 * tau * tau * spread * spread + 1e-9);
    }

    #[test]
    fn stripping_feedback_preserves_the_distribution(seed in any::<u64>(), dim in 2usize..=4,
                                                     steps in 1usize..=3) {
        let spec = synth::random_protocol(seed, dim, steps, 2, 1.0, true);
        let stripped = strip_feedback(&spec).unwrap();
        for b in [0.0, 0.11, -0.27] {
            let a = spec.distribution(b).unwrap();
            let c = stripped.distribution(b).unwrap();
            prop_assert_eq!(a.len(), c.len());
            for (x, y) in a.records.iter().zip(&c.records) {
                prop_assert!((x.probability - y.probability).abs() < 1e-11);
                prop_assert!((x.dp_analytic - y.dp_analytic).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_step_dominates_the_information(seed in any::<u64>(), dim in 2usize..=4,
                                          steps in 1usize..=3, outcomes in 2usize..=3) {
        let spec = synth::random_protocol(seed, dim, steps, outcomes, 1.0, false);
        let total = spec.distribution(0.0).unwrap().fisher(1, false).unwrap().fisher_per_shot;
        let profile = step_information_profile(&spec).unwrap();
        prop_assert_eq!(profile.len(), steps);
        let best = profile.iter().cloned().fold(0.0f64, f64::max);
        // the profile re-derives slopes on a rebuilt protocol, so allow
        // finite-difference noise proportional to the information itself
        let slack = 1e-9 + 1e-7 * total;
        prop_assert!(best >= total / steps as f64 - slack,
                     "best step {best} < total {total} / {steps}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn commuting_drives_absorb_exactly(seed in any::<u64>(), dim in 2usize..=4,
                                       steps in 1usize..=3, alpha in -1.5f64..1.5,
                                       b in -0.3f64..0.3) {
        use qmetro_core::control::ControlSchedule;
        use qmetro_core::mat::ComplexMatrix;
        use qmetro_core::protocol::{FeedbackRound, FeedbackStep, ProtocolVariant, ProtocolSpec};

        let base = synth::random_protocol(seed, dim, steps, 2, 1.0, false);
        let round = match &base.variant {
            ProtocolVariant::Feedback(r) => r.clone(),
            _ => unreachable!(),
        };
        let id = ComplexMatrix::identity(dim);
        let h0 = &base.hamiltonian.scaled_re(alpha) + &id.scaled_re(0.4);
        let steps_with_drive: Vec<FeedbackStep> = round
            .steps
            .iter()
            .map(|s| FeedbackStep {
                duration: s.duration,
                control: ControlSchedule::constant(h0.clone(), s.duration),
                policy: s.policy.clone(),
            })
            .collect();
        let driven = ProtocolSpec::feedback(
            base.hamiltonian.clone(),
            base.round_time,
            FeedbackRound { initial: round.initial.clone(), steps: steps_with_drive },
        ).unwrap();

        let absorbed = absorb_constant_control(&driven).unwrap();
        let a = driven.distribution(b).unwrap();
        let c = absorbed.distribution(b).unwrap();
        for (x, y) in a.records.iter().zip(&c.records) {
            prop_assert!((x.probability - y.probability).abs() < 1e-10);
        }
    }
}
