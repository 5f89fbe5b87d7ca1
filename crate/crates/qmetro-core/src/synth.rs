//! Deterministic random instances for tests: Gaussian-ensemble Hermitian
//! matrices, Haar-ish unitaries, states, measurements, schedules, and whole
//! protocols. Everything is keyed by an explicit seed so failures replay.

use crate::control::ControlSchedule;
use crate::mat::{self, ComplexMatrix};
use crate::math;
use crate::povm::Povm;
use crate::protocol::{
    FeedbackRound, FeedbackStep, PolicyAction, ProtocolSpec, RoundPolicy, StepPolicy,
};
use crate::state::QuantumState;
use alloc::vec::Vec;
use num_complex::Complex64 as C64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Standard normal draw by Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u = uniform(rng).max(1e-300);
    let v = uniform(rng);
    math::sqrt(-2.0 * math::ln(u)) * math::cos(2.0 * math::PI * v)
}

fn gaussian_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(standard_normal(rng), standard_normal(rng))
}

/// Gaussian-ensemble Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        m[(r, r)] = C64::new(scale * standard_normal(rng), 0.0);
        for c in (r + 1)..dim {
            let z = gaussian_c64(rng) * C64::new(scale / math::sqrt(2.0), 0.0);
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    m
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    (0..dim).map(|_| gaussian_c64(rng)).collect()
}

/// Unitary from Gram-Schmidt on Gaussian columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = random_vector(rng, dim);
        for u in &cols {
            let overlap = mat::vdot(u, &v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= overlap * ui;
            }
        }
        if let Ok(unit) = mat::vnormalize(&v) {
            cols.push(unit);
        }
    }
    ComplexMatrix::from_fn(dim, dim, |r, c| cols[c][r])
}

pub fn random_pure_state(rng: &mut ChaCha8Rng, dim: usize) -> QuantumState {
    loop {
        let v = random_vector(rng, dim);
        if let Ok(state) = QuantumState::pure_from_unnormalized(&v) {
            return state;
        }
    }
}

/// Mixed state as an explicit convex mixture of `rank` random pure states.
pub fn random_mixed_state(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> QuantumState {
    let mut parts = Vec::with_capacity(rank);
    let mut weights = Vec::with_capacity(rank);
    for _ in 0..rank {
        weights.push(-math::ln(uniform(rng).max(1e-300)));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    for w in weights {
        let state = random_pure_state(rng, dim);
        parts.push((w, state.as_pure().unwrap().to_vec()));
    }
    QuantumState::mixed_from_decomposition(parts).unwrap()
}

/// POVM with `outcomes` generic positive elements summing to the identity.
pub fn random_povm(rng: &mut ChaCha8Rng, dim: usize, outcomes: usize) -> Povm {
    loop {
        let gs: Vec<ComplexMatrix> = (0..outcomes)
            .map(|_| ComplexMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng)))
            .collect();
        let mut total = ComplexMatrix::zeros(dim, dim);
        for g in &gs {
            total = &total + &(&g.dagger() * g);
        }
        let Ok(es) = crate::eig::eig_hermitian(&total.symmetrized()) else {
            continue;
        };
        if es.values.iter().any(|l| *l < 1e-9) {
            continue;
        }
        let inv_sqrt = es.map(|l| C64::new(1.0 / math::sqrt(l), 0.0));
        let ms: Vec<ComplexMatrix> = gs.iter().map(|g| g * &inv_sqrt).collect();
        if let Ok(povm) = Povm::from_measurements(ms) {
            return povm;
        }
    }
}

/// Projective POVM from the columns of a random unitary.
pub fn random_projective_povm(rng: &mut ChaCha8Rng, dim: usize) -> Povm {
    let u = random_unitary(rng, dim);
    let elements: Vec<ComplexMatrix> = (0..dim)
        .map(|c| {
            let col = u.column(c);
            mat::outer(&col, &col)
        })
        .collect();
    Povm::new(elements).unwrap()
}

/// Piecewise-constant control schedule filling `tau` with `segments` pieces.
pub fn random_schedule(
    rng: &mut ChaCha8Rng,
    dim: usize,
    tau: f64,
    segments: usize,
    scale: f64,
) -> ControlSchedule {
    let mut cuts: Vec<f64> = (0..segments).map(|_| uniform(rng) + 0.05).collect();
    let total: f64 = cuts.iter().sum();
    for c in &mut cuts {
        *c *= tau / total;
    }
    ControlSchedule::from_segments(
        cuts.into_iter()
            .map(|dt| (random_hermitian(rng, dim, scale), dt))
            .collect(),
    )
}

fn random_action(rng: &mut ChaCha8Rng, dim: usize, outcomes: usize) -> PolicyAction {
    if uniform(rng) < 0.5 {
        PolicyAction::measure(random_povm(rng, dim, outcomes))
    } else {
        PolicyAction::rotate_then_measure(random_unitary(rng, dim), random_povm(rng, dim, outcomes))
    }
}

/// Feedback protocol with `steps` steps of random durations, controls, and
/// measurements; policies branch on the full outcome prefix. Pass
/// `controls = false` to keep every step's drive off.
pub fn random_protocol(
    seed: u64,
    dim: usize,
    steps: usize,
    outcomes: usize,
    tau: f64,
    controls: bool,
) -> ProtocolSpec {
    let mut r = rng(seed);
    let h = random_hermitian(&mut r, dim, 1.0);
    let initial = if uniform(&mut r) < 0.7 {
        random_pure_state(&mut r, dim)
    } else {
        random_mixed_state(&mut r, dim, 2)
    };

    let mut durations: Vec<f64> = (0..steps).map(|_| uniform(&mut r) + 0.05).collect();
    let total: f64 = durations.iter().sum();
    for d in &mut durations {
        *d *= tau / total;
    }

    let mut prefixes: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    let mut built = Vec::with_capacity(steps);
    for (i, duration) in durations.into_iter().enumerate() {
        let control = if !controls || uniform(&mut r) < 0.5 {
            ControlSchedule::none()
        } else {
            let pieces = 1 + (r.next_u64() % 2) as usize;
            random_schedule(&mut r, dim, duration, pieces, 0.7)
        };
        let policy = if i == 0 || uniform(&mut r) < 0.4 {
            StepPolicy::uniform(random_action(&mut r, dim, outcomes))
        } else {
            StepPolicy {
                entries: prefixes
                    .iter()
                    .map(|p| (p.clone(), random_action(&mut r, dim, outcomes)))
                    .collect(),
                fallback: None,
            }
        };
        built.push(FeedbackStep {
            duration,
            control,
            policy,
        });
        prefixes = prefixes
            .iter()
            .flat_map(|p| {
                (0..outcomes).map(move |o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }

    ProtocolSpec::feedback(h, tau, FeedbackRound {
        initial,
        steps: built,
    })
    .unwrap()
}

/// Two-round protocol over a shared generator; the second round is selected
/// by the first round's outcome history when `adaptive` is set.
pub fn random_two_round(seed: u64, dim: usize, outcomes: usize, tau: f64, adaptive: bool) -> ProtocolSpec {
    let mut r = rng(seed);
    let h = random_hermitian(&mut r, dim, 1.0);
    let make_round = |r: &mut ChaCha8Rng| FeedbackRound {
        initial: random_pure_state(r, dim),
        steps: alloc::vec![FeedbackStep {
            duration: tau,
            control: ControlSchedule::none(),
            policy: StepPolicy::uniform(PolicyAction::measure(random_povm(r, dim, outcomes))),
        }],
    };
    let first = RoundPolicy::uniform(make_round(&mut r));
    let second = if adaptive {
        RoundPolicy {
            entries: (0..outcomes)
                .map(|o| (alloc::vec![alloc::vec![o]], make_round(&mut r)))
                .collect(),
            fallback: Some(make_round(&mut r)),
        }
    } else {
        RoundPolicy::uniform(make_round(&mut r))
    };
    ProtocolSpec::multi_round(h, tau, alloc::vec![first, second]).unwrap()
}
