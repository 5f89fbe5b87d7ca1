//! Sensor-plus-register circuit that amplifies a field's phase pickup: a
//! register of `k` collectively controlled spins is entangled with the
//! sensor, accumulates phase alongside it, and is disentangled so the whole
//! signal lands on the sensor coherence. The slope grows as `k + 1`.
//!
//! Register bit 0 denotes the spin-up state (`+1/2` along z); basis index
//! `σ·2^k + s` puts the sensor bit first.

use crate::eig;
use crate::mat::ComplexMatrix;
use crate::math;
use crate::povm::Povm;
use crate::protocol::{
    trivial_povm, FeedbackRound, FeedbackStep, PolicyAction, ProtocolSpec, StepPolicy,
};
use crate::state::QuantumState;
use crate::{Error, Result};
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Largest supported register.
pub const MAX_ANCILLAS: usize = 10;

/// Geometry and timing of the amplification circuit.
#[derive(Debug, Clone, Copy)]
pub struct AncillaCircuit {
    pub ancillas: usize,
    pub tau: f64,
    pub coupling: f64,
}

impl AncillaCircuit {
    pub fn new(ancillas: usize, tau: f64, coupling: f64) -> Result<Self> {
        if ancillas > MAX_ANCILLAS {
            return Err(Error::CapExceeded { name: "ancillas" });
        }
        if tau <= 0.0 {
            return Err(Error::InvalidProtocol("nonpositive round time"));
        }
        if coupling <= 0.0 {
            return Err(Error::InvalidProtocol("nonpositive coupling"));
        }
        Ok(Self {
            ancillas,
            tau,
            coupling,
        })
    }

    pub fn dim(&self) -> usize {
        2 << self.ancillas
    }

    fn register_states(&self) -> usize {
        1 << self.ancillas
    }

    fn index(&self, sensor: usize, register: usize) -> usize {
        sensor * self.register_states() + register
    }

    /// Sensing generator per unit field: `|1⟩⟨1|⊗I + Σᵢ I_zⁱ`, spread `1+k`.
    pub fn h_meas(&self) -> ComplexMatrix {
        let k = self.ancillas as f64;
        let reg = self.register_states();
        let diag: Vec<f64> = (0..self.dim())
            .map(|idx| {
                let sensor = (idx / reg) as f64;
                let down = (idx % reg).count_ones() as f64;
                sensor + (k - 2.0 * down) / 2.0
            })
            .collect();
        ComplexMatrix::diag_real(&diag)
    }

    /// Entangling drive `λ·|1⟩⟨1|⊗Σᵢ σ_xⁱ`.
    pub fn h_int(&self) -> ComplexMatrix {
        let dim = self.dim();
        let reg = self.register_states();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for s in 0..reg {
            for bit in 0..self.ancillas {
                let flipped = s ^ (1 << bit);
                m[(self.index(1, s), self.index(1, flipped))] = C64::new(self.coupling, 0.0);
            }
        }
        m
    }

    /// Flip every register spin iff the sensor is in `|1⟩`.
    pub fn entangling_layer(&self) -> ComplexMatrix {
        let dim = self.dim();
        let reg = self.register_states();
        let all = reg - 1;
        ComplexMatrix::from_fn(dim, dim, |r, c| {
            let (rs, rr) = (r / reg, r % reg);
            let (cs, cr) = (c / reg, c % reg);
            let hit = rs == cs && if cs == 1 { rr == cr ^ all } else { rr == cr };
            if hit {
                C64::ONE
            } else {
                C64::ZERO
            }
        })
    }

    /// π pulse on the sensor.
    pub fn sensor_flip(&self) -> ComplexMatrix {
        let dim = self.dim();
        let reg = self.register_states();
        ComplexMatrix::from_fn(dim, dim, |r, c| {
            if r % reg == c % reg && r / reg != c / reg {
                C64::ONE
            } else {
                C64::ZERO
            }
        })
    }

    /// Drive time after which the entangling pulse equals the gate layer up
    /// to a sensor-local phase.
    pub fn pulse_time(&self) -> f64 {
        math::PI / (2.0 * self.coupling)
    }

    /// `e^{−i·H_int·pulse_time}`, equal to `entangling_layer` times
    /// `diag(1, (−i)^k)` on the sensor.
    pub fn pulse_unitary(&self) -> Result<ComplexMatrix> {
        eig::propagator(&self.h_int(), self.pulse_time())
    }

    /// Sensor-local phase separating the timed pulse from the bare gate
    /// layer.
    pub fn pulse_phase(&self) -> ComplexMatrix {
        let dim = self.dim();
        let reg = self.register_states();
        let phase = C64::new(0.0, -1.0).powu(self.ancillas as u32);
        ComplexMatrix::from_fn(dim, dim, |r, c| {
            if r != c {
                C64::ZERO
            } else if r / reg == 1 {
                phase
            } else {
                C64::ONE
            }
        })
    }

    /// `(|0⟩ + |1⟩)/√2 ⊗ |↑…↑⟩`.
    pub fn initial_state(&self) -> Result<QuantumState> {
        let mut amps = alloc::vec![C64::ZERO; self.dim()];
        amps[self.index(0, 0)] = C64::ONE;
        amps[self.index(1, 0)] = C64::ONE;
        QuantumState::pure_from_unnormalized(&amps)
    }

    /// Projective readout of `i(|0⟩⟨1| − |1⟩⟨0|)` on the sensor; outcome 0 is
    /// the −1 eigenvalue.
    pub fn readout_povm(&self) -> Result<Povm> {
        let reg = self.register_states();
        let dim = self.dim();
        let minus = ComplexMatrix::from_fn(dim, dim, |r, c| {
            if r % reg != c % reg {
                return C64::ZERO;
            }
            // (|0⟩ + i|1⟩)(⟨0| − i⟨1|)/2 on the sensor
            match (r / reg, c / reg) {
                (0, 0) | (1, 1) => C64::new(0.5, 0.0),
                (1, 0) => C64::new(0.0, 0.5),
                _ => C64::new(0.0, -0.5),
            }
        });
        let plus = &ComplexMatrix::identity(dim) - &minus;
        Povm::with_measurements(
            alloc::vec![minus.clone(), plus.clone()],
            alloc::vec![minus, plus],
        )
    }

    /// Two-interval protocol: gates and echo pulse up front, then free
    /// evolution, the closing gate layer, and the sensor readout.
    pub fn protocol(&self) -> Result<ProtocolSpec> {
        let gate = self.entangling_layer();
        let prepare = &self.sensor_flip() * &gate;
        let steps = alloc::vec![
            FeedbackStep {
                duration: 0.0,
                control: crate::control::ControlSchedule::none(),
                policy: StepPolicy::uniform(PolicyAction::rotate_then_measure(
                    prepare,
                    trivial_povm(self.dim()),
                )),
            },
            FeedbackStep {
                duration: self.tau,
                control: crate::control::ControlSchedule::none(),
                policy: StepPolicy::uniform(PolicyAction::rotate_then_measure(
                    gate,
                    self.readout_povm()?,
                )),
            },
        ];
        ProtocolSpec::feedback(
            self.h_meas(),
            self.tau,
            FeedbackRound {
                initial: self.initial_state()?,
                steps,
            },
        )
    }
}

/// Builds the amplification protocol for `k` register spins.
pub fn build_ancilla_protocol(k: usize, tau: f64, coupling: f64) -> Result<ProtocolSpec> {
    AncillaCircuit::new(k, tau, coupling)?.protocol()
}

/// Conjugates the sensing generator by the gate layer and verifies it equals
/// `|1⟩⟨1|⊗I + σ_z⊗Σᵢ I_zⁱ` entrywise; returns the original and conjugated
/// spectral spreads (both `1+k`).
pub fn effective_hamiltonian_check(k: usize) -> Result<(f64, f64)> {
    let circuit = AncillaCircuit::new(k, 1.0, 1.0)?;
    let gate = circuit.entangling_layer();
    let h = circuit.h_meas();
    let conjugated = &(&gate * &h) * &gate;

    let reg = circuit.register_states();
    let kf = k as f64;
    let target_diag: Vec<f64> = (0..circuit.dim())
        .map(|idx| {
            let sensor = idx / reg;
            let zsum = (kf - 2.0 * (idx % reg).count_ones() as f64) / 2.0;
            let sign = if sensor == 0 { 1.0 } else { -1.0 };
            sensor as f64 + sign * zsum
        })
        .collect();
    let target = ComplexMatrix::diag_real(&target_diag);
    let gap = conjugated.max_abs_diff(&target);
    if gap > 1e-9 {
        return Err(Error::CrossCheckFailure {
            analytic: 0.0,
            finite_diff: gap,
        });
    }
    Ok((
        eig::spectral_spread(&h)?,
        eig::spectral_spread(&conjugated)?,
    ))
}
