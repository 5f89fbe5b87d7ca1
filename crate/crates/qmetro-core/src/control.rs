//! Piecewise-constant control schedules and the control-frame average of a
//! sensing generator.

use crate::eig;
use crate::mat::ComplexMatrix;
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;

/// Default Riemann nodes per schedule segment.
pub const DEFAULT_STEPS_PER_SEGMENT: usize = 64;

/// One constant stretch of the control generator.
#[derive(Debug, Clone)]
pub struct ControlSegment {
    pub h0: ComplexMatrix,
    pub duration: f64,
}

/// Piecewise-constant control `H₀(t)`; an empty segment list means no
/// control.
#[derive(Debug, Clone, Default)]
pub struct ControlSchedule {
    pub segments: Vec<ControlSegment>,
}

impl ControlSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn constant(h0: ComplexMatrix, duration: f64) -> Self {
        Self {
            segments: alloc::vec![ControlSegment { h0, duration }],
        }
    }

    pub fn from_segments(segments: Vec<(ComplexMatrix, f64)>) -> Self {
        Self {
            segments: segments
                .into_iter()
                .map(|(h0, duration)| ControlSegment { h0, duration })
                .collect(),
        }
    }

    pub fn is_none(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Checks generator shape, Hermiticity, and that the segment durations
    /// cover `expected` exactly. An empty schedule passes for any duration.
    pub fn validate(&self, dim: usize, expected: f64) -> Result<()> {
        if self.is_none() {
            return Ok(());
        }
        for seg in &self.segments {
            if seg.duration < 0.0 {
                return Err(Error::InvalidProtocol("negative segment duration"));
            }
            if !seg.h0.is_square() || seg.h0.rows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: seg.h0.rows(),
                });
            }
            seg.h0.require_hermitian(eig::HERMITIAN_TOL)?;
        }
        let sum = self.total_duration();
        if math::abs(sum - expected) > 1e-9 {
            return Err(Error::ScheduleMismatch { sum, expected });
        }
        Ok(())
    }
}

/// Time average of `U₀†(t)·H·U₀(t)` over `[0, τ]`, where `U₀` is generated by
/// the schedule. Each segment is integrated at `steps_per_segment` midpoint
/// nodes with the exact local propagator, so the result is a convex
/// combination of unitary conjugations of `H` and its spectral spread never
/// exceeds that of `H`.
pub fn average_hamiltonian(
    h: &ComplexMatrix,
    schedule: &ControlSchedule,
    tau: f64,
    steps_per_segment: usize,
) -> Result<ComplexMatrix> {
    let h = h.require_hermitian(eig::HERMITIAN_TOL)?;
    if steps_per_segment == 0 {
        return Err(Error::InvalidProtocol("zero steps per segment"));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidProtocol("nonpositive averaging time"));
    }
    if schedule.is_none() {
        return Ok(h);
    }
    let dim = h.dim();
    schedule.validate(dim, tau)?;

    let mut acc = ComplexMatrix::zeros(dim, dim);
    let mut frame = ComplexMatrix::identity(dim);
    for seg in &schedule.segments {
        if seg.duration == 0.0 {
            continue;
        }
        let es = eig::eig_hermitian(&seg.h0)?;
        let dt = seg.duration / steps_per_segment as f64;
        for m in 0..steps_per_segment {
            let t_mid = (m as f64 + 0.5) * dt;
            let u = &es.map(|l| math::cis(-l * t_mid)) * &frame;
            let term = &(&u.dagger() * &h) * &u;
            acc = &acc + &term.scaled_re(dt);
        }
        frame = &es.map(|l| math::cis(-l * seg.duration)) * &frame;
    }
    Ok(acc.scaled_re(1.0 / tau).symmetrized())
}

/// Refocusing schedule for a two-level probe: free evolution, a π rotation
/// about x of width `pulse_width` centered in the window, then free
/// evolution.
pub fn echo_schedule(tau: f64, pulse_width: f64) -> Result<ControlSchedule> {
    if !(pulse_width > 0.0 && pulse_width < tau) {
        return Err(Error::InvalidProtocol("pulse width outside the window"));
    }
    let wing = (tau - pulse_width) / 2.0;
    let drive = crate::mat::pauli_x().scaled_re(math::PI / (2.0 * pulse_width));
    Ok(ControlSchedule::from_segments(alloc::vec![
        (ComplexMatrix::zeros(2, 2), wing),
        (drive, pulse_width),
        (ComplexMatrix::zeros(2, 2), wing),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::spectral_spread;
    use crate::mat::{pauli_x, pauli_y, pauli_z};

    fn half_z() -> ComplexMatrix {
        pauli_z().scaled_re(0.5)
    }

    #[test]
    fn no_control_returns_the_generator() {
        let h = half_z();
        let avg = average_hamiltonian(&h, &ControlSchedule::none(), 1.0, 64).unwrap();
        assert!(avg.max_abs_diff(&h) < 1e-15);
        let zero = ControlSchedule::constant(ComplexMatrix::zeros(2, 2), 1.0);
        let avg = average_hamiltonian(&h, &zero, 1.0, 8).unwrap();
        assert!(avg.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn commuting_control_leaves_the_generator_fixed() {
        let h = half_z();
        let sched = ControlSchedule::constant(pauli_z().scaled_re(3.7), 2.0);
        let avg = average_hamiltonian(&h, &sched, 2.0, 16).unwrap();
        assert!(avg.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn echo_average_matches_closed_form() {
        let tau = 1.0;
        let tp = 0.05;
        let sched = echo_schedule(tau, tp).unwrap();
        let avg = average_hamiltonian(&half_z(), &sched, tau, 64).unwrap();
        // free wings cancel; the pulse window leaves (t_p/πτ)·σ_y
        let expect = pauli_y().scaled_re(tp / (math::PI * tau));
        assert!(avg.max_abs_diff(&expect) < 1e-4);
        let spread = spectral_spread(&avg).unwrap();
        assert!(spread < 0.05 * spectral_spread(&half_z()).unwrap());
    }

    #[test]
    fn echo_refines_toward_the_integral_limit() {
        let sched = echo_schedule(1.0, 0.2).unwrap();
        let coarse = average_hamiltonian(&half_z(), &sched, 1.0, 64).unwrap();
        let fine = average_hamiltonian(&half_z(), &sched, 1.0, 4096).unwrap();
        assert!(coarse.max_abs_diff(&fine) < 1e-5);
    }

    #[test]
    fn averaging_never_widens_the_spectrum() {
        let h = &pauli_z().scaled_re(0.8) + &pauli_x().scaled_re(0.3);
        let sched = ControlSchedule::from_segments(alloc::vec![
            (pauli_x().scaled_re(2.1), 0.3),
            (pauli_y().scaled_re(-1.4), 0.45),
            (pauli_z().scaled_re(0.9), 0.25),
        ]);
        for &nodes in &[1usize, 3, 17, 64] {
            let avg = average_hamiltonian(&h, &sched, 1.0, nodes).unwrap();
            let s_avg = spectral_spread(&avg).unwrap();
            let s_h = spectral_spread(&h).unwrap();
            assert!(s_avg <= s_h + 1e-8, "nodes {nodes}: {s_avg} > {s_h}");
        }
    }

    #[test]
    fn mismatched_schedule_duration_is_rejected() {
        let sched = ControlSchedule::constant(pauli_x(), 0.7);
        match average_hamiltonian(&half_z(), &sched, 1.0, 64) {
            Err(Error::ScheduleMismatch { sum, expected }) => {
                assert!((sum - 0.7).abs() < 1e-12);
                assert!((expected - 1.0).abs() < 1e-12);
            }
            other => panic!("expected schedule mismatch, got {other:?}"),
        }
    }
}
