//! Classical Fisher information of linearized outcome distributions, the
//! spectral sensitivity bound, optimal probe/observable pairs, and the
//! estimators built from measured counts.

use crate::eig;
use crate::mat::{self, ComplexMatrix};
use crate::math;
use crate::povm::{self, Povm};
use crate::state::{Observable, QuantumState};
use crate::{Error, Result};
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Base probabilities below this are excluded from score sums.
pub const REGULARITY_EPS: f64 = 1e-12;

/// An excluded outcome whose slope magnitude exceeds this marks the
/// linearization as non-regular.
pub const REGULARITY_SLOPE_TOL: f64 = 1e-6;

/// First-order model of an outcome distribution near `b = 0`:
/// `P_α(b) ≈ p0_α + b·dp_α`.
#[derive(Debug, Clone)]
pub struct LinearizedDistribution {
    pub labels: Vec<String>,
    pub p0: Vec<f64>,
    pub dp: Vec<f64>,
}

impl LinearizedDistribution {
    /// Validates lengths, probability positivity and normalization (`1e-6`),
    /// and that slopes sum to zero within `1e-6` of the total slope weight.
    pub fn new(labels: Vec<String>, p0: Vec<f64>, dp: Vec<f64>) -> Result<Self> {
        if labels.len() != p0.len() || p0.len() != dp.len() {
            return Err(Error::DimensionMismatch {
                expected: p0.len(),
                got: dp.len(),
            });
        }
        if p0.is_empty() {
            return Err(Error::ZeroInformation);
        }
        let mut total = 0.0;
        for &p in &p0 {
            if p < povm::PROBABILITY_CLAMP {
                return Err(Error::InvalidPovm("negative outcome probability"));
            }
            total += p;
        }
        if math::abs(total - 1.0) > 1e-6 {
            return Err(Error::InvalidState("base probabilities do not sum to 1"));
        }
        let slope_sum: f64 = dp.iter().sum();
        let slope_scale: f64 = dp.iter().map(|x| math::abs(*x)).sum::<f64>().max(1.0);
        if math::abs(slope_sum) > 1e-6 * slope_scale {
            return Err(Error::InvalidState("slopes do not sum to zero"));
        }
        Ok(Self { labels, p0, dp })
    }

    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p0.is_empty()
    }

    /// Indices kept by the score sums (`p0 > ε`).
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.p0[i] > REGULARITY_EPS)
    }
}

fn index_labels(n: usize) -> Vec<String> {
    use alloc::string::ToString;
    (0..n).map(|i| i.to_string()).collect()
}

/// Summary of a classical Fisher analysis.
#[derive(Debug, Clone)]
pub struct FisherReport {
    /// Information per shot, `Σ dp²/p0` over included outcomes.
    pub fisher_per_shot: f64,
    pub n_shots: u64,
    /// `1/√(N·F)`; infinite when the distribution carries no information.
    pub delta_b_min: f64,
    /// Spectral bound `1/(τ√N(Λ−λ))` when the generator is supplied.
    pub quantum_bound: Option<f64>,
    /// False when an excluded outcome still carried first-order weight.
    pub regular: bool,
    /// Outcomes excluded for vanishing base probability.
    pub excluded: Vec<usize>,
}

/// Fisher information of a linearized distribution.
///
/// Outcomes with `p0 ≤ 1e-12` are excluded from the sum; if such an outcome
/// has `|dp| > 1e-6` the distribution is non-regular, which is an error in
/// strict mode and a report flag otherwise.
pub fn classical_fisher(
    dist: &LinearizedDistribution,
    n_shots: u64,
    strict: bool,
) -> Result<FisherReport> {
    if n_shots == 0 {
        return Err(Error::CapExceeded { name: "n_shots" });
    }
    let mut fisher = 0.0;
    let mut excluded = Vec::new();
    let mut regular = true;
    for i in 0..dist.len() {
        let (p, d) = (dist.p0[i], dist.dp[i]);
        if p <= REGULARITY_EPS {
            excluded.push(i);
            if math::abs(d) > REGULARITY_SLOPE_TOL {
                if strict {
                    return Err(Error::NonRegular { p0: p, dp: d });
                }
                regular = false;
            }
            continue;
        }
        fisher += d * d / p;
    }
    let delta_b_min = if fisher > 0.0 {
        1.0 / math::sqrt(n_shots as f64 * fisher)
    } else {
        f64::INFINITY
    };
    Ok(FisherReport {
        fisher_per_shot: fisher,
        n_shots,
        delta_b_min,
        quantum_bound: None,
        regular,
        excluded,
    })
}

impl FisherReport {
    /// Attaches the spectral bound for generator `h` over time `tau`.
    pub fn with_quantum_bound(mut self, h: &ComplexMatrix, tau: f64) -> Result<Self> {
        self.quantum_bound = Some(quantum_crb(h, tau, self.n_shots)?);
        Ok(self)
    }
}

/// Best achievable uncertainty over any probe, control, and measurement:
/// `δb = 1/(τ √N (Λ−λ))`.
pub fn quantum_crb(h: &ComplexMatrix, tau: f64, n_shots: u64) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::InvalidProtocol("nonpositive interrogation time"));
    }
    if n_shots == 0 {
        return Err(Error::CapExceeded { name: "n_shots" });
    }
    let spread = eig::spectral_spread(h)?;
    if spread < 1e-12 {
        return Err(Error::ZeroSpread);
    }
    Ok(1.0 / (tau * math::sqrt(n_shots as f64) * spread))
}

/// First-order response of a static measurement after evolution under
/// `e^{-ibHτ}`: `p0_α = tr(ρ E_α)`, `dp_α = iτ·tr(ρ[H, E_α])`.
pub fn linearize_povm(
    state: &QuantumState,
    h: &ComplexMatrix,
    povm: &Povm,
    tau: f64,
) -> Result<LinearizedDistribution> {
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: state.dim(),
        });
    }
    if !h.is_square() || h.rows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.rows(),
        });
    }
    if tau <= 0.0 {
        return Err(Error::InvalidProtocol("nonpositive interrogation time"));
    }
    let h = h.require_hermitian(eig::HERMITIAN_TOL)?;
    let scale = 1.0 + h.max_abs() * tau;
    let mut p0 = Vec::with_capacity(povm.len());
    let mut dp = Vec::with_capacity(povm.len());
    for e in povm.elements() {
        p0.push(povm::clamp_probability(state.trace_with(e).re)?);
        let comm = h.commutator(e);
        let z = state.trace_with(&comm) * C64::new(0.0, tau);
        debug_assert!(math::abs(z.im) < 1e-9 * scale);
        dp.push(z.re);
    }
    LinearizedDistribution::new(index_labels(povm.len()), p0, dp)
}

/// Sensitivity of reading out one observable after evolution under
/// `e^{-ibHτ}`.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    /// `δb = ΔO / (τ√N·|⟨[H,O]⟩|)`.
    pub delta_b: f64,
    /// Signal slope `|d⟨O⟩/db| = τ·|⟨[H,O]⟩|`.
    pub slope: f64,
    /// Noise `ΔO` at the working point.
    pub deviation: f64,
}

/// Error-propagation sensitivity of estimating the field from the mean of
/// `observable`.
pub fn sensitivity_from_observable(
    state: &QuantumState,
    h: &ComplexMatrix,
    observable: &Observable,
    tau: f64,
    n_shots: u64,
) -> Result<SensitivityReport> {
    if state.dim() != observable.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: observable.dim(),
        });
    }
    if !h.is_square() || h.rows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.rows(),
        });
    }
    if tau <= 0.0 || n_shots == 0 {
        return Err(Error::InvalidProtocol("nonpositive time or shot count"));
    }
    let h = h.require_hermitian(eig::HERMITIAN_TOL)?;
    let o = observable.matrix();
    let comm = h.commutator(o);
    let z = state.trace_with(&comm);
    // expectation of a commutator of Hermitian operators is purely imaginary
    debug_assert!(math::abs(z.re) < 1e-9 * (1.0 + h.max_abs() * o.max_abs()));
    let signal = math::abs(z.im);
    let tol = 1e-12 * (1.0 + h.max_abs() * o.max_abs());
    if signal < tol {
        return Err(Error::InsensitiveObservable);
    }
    let (_, var) = crate::state::expectation_and_variance(state, observable)?;
    let deviation = math::sqrt(var);
    Ok(SensitivityReport {
        delta_b: deviation / (tau * math::sqrt(n_shots as f64) * signal),
        slope: tau * signal,
        deviation,
    })
}

/// Probe and readout pair saturating the spectral bound: an equal
/// superposition of the extremal eigenvectors and the conjugate quadrature
/// between them.
pub fn optimal_configuration(h: &ComplexMatrix) -> Result<(QuantumState, Observable)> {
    let es = eig::eig_hermitian(h)?;
    let spread = es.spread();
    if spread < 1e-12 {
        return Err(Error::ZeroSpread);
    }
    let tol = 1e-9 * spread.max(1.0);
    let n = es.values.len();
    let low: Vec<usize> = (0..n).filter(|&k| es.values[k] - es.min() <= tol).collect();
    let high: Vec<usize> = (0..n).filter(|&k| es.max() - es.values[k] <= tol).collect();
    let vlo = pick_representative(&es.vectors, &low);
    let vhi = pick_representative(&es.vectors, &high);

    let mut psi: Vec<C64> = vlo
        .iter()
        .zip(&vhi)
        .map(|(a, b)| (a + b) / math::sqrt(2.0))
        .collect();
    psi = mat::vnormalize(&psi)?;

    // O = i|Λ⟩⟨λ| − i|λ⟩⟨Λ|
    let o = &mat::outer(&vhi, &vlo).scaled(C64::new(0.0, 1.0))
        + &mat::outer(&vlo, &vhi).scaled(C64::new(0.0, -1.0));
    Ok((
        QuantumState::Pure(psi),
        Observable::new(&o.symmetrized())?,
    ))
}

/// Deterministic representative of a (possibly degenerate) eigenvalue
/// cluster: the column whose largest-magnitude component sits at the lowest
/// index, phase-fixed so that component is real positive.
fn pick_representative(vectors: &ComplexMatrix, candidates: &[usize]) -> Vec<C64> {
    let mut best: Option<(usize, usize)> = None;
    let mut best_mag = -1.0;
    for &k in candidates {
        let col = vectors.column(k);
        let mut arg = 0;
        let mut mag = -1.0;
        for (i, z) in col.iter().enumerate() {
            let m = math::cabs(*z);
            if m > mag + 1e-12 {
                mag = m;
                arg = i;
            }
        }
        let better = match best {
            None => true,
            Some((prev_arg, _)) => arg < prev_arg || (arg == prev_arg && mag > best_mag + 1e-12),
        };
        if better {
            best = Some((arg, k));
            best_mag = mag;
        }
    }
    let (arg, k) = best.expect("non-empty candidate set");
    let col = vectors.column(k);
    let phase = col[arg] / math::cabs(col[arg]);
    col.iter().map(|z| z / phase).collect()
}

/// Observable read off from the linearized distribution: `Σ_α w_α E_α` with
/// score weights `w_α = dp_α/p0_α`. Averaging it and dividing by its slope
/// reproduces the maximum-likelihood estimate.
#[derive(Debug, Clone)]
pub struct DerivedOperator {
    pub observable: Observable,
    /// Outcome value assigned to each POVM outcome (zero when excluded).
    pub weights: Vec<f64>,
    pub excluded: Vec<usize>,
}

/// Builds the score-weighted readout operator for a measurement whose
/// linearization is `dist`.
pub fn derived_operator(povm: &Povm, dist: &LinearizedDistribution) -> Result<DerivedOperator> {
    if povm.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            expected: povm.len(),
            got: dist.len(),
        });
    }
    let dim = povm.dim();
    let mut weights = alloc::vec![0.0; dist.len()];
    let mut excluded = Vec::new();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let mut kept = 0;
    for i in 0..dist.len() {
        if dist.p0[i] <= REGULARITY_EPS {
            excluded.push(i);
            continue;
        }
        kept += 1;
        let w = dist.dp[i] / dist.p0[i];
        weights[i] = w;
        acc = &acc + &povm.element(i).scaled_re(w);
    }
    if kept == 0 {
        return Err(Error::AllOutcomesRare);
    }
    Ok(DerivedOperator {
        observable: Observable::new(&acc.symmetrized())?,
        weights,
        excluded,
    })
}

impl DerivedOperator {
    /// Field estimate from measured counts: average the operator's outcome
    /// values, subtract the working-point mean, divide by the slope.
    pub fn estimate(&self, dist: &LinearizedDistribution, counts: &[u64]) -> Result<f64> {
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
        for i in 0..counts.len() {
            let f = counts[i] as f64 / n as f64;
            mean += self.weights[i] * f;
            mean0 += self.weights[i] * dist.p0[i];
            slope += self.weights[i] * dist.dp[i];
        }
        if math::abs(slope) < 1e-300 {
            return Err(Error::ZeroInformation);
        }
        Ok((mean - mean0) / slope)
    }
}

/// Maximum-likelihood estimate of the field under the linearized model,
/// `b̂ = [Σ'_α dp_α (f_α − p0_α)/p0_α] / [Σ'_α dp_α²/p0_α]`, primed sums
/// skipping outcomes with `p0 ≤ ε`.
pub fn mle_estimate(dist: &LinearizedDistribution, counts: &[u64]) -> Result<f64> {
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
    let mut num = 0.0;
    let mut den = 0.0;
    for i in dist.included() {
        let f = counts[i] as f64 / n as f64;
        num += dist.dp[i] * (f - dist.p0[i]) / dist.p0[i];
        den += dist.dp[i] * dist.dp[i] / dist.p0[i];
    }
    if den < 1e-300 {
        return Err(Error::ZeroInformation);
    }
    Ok(num / den)
}

/// Finite-trial uncertainty floor `δb ≥ 1/√(K·F)` for `K` repetitions of an
/// experiment with per-trial information `F`.
pub fn finite_trial_bound(fisher_per_trial: f64, trials: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::CapExceeded { name: "trials" });
    }
    if fisher_per_trial <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / math::sqrt(trials as f64 * fisher_per_trial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{pauli_x, pauli_y, pauli_z};
    use crate::state::expectation_and_variance;

    fn ramsey_dist() -> LinearizedDistribution {
        // optimal two-level readout at τ = 1: p = (1 ± b)/2
        LinearizedDistribution::new(
            index_labels(2),
            alloc::vec![0.5, 0.5],
            alloc::vec![0.5, -0.5],
        )
        .unwrap()
    }

    #[test]
    fn fisher_of_optimal_two_level_readout() {
        let rep = classical_fisher(&ramsey_dist(), 100, false).unwrap();
        assert!((rep.fisher_per_shot - 1.0).abs() < 1e-12);
        assert!((rep.delta_b_min - 0.1).abs() < 1e-12);
        assert!(rep.regular && rep.excluded.is_empty());
    }

    #[test]
    fn crb_for_half_spin() {
        let h = pauli_z().scaled_re(0.5);
        let db = quantum_crb(&h, 1.0, 100).unwrap();
        assert!((db - 0.1).abs() < 1e-12);
        assert!(matches!(
            quantum_crb(&ComplexMatrix::identity(2), 1.0, 100),
            Err(Error::ZeroSpread)
        ));
    }

    #[test]
    fn linearization_matches_rotation_rate() {
        // |+⟩ probe under e^{-ib(σ_z/2)τ} has ⟨σ_y⟩ = sin(bτ), so the two
        // quadrature outcomes (ascending order: -1 first) slope by ∓τ/2
        let h = pauli_z().scaled_re(0.5);
        let plus = QuantumState::pure_from_unnormalized(&[C64::ONE, C64::ONE]).unwrap();
        let oy = Observable::new(&pauli_y()).unwrap();
        let (py, _) = Povm::projective_from_observable(&oy).unwrap();
        let tau = 1.3;
        let dist = linearize_povm(&plus, &h, &py, tau).unwrap();
        assert!((dist.p0[0] - 0.5).abs() < 1e-12);
        assert!((dist.dp[0] + tau / 2.0).abs() < 1e-12);
        assert!((dist.dp[1] - tau / 2.0).abs() < 1e-12);
    }

    #[test]
    fn strictness_on_non_regular_distributions() {
        let dist = LinearizedDistribution::new(
            index_labels(3),
            alloc::vec![0.5, 0.5, 0.0],
            alloc::vec![0.4, -0.395, -0.005],
        )
        .unwrap();
        let rep = classical_fisher(&dist, 10, false).unwrap();
        assert!(!rep.regular);
        assert_eq!(rep.excluded, alloc::vec![2]);
        assert!(matches!(
            classical_fisher(&dist, 10, true),
            Err(Error::NonRegular { .. })
        ));
    }

    #[test]
    fn sensitivity_for_quadrature_readout() {
        let h = pauli_z().scaled_re(0.5);
        let plus = QuantumState::pure_from_unnormalized(&[C64::ONE, C64::ONE]).unwrap();
        let oy = Observable::new(&pauli_y()).unwrap();
        let rep = sensitivity_from_observable(&plus, &h, &oy, 1.0, 1).unwrap();
        assert!((rep.delta_b - 1.0).abs() < 1e-12);
        assert!((rep.slope - 1.0).abs() < 1e-12);
        let oz = Observable::new(&pauli_z()).unwrap();
        assert!(matches!(
            sensitivity_from_observable(&plus, &h, &oz, 1.0, 1),
            Err(Error::InsensitiveObservable)
        ));
    }

    #[test]
    fn optimal_configuration_saturates_spectral_bound() {
        let h = ComplexMatrix::diag_real(&[0.9, -0.2, -1.1]);
        let (psi, o) = optimal_configuration(&h).unwrap();
        let rep = sensitivity_from_observable(&psi, &h, &o, 1.0, 1).unwrap();
        let crb = quantum_crb(&h, 1.0, 1).unwrap();
        assert!((rep.delta_b - crb).abs() < 1e-12 * crb.abs().max(1.0));
        let (_, var) = expectation_and_variance(&psi, &o).unwrap();
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_configuration_is_deterministic() {
        let h = &pauli_x().scaled_re(0.7) + &pauli_y().scaled_re(-0.4);
        let (a1, o1) = optimal_configuration(&h).unwrap();
        let (a2, o2) = optimal_configuration(&h).unwrap();
        assert!(o1.matrix().max_abs_diff(o2.matrix()) < 1e-15);
        let v1 = a1.as_pure().unwrap();
        let v2 = a2.as_pure().unwrap();
        for (x, y) in v1.iter().zip(v2) {
            assert!(math::cabs(x - y) < 1e-15);
        }
    }

    #[test]
    fn derived_operator_reproduces_mle() {
        let dist = LinearizedDistribution::new(
            index_labels(3),
            alloc::vec![0.2, 0.5, 0.3],
            alloc::vec![0.1, -0.3, 0.2],
        )
        .unwrap();
        let elements = alloc::vec![
            ComplexMatrix::diag_real(&[0.2, 0.0, 0.5]),
            ComplexMatrix::diag_real(&[0.5, 0.6, 0.2]),
            ComplexMatrix::diag_real(&[0.3, 0.4, 0.3]),
        ];
        let povm = Povm::new(elements).unwrap();
        let op = derived_operator(&povm, &dist).unwrap();
        let counts = alloc::vec![19u64, 52, 29];
        let via_op = op.estimate(&dist, &counts).unwrap();
        let via_mle = mle_estimate(&dist, &counts).unwrap();
        assert!((via_op - via_mle).abs() < 1e-12);
    }

    #[test]
    fn mle_is_unbiased_at_the_working_point() {
        let dist = ramsey_dist();
        let b = mle_estimate(&dist, &[50, 50]).unwrap();
        assert!(b.abs() < 1e-15);
        let b = mle_estimate(&dist, &[60, 40]).unwrap();
        assert!((b - 0.2).abs() < 1e-12);
    }

    #[test]
    fn finite_trial_floor() {
        assert!((finite_trial_bound(1.0, 100).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(finite_trial_bound(0.0, 10).unwrap(), f64::INFINITY);
        assert!(finite_trial_bound(1.0, 0).is_err());
    }

    #[test]
    fn rare_outcomes_have_zero_weight() {
        let dist = LinearizedDistribution::new(
            index_labels(2),
            alloc::vec![1.0, 0.0],
            alloc::vec![0.0, 0.0],
        )
        .unwrap();
        let povm = Povm::new(alloc::vec![
            ComplexMatrix::diag_real(&[1.0, 0.0]),
            ComplexMatrix::diag_real(&[0.0, 1.0]),
        ])
        .unwrap();
        let op = derived_operator(&povm, &dist).unwrap();
        assert_eq!(op.excluded, alloc::vec![1]);
        assert_eq!(op.weights[1], 0.0);
    }
}
