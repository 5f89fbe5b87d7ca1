//! Positive operator-valued measures, their measurement (Kraus) operators,
//! outcome statistics, and projection onto subspaces.

use crate::eig::{self, HERMITIAN_TOL};
use crate::mat::{self, ComplexMatrix};
use crate::math;
use crate::state::{Observable, QuantumState};
use crate::{Error, Result};
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Completeness tolerance `‖Σ E_α − I‖_max`.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Negative probabilities above this floor are clamped to zero.
pub const PROBABILITY_CLAMP: f64 = -1e-12;

/// A discrete measurement: positive elements summing to the identity, with
/// optional explicit measurement operators `M_α` satisfying `E_α = M_α† M_α`.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
    measurements: Option<Vec<ComplexMatrix>>,
}

impl Povm {
    /// Validates elements: Hermitian within `1e-10` (symmetrized), positive
    /// semidefinite down to `-1e-10`, summing to the identity within `1e-9`.
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements"));
        }
        let dim = elements[0].rows();
        let mut cleaned = Vec::with_capacity(elements.len());
        for e in &elements {
            if e.rows() != dim || e.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.rows(),
                });
            }
            let h = e.require_hermitian(HERMITIAN_TOL)?;
            let es = eig::eig_hermitian(&h)?;
            if es.min() < -1e-10 {
                return Err(Error::InvalidPovm("element has a negative eigenvalue"));
            }
            cleaned.push(h);
        }
        check_completeness(&cleaned, dim)?;
        Ok(Self {
            elements: cleaned,
            measurements: None,
        })
    }

    /// Builds the POVM from measurement operators, `E_α = M_α† M_α`.
    pub fn from_measurements(measurements: Vec<ComplexMatrix>) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::InvalidPovm("no measurement operators"));
        }
        let dim = measurements[0].cols();
        let mut elements = Vec::with_capacity(measurements.len());
        for m in &measurements {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.rows(),
                });
            }
            elements.push((&m.dagger() * m).symmetrized());
        }
        check_completeness(&elements, dim)?;
        Ok(Self {
            elements,
            measurements: Some(measurements),
        })
    }

    /// Pairs externally supplied elements with measurement operators,
    /// verifying `‖M†M − E‖ ≤ 1e-9` for each pair.
    pub fn with_measurements(
        elements: Vec<ComplexMatrix>,
        measurements: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if elements.len() != measurements.len() {
            return Err(Error::InvalidPovm(
                "element and measurement counts differ",
            ));
        }
        let povm = Self::new(elements)?;
        for (e, m) in povm.elements.iter().zip(&measurements) {
            let mm = &m.dagger() * m;
            if mm.max_abs_diff(e) > 1e-9 {
                return Err(Error::InvalidPovm("measurement does not match element"));
            }
        }
        Ok(Self {
            elements: povm.elements,
            measurements: Some(measurements),
        })
    }

    /// Projective measurement of an observable; eigenvalues closer than
    /// `1e-9·max(1, spread)` share an outcome. Returns the POVM together with
    /// the outcome values.
    pub fn projective_from_observable(obs: &Observable) -> Result<(Self, Vec<f64>)> {
        let es = eig::eig_hermitian(obs.matrix())?;
        let tol = 1e-9 * es.spread().max(1.0);
        let n = es.values.len();
        let mut elements: Vec<ComplexMatrix> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut k = 0;
        while k < n {
            let mut proj = ComplexMatrix::zeros(n, n);
            let v0 = es.values[k];
            let mut sum = 0.0;
            let mut count = 0.0;
            while k < n && es.values[k] - v0 <= tol {
                let col = es.vectors.column(k);
                proj = &proj + &mat::outer(&col, &col);
                sum += es.values[k];
                count += 1.0;
                k += 1;
            }
            elements.push(proj.symmetrized());
            values.push(sum / count);
        }
        let measurements = elements.clone();
        let povm = Self::with_measurements(elements, measurements)?;
        Ok((povm, values))
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, alpha: usize) -> &ComplexMatrix {
        &self.elements[alpha]
    }

    /// Measurement operators: the stored ones, or the Hermitian square roots
    /// `E_α^{1/2}` when none were supplied.
    pub fn measurement_ops(&self) -> Result<Vec<ComplexMatrix>> {
        if let Some(ms) = &self.measurements {
            return Ok(ms.clone());
        }
        self.elements
            .iter()
            .map(|e| {
                let es = eig::eig_hermitian(e)?;
                Ok(es.map(|l| C64::new(math::sqrt(l.max(0.0)), 0.0)))
            })
            .collect()
    }

    /// Outcome distribution `P_α = tr(ρ E_α)`, clamping tiny negative values.
    pub fn outcome_probabilities(&self, state: &QuantumState) -> Result<Vec<f64>> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        self.elements
            .iter()
            .map(|e| clamp_probability(state.trace_with(e).re))
            .collect()
    }
}

/// Clamps values in `[-1e-12, 0)` to zero; more negative input is an error.
pub fn clamp_probability(p: f64) -> Result<f64> {
    if p < PROBABILITY_CLAMP {
        return Err(Error::InvalidPovm("negative outcome probability"));
    }
    Ok(p.max(0.0))
}

fn check_completeness(elements: &[ComplexMatrix], dim: usize) -> Result<()> {
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for e in elements {
        sum = &sum + e;
    }
    if sum.max_abs_diff(&ComplexMatrix::identity(dim)) > COMPLETENESS_TOL {
        return Err(Error::InvalidPovm("elements do not sum to the identity"));
    }
    Ok(())
}

/// POVM compressed onto a subspace by `E_α ↦ Π E_α Π`, kept in the ambient
/// space; the elements sum to `Π` rather than the identity.
#[derive(Debug, Clone)]
pub struct ProjectedPovm {
    pub elements: Vec<ComplexMatrix>,
    pub projector: ComplexMatrix,
}

impl ProjectedPovm {
    /// `‖Σ Π E_α Π − Π‖_max`.
    pub fn completeness_residual(&self) -> f64 {
        let dim = self.projector.dim();
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for e in &self.elements {
            sum = &sum + e;
        }
        sum.max_abs_diff(&self.projector)
    }

    /// Rewrites the compressed elements in an orthonormal basis of the
    /// subspace, giving a complete POVM of that dimension.
    pub fn restrict(&self, basis: &[Vec<C64>]) -> Result<Povm> {
        let r = basis.len();
        let elements = self
            .elements
            .iter()
            .map(|e| {
                ComplexMatrix::from_fn(r, r, |i, j| mat::vdot(&basis[i], &e.apply(&basis[j])))
                    .symmetrized()
            })
            .collect();
        Povm::new(elements)
    }
}

/// Compresses every element with the orthogonal projector `pi`, which must be
/// Hermitian within `1e-10` and idempotent within `1e-9`.
pub fn project_povm(povm: &Povm, pi: &ComplexMatrix) -> Result<ProjectedPovm> {
    let pi = pi.require_hermitian(HERMITIAN_TOL)?;
    let idem = (&pi * &pi).max_abs_diff(&pi);
    if idem > 1e-9 {
        return Err(Error::NotProjector { residual: idem });
    }
    if pi.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: pi.dim(),
        });
    }
    let elements = povm
        .elements()
        .iter()
        .map(|e| (&(&pi * e) * &pi).symmetrized())
        .collect();
    Ok(ProjectedPovm {
        elements,
        projector: pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::pauli_x;

    fn basis_povm(dim: usize) -> Povm {
        let elements = (0..dim)
            .map(|k| {
                let mut e = ComplexMatrix::zeros(dim, dim);
                e[(k, k)] = C64::ONE;
                e
            })
            .collect();
        Povm::new(elements).unwrap()
    }

    #[test]
    fn computational_basis_probabilities() {
        let povm = basis_povm(2);
        let s = QuantumState::pure_from_unnormalized(&[C64::new(1.0, 0.0), C64::new(0.0, 2.0)])
            .unwrap();
        let p = povm.outcome_probabilities(&s).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12);
        assert!((p[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn incomplete_or_negative_sets_rejected() {
        let half = ComplexMatrix::diag_real(&[0.5, 0.5]);
        assert!(Povm::new(alloc::vec![half.clone()]).is_err());
        let over = ComplexMatrix::diag_real(&[1.5, 1.5]);
        let neg = ComplexMatrix::diag_real(&[-0.5, -0.5]);
        assert!(Povm::new(alloc::vec![over, neg]).is_err());
    }

    #[test]
    fn measurement_ops_default_to_square_roots() {
        let povm = Povm::new(alloc::vec![
            ComplexMatrix::diag_real(&[0.25, 0.0]),
            ComplexMatrix::diag_real(&[0.75, 1.0]),
        ])
        .unwrap();
        let ms = povm.measurement_ops().unwrap();
        for (m, e) in ms.iter().zip(povm.elements()) {
            assert!((&m.dagger() * m).max_abs_diff(e) < 1e-12);
        }
        assert!((ms[0][(0, 0)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn from_measurements_builds_complete_set() {
        let m0 = pauli_x().scaled_re(1.0 / math::sqrt(2.0));
        let m1 = ComplexMatrix::identity(2).scaled_re(1.0 / math::sqrt(2.0));
        let povm = Povm::from_measurements(alloc::vec![m0, m1]).unwrap();
        assert_eq!(povm.len(), 2);
        let s = QuantumState::pure(alloc::vec![C64::ONE, C64::ZERO]).unwrap();
        let p = povm.outcome_probabilities(&s).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projective_from_observable_groups_degenerate_levels() {
        let obs = Observable::new(&ComplexMatrix::diag_real(&[1.0, 1.0, -1.0])).unwrap();
        let (povm, values) = Povm::projective_from_observable(&obs).unwrap();
        assert_eq!(povm.len(), 2);
        assert!((values[0] + 1.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        assert!((povm.element(1).trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_keeps_subspace_block() {
        let povm = basis_povm(3);
        let mut pi = ComplexMatrix::zeros(3, 3);
        pi[(0, 0)] = C64::ONE;
        pi[(1, 1)] = C64::ONE;
        let projected = project_povm(&povm, &pi).unwrap();
        assert!(projected.completeness_residual() < 1e-12);
        assert!(projected.elements[2].max_abs() < 1e-12);
        let basis = alloc::vec![
            alloc::vec![C64::ONE, C64::ZERO, C64::ZERO],
            alloc::vec![C64::ZERO, C64::ONE, C64::ZERO],
        ];
        let restricted = projected.restrict(&basis).unwrap();
        assert_eq!(restricted.dim(), 2);
    }

    #[test]
    fn identity_projection_is_noop() {
        let povm = basis_povm(3);
        let projected = project_povm(&povm, &ComplexMatrix::identity(3)).unwrap();
        for (a, b) in projected.elements.iter().zip(povm.elements()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn non_projector_rejected() {
        let povm = basis_povm(2);
        let not_proj = ComplexMatrix::diag_real(&[0.5, 0.5]);
        assert!(matches!(
            project_povm(&povm, &not_proj),
            Err(Error::NotProjector { .. })
        ));
    }

    #[test]
    fn clamp_rules() {
        assert_eq!(clamp_probability(-5e-13).unwrap(), 0.0);
        assert!(clamp_probability(-1e-9).is_err());
        assert_eq!(clamp_probability(0.3).unwrap(), 0.3);
    }
}
