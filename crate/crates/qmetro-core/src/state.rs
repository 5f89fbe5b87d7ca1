//! Quantum states (pure amplitude vectors or density matrices with an
//! optional stored mixture decomposition) and Hermitian observables.

use crate::eig::{self, HERMITIAN_TOL};
use crate::mat::{self, ComplexMatrix};
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// State of a `d`-dimensional probe.
#[derive(Debug, Clone)]
pub enum QuantumState {
    /// Unit-norm amplitude vector.
    Pure(Vec<C64>),
    /// Density matrix; `decomposition` carries the pure-state mixture the
    /// state was assembled from, when one was given.
    Mixed {
        rho: ComplexMatrix,
        decomposition: Option<Vec<(f64, Vec<C64>)>>,
    },
}

impl QuantumState {
    /// Pure state from amplitudes already normalized to `1e-9`.
    pub fn pure(amplitudes: Vec<C64>) -> Result<Self> {
        let n = mat::vnorm(&amplitudes);
        if math::abs(n - 1.0) > 1e-9 {
            return Err(Error::InvalidState("amplitudes are not unit norm"));
        }
        Ok(Self::Pure(
            amplitudes.iter().map(|z| z / n).collect(),
        ))
    }

    /// Pure state from any nonzero vector, normalizing it.
    pub fn pure_from_unnormalized(amplitudes: &[C64]) -> Result<Self> {
        Ok(Self::Pure(mat::vnormalize(amplitudes)?))
    }

    /// Mixed state from a density matrix: Hermitian within `1e-10`
    /// (symmetrized), unit trace within `1e-9`, eigenvalues above `-1e-10`.
    pub fn mixed(rho: &ComplexMatrix) -> Result<Self> {
        let rho = rho.require_hermitian(HERMITIAN_TOL)?;
        let tr = rho.trace().re;
        if math::abs(tr - 1.0) > 1e-9 {
            return Err(Error::InvalidState("density matrix trace is not 1"));
        }
        let es = eig::eig_hermitian(&rho)?;
        if es.min() < -1e-10 {
            return Err(Error::InvalidState("density matrix has negative weight"));
        }
        Ok(Self::Mixed {
            rho: rho.scaled_re(1.0 / tr),
            decomposition: None,
        })
    }

    /// Mixed state assembled from `(weight, pure vector)` pairs; the pairs are
    /// stored and used as the canonical decomposition.
    pub fn mixed_from_decomposition(parts: Vec<(f64, Vec<C64>)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidState("empty decomposition"));
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if math::abs(total - 1.0) > 1e-9 {
            return Err(Error::InvalidState("mixture weights do not sum to 1"));
        }
        let dim = parts[0].1.len();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        let mut stored = Vec::with_capacity(parts.len());
        for (w, v) in parts {
            if w < -1e-12 {
                return Err(Error::InvalidState("negative mixture weight"));
            }
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            let v = mat::vnormalize(&v)?;
            rho = &rho + &mat::outer(&v, &v).scaled_re(w / total);
            stored.push((w / total, v));
        }
        Ok(Self::Mixed {
            rho: rho.symmetrized(),
            decomposition: Some(stored),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed { rho, .. } => rho.dim(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&[C64]> {
        match self {
            Self::Pure(v) => Some(v),
            Self::Mixed { .. } => None,
        }
    }

    /// Density matrix representation.
    pub fn density(&self) -> ComplexMatrix {
        match self {
            Self::Pure(v) => mat::outer(v, v),
            Self::Mixed { rho, .. } => rho.clone(),
        }
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        let rho = self.density();
        (&rho * &rho).trace().re
    }

    /// Pure-state mixture representing this state: the stored decomposition
    /// when present, a single term for pure states, and otherwise the
    /// eigendecomposition of ρ keeping weights above `1e-12`.
    pub fn canonical_decomposition(&self) -> Result<Vec<(f64, Vec<C64>)>> {
        match self {
            Self::Pure(v) => Ok(alloc::vec![(1.0, v.clone())]),
            Self::Mixed {
                decomposition: Some(d),
                ..
            } => Ok(d.clone()),
            Self::Mixed { rho, .. } => {
                let es = eig::eig_hermitian(rho)?;
                let mut parts = Vec::new();
                for (k, &w) in es.values.iter().enumerate() {
                    if w > 1e-12 {
                        parts.push((w, es.vectors.column(k)));
                    }
                }
                if parts.is_empty() {
                    return Err(Error::InvalidState("density matrix has no weight"));
                }
                Ok(parts)
            }
        }
    }

    /// `tr(ρ A)` for an arbitrary (not necessarily Hermitian) matrix.
    pub fn trace_with(&self, a: &ComplexMatrix) -> C64 {
        match self {
            Self::Pure(v) => mat::vdot(v, &a.apply(v)),
            Self::Mixed { rho, .. } => (rho * a).trace(),
        }
    }
}

/// Hermitian observable; construction symmetrizes within tolerance `1e-10`.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            matrix: m.require_hermitian(HERMITIAN_TOL)?,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Mean and variance of an observable in a state.
pub fn expectation_and_variance(state: &QuantumState, obs: &Observable) -> Result<(f64, f64)> {
    if state.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: obs.dim(),
        });
    }
    let o = obs.matrix();
    let mean_c = state.trace_with(o);
    debug_assert!(math::abs(mean_c.im) < 1e-10 * (1.0 + math::cabs(mean_c)));
    let mean = mean_c.re;
    let second = state.trace_with(&(o * o)).re;
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Evolves a state under `e^{-i b H τ}`.
///
/// A stored mixture decomposition is carried through (each component evolves
/// unitarily), so convexity structure survives evolution.
pub fn evolve(state: &QuantumState, h: &ComplexMatrix, b: f64, tau: f64) -> Result<QuantumState> {
    if !h.is_square() || h.rows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.rows(),
        });
    }
    let u = eig::propagator(h, b * tau)?;
    Ok(apply_unitary(state, &u))
}

/// Applies a unitary map to a state, preserving purity and any stored
/// decomposition.
pub fn apply_unitary(state: &QuantumState, u: &ComplexMatrix) -> QuantumState {
    match state {
        QuantumState::Pure(v) => QuantumState::Pure(u.apply(v)),
        QuantumState::Mixed { rho, decomposition } => QuantumState::Mixed {
            rho: (&(u * rho) * &u.dagger()).symmetrized(),
            decomposition: decomposition.as_ref().map(|parts| {
                parts
                    .iter()
                    .map(|(w, v)| (*w, u.apply(v)))
                    .collect()
            }),
        },
    }
}

/// Tensor product of two states, the left factor on the slow index.
pub fn tensor(a: &QuantumState, b: &QuantumState) -> QuantumState {
    match (a, b) {
        (QuantumState::Pure(va), QuantumState::Pure(vb)) => {
            QuantumState::Pure(mat::vkron(va, vb))
        }
        _ => {
            let rho = a.density().kron(&b.density());
            let decomposition = match (a, b) {
                (QuantumState::Mixed { decomposition: Some(da), .. }, _) => {
                    b.canonical_decomposition().ok().map(|db| product_parts(da, &db))
                }
                (_, QuantumState::Mixed { decomposition: Some(db), .. }) => {
                    a.canonical_decomposition().ok().map(|da| product_parts(&da, db))
                }
                _ => None,
            };
            QuantumState::Mixed { rho, decomposition }
        }
    }
}

fn product_parts(da: &[(f64, Vec<C64>)], db: &[(f64, Vec<C64>)]) -> Vec<(f64, Vec<C64>)> {
    let mut out = Vec::with_capacity(da.len() * db.len());
    for (wa, va) in da {
        for (wb, vb) in db {
            out.push((wa * wb, mat::vkron(va, vb)));
        }
    }
    out
}

/// Partial trace of a bipartite density matrix with factor dimensions
/// `(dim_a, dim_b)`; keeps the first factor when `keep_first` is set.
pub fn partial_trace(
    rho: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    keep_first: bool,
) -> Result<ComplexMatrix> {
    if rho.dim() != dim_a * dim_b {
        return Err(Error::DimensionMismatch {
            expected: dim_a * dim_b,
            got: rho.dim(),
        });
    }
    let out = if keep_first {
        ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|s| rho[(i * dim_b + s, j * dim_b + s)]).sum()
        })
    } else {
        ComplexMatrix::from_fn(dim_b, dim_b, |k, l| {
            (0..dim_a).map(|s| rho[(s * dim_b + k, s * dim_b + l)]).sum()
        })
    };
    Ok(out)
}
