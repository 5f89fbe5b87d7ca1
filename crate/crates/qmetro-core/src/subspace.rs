//! Compression of a pure-probe estimation problem onto the two-dimensional
//! subspace spanned by the probe and its image under the generator. The
//! compressed measurement keeps the base probabilities and first-order
//! responses of every outcome, so no information is lost.

use crate::eig;
use crate::mat::{self, ComplexMatrix};
use crate::povm::Povm;
use crate::state::QuantumState;
use crate::{Error, Result};
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Result of the reduction: the same experiment written in an orthonormal
/// basis of `span{|Ψ⟩, H|Ψ⟩}`.
#[derive(Debug, Clone)]
pub struct SubspaceReduction {
    pub state: QuantumState,
    pub hamiltonian: ComplexMatrix,
    pub povm: Povm,
    /// Ambient-space basis vectors; the first one is the probe itself.
    pub basis: Vec<Vec<C64>>,
}

/// Reduces a pure-probe problem to the probe/image plane.
pub fn reduce_to_subspace(
    state: &QuantumState,
    h: &ComplexMatrix,
    povm: &Povm,
) -> Result<SubspaceReduction> {
    let psi = state
        .as_pure()
        .ok_or(Error::InvalidState("pure probe required"))?;
    if !h.is_square() || h.rows() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: h.rows(),
        });
    }
    if povm.dim() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: povm.dim(),
        });
    }
    let h = h.require_hermitian(eig::HERMITIAN_TOL)?;
    let hpsi = h.apply(psi);
    let hnorm = mat::vnorm(&hpsi);
    if hnorm < 1e-12 {
        return Err(Error::EigenstateInput);
    }
    let scaled: Vec<C64> = hpsi.iter().map(|z| z / hnorm).collect();
    let (_, basis) = eig::projector_onto(&[psi.to_vec(), scaled])?;
    if basis.len() < 2 {
        return Err(Error::EigenstateInput);
    }

    let r = basis.len();
    let compress = |m: &ComplexMatrix| {
        ComplexMatrix::from_fn(r, r, |i, j| mat::vdot(&basis[i], &m.apply(&basis[j])))
    };
    let h2 = compress(&h).symmetrized();
    let elements: Vec<ComplexMatrix> = povm
        .elements()
        .iter()
        .map(|e| compress(e).symmetrized())
        .collect();
    let povm2 = Povm::new(elements)?;
    let coords: Vec<C64> = basis.iter().map(|b| mat::vdot(b, psi)).collect();
    Ok(SubspaceReduction {
        state: QuantumState::pure_from_unnormalized(&coords)?,
        hamiltonian: h2,
        povm: povm2,
        basis,
    })
}
