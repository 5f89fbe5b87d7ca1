//! Hermitian eigendecomposition via cyclic complex Jacobi rotations, plus the
//! spectral helpers built on it: spread, unitary propagators, and orthogonal
//! projectors onto spans.

use crate::mat::{self, ComplexMatrix};
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Tolerance for accepting an input matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with the matching unitary of eigenvectors
/// (column `k` belongs to `values[k]`).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    /// Reassembles `V diag(f(λ)) V†`.
    pub fn map(&self, mut f: impl FnMut(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let d = ComplexMatrix::diag(&self.values.iter().map(|&l| f(l)).collect::<Vec<_>>());
        let v = &self.vectors;
        assert_eq!(v.dim(), n);
        &(v * &d) * &v.dagger()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }
}

/// Diagonalizes a Hermitian matrix.
///
/// The input may deviate from exact Hermiticity by up to [`HERMITIAN_TOL`];
/// it is symmetrized before the iteration. Rotations run in a fixed cyclic
/// order, so results are deterministic for identical inputs.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigenSystem> {
    let a = m.require_hermitian(HERMITIAN_TOL)?;
    let n = a.dim();
    let mut a = a;
    let mut v = ComplexMatrix::identity(n);

    let scale = a.max_abs().max(1e-300);
    let target = (n as f64) * 1e-15 * scale;

    for _sweep in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(math::cabs(a[(p, q)]));
            }
        }
        if off <= target {
            return Ok(sorted_system(a, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let babs = math::cabs(beta);
                if babs <= target * 1e-2 {
                    continue;
                }
                // phase factor turning the pivot real, then a real rotation
                let w = beta / babs;
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                let tau = (gamma - alpha) / (2.0 * babs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + math::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;

                // J restricted to (p,q): [[c, s], [-s·w̄, c·w̄]]
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = w.conj() * (-s);
                let jqq = w.conj() * c;

                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * jpp + aiq * jqp;
                    a[(i, q)] = aip * jpq + aiq * jqq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = jpp.conj() * apj + jqp.conj() * aqj;
                    a[(q, j)] = jpq.conj() * apj + jqq.conj() * aqj;
                }
                a[(p, q)] = C64::ZERO;
                a[(q, p)] = C64::ZERO;

                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * jpp + viq * jqp;
                    v[(i, q)] = vip * jpq + viq * jqq;
                }
            }
        }
    }
    Err(Error::NoConvergence)
}

fn sorted_system(a: ComplexMatrix, v: ComplexMatrix) -> EigenSystem {
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    EigenSystem { values, vectors }
}

/// Difference between the largest and smallest eigenvalue.
pub fn spectral_spread(h: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.spread())
}

/// Unitary `e^{-i H t}` from the eigendecomposition of `h`.
pub fn propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let es = eig_hermitian(h)?;
    Ok(es.map(|l| math::cis(-l * t)))
}

/// Orthogonal projector onto the span of `vectors`, built by modified
/// Gram-Schmidt with one re-orthogonalization pass. Vectors whose residual
/// norm falls below `1e-10` are treated as linearly dependent and dropped.
/// Also returns the orthonormal basis that was kept.
pub fn projector_onto(vectors: &[Vec<C64>]) -> Result<(ComplexMatrix, Vec<Vec<C64>>)> {
    if vectors.is_empty() {
        return Err(Error::ZeroVector);
    }
    let dim = vectors[0].len();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = mat::vdot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let n = mat::vnorm(&w);
        if n < 1e-10 {
            continue;
        }
        basis.push(w.iter().map(|z| z / n).collect());
    }
    if basis.is_empty() {
        return Err(Error::ZeroVector);
    }
    let mut p = ComplexMatrix::zeros(dim, dim);
    for b in &basis {
        p = &p + &mat::outer(b, b);
    }
    Ok((p.symmetrized(), basis))
}
