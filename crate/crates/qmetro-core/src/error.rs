//! Error type shared by every module in the crate.

use alloc::vec::Vec;
use thiserror::Error;

/// Unified error enum for construction, analysis, and simulation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input matrix deviates from its adjoint by more than the tolerance.
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    /// Matrix where square dimensions were required, or operand shape clash.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Eigensolver failed to reach the off-diagonal threshold.
    #[error("eigensolver did not converge")]
    NoConvergence,
    /// Vector with norm too small to normalize.
    #[error("zero vector")]
    ZeroVector,
    /// Matrix expected to be an orthogonal projector is not.
    #[error("matrix is not a projector (residual {residual:e})")]
    NotProjector { residual: f64 },
    /// Segment durations do not add up to the requested total time.
    #[error("schedule durations sum to {sum}, expected {expected}")]
    ScheduleMismatch { sum: f64, expected: f64 },
    /// Hamiltonian spectrum collapses to a point; no field sensitivity.
    #[error("hamiltonian has zero spectral spread")]
    ZeroSpread,
    /// Observable commutes with the evolution on this state; no signal.
    #[error("observable carries no first-order signal on this state")]
    InsensitiveObservable,
    /// State preparation in an eigenstate of the generator.
    #[error("state is an eigenstate of the hamiltonian")]
    EigenstateInput,
    /// Linearization is invalid: an outcome with vanishing base probability
    /// still carries first-order weight.
    #[error("distribution is not regular at b = 0 (p0 {p0:e}, dp {dp:e})")]
    NonRegular { p0: f64, dp: f64 },
    /// Analytic derivative and finite difference disagree.
    #[error("derivative cross-check failed (analytic {analytic:e}, finite difference {finite_diff:e})")]
    CrossCheckFailure { analytic: f64, finite_diff: f64 },
    /// Every outcome fell below the rare-outcome threshold.
    #[error("all outcomes fall below the rare-outcome threshold")]
    AllOutcomesRare,
    /// Fisher information is numerically zero; no estimate can be formed.
    #[error("distribution carries zero information")]
    ZeroInformation,
    /// Feedback policy has no entry (and no fallback) for a reachable prefix.
    #[error("policy gap at step {step} for history prefix {prefix:?}")]
    PolicyGap { step: usize, prefix: Vec<usize> },
    /// Protocol enumeration exceeded the history cap.
    #[error("history enumeration exceeded cap of {cap}")]
    Blowup { cap: usize },
    /// Parameter outside its supported range.
    #[error("parameter {name} outside supported range")]
    CapExceeded { name: &'static str },
    /// State failed a structural invariant.
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    /// POVM failed a structural invariant.
    #[error("invalid povm: {0}")]
    InvalidPovm(&'static str),
    /// Protocol description failed a structural invariant.
    #[error("invalid protocol: {0}")]
    InvalidProtocol(&'static str),
}
