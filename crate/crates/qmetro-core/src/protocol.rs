//! Adaptive measurement protocols: sequences of timed evolutions,
//! history-conditioned unitaries and POVMs, and multi-round compositions with
//! classical communication between rounds.
//!
//! History probabilities are enumerated exactly. First-order responses use a
//! central finite difference in the field as the primary value, cross-checked
//! against the exact directional derivative of each segment exponential.

use crate::control::ControlSchedule;
use crate::eig;
use crate::fisher::{classical_fisher, FisherReport, LinearizedDistribution};
use crate::mat::ComplexMatrix;
use crate::math;
use crate::povm::{self, Povm};
use crate::state::{self, QuantumState};
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64 as C64;

/// Hard ceiling on enumerated histories.
pub const HISTORY_CAP: usize = 1_000_000;

/// Histories with base probability at or below this are marked pruned.
pub const PRUNE_EPS: f64 = 1e-12;

/// Relative agreement required between the finite-difference and analytic
/// derivatives.
pub const CROSSCHECK_REL_TOL: f64 = 1e-4;

/// Measurement choice for one history prefix: an optional conditioning
/// unitary applied after the step's evolution, then a POVM.
#[derive(Debug, Clone)]
pub struct PolicyAction {
    pub povm: Povm,
    pub unitary: Option<ComplexMatrix>,
}

impl PolicyAction {
    pub fn measure(povm: Povm) -> Self {
        Self {
            povm,
            unitary: None,
        }
    }

    pub fn rotate_then_measure(unitary: ComplexMatrix, povm: Povm) -> Self {
        Self {
            povm,
            unitary: Some(unitary),
        }
    }
}

/// Map from outcome-history prefixes to actions, with an optional wildcard.
#[derive(Debug, Clone, Default)]
pub struct StepPolicy {
    pub entries: Vec<(Vec<usize>, PolicyAction)>,
    pub fallback: Option<PolicyAction>,
}

impl StepPolicy {
    /// Policy that ignores the history.
    pub fn uniform(action: PolicyAction) -> Self {
        Self {
            entries: Vec::new(),
            fallback: Some(action),
        }
    }

    pub fn lookup(&self, prefix: &[usize]) -> Option<&PolicyAction> {
        self.entries
            .iter()
            .find(|(key, _)| key == prefix)
            .map(|(_, a)| a)
            .or(self.fallback.as_ref())
    }

    fn actions(&self) -> impl Iterator<Item = &PolicyAction> {
        self.entries
            .iter()
            .map(|(_, a)| a)
            .chain(self.fallback.iter())
    }
}

/// One protocol interval: evolve for `duration` under `b·H + H₀(t)`, then
/// apply the policy's conditional rotation and measure its POVM.
#[derive(Debug, Clone)]
pub struct FeedbackStep {
    pub duration: f64,
    pub control: ControlSchedule,
    pub policy: StepPolicy,
}

/// A single interrogation of duration `Σ durations`: prepared state plus a
/// sequence of steps.
#[derive(Debug, Clone)]
pub struct FeedbackRound {
    pub initial: QuantumState,
    pub steps: Vec<FeedbackStep>,
}

/// Chooses the next round's interrogation from the outcomes of all earlier
/// rounds.
#[derive(Debug, Clone, Default)]
pub struct RoundPolicy {
    pub entries: Vec<(Vec<Vec<usize>>, FeedbackRound)>,
    pub fallback: Option<FeedbackRound>,
}

impl RoundPolicy {
    pub fn uniform(round: FeedbackRound) -> Self {
        Self {
            entries: Vec::new(),
            fallback: Some(round),
        }
    }

    /// Returns a stable identifier with the chosen round, for caching.
    fn lookup(&self, prefix: &[Vec<usize>]) -> Option<(usize, &FeedbackRound)> {
        for (i, (key, round)) in self.entries.iter().enumerate() {
            if key.as_slice() == prefix {
                return Some((i, round));
            }
        }
        self.fallback.as_ref().map(|r| (usize::MAX, r))
    }

    fn rounds(&self) -> impl Iterator<Item = &FeedbackRound> {
        self.entries
            .iter()
            .map(|(_, r)| r)
            .chain(self.fallback.iter())
    }
}

/// Protocol family.
#[derive(Debug, Clone)]
pub enum ProtocolVariant {
    /// One interrogation with in-round feedback.
    Feedback(FeedbackRound),
    /// Sequential re-prepared interrogations with between-round feedback;
    /// one entry per round.
    MultiRound(Vec<RoundPolicy>),
}

/// Complete description of an estimation protocol at working point `b = 0`:
/// the sensing generator, the time each round takes, and the variant.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub hamiltonian: ComplexMatrix,
    pub round_time: f64,
    pub variant: ProtocolVariant,
}

impl ProtocolSpec {
    /// Prepare, evolve for `tau`, measure once.
    pub fn simple(
        state: QuantumState,
        h: ComplexMatrix,
        povm: Povm,
        tau: f64,
    ) -> Result<Self> {
        Self::controlled(state, h, ControlSchedule::none(), povm, tau)
    }

    /// Prepare, evolve for `tau` under the control schedule, measure once.
    pub fn controlled(
        state: QuantumState,
        h: ComplexMatrix,
        control: ControlSchedule,
        povm: Povm,
        tau: f64,
    ) -> Result<Self> {
        let round = FeedbackRound {
            initial: state,
            steps: alloc::vec![FeedbackStep {
                duration: tau,
                control,
                policy: StepPolicy::uniform(PolicyAction::measure(povm)),
            }],
        };
        Self::feedback(h, tau, round)
    }

    pub fn feedback(h: ComplexMatrix, tau: f64, round: FeedbackRound) -> Result<Self> {
        let spec = Self {
            hamiltonian: h,
            round_time: tau,
            variant: ProtocolVariant::Feedback(round),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn multi_round(h: ComplexMatrix, tau: f64, rounds: Vec<RoundPolicy>) -> Result<Self> {
        let spec = Self {
            hamiltonian: h,
            round_time: tau,
            variant: ProtocolVariant::MultiRound(rounds),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    /// Number of interrogation rounds.
    pub fn rounds(&self) -> usize {
        match &self.variant {
            ProtocolVariant::Feedback(_) => 1,
            ProtocolVariant::MultiRound(r) => r.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !self.hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.hamiltonian.rows(),
                got: self.hamiltonian.cols(),
            });
        }
        self.hamiltonian.require_hermitian(eig::HERMITIAN_TOL)?;
        if self.round_time <= 0.0 {
            return Err(Error::InvalidProtocol("nonpositive round time"));
        }
        match &self.variant {
            ProtocolVariant::Feedback(round) => validate_round(round, dim, self.round_time),
            ProtocolVariant::MultiRound(rounds) => {
                if rounds.is_empty() {
                    return Err(Error::InvalidProtocol("no rounds"));
                }
                for policy in rounds {
                    if policy.fallback.is_none() && policy.entries.is_empty() {
                        return Err(Error::InvalidProtocol("empty round policy"));
                    }
                    for round in policy.rounds() {
                        validate_round(round, dim, self.round_time)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Exact outcome distribution at field `b`, linearized at the working
    /// point.
    pub fn distribution(&self, b: f64) -> Result<OutcomeDistribution> {
        match &self.variant {
            ProtocolVariant::Feedback(_) => run_feedback_distribution(self, b),
            ProtocolVariant::MultiRound(_) => run_multiround_distribution(self, b),
        }
    }
}

fn validate_round(round: &FeedbackRound, dim: usize, tau: f64) -> Result<()> {
    if round.initial.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: round.initial.dim(),
        });
    }
    if round.steps.is_empty() {
        return Err(Error::InvalidProtocol("round has no steps"));
    }
    let total: f64 = round.steps.iter().map(|s| s.duration).sum();
    if math::abs(total - tau) > 1e-9 {
        return Err(Error::ScheduleMismatch {
            sum: total,
            expected: tau,
        });
    }
    for step in &round.steps {
        if step.duration < 0.0 {
            return Err(Error::InvalidProtocol("negative step duration"));
        }
        step.control.validate(dim, step.duration)?;
        if step.policy.fallback.is_none() && step.policy.entries.is_empty() {
            return Err(Error::InvalidProtocol("empty step policy"));
        }
        for action in step.policy.actions() {
            if action.povm.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: action.povm.dim(),
                });
            }
            if let Some(u) = &action.unitary {
                if !u.is_square() || u.rows() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: u.rows(),
                    });
                }
                let res = (&u.dagger() * u).max_abs_diff(&ComplexMatrix::identity(dim));
                if res > 1e-9 {
                    return Err(Error::InvalidProtocol("conditional rotation not unitary"));
                }
            }
        }
    }
    Ok(())
}

/// Outcome history of one record: step outcomes of a single round, or the
/// per-round histories of a multi-round run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HistoryLabel {
    Single(Vec<usize>),
    Rounds(Vec<Vec<usize>>),
}

impl core::fmt::Display for HistoryLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        fn join(f: &mut core::fmt::Formatter<'_>, h: &[usize]) -> core::fmt::Result {
            for (i, o) in h.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{o}")?;
            }
            Ok(())
        }
        match self {
            Self::Single(h) => join(f, h),
            Self::Rounds(rs) => {
                for (i, h) in rs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    join(f, h)?;
                }
                Ok(())
            }
        }
    }
}

/// One enumerated history with its probability at the requested field and
/// its linearization at the working point.
#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub history: HistoryLabel,
    /// Probability at the requested field value.
    pub probability: f64,
    /// Probability at the working point.
    pub p0: f64,
    /// Central finite-difference slope (primary value).
    pub dp: f64,
    /// Exact directional derivative (cross-check value).
    pub dp_analytic: f64,
    /// Base probability at or below the pruning threshold.
    pub pruned: bool,
}

/// Exact distribution over outcome histories.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub field: f64,
    pub records: Vec<OutcomeRecord>,
}

impl OutcomeDistribution {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First-order model over all histories; vanishing-probability records
    /// are excluded downstream by the score sums.
    pub fn linearized(&self) -> Result<LinearizedDistribution> {
        let labels: Vec<String> = self
            .records
            .iter()
            .map(|r| alloc::format!("{}", r.history))
            .collect();
        let p0 = self.records.iter().map(|r| r.p0).collect();
        let dp = self.records.iter().map(|r| r.dp).collect();
        LinearizedDistribution::new(labels, p0, dp)
    }

    /// Probabilities at the requested field, in record order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.probability).collect()
    }

    /// Fisher report of the linearized model.
    pub fn fisher(&self, n_shots: u64, strict: bool) -> Result<FisherReport> {
        classical_fisher(&self.linearized()?, n_shots, strict)
    }
}

/// Finite-difference step `1e-6·[τ·(Λ−λ)]⁻¹`, guarded for tiny spreads.
pub fn fd_step(tau: f64, spread: f64) -> f64 {
    1e-6 / (tau * spread).max(1e-3)
}

struct EvalGrid {
    b: f64,
    fd: f64,
}

/// Step propagators at the four evaluation fields plus the exact derivative
/// of the composed step propagator at the working point.
struct StepOps {
    s_b: ComplexMatrix,
    s_0: ComplexMatrix,
    s_p: ComplexMatrix,
    s_m: ComplexMatrix,
    ds_0: ComplexMatrix,
}

fn compose_step(
    h: &ComplexMatrix,
    step: &FeedbackStep,
    grid: &EvalGrid,
) -> Result<StepOps> {
    let dim = h.dim();
    let mut ops = StepOps {
        s_b: ComplexMatrix::identity(dim),
        s_0: ComplexMatrix::identity(dim),
        s_p: ComplexMatrix::identity(dim),
        s_m: ComplexMatrix::identity(dim),
        ds_0: ComplexMatrix::zeros(dim, dim),
    };
    let segments: Vec<(ComplexMatrix, f64)> = if step.control.is_none() {
        alloc::vec![(ComplexMatrix::zeros(dim, dim), step.duration)]
    } else {
        step.control
            .segments
            .iter()
            .map(|s| (s.h0.clone(), s.duration))
            .collect()
    };
    for (h0, dt) in segments {
        if dt == 0.0 {
            continue;
        }
        let es0 = eig::eig_hermitian(&h0)?;
        let e0 = es0.map(|l| math::cis(-l * dt));
        // derivative of e^{-i dt (βH + H₀)} in β at 0, in the H₀ eigenbasis:
        // (-i dt)·Ĥ_{jk}·e^{-i dt λ_k}·φ((-i dt)(λ_j - λ_k))
        let hh = &(&es0.vectors.dagger() * h) * &es0.vectors;
        let n = es0.values.len();
        let mut kernel = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let adiff = C64::new(0.0, -dt) * (es0.values[j] - es0.values[k]);
                kernel[(j, k)] = hh[(j, k)]
                    * C64::new(0.0, -dt)
                    * math::cis(-dt * es0.values[k])
                    * math::phi1(adiff);
            }
        }
        let d_seg = &(&es0.vectors * &kernel) * &es0.vectors.dagger();

        let prop_at = |beta: f64| -> Result<ComplexMatrix> {
            let gen = &h.scaled_re(beta) + &h0;
            eig::propagator(&gen, dt)
        };
        let e_b = prop_at(grid.b)?;
        let e_p = prop_at(grid.fd)?;
        let e_m = prop_at(-grid.fd)?;

        ops.ds_0 = &(&e0 * &ops.ds_0) + &(&d_seg * &ops.s_0);
        ops.s_0 = &e0 * &ops.s_0;
        ops.s_b = &e_b * &ops.s_b;
        ops.s_p = &e_p * &ops.s_p;
        ops.s_m = &e_m * &ops.s_m;
    }
    Ok(ops)
}

/// Running factor products along one history path.
#[derive(Clone)]
struct PathOps {
    r_b: ComplexMatrix,
    r_0: ComplexMatrix,
    r_p: ComplexMatrix,
    r_m: ComplexMatrix,
    dr_0: ComplexMatrix,
}

impl PathOps {
    fn identity(dim: usize) -> Self {
        Self {
            r_b: ComplexMatrix::identity(dim),
            r_0: ComplexMatrix::identity(dim),
            r_p: ComplexMatrix::identity(dim),
            r_m: ComplexMatrix::identity(dim),
            dr_0: ComplexMatrix::zeros(dim, dim),
        }
    }
}

/// `tr(A ρ B†)` without forming the triple product.
fn trace_sandwich(a: &ComplexMatrix, rho: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let left = a * rho;
    let mut acc = C64::ZERO;
    for i in 0..left.rows() {
        for j in 0..left.cols() {
            acc += left[(i, j)] * b[(i, j)].conj();
        }
    }
    acc
}

struct RoundRecord {
    history: Vec<usize>,
    p_b: f64,
    p_0: f64,
    p_p: f64,
    p_m: f64,
    dp_an: f64,
}

struct RoundWalker<'a> {
    steps: &'a [FeedbackStep],
    ops: Vec<StepOps>,
    rho: ComplexMatrix,
    cap: usize,
    out: Vec<RoundRecord>,
}

impl<'a> RoundWalker<'a> {
    fn walk(&mut self, depth: usize, hist: &mut Vec<usize>, path: PathOps) -> Result<()> {
        if depth == self.steps.len() {
            if self.out.len() >= self.cap {
                return Err(Error::Blowup { cap: self.cap });
            }
            let p_b = trace_sandwich(&path.r_b, &self.rho, &path.r_b).re;
            let p_0 = trace_sandwich(&path.r_0, &self.rho, &path.r_0).re;
            let p_p = trace_sandwich(&path.r_p, &self.rho, &path.r_p).re;
            let p_m = trace_sandwich(&path.r_m, &self.rho, &path.r_m).re;
            let dp_an = 2.0 * trace_sandwich(&path.dr_0, &self.rho, &path.r_0).re;
            self.out.push(RoundRecord {
                history: hist.clone(),
                p_b,
                p_0,
                p_p,
                p_m,
                dp_an,
            });
            return Ok(());
        }
        let step = &self.steps[depth];
        let action = step
            .policy
            .lookup(hist)
            .ok_or_else(|| Error::PolicyGap {
                step: depth,
                prefix: hist.clone(),
            })?
            .clone();
        let sops = &self.ops[depth];
        // conditional rotation folds into the step propagator
        let (t_b, t_0, t_p, t_m, dt_0) = match &action.unitary {
            Some(u) => (
                u * &sops.s_b,
                u * &sops.s_0,
                u * &sops.s_p,
                u * &sops.s_m,
                u * &sops.ds_0,
            ),
            None => (
                sops.s_b.clone(),
                sops.s_0.clone(),
                sops.s_p.clone(),
                sops.s_m.clone(),
                sops.ds_0.clone(),
            ),
        };
        let measurements = action.povm.measurement_ops()?;
        for (alpha, m) in measurements.iter().enumerate() {
            let next = PathOps {
                r_b: &(m * &t_b) * &path.r_b,
                r_0: &(m * &t_0) * &path.r_0,
                r_p: &(m * &t_p) * &path.r_p,
                r_m: &(m * &t_m) * &path.r_m,
                dr_0: &(&(m * &dt_0) * &path.r_0) + &(&(m * &t_0) * &path.dr_0),
            };
            hist.push(alpha);
            self.walk(depth + 1, hist, next)?;
            hist.pop();
        }
        Ok(())
    }
}

fn enumerate_round(
    h: &ComplexMatrix,
    round: &FeedbackRound,
    grid: &EvalGrid,
    cap: usize,
) -> Result<Vec<RoundRecord>> {
    let ops = round
        .steps
        .iter()
        .map(|s| compose_step(h, s, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut walker = RoundWalker {
        steps: &round.steps,
        ops,
        rho: round.initial.density(),
        cap,
        out: Vec::new(),
    };
    let dim = h.dim();
    let mut hist = Vec::new();
    walker.walk(0, &mut hist, PathOps::identity(dim))?;
    Ok(walker.out)
}

fn finalize_records(
    raw: Vec<(HistoryLabel, f64, f64, f64, f64, f64)>,
    grid: &EvalGrid,
    scale: f64,
) -> Result<OutcomeDistribution> {
    let mut records = Vec::with_capacity(raw.len());
    let floor = 1e-8 * (1.0 + scale);
    for (history, p_b, p_0, p_p, p_m, dp_an) in raw {
        let probability = povm::clamp_probability(p_b)?;
        let p0 = povm::clamp_probability(p_0)?;
        let dp = (p_p - p_m) / (2.0 * grid.fd);
        let gap = math::abs(dp - dp_an);
        if gap > CROSSCHECK_REL_TOL * math::abs(dp).max(math::abs(dp_an)) + floor {
            return Err(Error::CrossCheckFailure {
                analytic: dp_an,
                finite_diff: dp,
            });
        }
        records.push(OutcomeRecord {
            history,
            probability,
            p0,
            dp,
            dp_analytic: dp_an,
            pruned: p0 <= PRUNE_EPS,
        });
    }
    Ok(OutcomeDistribution {
        field: grid.b,
        records,
    })
}

/// Enumerates the history distribution of a single-round feedback protocol at
/// field `b`.
pub fn run_feedback_distribution(spec: &ProtocolSpec, b: f64) -> Result<OutcomeDistribution> {
    let round = match &spec.variant {
        ProtocolVariant::Feedback(r) => r,
        ProtocolVariant::MultiRound(_) => {
            return Err(Error::InvalidProtocol("single-round variant required"))
        }
    };
    spec.validate()?;
    let h = spec.hamiltonian.symmetrized();
    let spread = eig::spectral_spread(&h)?;
    let grid = EvalGrid {
        b,
        fd: fd_step(spec.round_time, spread),
    };
    let raw = enumerate_round(&h, round, &grid, HISTORY_CAP)?;
    let tagged = raw
        .into_iter()
        .map(|r| {
            (
                HistoryLabel::Single(r.history),
                r.p_b,
                r.p_0,
                r.p_p,
                r.p_m,
                r.dp_an,
            )
        })
        .collect();
    finalize_records(tagged, &grid, spec.round_time * spread)
}

/// Enumerates the joint history distribution of a multi-round protocol at
/// field `b`. Rounds are re-prepared interrogations; the joint probability of
/// a history chain is the product of its per-round conditionals.
pub fn run_multiround_distribution(spec: &ProtocolSpec, b: f64) -> Result<OutcomeDistribution> {
    let rounds = match &spec.variant {
        ProtocolVariant::MultiRound(r) => r,
        ProtocolVariant::Feedback(_) => {
            return Err(Error::InvalidProtocol("multi-round variant required"))
        }
    };
    spec.validate()?;
    let h = spec.hamiltonian.symmetrized();
    let spread = eig::spectral_spread(&h)?;
    let grid = EvalGrid {
        b,
        fd: fd_step(spec.round_time, spread),
    };

    let mut cache: BTreeMap<(usize, usize), Vec<RoundRecord>> = BTreeMap::new();
    let mut out: Vec<(HistoryLabel, f64, f64, f64, f64, f64)> = Vec::new();
    let mut prefix: Vec<Vec<usize>> = Vec::new();
    walk_rounds(
        &h,
        rounds,
        0,
        &grid,
        &mut prefix,
        (1.0, 1.0, 1.0, 1.0, 0.0),
        &mut cache,
        &mut out,
    )?;
    finalize_records(out, &grid, spec.round_time * spread)
}

#[allow(clippy::too_many_arguments)]
fn walk_rounds(
    h: &ComplexMatrix,
    rounds: &[RoundPolicy],
    depth: usize,
    grid: &EvalGrid,
    prefix: &mut Vec<Vec<usize>>,
    acc: (f64, f64, f64, f64, f64),
    cache: &mut BTreeMap<(usize, usize), Vec<RoundRecord>>,
    out: &mut Vec<(HistoryLabel, f64, f64, f64, f64, f64)>,
) -> Result<()> {
    let (p_b, p_0, p_p, p_m, dp_an) = acc;
    if depth == rounds.len() {
        if out.len() >= HISTORY_CAP {
            return Err(Error::Blowup { cap: HISTORY_CAP });
        }
        out.push((
            HistoryLabel::Rounds(prefix.clone()),
            p_b,
            p_0,
            p_p,
            p_m,
            dp_an,
        ));
        return Ok(());
    }
    let (entry_id, round) = rounds[depth].lookup(prefix).ok_or_else(|| Error::PolicyGap {
        step: depth,
        prefix: prefix.iter().flatten().copied().collect(),
    })?;
    let key = (depth, entry_id);
    if !cache.contains_key(&key) {
        let recs = enumerate_round(h, round, grid, HISTORY_CAP)?;
        cache.insert(key, recs);
    }
    let n_recs = cache[&key].len();
    for i in 0..n_recs {
        let (hist, rp_b, rp_0, rp_p, rp_m, rdp) = {
            let r = &cache[&key][i];
            (r.history.clone(), r.p_b, r.p_0, r.p_p, r.p_m, r.dp_an)
        };
        let next = (
            p_b * rp_b,
            p_0 * rp_0,
            p_p * rp_p,
            p_m * rp_m,
            dp_an * rp_0 + p_0 * rdp,
        );
        prefix.push(hist);
        walk_rounds(h, rounds, depth + 1, grid, prefix, next, cache, out)?;
        prefix.pop();
    }
    Ok(())
}

/// Rewrites every step so the conditional rotation is folded into the
/// measurement operators (`M_α ↦ M_α·U`), leaving the outcome distribution
/// unchanged for every field value.
pub fn strip_feedback(spec: &ProtocolSpec) -> Result<ProtocolSpec> {
    let map_round = |round: &FeedbackRound| -> Result<FeedbackRound> {
        let steps = round
            .steps
            .iter()
            .map(|step| {
                Ok(FeedbackStep {
                    duration: step.duration,
                    control: step.control.clone(),
                    policy: map_policy(&step.policy)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeedbackRound {
            initial: round.initial.clone(),
            steps,
        })
    };
    let variant = match &spec.variant {
        ProtocolVariant::Feedback(round) => ProtocolVariant::Feedback(map_round(round)?),
        ProtocolVariant::MultiRound(rounds) => ProtocolVariant::MultiRound(
            rounds
                .iter()
                .map(|policy| {
                    Ok(RoundPolicy {
                        entries: policy
                            .entries
                            .iter()
                            .map(|(k, r)| Ok((k.clone(), map_round(r)?)))
                            .collect::<Result<Vec<_>>>()?,
                        fallback: policy.fallback.as_ref().map(map_round).transpose()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let out = ProtocolSpec {
        hamiltonian: spec.hamiltonian.clone(),
        round_time: spec.round_time,
        variant,
    };
    out.validate()?;
    Ok(out)
}

fn map_policy(policy: &StepPolicy) -> Result<StepPolicy> {
    let strip_action = |action: &PolicyAction| -> Result<PolicyAction> {
        match &action.unitary {
            None => Ok(action.clone()),
            Some(u) => {
                let ms = action.povm.measurement_ops()?;
                let folded: Vec<ComplexMatrix> = ms.iter().map(|m| m * u).collect();
                Ok(PolicyAction::measure(Povm::from_measurements(folded)?))
            }
        }
    };
    Ok(StepPolicy {
        entries: policy
            .entries
            .iter()
            .map(|(k, a)| Ok((k.clone(), strip_action(a)?)))
            .collect::<Result<Vec<_>>>()?,
        fallback: policy.fallback.as_ref().map(strip_action).transpose()?,
    })
}

/// Absorbs a constant control generator into the measurement operators via
/// `M_α^L ↦ e^{−iH₀·Δ_{L+1}}·M_α^L` and a pre-rotated initial state; every
/// step must carry the same single-segment control. The returned protocol is
/// control-free with unchanged POVM elements; when the control commutes with
/// the sensing generator the distributions agree at every field, otherwise
/// exactly at the working point.
pub fn absorb_constant_control(spec: &ProtocolSpec) -> Result<ProtocolSpec> {
    let round = match &spec.variant {
        ProtocolVariant::Feedback(r) => r,
        ProtocolVariant::MultiRound(_) => {
            return Err(Error::InvalidProtocol("single-round variant required"))
        }
    };
    spec.validate()?;
    let mut h0: Option<ComplexMatrix> = None;
    for step in &round.steps {
        if step.control.segments.len() != 1 {
            return Err(Error::InvalidProtocol(
                "constant control requires one segment per step",
            ));
        }
        let seg = &step.control.segments[0];
        match &h0 {
            None => h0 = Some(seg.h0.clone()),
            Some(prev) => {
                if prev.max_abs_diff(&seg.h0) > 1e-12 {
                    return Err(Error::InvalidProtocol(
                        "control generator varies between steps",
                    ));
                }
            }
        }
    }
    let h0 = h0.ok_or(Error::InvalidProtocol("no steps"))?;
    let es0 = eig::eig_hermitian(&h0)?;
    let tau = spec.round_time;
    let free = |t: f64| es0.map(|l| math::cis(-l * t));

    let mut steps = Vec::with_capacity(round.steps.len());
    for (i, step) in round.steps.iter().enumerate() {
        let next_duration = round.steps.get(i + 1).map_or(0.0, |s| s.duration);
        let w_next = free(next_duration);
        let fold = |action: &PolicyAction| -> Result<PolicyAction> {
            let ms = action.povm.measurement_ops()?;
            let folded: Vec<ComplexMatrix> = ms.iter().map(|m| &w_next * m).collect();
            Ok(PolicyAction {
                povm: Povm::from_measurements(folded)?,
                unitary: action.unitary.clone(),
            })
        };
        steps.push(FeedbackStep {
            duration: step.duration,
            control: ControlSchedule::none(),
            policy: StepPolicy {
                entries: step
                    .policy
                    .entries
                    .iter()
                    .map(|(k, a)| Ok((k.clone(), fold(a)?)))
                    .collect::<Result<Vec<_>>>()?,
                fallback: step.policy.fallback.as_ref().map(fold).transpose()?,
            },
        });
    }
    let initial = state::apply_unitary(&round.initial, &free(round.steps[0].duration));
    ProtocolSpec::feedback(
        spec.hamiltonian.clone(),
        tau,
        FeedbackRound { initial, steps },
    )
}

/// Information carried by each interval's sub-procedure, rescaled to the full
/// round time: entry `L` is the Fisher information of the protocol in which
/// the field acts only during step `L`, stretched to duration `τ`. The total
/// information of the protocol never exceeds the largest entry.
pub fn step_information_profile(spec: &ProtocolSpec) -> Result<Vec<f64>> {
    let stripped = strip_feedback(spec)?;
    let round = match &stripped.variant {
        ProtocolVariant::Feedback(r) => r.clone(),
        ProtocolVariant::MultiRound(_) => {
            return Err(Error::InvalidProtocol("single-round variant required"))
        }
    };
    for step in &round.steps {
        if !step.control.is_none() {
            return Err(Error::InvalidProtocol(
                "control-free protocol required",
            ));
        }
    }
    let mut profile = Vec::with_capacity(round.steps.len());
    for focus in 0..round.steps.len() {
        let mut steps = round.steps.clone();
        for (i, step) in steps.iter_mut().enumerate() {
            step.duration = if i == focus { stripped.round_time } else { 0.0 };
        }
        let sub = ProtocolSpec::feedback(
            stripped.hamiltonian.clone(),
            stripped.round_time,
            FeedbackRound {
                initial: round.initial.clone(),
                steps,
            },
        )?;
        let dist = run_feedback_distribution(&sub, 0.0)?;
        profile.push(dist.fisher(1, false)?.fisher_per_shot);
    }
    Ok(profile)
}

/// Single-element POVM that leaves the state untouched.
pub fn trivial_povm(dim: usize) -> Povm {
    Povm::from_measurements(alloc::vec![ComplexMatrix::identity(dim)])
        .expect("identity is a complete measurement")
}
