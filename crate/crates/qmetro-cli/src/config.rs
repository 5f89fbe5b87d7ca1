//! Experiment configuration: a TOML document with complex matrices written
//! as paired real/imaginary nested arrays, convertible to and from the core
//! protocol types.

use crate::CliError;
use num_complex::Complex64 as C64;
use qmetro_core::control::ControlSchedule;
use qmetro_core::mat::ComplexMatrix;
use qmetro_core::mc::Estimator;
use qmetro_core::povm::Povm;
use qmetro_core::protocol::{
    FeedbackRound, FeedbackStep, PolicyAction, ProtocolSpec, RoundPolicy, StepPolicy,
};
use qmetro_core::state::QuantumState;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDto {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorDto {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDto {
    pub duration: f64,
    pub h0: MatrixDto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDto {
    /// Outcome prefix this action answers; absent means it is the step's
    /// only (unconditional) action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<MatrixDto>,
    pub povm: Vec<MatrixDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDto {
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Vec<SegmentDto>>,
    pub actions: Vec<ActionDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<ActionDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<VectorDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_density: Option<MatrixDto>,
    pub steps: Vec<StepDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaDto {
    pub register: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDto {
    /// simple | controlled | feedback | multi_round | ancilla
    pub kind: String,
    pub round_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<VectorDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_density: Option<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<Vec<MatrixDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Vec<SegmentDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<StepDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<RoundDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla: Option<AncillaDto>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_true: Option<f64>,
    /// mle | observable_mean
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanDto>,
}

pub fn parse_config(text: &str) -> Result<ConfigDto, CliError> {
    let cfg: ConfigDto =
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
    if let Some(v) = cfg.schema_version {
        if v != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            )));
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ConfigDto, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn matrix_from_dto(dto: &MatrixDto) -> Result<ComplexMatrix, CliError> {
    let n = dto.re.len();
    if n == 0 {
        return Err(CliError::Config("empty matrix".into()));
    }
    if dto.re.iter().any(|row| row.len() != n) {
        return Err(CliError::Config("matrix is not square".into()));
    }
    if let Some(im) = &dto.im {
        if im.len() != n || im.iter().any(|row| row.len() != n) {
            return Err(CliError::Config(
                "imaginary part shape differs from real part".into(),
            ));
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        C64::new(dto.re[r][c], dto.im.as_ref().map_or(0.0, |im| im[r][c]))
    }))
}

pub fn matrix_to_dto(m: &ComplexMatrix) -> MatrixDto {
    let n = m.dim();
    let re = (0..n).map(|r| (0..n).map(|c| m[(r, c)].re).collect()).collect();
    let im: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| m[(r, c)].im).collect()).collect();
    let all_real = im.iter().all(|row| row.iter().all(|x| *x == 0.0));
    MatrixDto {
        re,
        im: if all_real { None } else { Some(im) },
    }
}

pub fn vector_from_dto(dto: &VectorDto) -> Result<Vec<C64>, CliError> {
    if let Some(im) = &dto.im {
        if im.len() != dto.re.len() {
            return Err(CliError::Config(
                "imaginary part length differs from real part".into(),
            ));
        }
    }
    Ok(dto
        .re
        .iter()
        .enumerate()
        .map(|(i, re)| C64::new(*re, dto.im.as_ref().map_or(0.0, |im| im[i])))
        .collect())
}

fn state_from_dto(
    state: &Option<VectorDto>,
    density: &Option<MatrixDto>,
) -> Result<QuantumState, CliError> {
    match (state, density) {
        (Some(v), None) => {
            Ok(QuantumState::pure_from_unnormalized(&vector_from_dto(v)?)?)
        }
        (None, Some(m)) => Ok(QuantumState::mixed(&matrix_from_dto(m)?)?),
        (Some(_), Some(_)) => Err(CliError::Config(
            "give initial_state or initial_density, not both".into(),
        )),
        (None, None) => Err(CliError::Config(
            "protocol needs initial_state or initial_density".into(),
        )),
    }
}

fn povm_from_dtos(dtos: &[MatrixDto]) -> Result<Povm, CliError> {
    let elements = dtos
        .iter()
        .map(matrix_from_dto)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Povm::new(elements)?)
}

fn action_from_dto(dto: &ActionDto) -> Result<PolicyAction, CliError> {
    let povm = povm_from_dtos(&dto.povm)?;
    Ok(match &dto.unitary {
        Some(u) => PolicyAction::rotate_then_measure(matrix_from_dto(u)?, povm),
        None => PolicyAction::measure(povm),
    })
}

fn policy_from_dtos(
    actions: &[ActionDto],
    fallback: &Option<ActionDto>,
) -> Result<StepPolicy, CliError> {
    if actions.len() == 1 && actions[0].prefix.is_none() && fallback.is_none() {
        return Ok(StepPolicy::uniform(action_from_dto(&actions[0])?));
    }
    let mut entries = Vec::with_capacity(actions.len());
    for action in actions {
        let prefix = action.prefix.clone().ok_or_else(|| {
            CliError::Config("multiple actions per step need explicit prefixes".into())
        })?;
        entries.push((prefix, action_from_dto(action)?));
    }
    Ok(StepPolicy {
        entries,
        fallback: fallback.as_ref().map(action_from_dto).transpose()?,
    })
}

fn schedule_from_dtos(segments: &Option<Vec<SegmentDto>>) -> Result<ControlSchedule, CliError> {
    match segments {
        None => Ok(ControlSchedule::none()),
        Some(segs) => Ok(ControlSchedule::from_segments(
            segs.iter()
                .map(|s| Ok((matrix_from_dto(&s.h0)?, s.duration)))
                .collect::<Result<Vec<_>, CliError>>()?,
        )),
    }
}

fn steps_from_dtos(dtos: &[StepDto]) -> Result<Vec<FeedbackStep>, CliError> {
    dtos.iter()
        .map(|s| {
            Ok(FeedbackStep {
                duration: s.duration,
                control: schedule_from_dtos(&s.control)?,
                policy: policy_from_dtos(&s.actions, &s.fallback)?,
            })
        })
        .collect()
}

/// Builds the protocol the config describes.
pub fn to_protocol(cfg: &ConfigDto) -> Result<ProtocolSpec, CliError> {
    let proto = cfg
        .protocol
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [protocol] section".into()))?;
    let tau = proto.round_time;

    if proto.kind == "ancilla" {
        let a = proto
            .ancilla
            .as_ref()
            .ok_or_else(|| CliError::Config("ancilla protocol needs [protocol.ancilla]".into()))?;
        if cfg.hamiltonian.is_some() {
            return Err(CliError::Config(
                "ancilla protocol derives its own Hamiltonian; drop [hamiltonian]".into(),
            ));
        }
        return Ok(qmetro_core::ancilla::build_ancilla_protocol(
            a.register, tau, a.coupling,
        )?);
    }

    let h = matrix_from_dto(
        cfg.hamiltonian
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [hamiltonian]".into()))?,
    )?
    .require_hermitian(1e-10)?;

    match proto.kind.as_str() {
        "simple" | "controlled" => {
            let state = state_from_dto(&proto.initial_state, &proto.initial_density)?;
            let povm = povm_from_dtos(proto.povm.as_deref().ok_or_else(|| {
                CliError::Config("simple/controlled protocol needs povm elements".into())
            })?)?;
            let control = schedule_from_dtos(&proto.control)?;
            Ok(ProtocolSpec::controlled(state, h, control, povm, tau)?)
        }
        "feedback" => {
            let state = state_from_dto(&proto.initial_state, &proto.initial_density)?;
            let steps = steps_from_dtos(proto.steps.as_deref().ok_or_else(|| {
                CliError::Config("feedback protocol needs [[protocol.steps]]".into())
            })?)?;
            Ok(ProtocolSpec::feedback(
                h,
                tau,
                FeedbackRound {
                    initial: state,
                    steps,
                },
            )?)
        }
        "multi_round" => {
            let rounds = proto
                .rounds
                .as_deref()
                .ok_or_else(|| {
                    CliError::Config("multi_round protocol needs [[protocol.rounds]]".into())
                })?
                .iter()
                .map(|r| {
                    Ok(RoundPolicy::uniform(FeedbackRound {
                        initial: state_from_dto(&r.initial_state, &r.initial_density)?,
                        steps: steps_from_dtos(&r.steps)?,
                    }))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(ProtocolSpec::multi_round(h, tau, rounds)?)
        }
        other => Err(CliError::Config(format!("unknown protocol kind '{other}'"))),
    }
}

/// The bare sensing generator: explicit `[hamiltonian]` when present,
/// otherwise the one the protocol carries.
pub fn to_hamiltonian(cfg: &ConfigDto) -> Result<ComplexMatrix, CliError> {
    if let Some(h) = &cfg.hamiltonian {
        return Ok(matrix_from_dto(h)?.require_hermitian(1e-10)?);
    }
    Ok(to_protocol(cfg)?.hamiltonian)
}

pub fn estimator_from_config(cfg: &ConfigDto) -> Result<Estimator, CliError> {
    let name = cfg
        .experiment
        .as_ref()
        .and_then(|e| e.estimator.as_deref())
        .unwrap_or("mle");
    match name {
        "mle" => Ok(Estimator::Mle),
        "observable_mean" => Ok(Estimator::ObservableMean),
        other => Err(CliError::Config(format!("unknown estimator '{other}'"))),
    }
}

/// Round-trips the config through its serialized form.
pub fn serialize_config(cfg: &ConfigDto) -> Result<String, CliError> {
    toml::to_string_pretty(cfg).map_err(|e| CliError::Config(format!("config serialize: {e}")))
}
