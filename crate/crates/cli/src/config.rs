//! Run configuration files.
//!
//! A config is TOML with four sections:
//!
//! ```toml
//! name = "cvx1"
//!
//! [problem]
//! id = "CVX1"
//!
//! [arch]
//! kind = "trans"
//! d = 20
//! heads = 2
//!
//! [train]
//! alpha = 0.6
//! lr = 0.001
//! iterations = 20000
//! seed = 0
//!
//! [anchors]
//! a = [[0.0, 0.8], [0.1, 0.6]]
//! # b = [[1.0, 1.0], [1.0, 1.0]]
//! ```
//!
//! Missing optional keys get defaults, and each default applied is reported
//! back so the caller can log it.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use hyperfront::hypernet::{Activation, ArchKind, ArchitectureSpec, ConstraintKind};
use hyperfront::problems::{DecisionConstraint, Problem, ProblemId, Zdt3StarShape};
use hyperfront::scalarize::default_upper_bounds;
use hyperfront::train::presets::{preset_kind, preset_width};
use hyperfront::train::{AnchorBox, Mode, Schedule, TrainConfig, CHECKPOINT_VERSION};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("unknown {what} {value:?}")]
    UnknownName { what: &'static str, value: String },
    #[error("missing anchors: [anchors] a must list at least one lower bound")]
    MissingAnchors,
    #[error("anchors: {0}")]
    Anchors(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    /// Schema version; must match the checkpoint version when given.
    version: Option<u32>,
    name: Option<String>,
    problem: ProblemSection,
    #[serde(default)]
    arch: ArchSection,
    #[serde(default)]
    train: TrainSection,
    anchors: Option<AnchorSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    id: String,
    /// ZDT3* shape.
    a: Option<f64>,
    gamma: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchSection {
    kind: Option<String>,
    d: Option<usize>,
    heads: Option<usize>,
    activation: Option<String>,
    /// Output layer; defaults to the one the problem's domain needs.
    constraint: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    alpha: Option<f64>,
    lr: Option<f64>,
    iterations: Option<usize>,
    seed: Option<u64>,
    log_every: Option<usize>,
    schedule: Option<String>,
    expert_restarts: Option<usize>,
    restart_steps: Option<usize>,
    restart_after: Option<usize>,
    restart_penalty: Option<f64>,
    anchor_jitter: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorSection {
    #[serde(default)]
    a: Vec<Vec<f64>>,
    b: Option<Vec<Vec<f64>>>,
}

/// A parsed config: the validated training config, the run name and the
/// defaults that were filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub train: TrainConfig,
    pub defaults: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    parse_config(&text, stem)
}

/// Parses config text; `fallback_name` names the run when the file does not.
pub fn parse_config(text: &str, fallback_name: &str) -> Result<RunConfig, ConfigError> {
    let file: File = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
    if let Some(v) = file.version.filter(|&v| v != CHECKPOINT_VERSION) {
        return Err(ConfigError::Invalid(format!("config version {v} is not supported (expected {CHECKPOINT_VERSION})")));
    }
    let mut defaults = Vec::new();
    let mut default = |key: &str, value: String| defaults.push(format!("{key} = {value}"));

    let id: ProblemId = file.problem.id.parse().map_err(|_| ConfigError::UnknownProblem(file.problem.id.clone()))?;
    let zdt3_star = match (file.problem.a, file.problem.gamma, file.problem.beta) {
        (None, None, None) => None,
        _ if id != ProblemId::Zdt3Star => {
            return Err(ConfigError::Invalid(format!("shape parameters a, gamma, beta only apply to ZDT3STAR, not {id}")))
        }
        (a, gamma, beta) => {
            let d = Zdt3StarShape::default();
            Some(Zdt3StarShape { a: a.unwrap_or(d.a), gamma: gamma.unwrap_or(d.gamma), beta: beta.unwrap_or(d.beta) })
        }
    };
    let problem = zdt3_star.map_or_else(|| Problem::new(id), |s| Problem::with_shape(id, s));

    let kind = match file.arch.kind {
        Some(k) => k.parse::<ArchKind>().map_err(|_| ConfigError::UnknownName { what: "architecture", value: k })?,
        None => {
            let k = preset_kind(id);
            default("arch.kind", k.to_string());
            k
        }
    };
    let mode = match kind {
        ArchKind::Mlp | ArchKind::Trans => Mode::Connected,
        ArchKind::TransJoint => Mode::Joint,
        ArchKind::TransMoe => Mode::Moe,
    };
    let d = file.arch.d.unwrap_or_else(|| {
        let d = preset_width(id);
        default("arch.d", d.to_string());
        d
    });
    let e = file.arch.heads.unwrap_or_else(|| {
        default("arch.heads", "2".into());
        2
    });
    let activation = match file.arch.activation {
        Some(a) => a.parse::<Activation>().map_err(|_| ConfigError::UnknownName { what: "activation", value: a })?,
        None => {
            default("arch.activation", "relu".into());
            Activation::Relu
        }
    };

    let constraint = match file.arch.constraint {
        Some(c) => c.parse::<ConstraintKind>().map_err(|_| ConfigError::UnknownName { what: "constraint", value: c })?,
        None => match problem.constraint {
            DecisionConstraint::Box01 => ConstraintKind::Box01,
            DecisionConstraint::SimplexSphere => ConstraintKind::SimplexSphere,
        },
    };

    let anchors = file.anchors.ok_or(ConfigError::MissingAnchors)?;
    if anchors.a.is_empty() {
        return Err(ConfigError::MissingAnchors);
    }
    let b = match anchors.b {
        Some(b) if b.len() != anchors.a.len() => {
            return Err(ConfigError::Anchors(format!("{} lower bounds but {} upper bounds", anchors.a.len(), b.len())))
        }
        Some(b) => b,
        None => {
            let b = default_upper_bounds(&anchors.a, mode != Mode::Connected && id.is_disconnected());
            default("anchors.b", format!("{b:?}"));
            b
        }
    };
    for (i, (a, b)) in anchors.a.iter().zip(&b).enumerate() {
        if a.len() != problem.m || b.len() != problem.m {
            return Err(ConfigError::Anchors(format!("anchor {i} must have {} components for {id}", problem.m)));
        }
        if let Some(j) = (0..problem.m).find(|&j| a[j] > b[j]) {
            return Err(ConfigError::Anchors(format!("anchor {i}: a[{j}] = {} exceeds b[{j}] = {}", a[j], b[j])));
        }
    }

    let t = file.train;
    macro_rules! or_default {
        ($field:ident, $value:expr) => {
            t.$field.unwrap_or_else(|| {
                default(concat!("train.", stringify!($field)), format!("{:?}", $value));
                $value
            })
        };
    }
    let schedule = match t.schedule.as_deref() {
        None => Schedule::Sequential,
        Some("sequential") => Schedule::Sequential,
        Some("interleaved") => Schedule::Interleaved,
        Some(other) => return Err(ConfigError::UnknownName { what: "schedule", value: other.to_string() }),
    };
    let train = TrainConfig {
        problem: id,
        zdt3_star,
        arch: ArchitectureSpec {
            kind,
            m: problem.m,
            n: problem.n,
            d,
            e,
            k: if mode == Mode::Moe { anchors.a.len() } else { 0 },
            activation,
            constraint,
        },
        mode,
        alpha: or_default!(alpha, 0.6),
        lr: or_default!(lr, 1e-3),
        iterations: or_default!(iterations, 20_000),
        seed: or_default!(seed, 0),
        anchors: anchors.a.into_iter().zip(b).map(|(a, b)| AnchorBox { a, b }).collect(),
        log_every: t.log_every.unwrap_or(500),
        anchor_jitter: t.anchor_jitter.unwrap_or(0.0),
        schedule,
        expert_restarts: t.expert_restarts.unwrap_or(1),
        restart_steps: t.restart_steps.unwrap_or(500),
        restart_after: t.restart_after.unwrap_or(1000),
        restart_penalty: t.restart_penalty.unwrap_or(0.0),
    };
    train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(RunConfig { name: file.name.unwrap_or_else(|| fallback_name.to_string()), train, defaults })
}
