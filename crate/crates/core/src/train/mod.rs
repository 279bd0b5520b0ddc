//! Connected-front (one model per anchor) and disconnected-front (joint or
//! mixture-of-experts) training, checkpoints and evaluation.

mod checkpoint;
mod eval;
pub mod presets;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamLengthError, AdamState, Rng, SampleError, Tape, TapeError};
use crate::hypernet::{constraint_layer, forward, ArchKind, ArchitectureSpec, ConstraintKind, HypernetError, LayoutEntry, ParameterBundle};
use crate::metrics::MetricsError;
use crate::problems::{DecisionConstraint, Problem, ProblemError, ProblemId, Zdt3StarShape};
use crate::scalarize::{chebyshev, floor_preference, ScalarizeError};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use eval::{evaluate_predictor, evaluate_run, front_sweep, sweep_rays, EvalOptions, Inference};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(
        "non-finite loss {loss} in model {model} at iteration {iteration} (r = {r:?}); recent losses {tail:?}"
    )]
    NonFinite {
        model: usize,
        iteration: usize,
        r: Vec<f64>,
        loss: f64,
        tail: Vec<f64>,
    },
    #[error("component {index} out of range for {count} anchors")]
    Component { index: usize, count: usize },
    #[error(transparent)]
    Hypernet(#[from] HypernetError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Scalarize(#[from] ScalarizeError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Adam(#[from] AdamLengthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Connected,
    Joint,
    Moe,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Connected => "connected",
            Mode::Joint => "joint",
            Mode::Moe => "moe",
        })
    }
}

/// Order of segment updates in disconnected training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// All iterations for segment 0, then segment 1, ...
    #[default]
    Sequential,
    /// One step per segment in turn.
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorBox {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: ProblemId,
    /// Shape of ZDT3*; ignored by other problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zdt3_star: Option<Zdt3StarShape>,
    pub arch: ArchitectureSpec,
    pub mode: Mode,
    pub alpha: f64,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    pub anchors: Vec<AnchorBox>,
    /// Loss-trace window length.
    pub log_every: usize,
    /// Half-width of uniform noise added to the anchor input of joint models.
    #[serde(default)]
    pub anchor_jitter: f64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Candidate head initializations tried per MoE expert (1 = plain init).
    #[serde(default = "one")]
    pub expert_restarts: usize,
    /// Steps each candidate is trained before the best one is kept.
    #[serde(default = "default_restart_steps")]
    pub restart_steps: usize,
    /// Steps an expert trains before its heads are compared.
    #[serde(default = "default_restart_after")]
    pub restart_after: usize,
    /// Weight of the hinge `Σ max(0, a_i - F_i) + max(0, F_i - b_i)` added to
    /// the loss of restart candidates, so that heads which leave their
    /// anchor box score worse. Main training never uses it.
    #[serde(default)]
    pub restart_penalty: f64,
}

fn one() -> usize {
    1
}

fn default_restart_steps() -> usize {
    500
}

fn default_restart_after() -> usize {
    1000
}

/// Half-width, in logit units, of the output-bias spread of restart candidates.
const RESTART_BIAS: f64 = 3.0;

impl TrainConfig {
    pub fn problem(&self) -> Problem {
        match (self.problem, self.zdt3_star) {
            (ProblemId::Zdt3Star, Some(shape)) => Problem::with_shape(ProblemId::Zdt3Star, shape),
            (id, _) => Problem::new(id),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        self.arch.validate()?;
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.anchors.is_empty() {
            return bad("at least one anchor is required".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        if self.expert_restarts == 0 {
            return bad("expert_restarts must be at least 1".into());
        }
        if self.expert_restarts > 1 && self.mode != Mode::Moe {
            return bad("expert_restarts applies to moe training only".into());
        }
        if !(self.restart_penalty >= 0.0) {
            return bad("restart_penalty must be non-negative".into());
        }
        if !(self.anchor_jitter >= 0.0) {
            return bad("anchor_jitter must be non-negative".into());
        }
        let problem = Problem::new(self.problem);
        if (self.arch.m, self.arch.n) != (problem.m, problem.n) {
            return bad(format!(
                "{} has (m, n) = ({}, {}), architecture has ({}, {})",
                self.problem, problem.m, problem.n, self.arch.m, self.arch.n
            ));
        }
        let needed = match problem.constraint {
            DecisionConstraint::Box01 => ConstraintKind::Box01,
            DecisionConstraint::SimplexSphere => ConstraintKind::SimplexSphere,
        };
        if self.arch.constraint != needed {
            return bad(format!("{} needs the {needed} constraint layer, got {}", self.problem, self.arch.constraint));
        }
        let kind_ok = match self.mode {
            Mode::Connected => matches!(self.arch.kind, ArchKind::Mlp | ArchKind::Trans),
            Mode::Joint => self.arch.kind == ArchKind::TransJoint,
            Mode::Moe => self.arch.kind == ArchKind::TransMoe,
        };
        if !kind_ok {
            return bad(format!("mode {} cannot train a {} network", self.mode, self.arch.kind));
        }
        if self.mode == Mode::Moe && self.arch.k != self.anchors.len() {
            return bad(format!("{} experts for {} anchors", self.arch.k, self.anchors.len()));
        }
        for (i, AnchorBox { a, b }) in self.anchors.iter().enumerate() {
            if a.len() != problem.m || b.len() != problem.m {
                return bad(format!("anchor {i} must have {} components", problem.m));
            }
            if a.iter().chain(b).any(|v| !v.is_finite()) {
                return bad(format!("anchor {i} has non-finite bounds"));
            }
            if a.iter().zip(b).any(|(x, y)| x > y) {
                return bad(format!("anchor {i}: a = {a:?} exceeds b = {b:?}"));
            }
        }
        Ok(())
    }

    /// Number of separately trained models.
    pub fn model_count(&self) -> usize {
        if self.mode == Mode::Connected {
            self.anchors.len()
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    /// Mean loss over each consecutive window of `window` steps.
    pub window: usize,
    pub window_means: Vec<f64>,
    pub final_mean: f64,
}

impl LossSummary {
    fn from_trace(trace: &[f64], window: usize) -> Self {
        let window_means: Vec<f64> = trace.chunks(window).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let final_mean = window_means.last().copied().unwrap_or(f64::NAN);
        Self { window, window_means, final_mean }
    }
}

/// Loss, argmax objective and flat parameter gradient for one query.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f64,
    pub argmax: usize,
    pub grad: Vec<f64>,
}

/// One forward/backward pass: network → constraint layer → decode →
/// objectives → Chebyshev loss against `a`, plus
/// `weight · Σ (max(0, a - F) + max(0, F - b))` when `bounds` is given.
pub fn loss_and_gradient(
    problem: &Problem,
    bundle: &ParameterBundle,
    r: &[f64],
    a: &[f64],
    net_anchor: &[f64],
    expert: Option<usize>,
    bounds: Option<(&[f64], f64)>,
) -> Result<StepOutput, TrainError> {
    let mut tape = Tape::new();
    let p = bundle.bind(&mut tape, true)?;
    let raw = forward(&mut tape, &p, &bundle.arch, r, net_anchor, expert)?;
    let unit = constraint_layer(&mut tape, raw, bundle.arch.constraint)?;
    let x = problem.decode_node(&mut tape, unit)?;
    let f = problem.objectives_node(&mut tape, x)?;
    let (mut loss, argmax) = chebyshev(&mut tape, f, r, a)?;
    if let Some((b, weight)) = bounds.filter(|(_, w)| *w > 0.0) {
        let lower = tape.vector(a)?;
        let upper = tape.vector(b)?;
        let below = tape.sub(lower, f)?;
        let above = tape.sub(f, upper)?;
        let below = tape.relu(below)?;
        let above = tape.relu(above)?;
        let both = tape.add(below, above)?;
        let total = tape.sum(both, 0)?;
        let penalty = tape.scale(total, weight)?;
        loss = tape.add(loss, penalty)?;
    }
    let grads = tape.backward(loss)?;
    Ok(StepOutput { loss: tape.scalar(loss), argmax, grad: bundle.flat_gradient(&p, &grads) })
}

/// Progress callback payload.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub model: usize,
    pub iteration: usize,
    pub window_mean: f64,
}

pub type Observer<'a> = &'a (dyn Fn(Progress) + Sync);

const TAIL: usize = 10;

struct Trainer<'a> {
    config: &'a TrainConfig,
    problem: &'a Problem,
    model: usize,
    bundle: ParameterBundle,
    adam: AdamState,
    trace: Vec<f64>,
    observer: Option<Observer<'a>>,
}

impl Trainer<'_> {
    fn step(
        &mut self,
        r: &[f64],
        a: &[f64],
        net_anchor: &[f64],
        expert: Option<usize>,
        bounds: Option<(&[f64], f64)>,
    ) -> Result<(), TrainError> {
        let out = loss_and_gradient(self.problem, &self.bundle, r, a, net_anchor, expert, bounds)?;
        if !out.loss.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
            let tail = self.trace[self.trace.len().saturating_sub(TAIL)..].to_vec();
            return Err(TrainError::NonFinite {
                model: self.model,
                iteration: self.trace.len(),
                r: r.to_vec(),
                loss: out.loss,
                tail,
            });
        }
        self.adam.step(&mut self.bundle.params, &out.grad)?;
        self.trace.push(out.loss);
        let window = self.config.log_every;
        if let (Some(obs), true) = (self.observer, self.trace.len() % window == 0) {
            let recent = &self.trace[self.trace.len() - window..];
            obs(Progress {
                model: self.model,
                iteration: self.trace.len(),
                window_mean: recent.iter().sum::<f64>() / window as f64,
            });
        }
        Ok(())
    }
}

fn gather(values: &[f64], entries: &[LayoutEntry]) -> Vec<f64> {
    entries.iter().flat_map(|e| values[e.offset..e.offset + e.len()].iter().copied()).collect()
}

fn scatter(values: &mut [f64], entries: &[LayoutEntry], from: &[f64]) {
    let mut src = from.iter();
    for e in entries {
        for v in &mut values[e.offset..e.offset + e.len()] {
            *v = *src.next().expect("snapshot covers every entry");
        }
    }
}

impl Trainer<'_> {
    /// Multi-start for expert `id`: the current head and
    /// `expert_restarts - 1` freshly initialized heads (output biases drawn
    /// from ±RESTART_BIAS so the candidates start spread over the decision
    /// box) each train alone for `restart_steps` steps. The head with the
    /// lowest second-half trial loss is kept and everything else is rolled
    /// back.
    fn select_expert_head(&mut self, id: usize, rng: &mut Rng) -> Result<(), TrainError> {
        let prefix = format!("expert.{id}.");
        let entries: Vec<_> = self.bundle.layout.iter().filter(|e| e.name.starts_with(&prefix)).cloned().collect();
        let AnchorBox { a, b } = &self.config.anchors[id];
        let mut best: Option<(f64, [Vec<f64>; 3])> = None;
        for candidate in 0..self.config.expert_restarts {
            let mut bundle = self.bundle.clone();
            if candidate > 0 {
                let output = format!("expert.{id}.2.b");
                for e in &entries {
                    let bound = if e.name == output {
                        RESTART_BIAS
                    } else if e.is_bias() {
                        0.0
                    } else {
                        1.0 / (e.shape[0] as f64).sqrt()
                    };
                    for v in &mut bundle.params[e.offset..e.offset + e.len()] {
                        *v = rng.uniform_range(-bound, bound);
                    }
                }
            }
            let mut trial = Trainer {
                config: self.config,
                problem: self.problem,
                model: self.model,
                bundle,
                adam: self.adam.clone(),
                trace: Vec::with_capacity(self.config.restart_steps),
                observer: None,
            };
            for _ in 0..self.config.restart_steps {
                let r = draw(rng, self.config.alpha, self.problem.m)?;
                trial.step(&r, a, a, Some(id), Some((b, self.config.restart_penalty)))?;
                // The trunk stays fixed so the trained head remains valid
                // once it is copied back.
                let head = gather(&trial.bundle.params, &entries);
                trial.bundle.params.copy_from_slice(&self.bundle.params);
                scatter(&mut trial.bundle.params, &entries, &head);
            }
            let tail = &trial.trace[trial.trace.len() / 2..];
            let score = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                let head = gather(&trial.bundle.params, &entries);
                let m = gather(&trial.adam.m, &entries);
                let v = gather(&trial.adam.v, &entries);
                best = Some((score, [head, m, v]));
            }
        }
        if let Some((_, [head, m, v])) = best {
            scatter(&mut self.bundle.params, &entries, &head);
            scatter(&mut self.adam.m, &entries, &m);
            scatter(&mut self.adam.v, &entries, &v);
        }
        Ok(())
    }
}

fn draw(rng: &mut Rng, alpha: f64, m: usize) -> Result<Vec<f64>, TrainError> {
    Ok(floor_preference(&rng.dirichlet(alpha, m)?)?)
}

/// One independent model per anchor; anchors train in parallel, each on
/// its own random streams.
pub fn train_connected(config: &TrainConfig, observer: Option<Observer<'_>>) -> Result<Checkpoint, TrainError> {
    config.validate()?;
    if config.mode != Mode::Connected {
        return Err(TrainError::Config(format!("train_connected called with mode {}", config.mode)));
    }
    let start = Instant::now();
    let problem = config.problem();
    let base = Rng::new(config.seed);
    let results: Vec<Result<(ParameterBundle, LossSummary), TrainError>> = config
        .anchors
        .par_iter()
        .enumerate()
        .map(|(i, anchor)| {
            let mut init_rng = base.fork(2 * i as u64);
            let mut rng = base.fork(2 * i as u64 + 1);
            let bundle = ParameterBundle::init(&config.arch, &mut init_rng)?;
            let mut t = Trainer {
                config,
                problem: &problem,
                model: i,
                adam: AdamState::new(bundle.len(), config.lr),
                bundle,
                trace: Vec::with_capacity(config.iterations),
                observer,
            };
            for _ in 0..config.iterations {
                let r = draw(&mut rng, config.alpha, problem.m)?;
                t.step(&r, &anchor.a, &anchor.a, None, None)?;
            }
            Ok((t.bundle, LossSummary::from_trace(&t.trace, config.log_every)))
        })
        .collect();
    let mut models = Vec::new();
    let mut loss = Vec::new();
    for res in results {
        let (b, l) = res?;
        models.push(b);
        loss.push(l);
    }
    Ok(Checkpoint::new(config.clone(), models, loss, start.elapsed().as_secs_f64()))
}

/// A single shared network over all segments: joint networks see the
/// segment's anchor as input, MoE networks route to the segment's expert.
pub fn train_disconnected(config: &TrainConfig, observer: Option<Observer<'_>>) -> Result<Checkpoint, TrainError> {
    config.validate()?;
    if config.mode == Mode::Connected {
        return Err(TrainError::Config("train_disconnected needs mode joint or moe".into()));
    }
    let start = Instant::now();
    let problem = config.problem();
    let base = Rng::new(config.seed);
    let mut rng = base.fork(1);
    let bundle = ParameterBundle::init(&config.arch, &mut base.fork(0))?;
    let k = config.anchors.len();
    let mut t = Trainer {
        config,
        problem: &problem,
        model: 0,
        adam: AdamState::new(bundle.len(), config.lr),
        bundle,
        trace: Vec::with_capacity(config.iterations * k),
        observer,
    };
    let order: Vec<usize> = match config.schedule {
        Schedule::Sequential => (0..k).flat_map(|id| std::iter::repeat_n(id, config.iterations)).collect(),
        Schedule::Interleaved => (0..config.iterations).flat_map(|_| 0..k).collect(),
    };
    let mut restart_rng = base.fork(2);
    let restarts = config.mode == Mode::Moe && config.expert_restarts > 1;
    let mut done = vec![0usize; k];
    for id in order {
        if restarts && done[id] == config.restart_after {
            t.select_expert_head(id, &mut restart_rng)?;
        }
        done[id] += 1;
        let a = &config.anchors[id].a;
        let r = draw(&mut rng, config.alpha, problem.m)?;
        match config.mode {
            Mode::Joint if config.anchor_jitter > 0.0 => {
                let j = config.anchor_jitter;
                let input: Vec<f64> = a.iter().map(|v| (v + rng.uniform_range(-j, j)).max(0.0)).collect();
                t.step(&r, &input, &input, None, None)?;
            }
            Mode::Joint => t.step(&r, a, a, None, None)?,
            _ => t.step(&r, a, a, Some(id), None)?,
        }
    }
    let loss = vec![LossSummary::from_trace(&t.trace, config.log_every)];
    Ok(Checkpoint::new(config.clone(), vec![t.bundle], loss, start.elapsed().as_secs_f64()))
}

/// Dispatches on the configured mode.
pub fn train(config: &TrainConfig, observer: Option<Observer<'_>>) -> Result<Checkpoint, TrainError> {
    match config.mode {
        Mode::Connected => train_connected(config, observer),
        _ => train_disconnected(config, observer),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hypernet::Activation;
    use crate::scalarize::default_upper_bounds;

    pub(crate) fn config(problem: ProblemId, kind: ArchKind, anchors: &[Vec<f64>], iterations: usize) -> TrainConfig {
        let p = Problem::new(problem);
        let mode = match kind {
            ArchKind::TransJoint => Mode::Joint,
            ArchKind::TransMoe => Mode::Moe,
            _ => Mode::Connected,
        };
        let b = default_upper_bounds(anchors, mode != Mode::Connected && problem.is_disconnected());
        TrainConfig {
            problem,
            zdt3_star: None,
            arch: ArchitectureSpec {
                kind,
                m: p.m,
                n: p.n,
                d: 8,
                e: 2,
                k: if mode == Mode::Moe { anchors.len() } else { 0 },
                activation: Activation::Relu,
                constraint: if problem == ProblemId::Cvx3 { ConstraintKind::SimplexSphere } else { ConstraintKind::Box01 },
            },
            mode,
            alpha: 0.6,
            lr: 1e-3,
            iterations,
            seed: 7,
            anchors: anchors.iter().cloned().zip(b).map(|(a, b)| AnchorBox { a, b }).collect(),
            log_every: 10,
            anchor_jitter: 0.0,
            schedule: Schedule::Sequential,
            expert_restarts: 1,
            restart_steps: 500,
            restart_after: 1000,
            restart_penalty: 0.0,
        }
    }

    #[test]
    fn validation_errors() {
        let mut c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0]], 10);
        assert!(c.validate().is_ok());
        c.iterations = 0;
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let mut c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0]], 10);
        c.anchors[0].b = vec![-1.0, 1.0];
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let mut c = config(ProblemId::Cvx3, ArchKind::Trans, &[vec![0.0; 3]], 10);
        c.arch.constraint = ConstraintKind::Box01;
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let mut c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0]], 10);
        c.mode = Mode::Moe;
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let c = config(ProblemId::Cvx1, ArchKind::Trans, &[], 10);
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
    }

    #[test]
    fn equal_seeds_give_identical_checkpoints() {
        let c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0], vec![0.1, 0.6]], 50);
        let a = train(&c, None).unwrap();
        let b = train(&c, None).unwrap();
        assert_eq!(a.models, b.models);
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.models.len(), 2);
    }

    #[test]
    fn loss_is_bounded_below_and_finite() {
        for kind in [ArchKind::Mlp, ArchKind::Trans] {
            let c = config(ProblemId::Zdt2, kind, &[vec![0.1, 0.2]], 200);
            let ck = train(&c, None).unwrap();
            assert!(ck.loss[0].window_means.iter().all(|v| v.is_finite() && *v >= -0.2));
        }
    }

    #[test]
    fn training_reduces_loss() {
        let c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0]], 2000);
        let ck = train(&c, None).unwrap();
        let w = &ck.loss[0].window_means;
        assert!(w.last().unwrap() < w.first().unwrap(), "{:?}", (w.first(), w.last()));
    }

    #[test]
    fn disconnected_modes_run() {
        let anchors = vec![vec![0.01, 0.81], vec![0.4, 0.41]];
        for kind in [ArchKind::TransJoint, ArchKind::TransMoe] {
            let mut c = config(ProblemId::Zdt3, kind, &anchors, 30);
            let seq = train(&c, None).unwrap();
            assert_eq!(seq.models.len(), 1);
            assert_eq!(seq.loss[0].window_means.len(), 6);
            c.schedule = Schedule::Interleaved;
            let inter = train(&c, None).unwrap();
            assert_ne!(seq.models[0].params, inter.models[0].params);
        }
        let mut c = config(ProblemId::Zdt3, ArchKind::TransJoint, &anchors, 30);
        c.anchor_jitter = 0.05;
        assert!(train(&c, None).is_ok());
    }

    #[test]
    fn nan_loss_aborts_with_diagnostics() {
        let c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0]], 5);
        let problem = c.problem();
        let mut bundle = ParameterBundle::init(&c.arch, &mut Rng::new(0)).unwrap();
        bundle.params[0] = f64::NAN;
        let mut t = Trainer {
            config: &c,
            problem: &problem,
            model: 3,
            adam: AdamState::new(bundle.len(), c.lr),
            bundle,
            trace: vec![0.5, 0.4],
            observer: None,
        };
        match t.step(&[0.5, 0.5], &[0.0, 0.0], &[0.0, 0.0], None, None) {
            Err(TrainError::NonFinite { model, iteration, tail, .. }) => {
                assert_eq!((model, iteration), (3, 2));
                assert_eq!(tail, vec![0.5, 0.4]);
            }
            Err(TrainError::Tape(TapeError::NanGradient { .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
