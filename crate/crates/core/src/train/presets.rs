//! Standard per-problem hyperparameters.

use super::{AnchorBox, Mode, Schedule, TrainConfig};
use crate::hypernet::{Activation, ArchKind, ArchitectureSpec, ConstraintKind};
use crate::problems::{DecisionConstraint, Problem, ProblemId};
use crate::scalarize::default_upper_bounds;

/// Hidden width used for `id`.
pub fn preset_width(id: ProblemId) -> usize {
    match id {
        ProblemId::Zdt3 => 30,
        ProblemId::Zdt3Star => 10,
        _ => 20,
    }
}

/// Lower-bound anchors used for `id`.
pub fn preset_anchors(id: ProblemId) -> Vec<Vec<f64>> {
    let rows: &[&[f64]] = match id {
        ProblemId::Cvx1 | ProblemId::Zdt1 => &[&[0.0, 0.8], &[0.1, 0.6], &[0.2, 0.4], &[0.35, 0.22], &[0.6, 0.1]],
        ProblemId::Cvx2 => &[&[0.0, 0.6], &[0.02, 0.4], &[0.16, 0.2], &[0.2, 0.15], &[0.4, 0.02]],
        ProblemId::Cvx3 | ProblemId::Dtlz2 => &[
            &[0.15, 0.2, 0.7],
            &[0.2, 0.5, 0.6],
            &[0.2, 0.7, 0.4],
            &[0.35, 0.6, 0.22],
            &[0.6, 0.1, 0.46],
        ],
        ProblemId::Zdt2 => &[&[0.1, 0.9], &[0.1, 0.6], &[0.2, 0.4], &[0.35, 0.22], &[0.6, 0.1]],
        ProblemId::Zdt3 => &[&[0.01, 0.81], &[0.16, 0.61], &[0.4, 0.41], &[0.62, 0.23], &[0.81, 0.1]],
        ProblemId::Zdt3Star => &[&[0.8, 0.62], &[0.01, 0.7]],
        ProblemId::Dtlz7 => &[&[0.62, 0.62, 0.4], &[0.01, 0.62, 0.5], &[0.01, 0.01, 0.82], &[0.62, 0.01, 0.6]],
    };
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Default architecture kind: MoE for disconnected fronts, Hyper-Trans otherwise.
pub fn preset_kind(id: ProblemId) -> ArchKind {
    if id.is_disconnected() {
        ArchKind::TransMoe
    } else {
        ArchKind::Trans
    }
}

/// Full training config with the standard settings for `id` and network `kind`.
pub fn preset_config(id: ProblemId, kind: ArchKind, seed: u64) -> TrainConfig {
    let problem = Problem::new(id);
    let anchors = preset_anchors(id);
    let mode = match kind {
        ArchKind::Mlp | ArchKind::Trans => Mode::Connected,
        ArchKind::TransJoint => Mode::Joint,
        ArchKind::TransMoe => Mode::Moe,
    };
    let b = default_upper_bounds(&anchors, mode != Mode::Connected && id.is_disconnected());
    TrainConfig {
        problem: id,
        zdt3_star: None,
        arch: ArchitectureSpec {
            kind,
            m: problem.m,
            n: problem.n,
            d: preset_width(id),
            e: 2,
            k: if mode == Mode::Moe { anchors.len() } else { 0 },
            activation: Activation::Relu,
            constraint: match problem.constraint {
                DecisionConstraint::Box01 => ConstraintKind::Box01,
                DecisionConstraint::SimplexSphere => ConstraintKind::SimplexSphere,
            },
        },
        mode,
        alpha: 0.6,
        lr: 1e-3,
        iterations: 20_000,
        seed,
        anchors: anchors.into_iter().zip(b).map(|(a, b)| AnchorBox { a, b }).collect(),
        log_every: 500,
        anchor_jitter: 0.0,
        schedule: Schedule::Sequential,
        expert_restarts: 1,
        restart_steps: 500,
        restart_after: 1000,
        restart_penalty: 0.0,
    }
}

/// MoE settings that keep each expert on its own front segment: experts
/// train interleaved at a lower rate, and after a warm-up each picks the
/// best of `restarts` head initializations scored with the box hinge.
pub fn multistart_moe(mut config: TrainConfig, restarts: usize) -> TrainConfig {
    config.schedule = Schedule::Interleaved;
    config.lr = 3e-4;
    config.expert_restarts = restarts;
    config.restart_steps = 500;
    config.restart_after = 1000;
    config.restart_penalty = 1.0;
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for id in ProblemId::ALL {
            for kind in [ArchKind::Mlp, ArchKind::Trans, ArchKind::TransJoint, ArchKind::TransMoe] {
                preset_config(id, kind, 0).validate().unwrap();
            }
        }
    }
}
