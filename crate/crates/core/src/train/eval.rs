//! Inference on checkpoints, preference sweeps and MED/HV evaluation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnchorBox, Checkpoint, Mode, TrainError};
use crate::autodiff::Rng;
use crate::hypernet::predict;
use crate::metrics::{hypervolume, mean_std, med, MetricsReport};
use crate::problems::{count_segments, nondominated_filter, sample_true_front, FrontOracle, Problem};
use crate::scalarize::{chebyshev_value, floor_preference, split_feasibility_check, FeasibilityReport, PreferenceQuery};

/// One model query with its objective-space verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    /// Floored, normalized preference actually fed to the network.
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub expert_id: Option<usize>,
    /// Model (connected), anchor (joint) or expert (moe) index.
    pub component: usize,
    /// Native decision vector.
    pub x: Vec<f64>,
    /// Normalized objectives, `evaluate(problem, x)`.
    pub f: Vec<f64>,
    pub chebyshev: f64,
    pub argmax: usize,
    pub feasibility: FeasibilityReport,
}

impl Checkpoint {
    /// Number of independently addressable components.
    pub fn components(&self) -> usize {
        self.config.anchors.len()
    }

    /// Component whose anchor is nearest to `a`.
    pub fn component_for_anchor(&self, a: &[f64]) -> usize {
        let dist = |b: &AnchorBox| b.a.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        (0..self.components())
            .min_by(|&i, &j| dist(&self.config.anchors[i]).total_cmp(&dist(&self.config.anchors[j])))
            .unwrap_or(0)
    }

    /// Runs one query. `a` and `b` default to the component's box; for joint
    /// networks `a` is also the network input.
    pub fn infer(
        &self,
        problem: &Problem,
        component: usize,
        r: &[f64],
        a: Option<&[f64]>,
        b: Option<&[f64]>,
    ) -> Result<Inference, TrainError> {
        let count = self.components();
        let anchor = self.config.anchors.get(component).ok_or(TrainError::Component { index: component, count })?;
        let a = a.unwrap_or(&anchor.a).to_vec();
        let b = b.unwrap_or(&anchor.b).to_vec();
        let expert_id = (self.config.mode == Mode::Moe).then_some(component);
        let query = PreferenceQuery::new(r, a, b, expert_id)?;
        let bundle = match self.config.mode {
            Mode::Connected => &self.models[component],
            _ => &self.models[0],
        };
        let unit = predict(bundle, &query.r, &query.a, expert_id)?;
        let (lo, hi) = problem.bounds;
        let x: Vec<f64> = if (lo, hi) == (0.0, 1.0) { unit } else { unit.iter().map(|u| u * (hi - lo) + lo).collect() };
        let f = problem.evaluate(&x)?;
        let (chebyshev, argmax) = chebyshev_value(&f, &query.r, &query.a)?;
        let feasibility = split_feasibility_check(&f, &query);
        let PreferenceQuery { r, a, b, expert_id } = query;
        Ok(Inference { r, a, b, expert_id, component, x, f, chebyshev, argmax, feasibility })
    }
}

/// Deterministic preference sweep: `count` evenly spaced rays for two
/// objectives (endpoints floored), otherwise the largest simplex lattice
/// with at most `count` points.
pub fn sweep_rays(m: usize, count: usize) -> Vec<Vec<f64>> {
    let floor = |r: Vec<f64>| floor_preference(&r).expect("lattice rays are valid");
    if count == 0 || m == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![vec![1.0 / m as f64; m]];
    }
    if m == 2 {
        return (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                floor(vec![t, 1.0 - t])
            })
            .collect();
    }
    let size = |h: usize| -> usize { (1..m).fold(1usize, |acc, k| acc * (h + k) / k) };
    let mut h = 1;
    while size(h + 1) <= count {
        h += 1;
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; m];
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k + 1 == cur.len() {
            cur[k] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[k] = v;
            rec(k + 1, left - v, cur, out);
        }
    }
    let mut ints = Vec::new();
    rec(0, h, &mut cur, &mut ints);
    for p in ints {
        out.push(floor(p.iter().map(|&v| v as f64 / h as f64).collect()));
    }
    out
}

/// Queries every component on the same ray sweep.
pub fn front_sweep(
    ck: &Checkpoint,
    problem: &Problem,
    rays: usize,
    components: &[usize],
) -> Result<Vec<Inference>, TrainError> {
    let sweep = sweep_rays(problem.m, rays);
    let mut out = Vec::with_capacity(sweep.len() * components.len());
    for &c in components {
        for r in &sweep {
            out.push(ck.infer(problem, c, r, None, None)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub rays_per_anchor: usize,
    pub seeds: Vec<u64>,
    /// Sweep rays per component for the HV/HVD/segment estimate.
    pub sweep_per_component: usize,
    /// True-front sample size for HVD.
    pub true_front_density: usize,
}

impl EvalOptions {
    pub fn new(rays_per_anchor: usize, seeds: Vec<u64>) -> Self {
        Self { rays_per_anchor, seeds, sweep_per_component: 200, true_front_density: 10_000 }
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self::new(3, (0..30).collect())
    }
}

/// Predictor callback: `(component, r) -> normalized objectives`.
pub type Predictor<'a> = &'a (dyn Fn(usize, &[f64]) -> Result<Vec<f64>, TrainError> + Sync);

/// MED per seed against oracle targets, plus HV/HVD of a deterministic
/// sweep. `problem_label` and `mode_label` only fill the report.
pub fn evaluate_predictor(
    problem: &Problem,
    boxes: &[AnchorBox],
    alpha: f64,
    predictor: Predictor<'_>,
    opts: &EvalOptions,
    mode_label: &str,
) -> Result<MetricsReport, TrainError> {
    if opts.rays_per_anchor == 0 {
        return Err(TrainError::Config("rays_per_anchor must be at least 1".into()));
    }
    if opts.seeds.is_empty() {
        return Err(TrainError::Config("at least one evaluation seed is required".into()));
    }
    let start = Instant::now();
    let oracle = FrontOracle::new(problem);
    let reachable: Vec<bool> = boxes.iter().map(|b| oracle.reachable(&b.a)).collect();
    let unreachable_anchors: Vec<usize> = (0..boxes.len()).filter(|&i| !reachable[i]).collect();

    struct SeedResult {
        per_anchor: Vec<Option<f64>>,
        infeasible: usize,
        total: usize,
    }
    let per_seed: Vec<Result<SeedResult, TrainError>> = opts
        .seeds
        .par_iter()
        .map(|&seed| {
            let base = Rng::new(seed);
            let mut per_anchor = Vec::with_capacity(boxes.len());
            let (mut infeasible, mut total) = (0, 0);
            for (i, bx) in boxes.iter().enumerate() {
                let mut rng = base.fork(i as u64);
                let mut targets = Vec::new();
                let mut preds = Vec::new();
                for _ in 0..opts.rays_per_anchor {
                    let r = floor_preference(&rng.dirichlet(alpha, problem.m)?)?;
                    let f = predictor(i, &r)?;
                    let q = PreferenceQuery::new(&r, bx.a.clone(), bx.b.clone(), None)?;
                    total += 1;
                    if !split_feasibility_check(&f, &q).feasible {
                        infeasible += 1;
                    }
                    if reachable[i] {
                        targets.push(oracle.optimum(&q.r, &bx.a)?.objectives);
                        preds.push(f);
                    }
                }
                per_anchor.push(if reachable[i] { Some(med(&targets, &preds)?) } else { None });
            }
            Ok(SeedResult { per_anchor, infeasible, total })
        })
        .collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>, _>>()?;

    let seed_meds: Vec<f64> = per_seed
        .iter()
        .map(|s| {
            let v: Vec<f64> = s.per_anchor.iter().flatten().copied().collect();
            mean_std(&v).0
        })
        .collect();
    let (med_mean, med_std) = mean_std(&seed_meds);
    let med_per_anchor = (0..boxes.len())
        .map(|i| {
            reachable[i].then(|| mean_std(&per_seed.iter().map(|s| s.per_anchor[i].unwrap_or(f64::NAN)).collect::<Vec<_>>()).0)
        })
        .collect();
    let infeasible = per_seed.iter().map(|s| s.infeasible).sum::<usize>();
    let total = per_seed.iter().map(|s| s.total).sum::<usize>();

    let reference = vec![1.0; problem.m];
    let rays = sweep_rays(problem.m, opts.sweep_per_component);
    // The learned set is what survives inference-time filtering against
    // each component's upper bound.
    let mut swept = Vec::with_capacity(rays.len() * boxes.len());
    for (i, bx) in boxes.iter().enumerate() {
        for r in &rays {
            let f = predictor(i, r)?;
            if f.iter().zip(&bx.b).all(|(x, b)| x <= b) {
                swept.push(f);
            }
        }
    }
    let truth = sample_true_front(problem, opts.true_front_density)?.points;
    let hv = hypervolume(&swept, &reference)?;
    let hvd = hypervolume(&truth, &reference)? - hv;
    let segments = (problem.m == 2).then(|| {
        let inside: Vec<Vec<f64>> =
            swept.iter().filter(|p| p.iter().zip(&reference).all(|(x, r)| x <= r)).cloned().collect();
        count_segments(&nondominated_filter(&inside))
    });

    Ok(MetricsReport {
        problem: problem.id.to_string(),
        mode: mode_label.to_string(),
        seeds: opts.seeds.clone(),
        rays_per_anchor: opts.rays_per_anchor,
        med_mean,
        med_std,
        med_per_anchor,
        hv,
        hvd,
        reference,
        infeasible_fraction: infeasible as f64 / total as f64,
        unreachable_anchors,
        segments,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Evaluates a checkpoint under the MED/HV protocol.
pub fn evaluate_run(ck: &Checkpoint, opts: &EvalOptions) -> Result<MetricsReport, TrainError> {
    let problem = ck.config.problem();
    let predictor = |c: usize, r: &[f64]| ck.infer(&problem, c, r, None, None).map(|inf| inf.f);
    let label = format!("{}/{}", ck.config.mode, ck.config.arch.kind);
    evaluate_predictor(&problem, &ck.config.anchors, ck.config.alpha, &predictor, opts, &label)
}
