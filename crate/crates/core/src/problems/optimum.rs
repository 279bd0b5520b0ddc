//! Chebyshev-optimal front points for a preference and anchor.
//!
//! The oracle minimizes `max_i r_i (F_i - a_i)` over the front
//! parameterization: a dense grid locates the basin, then golden-section
//! search (curves) or a shrinking-window grid (sheets) refines it.

use serde::{Deserialize, Serialize};

use super::front::{curve_decision, raw_front, sheet_decision};
use super::{Problem, ProblemError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Normalized objective vector F*.
    pub objectives: Vec<f64>,
    /// Native decision vector mapping onto F*.
    pub decision: Vec<f64>,
    /// Chebyshev value at F*.
    pub value: f64,
}

/// Reusable oracle for one problem; holds the dense front used for
/// basin location and reachability checks.
#[derive(Debug, Clone)]
pub struct FrontOracle {
    problem: Problem,
    front: Vec<Vec<f64>>,
    grid: usize,
    /// Normalized objectives at every coarse-grid parameter, row-major.
    grid_values: Vec<Vec<f64>>,
}

const CURVE_GRID: usize = 20_001;
const SHEET_GRID: usize = 201;

fn chebyshev_value(f: &[f64], r: &[f64], a: &[f64]) -> f64 {
    f.iter()
        .zip(r)
        .zip(a)
        .map(|((fi, ri), ai)| ri * (fi - ai))
        .fold(f64::NEG_INFINITY, f64::max)
}

impl FrontOracle {
    pub fn new(problem: &Problem) -> Self {
        let grid = if problem.m == 2 { CURVE_GRID } else { SHEET_GRID };
        let (raw, _) = raw_front(problem, if problem.m == 2 { CURVE_GRID } else { 20_000 });
        let mut oracle = Self {
            problem: problem.clone(),
            front: raw.iter().map(|f| problem.normalize(f)).collect(),
            grid,
            grid_values: Vec::new(),
        };
        let step = 1.0 / (grid - 1) as f64;
        oracle.grid_values = if problem.m == 2 {
            (0..grid).map(|i| oracle.point(&[i as f64 * step]).0).collect()
        } else {
            (0..grid * grid)
                .map(|ij| oracle.point(&[(ij / grid) as f64 * step, (ij % grid) as f64 * step]).0)
                .collect()
        };
        oracle
    }

    /// Index of the cheapest coarse-grid point.
    fn grid_argmin(&self, r: &[f64], a: &[f64]) -> usize {
        self.grid_values
            .iter()
            .map(|f| chebyshev_value(f, r, a))
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .expect("non-empty grid")
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Whether some front point lies componentwise above `a`.
    pub fn reachable(&self, a: &[f64]) -> bool {
        self.front.iter().any(|p| p.iter().zip(a).all(|(pi, ai)| pi >= ai))
    }

    fn point(&self, params: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = match params {
            [t] => curve_decision(&self.problem, *t),
            [u, v] => sheet_decision(&self.problem, *u, *v),
            _ => unreachable!("fronts are 1- or 2-parameter"),
        };
        (self.problem.normalize(&self.problem.raw_objectives(&x)), x)
    }

    pub fn optimum(&self, r: &[f64], a: &[f64]) -> Result<Optimum, ProblemError> {
        let m = self.problem.m;
        if r.len() != m || a.len() != m {
            return Err(ProblemError::Dimension {
                expected: m,
                got: if r.len() != m { r.len() } else { a.len() },
            });
        }
        if r.iter().any(|&v| !(v > 0.0)) {
            return Err(ProblemError::NonPositivePreference(r.to_vec()));
        }
        if !self.reachable(a) {
            return Err(ProblemError::UnreachableAnchor {
                problem: self.problem.id,
                anchor: a.to_vec(),
            });
        }
        let cost = |params: &[f64]| chebyshev_value(&self.point(params).0, r, a);
        let start = self.grid_argmin(r, a);
        let params = if m == 2 { self.refine_curve(&cost, start) } else { self.refine_sheet(&cost, start) };
        let (objectives, decision) = self.point(&params);
        let value = chebyshev_value(&objectives, r, a);
        Ok(Optimum { objectives, decision, value })
    }

    fn refine_curve(&self, cost: &dyn Fn(&[f64]) -> f64, best: usize) -> Vec<f64> {
        let n = self.grid;
        let step = 1.0 / (n - 1) as f64;
        let mut lo = best.saturating_sub(1) as f64 * step;
        let mut hi = ((best + 1).min(n - 1)) as f64 * step;
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let (mut fc, mut fd) = (cost(&[c]), cost(&[d]));
        while hi - lo > 1e-13 {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = cost(&[c]);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = cost(&[d]);
            }
        }
        // keep the grid point if refinement drifted onto a worse value
        let mid = 0.5 * (lo + hi);
        let grid_t = best as f64 * step;
        if cost(&[mid]) <= cost(&[grid_t]) {
            vec![mid]
        } else {
            vec![grid_t]
        }
    }

    fn refine_sheet(&self, cost: &dyn Fn(&[f64]) -> f64, start: usize) -> Vec<f64> {
        let n = self.grid;
        let step = 1.0 / (n - 1) as f64;
        let mut best = ((start / n) as f64 * step, (start % n) as f64 * step);
        let mut best_cost = cost(&[best.0, best.1]);
        let mut half = 2.0 * step;
        let k = 10;
        while half > 1e-13 {
            let center = best;
            for i in 0..=2 * k {
                for j in 0..=2 * k {
                    let u = (center.0 + half * (i as f64 - k as f64) / k as f64).clamp(0.0, 1.0);
                    let v = (center.1 + half * (j as f64 - k as f64) / k as f64).clamp(0.0, 1.0);
                    let c = cost(&[u, v]);
                    if c < best_cost {
                        best_cost = c;
                        best = (u, v);
                    }
                }
            }
            half *= 0.5;
        }
        vec![best.0, best.1]
    }
}

/// Front point minimizing `max_i r_i (F_i - a_i)`. Builds a fresh oracle;
/// use [`FrontOracle`] when querying repeatedly.
pub fn true_optimum(problem: &Problem, r: &[f64], a: &[f64]) -> Result<Optimum, ProblemError> {
    FrontOracle::new(problem).optimum(r, a)
}
