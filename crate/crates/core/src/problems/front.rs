//! Dense samples of the true Pareto fronts.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::dominance::nondominated_indices;
use super::{Normalization, Problem, ProblemError, ProblemId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSample {
    /// Normalized objective vectors, mutually non-dominated.
    pub points: Vec<Vec<f64>>,
    /// Native decision vectors mapping onto `points`.
    pub decision_points: Option<Vec<Vec<f64>>>,
    pub density: usize,
}

impl FrontSample {
    /// CSV with header `f1,...,fm` and 9 significant digits per value.
    pub fn to_csv(&self) -> String {
        let m = self.points.first().map(Vec::len).unwrap_or(0);
        let mut out = (1..=m).map(|i| format!("f{i}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for p in &self.points {
            out.push_str(&p.iter().map(|&v| crate::fmt_sig(v, 9)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// A point on a 1-parameter front curve, `t ∈ [0, 1]`: native decision vector.
pub(crate) fn curve_decision(problem: &Problem, t: f64) -> Vec<f64> {
    match problem.id {
        ProblemId::Cvx1 => vec![t],
        ProblemId::Cvx2 => vec![5.0 * t, 5.0 * t],
        _ => {
            let mut x = vec![0.0; problem.n];
            x[0] = t;
            x
        }
    }
}

/// A point on a 2-parameter front sheet, `(u, v) ∈ [0, 1]²`.
pub(crate) fn sheet_decision(problem: &Problem, u: f64, v: f64) -> Vec<f64> {
    match problem.id {
        ProblemId::Cvx3 => {
            let (cu, su) = ((FRAC_PI_2 * u).cos(), (FRAC_PI_2 * u).sin());
            let (cv, sv) = ((FRAC_PI_2 * v).cos(), (FRAC_PI_2 * v).sin());
            vec![(cu * cv).max(0.0), (cu * sv).max(0.0), su.max(0.0)]
        }
        _ => {
            let mut x = vec![0.0; problem.n];
            x[0] = u;
            x[1] = v;
            x
        }
    }
}

/// Decision vector on the unit-sphere octant in direction `w ≥ 0`, as sheet
/// parameters.
fn sphere_params(w: &[f64]) -> (f64, f64) {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let z = (w[2] / norm).clamp(0.0, 1.0);
    let u = z.asin() / FRAC_PI_2;
    let v = w[1].atan2(w[0]) / FRAC_PI_2;
    (u, v.clamp(0.0, 1.0))
}

/// Simplex-lattice points with `h` divisions in 3 dimensions.
pub(crate) fn simplex_lattice3(h: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity((h + 1) * (h + 2) / 2);
    for i in 0..=h {
        for j in 0..=h - i {
            let k = h - i - j;
            out.push([i as f64 / h as f64, j as f64 / h as f64, k as f64 / h as f64]);
        }
    }
    out
}

/// Indices of the running-maximum records of `psi(t) = t (1 + sin 3πt)`
/// on a uniform grid: the non-dominated values of each DTLZ7 coordinate.
fn dtlz7_records(k: usize) -> Vec<f64> {
    let psi = |t: f64| t * (1.0 + (3.0 * std::f64::consts::PI * t).sin());
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for i in 0..k {
        let t = i as f64 / (k - 1) as f64;
        let p = psi(t);
        if p > best {
            best = p;
            out.push(t);
        }
    }
    out
}

/// Raw objective vectors and decision vectors of a non-dominated front sample.
pub(crate) fn raw_front(problem: &Problem, density: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let filter = |xs: Vec<Vec<f64>>| {
        let fs: Vec<Vec<f64>> = xs.iter().map(|x| problem.raw_objectives(x)).collect();
        let keep = nondominated_indices(&fs);
        (
            keep.iter().map(|&i| fs[i].clone()).collect::<Vec<_>>(),
            keep.iter().map(|&i| xs[i].clone()).collect::<Vec<_>>(),
        )
    };
    match problem.id {
        ProblemId::Dtlz2 => {
            // Octant points of the unit sphere are mutually non-dominated:
            // p ≤ q with p ≠ q would force |p| < |q|.
            let mut h = 2;
            while (h + 1) * (h + 2) / 2 < density {
                h += 1;
            }
            let xs: Vec<Vec<f64>> = simplex_lattice3(h)
                .iter()
                .map(|w| {
                    let (u, v) = sphere_params(w);
                    sheet_decision(problem, u, v)
                })
                .collect();
            (xs.iter().map(|x| problem.raw_objectives(x)).collect(), xs)
        }
        ProblemId::Cvx3 => {
            let mut h = 2;
            loop {
                let xs: Vec<Vec<f64>> = simplex_lattice3(h)
                    .iter()
                    .map(|w| {
                        let (u, v) = sphere_params(w);
                        sheet_decision(problem, u, v)
                    })
                    .collect();
                let (fs, xs) = filter(xs);
                if fs.len() >= density {
                    return (fs, xs);
                }
                h += (h / 4).max(1);
            }
        }
        ProblemId::Dtlz7 => {
            let mut k = 16;
            loop {
                let records = dtlz7_records(k);
                if records.len() * records.len() >= density {
                    let mut fs = Vec::new();
                    let mut xs = Vec::new();
                    for &u in &records {
                        for &v in &records {
                            let x = sheet_decision(problem, u, v);
                            fs.push(problem.raw_objectives(&x));
                            xs.push(x);
                        }
                    }
                    return (fs, xs);
                }
                k *= 2;
            }
        }
        _ => {
            let xs: Vec<Vec<f64>> = (0..density)
                .map(|i| curve_decision(problem, i as f64 / (density - 1) as f64))
                .collect();
            filter(xs)
        }
    }
}

/// Non-dominated sample of the normalized true front.
pub fn sample_true_front(problem: &Problem, density: usize) -> Result<FrontSample, ProblemError> {
    if density < 2 {
        return Err(ProblemError::Density(density));
    }
    let (raw, xs) = raw_front(problem, density);
    Ok(FrontSample {
        points: raw.iter().map(|f| problem.normalize(f)).collect(),
        decision_points: Some(xs),
        density,
    })
}

/// Per-objective min/max of the raw front over a dense (~10⁶ point) sample.
pub fn dense_normalization(problem: &Problem) -> Vec<Normalization> {
    let (raw, _) = raw_front(problem, 1_000_000);
    (0..problem.m)
        .map(|k| Normalization {
            lo: raw.iter().map(|f| f[k]).fold(f64::INFINITY, f64::min),
            hi: raw.iter().map(|f| f[k]).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

/// Number of arcs of a 2-objective point set: consecutive points (sorted by
/// f1) separated by more than ten times the median f1 spacing start a new arc.
pub fn count_segments(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return points.len();
    }
    let mut f1: Vec<f64> = points.iter().map(|p| p[0]).collect();
    f1.sort_by(|a, b| a.total_cmp(b));
    let gaps: Vec<f64> = f1.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    1 + gaps.iter().filter(|&&g| g > 10.0 * median).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{nondominated_filter, Zdt3StarShape};

    #[test]
    fn zdt1_front_is_analytic() {
        let p = Problem::new(ProblemId::Zdt1);
        let front = sample_true_front(&p, 1000).unwrap();
        assert_eq!(front.points.len(), 1000);
        for f in &front.points {
            assert!((f[1] - (1.0 - f[0].sqrt())).abs() < 1e-12);
        }
        assert_eq!(nondominated_filter(&front.points).len(), 1000);
    }

    #[test]
    fn zdt3_has_five_arcs() {
        let p = Problem::new(ProblemId::Zdt3);
        let front = sample_true_front(&p, 10_000).unwrap();
        assert_eq!(count_segments(&front.points), 5);
    }

    #[test]
    fn zdt3_star_arc_count_follows_the_formula() {
        // With the tabulated γ=3, β=1/3 the curve is monotone: one arc.
        let p = Problem::new(ProblemId::Zdt3Star);
        let front = sample_true_front(&p, 10_000).unwrap();
        assert_eq!(count_segments(&front.points), 1);
        // A controls the number of regions once the curve can turn back.
        let linear = Problem::with_shape(
            ProblemId::Zdt3Star,
            Zdt3StarShape { a: 2.0, gamma: 1.0, beta: 1.0 / 3.0 },
        );
        let front = sample_true_front(&linear, 10_000).unwrap();
        assert_eq!(count_segments(&front.points), 2);
    }

    #[test]
    fn density_validation() {
        let p = Problem::new(ProblemId::Cvx1);
        assert_eq!(sample_true_front(&p, 1), Err(ProblemError::Density(1)));
    }

    #[test]
    fn connected_fronts_reach_density_and_stay_in_unit_box() {
        for id in ProblemId::ALL {
            let p = Problem::new(id);
            let front = sample_true_front(&p, 500).unwrap();
            if !id.is_disconnected() {
                assert!(front.points.len() >= 500, "{id}: {}", front.points.len());
            }
            // CVX3 f3 spans [-0.1/56, (8√2 + 44.7)/56].
            let (bot, top) = if id == ProblemId::Cvx3 { (-2e-3, 1.0 + 2e-4) } else { (-1e-9, 1.0 + 1e-9) };
            for f in &front.points {
                assert!(f.iter().all(|&v| (bot..=top).contains(&v)), "{id}: {f:?}");
            }
            let xs = front.decision_points.as_ref().unwrap();
            for (x, f) in xs.iter().zip(&front.points) {
                let g = p.evaluate(x).unwrap();
                assert!(g.iter().zip(f).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn normalization_spans_unit_box() {
        // CVX3 keeps its original denominators. Objectives equal to a
        // decision variable stay unscaled and are only contained in [0,1].
        let contained = |id, k| match id {
            ProblemId::Zdt3 => k == 0,
            ProblemId::Dtlz7 => k < 2,
            _ => false,
        };
        for id in ProblemId::ALL.into_iter().filter(|&id| id != ProblemId::Cvx3) {
            let p = Problem::new(id);
            let front = sample_true_front(&p, 20_000).unwrap();
            for k in 0..p.m {
                let lo = front.points.iter().map(|f| f[k]).fold(f64::INFINITY, f64::min);
                let hi = front.points.iter().map(|f| f[k]).fold(f64::NEG_INFINITY, f64::max);
                if contained(id, k) {
                    assert!(lo > -1e-9 && hi < 1.0 + 1e-9, "{id} f{k}: [{lo}, {hi}]");
                } else {
                    assert!(lo.abs() < 1e-3 && (hi - 1.0).abs() < 1e-3, "{id} f{k}: [{lo}, {hi}]");
                }
            }
        }
    }

    #[test]
    fn cvx3_extent_with_original_denominators() {
        let p = Problem::new(ProblemId::Cvx3);
        let front = sample_true_front(&p, 20_000).unwrap();
        let lo1 = front.points.iter().map(|f| f[0]).fold(f64::INFINITY, f64::min);
        let hi3 = front.points.iter().map(|f| f[2]).fold(f64::NEG_INFINITY, f64::max);
        let lo3 = front.points.iter().map(|f| f[2]).fold(f64::INFINITY, f64::min);
        assert!((lo1 - 1.0 / 14.0).abs() < 1e-3, "{lo1}");
        assert!((lo3 + 0.1 / 56.0).abs() < 1e-4, "{lo3}");
        assert!((hi3 - (8.0 * 2f64.sqrt() + 44.7) / 56.0).abs() < 1e-3, "{hi3}");
    }

    #[test]
    fn frozen_constants_match_dense_sampling() {
        use crate::problems::{DTLZ7_F12_MAX, DTLZ7_F3_MIN, ZDT3_F1_MAX, ZDT3_F2_MIN};
        let raw = |id| {
            let mut p = Problem::new(id);
            p.normalization = vec![Normalization::IDENTITY; p.m];
            dense_normalization(&p)
        };
        let z = raw(ProblemId::Zdt3);
        assert!((z[0].hi - ZDT3_F1_MAX).abs() < 1e-5);
        assert!((z[1].lo - ZDT3_F2_MIN).abs() < 1e-9);
        let d = raw(ProblemId::Dtlz7);
        assert!((d[0].hi - DTLZ7_F12_MAX).abs() < 1e-3);
        assert!((d[2].lo - DTLZ7_F3_MIN).abs() < 1e-6);
    }

    #[test]
    fn csv_layout() {
        let sample = FrontSample {
            points: vec![vec![0.381966011250105, 0.5], vec![1.0, 0.0]],
            decision_points: None,
            density: 2,
        };
        assert_eq!(sample.to_csv(), "f1,f2\n0.381966011,0.500000000\n1.00000000,0.00000000\n");
    }
}
