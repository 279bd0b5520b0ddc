//! MED, exact hypervolume for two and three objectives, and HVD.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::{dominates, nondominated_filter};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("target and prediction lists differ in length ({targets} vs {preds})")]
    Length { targets: usize, preds: usize },
    #[error("cannot average over an empty list")]
    Empty,
    #[error("point has {got} objectives, reference point has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("exact hypervolume supports 2 or 3 objectives, got {0}")]
    UnsupportedDimension(usize),
}

/// Mean Euclidean distance between aligned target/prediction pairs.
pub fn med(targets: &[Vec<f64>], preds: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if targets.len() != preds.len() {
        return Err(MetricsError::Length { targets: targets.len(), preds: preds.len() });
    }
    if targets.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (t, p) in targets.iter().zip(preds) {
        if t.len() != p.len() {
            return Err(MetricsError::Dimension { expected: t.len(), got: p.len() });
        }
        total += t.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(total / targets.len() as f64)
}

/// Area dominated by a 2-D set whose points are all strictly inside the box;
/// `sorted` must be ascending in f1.
fn area(sorted: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut hv = 0.0;
    let mut ceiling = reference[1];
    for p in sorted {
        if p[1] < ceiling {
            hv += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    hv
}

/// Exact hypervolume dominated by `points` up to `reference`. Points with
/// any coordinate at or beyond the reference are ignored.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64, MetricsError> {
    let m = reference.len();
    if !(2..=3).contains(&m) {
        return Err(MetricsError::UnsupportedDimension(m));
    }
    if let Some(p) = points.iter().find(|p| p.len() != m) {
        return Err(MetricsError::Dimension { expected: m, got: p.len() });
    }
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .cloned()
        .collect();
    let mut front = nondominated_filter(&inside);
    front.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    front.dedup();
    if m == 2 {
        let pts: Vec<[f64; 2]> = front.iter().map(|p| [p[0], p[1]]).collect();
        return Ok(area(&pts, [reference[0], reference[1]]));
    }
    // Sweep along f3: each slab between consecutive f3 levels contributes
    // the 2-D area of every point at or below it.
    front.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut staircase: Vec<[f64; 2]> = Vec::with_capacity(front.len());
    let mut hv = 0.0;
    for (i, p) in front.iter().enumerate() {
        let q = [p[0], p[1]];
        if !staircase.iter().any(|s| s[0] <= q[0] && s[1] <= q[1]) {
            staircase.retain(|s| !(q[0] <= s[0] && q[1] <= s[1]));
            let at = staircase.partition_point(|s| s[0] < q[0]);
            staircase.insert(at, q);
        }
        let top = front.get(i + 1).map_or(reference[2], |n| n[2]);
        if top > p[2] {
            hv += area(&staircase, [reference[0], reference[1]]) * (top - p[2]);
        }
    }
    Ok(hv)
}

/// `HV(true_front) - HV(learned)`; negative when the learned set dominates
/// more than the sampled true front.
pub fn hvd(true_front: &[Vec<f64>], learned: &[Vec<f64>], reference: &[f64]) -> Result<f64, MetricsError> {
    Ok(hypervolume(true_front, reference)? - hypervolume(learned, reference)?)
}

/// Fraction of `samples` uniform points of `[0, ref]` dominated by `points`
/// (weakly), scaled to a volume, with its standard error.
pub fn monte_carlo_hypervolume(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    rng: &mut crate::autodiff::Rng,
) -> (f64, f64) {
    let volume: f64 = reference.iter().product();
    let mut s = vec![0.0; reference.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, r) in reference.iter().enumerate() {
            s[k] = rng.uniform() * r;
        }
        if points.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    (f * volume, volume * (f * (1.0 - f) / samples as f64).sqrt())
}

/// Number of predicted points weakly dominated by some other prediction.
pub fn dominated_count(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .filter(|p| points.iter().any(|q| dominates(q, p)))
        .count()
}

/// Mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub problem: String,
    pub mode: String,
    pub seeds: Vec<u64>,
    pub rays_per_anchor: usize,
    pub med_mean: f64,
    pub med_std: f64,
    /// Per-anchor MED means across seeds; `None` for unreachable anchors.
    pub med_per_anchor: Vec<Option<f64>>,
    pub hv: f64,
    pub hvd: f64,
    pub reference: Vec<f64>,
    pub infeasible_fraction: f64,
    /// Anchors with no front point in their cone; excluded from MED.
    pub unreachable_anchors: Vec<usize>,
    /// Arcs of the predicted front (two objectives only).
    pub segments: Option<usize>,
    pub runtime_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Rng;
    use proptest::prelude::*;

    #[test]
    fn med_examples() {
        let t = vec![vec![0.0, 0.0]];
        assert_eq!(med(&t, &t).unwrap(), 0.0);
        assert_eq!(med(&t, &[vec![3.0, 4.0]]).unwrap(), 5.0);
        assert_eq!(med(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(med(&t, &[]), Err(MetricsError::Length { .. })));
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[vec![0.5, 0.5]], &[1.0, 1.0]).unwrap(), 0.25);
        let hv = hypervolume(&[vec![0.2, 0.6], vec![0.6, 0.2]], &[1.0, 1.0]).unwrap();
        assert!((hv - 0.48).abs() < 1e-15, "{hv}");
        assert_eq!(hypervolume(&[vec![0.0, 0.0, 0.0]], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(hypervolume(&[], &[1.0, 1.0]).unwrap(), 0.0);
        // outside the box contributes nothing
        assert_eq!(hypervolume(&[vec![1.2, 0.1], vec![0.5, 1.0]], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hypervolume(&[vec![0.1; 4]], &[1.0; 4]), Err(MetricsError::UnsupportedDimension(4)));
    }

    #[test]
    fn three_d_hand_case() {
        // Two unit-corner boxes overlapping in [0.5,1]^2 × [0.5,1].
        let pts = vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]];
        let hv = hypervolume(&pts, &[1.0, 1.0, 1.0]).unwrap();
        assert!((hv - (0.25 + 0.25 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn hvd_of_identical_sets_is_zero() {
        let pts = vec![vec![0.1, 0.9], vec![0.5, 0.4], vec![0.9, 0.05]];
        assert_eq!(hvd(&pts, &pts, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hvd(&pts, &[], &[1.0, 1.0]).unwrap(), hypervolume(&pts, &[1.0, 1.0]).unwrap());
    }

    #[test]
    fn agrees_with_monte_carlo() {
        let mut rng = Rng::new(21);
        for m in [2, 3] {
            for _ in 0..5 {
                let pts: Vec<Vec<f64>> = (0..8).map(|_| (0..m).map(|_| rng.uniform()).collect()).collect();
                let exact = hypervolume(&pts, &vec![1.0; m]).unwrap();
                let (est, se) = monte_carlo_hypervolume(&pts, &vec![1.0; m], 200_000, &mut rng);
                assert!((exact - est).abs() <= 3.0 * se + 1e-12, "m={m}: {exact} vs {est} ± {se}");
            }
        }
    }

    fn point_set(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, m), 0..25)
    }

    proptest! {
        #[test]
        fn adding_points_never_decreases(pts in point_set(3), extra in proptest::collection::vec(0.0f64..1.0, 3)) {
            let r = [1.0; 3];
            let before = hypervolume(&pts, &r).unwrap();
            let mut more = pts.clone();
            more.push(extra.clone());
            prop_assert!(hypervolume(&more, &r).unwrap() >= before - 1e-15);
            if pts.iter().any(|p| p.iter().zip(&extra).all(|(a, b)| a <= b)) {
                prop_assert!((hypervolume(&more, &r).unwrap() - before).abs() < 1e-15);
            }
        }

        #[test]
        fn order_and_duplicates_do_not_matter(pts in point_set(2)) {
            let r = [1.0, 1.0];
            let hv = hypervolume(&pts, &r).unwrap();
            let mut rev = pts.clone();
            rev.reverse();
            rev.extend(pts.iter().cloned());
            prop_assert!((hypervolume(&rev, &r).unwrap() - hv).abs() < 1e-15);
        }

        #[test]
        fn three_d_reduces_to_two_d(pts in point_set(2)) {
            // A flat layer at f3 = 0 has volume equal to its 2-D area.
            let lifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0], p[1], 0.0]).collect();
            let a = hypervolume(&pts, &[1.0, 1.0]).unwrap();
            let v = hypervolume(&lifted, &[1.0, 1.0, 1.0]).unwrap();
            prop_assert!((a - v).abs() < 1e-14);
        }
    }
}
