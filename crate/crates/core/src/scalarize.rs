//! Weighted Chebyshev scalarization and split-feasibility boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NodeId, Rng, SampleError, Tape, TapeError};

/// Floor applied to preference components before renormalizing.
pub const PREFERENCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ScalarizeError {
    #[error("expected {expected}-dimensional vectors, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("component index {index} out of range for {count} anchor boxes")]
    ComponentIndex { index: usize, count: usize },
    #[error("{count} anchor boxes given; a component index is required")]
    ComponentRequired { count: usize },
    #[error("no anchor boxes given")]
    NoComponents,
    #[error("invalid preference {0:?}: components must be finite, non-negative and not all zero")]
    BadPreference(Vec<f64>),
    #[error("anchor {a:?} exceeds upper bound {b:?}")]
    InvertedBox { a: Vec<f64>, b: Vec<f64> },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceQuery {
    /// Strictly positive, sums to 1.
    pub r: Vec<f64>,
    /// Lower-bound anchor shaping the loss.
    pub a: Vec<f64>,
    /// Upper bound checked at inference.
    pub b: Vec<f64>,
    pub expert_id: Option<usize>,
}

impl PreferenceQuery {
    /// Floors and renormalizes `r`, then checks the box.
    pub fn new(r: &[f64], a: Vec<f64>, b: Vec<f64>, expert_id: Option<usize>) -> Result<Self, ScalarizeError> {
        let m = r.len();
        for v in [&a, &b] {
            if v.len() != m {
                return Err(ScalarizeError::Dimension { expected: m, got: v.len() });
            }
        }
        if a.iter().zip(&b).any(|(x, y)| x > y) {
            return Err(ScalarizeError::InvertedBox { a, b });
        }
        Ok(Self { r: floor_preference(r)?, a, b, expert_id })
    }
}

/// Clamps each component to at least [`PREFERENCE_FLOOR`] after scaling to
/// the simplex, then renormalizes.
pub fn floor_preference(r: &[f64]) -> Result<Vec<f64>, ScalarizeError> {
    let total: f64 = r.iter().sum();
    if r.is_empty() || r.iter().any(|v| !v.is_finite() || *v < 0.0) || !(total > 0.0) {
        return Err(ScalarizeError::BadPreference(r.to_vec()));
    }
    let floored: Vec<f64> = r.iter().map(|v| (v / total).max(PREFERENCE_FLOOR)).collect();
    let s: f64 = floored.iter().sum();
    Ok(floored.into_iter().map(|v| v / s).collect())
}

/// `max_i r_i (F_i - a_i)` and the lowest index attaining it.
pub fn chebyshev_value(f: &[f64], r: &[f64], a: &[f64]) -> Result<(f64, usize), ScalarizeError> {
    check_dims(f.len(), r, a)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..f.len() {
        let v = r[i] * (f[i] - a[i]);
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

fn check_dims(m: usize, r: &[f64], a: &[f64]) -> Result<(), ScalarizeError> {
    for v in [r, a] {
        if v.len() != m {
            return Err(ScalarizeError::Dimension { expected: m, got: v.len() });
        }
    }
    Ok(())
}

/// Chebyshev loss node over an objective node of shape `[m]`. The gradient
/// flows only through the returned argmax coordinate.
pub fn chebyshev(tape: &mut Tape, f: NodeId, r: &[f64], a: &[f64]) -> Result<(NodeId, usize), ScalarizeError> {
    let m = tape.value(f).len();
    check_dims(m, r, a)?;
    let shape = tape.shape(f).to_vec();
    if shape.len() > 2 || (shape.len() == 2 && shape[0] != 1) {
        return Err(ScalarizeError::Dimension { expected: m, got: shape[0] });
    }
    let a_node = tape.constant(a.to_vec(), &shape)?;
    let r_node = tape.constant(r.to_vec(), &shape)?;
    let diff = tape.sub(f, a_node)?;
    let weighted = tape.mul(diff, r_node)?;
    let loss = tape.hard_max(weighted, shape.len() - 1)?;
    let idx = tape.argmax(loss)[0];
    Ok((loss, idx))
}

/// Draws a training/evaluation query: `r ~ Dir(alpha)` floored, and the
/// anchor box picked by `component_index` (optional with a single box).
pub fn make_query(
    rng: &mut Rng,
    alpha: f64,
    component_bounds: &[(Vec<f64>, Vec<f64>)],
    component_index: Option<usize>,
) -> Result<PreferenceQuery, ScalarizeError> {
    let count = component_bounds.len();
    let index = match (component_index, count) {
        (_, 0) => return Err(ScalarizeError::NoComponents),
        (Some(i), _) if i >= count => return Err(ScalarizeError::ComponentIndex { index: i, count }),
        (Some(i), _) => i,
        (None, 1) => 0,
        (None, _) => return Err(ScalarizeError::ComponentRequired { count }),
    };
    let (a, b) = &component_bounds[index];
    let r = rng.dirichlet(alpha, a.len())?;
    PreferenceQuery::new(&r, a.clone(), b.clone(), component_index)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub lower_ok: Vec<bool>,
    pub upper_ok: Vec<bool>,
    /// All upper bounds hold; the anchor side never gates feasibility.
    pub feasible: bool,
}

pub fn split_feasibility_check(f: &[f64], query: &PreferenceQuery) -> FeasibilityReport {
    let lower_ok: Vec<bool> = f.iter().zip(&query.a).map(|(x, a)| x >= a).collect();
    let upper_ok: Vec<bool> = f.iter().zip(&query.b).map(|(x, b)| x <= b).collect();
    let feasible = upper_ok.iter().all(|&ok| ok);
    FeasibilityReport { lower_ok, upper_ok, feasible }
}

/// Upper bounds paired with each anchor. Connected fronts, and fronts with
/// more than two objectives, use the unit corner. Two-objective
/// disconnected fronts bound each segment by its neighbours: f1 by the next
/// anchor's f1 and f2 by the previous anchor's f2, neighbours taken in f1
/// order.
pub fn default_upper_bounds(anchors: &[Vec<f64>], disconnected: bool) -> Vec<Vec<f64>> {
    anchors
        .iter()
        .map(|a| {
            if !disconnected || a.len() != 2 {
                return vec![1.0; a.len()];
            }
            let next_f1 = anchors
                .iter()
                .map(|o| o[0])
                .filter(|&x| x > a[0])
                .fold(1.0, f64::min);
            let prev = anchors
                .iter()
                .filter(|o| o[0] < a[0])
                .max_by(|x, y| x[0].total_cmp(&y[0]));
            let prev_f2 = prev.map_or(1.0, |o| o[1].max(a[1]));
            vec![next_f1, prev_f2]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let (v, i) = chebyshev_value(&[0.5, 0.3], &[0.4, 0.6], &[0.1, 0.0]).unwrap();
        assert!((v - 0.18).abs() < 1e-15);
        assert_eq!(i, 1);
        assert_eq!(chebyshev_value(&[0.2, 0.4], &[0.5, 0.5], &[0.2, 0.4]).unwrap().0, 0.0);
        let r = floor_preference(&[1.0, 0.0]).unwrap();
        let (v, _) = chebyshev_value(&[0.7, 0.9], &r, &[0.0, 0.0]).unwrap();
        assert!((v - 0.7).abs() < 1e-5);
    }

    #[test]
    fn node_matches_value_and_routes_gradient() {
        let mut tape = Tape::new();
        let f = tape.leaf(vec![0.5, 0.3], &[2], true).unwrap();
        let (loss, idx) = chebyshev(&mut tape, f, &[0.4, 0.6], &[0.1, 0.0]).unwrap();
        assert_eq!(idx, 1);
        assert!((tape.scalar(loss) - 0.18).abs() < 1e-15);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g[&f], vec![0.0, 0.6]);
    }

    #[test]
    fn node_tie_goes_to_lowest_index() {
        let mut tape = Tape::new();
        let f = tape.leaf(vec![0.5, 0.5], &[2], true).unwrap();
        let (loss, idx) = chebyshev(&mut tape, f, &[0.5, 0.5], &[0.0, 0.0]).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(tape.backward(loss).unwrap()[&f], vec![0.5, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            chebyshev_value(&[0.1, 0.2], &[1.0], &[0.0, 0.0]),
            Err(ScalarizeError::Dimension { expected: 2, got: 1 })
        ));
        let mut tape = Tape::new();
        let f = tape.leaf(vec![0.5, 0.3, 0.1], &[3], true).unwrap();
        assert!(chebyshev(&mut tape, f, &[0.5, 0.5], &[0.0, 0.0]).is_err());
    }

    fn zdt3_boxes() -> Vec<(Vec<f64>, Vec<f64>)> {
        let anchors = vec![
            vec![0.01, 0.81],
            vec![0.16, 0.61],
            vec![0.4, 0.41],
            vec![0.62, 0.23],
            vec![0.81, 0.1],
        ];
        let b = default_upper_bounds(&anchors, true);
        anchors.into_iter().zip(b).collect()
    }

    #[test]
    fn query_selection() {
        let mut rng = crate::autodiff::Rng::new(3);
        let q = make_query(&mut rng, 0.6, &zdt3_boxes(), Some(2)).unwrap();
        assert_eq!(q.a, vec![0.4, 0.41]);
        assert_eq!(q.expert_id, Some(2));
        let single = vec![(vec![0.0, 0.0], vec![1.0, 1.0])];
        let q = make_query(&mut rng, 0.6, &single, None).unwrap();
        assert_eq!(q.b, vec![1.0, 1.0]);
        assert!(matches!(
            make_query(&mut rng, 0.6, &zdt3_boxes(), Some(5)),
            Err(ScalarizeError::ComponentIndex { index: 5, count: 5 })
        ));
        assert!(matches!(
            make_query(&mut rng, 0.6, &zdt3_boxes(), None),
            Err(ScalarizeError::ComponentRequired { .. })
        ));
        assert_eq!(make_query(&mut rng, 0.6, &[], None), Err(ScalarizeError::NoComponents));
    }

    #[test]
    fn query_sweep_stays_on_simplex() {
        let mut rng = crate::autodiff::Rng::new(11);
        let boxes = vec![(vec![0.0; 3], vec![1.0; 3])];
        for _ in 0..10_000 {
            let q = make_query(&mut rng, 0.6, &boxes, None).unwrap();
            assert!(q.r.iter().all(|&v| v > 0.0));
            assert!((q.r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn feasibility_examples() {
        let q = PreferenceQuery::new(&[0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0], None).unwrap();
        assert!(split_feasibility_check(&[0.2, 0.3], &q).feasible);
        let r = split_feasibility_check(&[1.2, 0.3], &q);
        assert_eq!(r.upper_ok, vec![false, true]);
        assert!(!r.feasible);
        let q = PreferenceQuery::new(&[0.5, 0.5], vec![0.2, 0.3], vec![1.0, 1.0], None).unwrap();
        assert_eq!(split_feasibility_check(&[0.2, 0.3], &q).lower_ok, vec![true, true]);
        // below the anchor is still feasible
        assert!(split_feasibility_check(&[0.0, 0.0], &q).feasible);
    }

    #[test]
    fn upper_bound_defaults() {
        let b: Vec<Vec<f64>> = zdt3_boxes().into_iter().map(|(_, b)| b).collect();
        assert_eq!(b[0], vec![0.16, 1.0]);
        assert_eq!(b[2], vec![0.62, 0.61]);
        assert_eq!(b[4], vec![1.0, 0.23]);
        assert_eq!(default_upper_bounds(&[vec![0.1, 0.2]], false), vec![vec![1.0, 1.0]]);
        // neighbours are taken in f1 order regardless of list order
        let star = default_upper_bounds(&[vec![0.8, 0.62], vec![0.01, 0.7]], true);
        assert_eq!(star, vec![vec![1.0, 0.7], vec![0.8, 1.0]]);
    }

    #[test]
    fn floor_rejects_garbage() {
        assert!(floor_preference(&[0.0, 0.0]).is_err());
        assert!(floor_preference(&[-1.0, 2.0]).is_err());
        assert!(floor_preference(&[f64::NAN, 1.0]).is_err());
        assert_eq!(floor_preference(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
    }

    fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, m).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn positive_homogeneity(
            f in proptest::collection::vec(0.0f64..1.0, 3),
            a in proptest::collection::vec(0.0f64..0.5, 3),
            r in simplex(3),
            c in 0.01f64..100.0,
        ) {
            let (v, i) = chebyshev_value(&f, &r, &a).unwrap();
            let rc: Vec<f64> = r.iter().map(|x| x * c).collect();
            let (vc, ic) = chebyshev_value(&f, &rc, &a).unwrap();
            prop_assert!((vc - c * v).abs() <= 1e-12 * (1.0 + c * v.abs()));
            let mut terms: Vec<f64> = (0..3).map(|k| r[k] * (f[k] - a[k])).collect();
            terms.sort_by(|x, y| y.total_cmp(x));
            if terms[0] - terms[1] > 1e-9 {
                prop_assert_eq!(i, ic);
            }
        }

        #[test]
        fn monotone_in_objectives(
            f in proptest::collection::vec(0.0f64..1.0, 2),
            bump in proptest::collection::vec(0.0f64..0.5, 2),
            r in simplex(2),
        ) {
            let a = [0.0, 0.0];
            let (v, j) = chebyshev_value(&f, &r, &a).unwrap();
            let mut g: Vec<f64> = f.iter().zip(&bump).map(|(x, d)| x + d).collect();
            g[j] += 1e-3;
            let (vg, _) = chebyshev_value(&g, &r, &a).unwrap();
            prop_assert!(vg >= v);
        }

        #[test]
        fn negative_only_below_anchor(
            f in proptest::collection::vec(0.0f64..1.0, 3),
            a in proptest::collection::vec(0.0f64..1.0, 3),
            r in simplex(3),
        ) {
            let (v, _) = chebyshev_value(&f, &r, &a).unwrap();
            if v < 0.0 {
                prop_assert!(f.iter().zip(&a).all(|(x, y)| x < y));
            }
            prop_assert!(v >= -r.iter().zip(&a).map(|(x, y)| x * y).fold(0.0, f64::max) - 1e-15);
        }

        #[test]
        fn gradient_matches_finite_differences(
            f in proptest::collection::vec(0.0f64..1.0, 3),
            a in proptest::collection::vec(0.0f64..0.3, 3),
            r in simplex(3),
        ) {
            let mut terms: Vec<f64> = (0..3).map(|k| r[k] * (f[k] - a[k])).collect();
            terms.sort_by(|x, y| y.total_cmp(x));
            prop_assume!(terms[0] - terms[1] > 1e-6);
            let mut tape = Tape::new();
            let fnode = tape.leaf(f.clone(), &[3], true).unwrap();
            let (loss, _) = chebyshev(&mut tape, fnode, &r, &a).unwrap();
            let g = tape.backward(loss).unwrap().remove(&fnode).unwrap();
            let h = 1e-8;
            for k in 0..3 {
                let (mut up, mut dn) = (f.clone(), f.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = (chebyshev_value(&up, &r, &a).unwrap().0 - chebyshev_value(&dn, &r, &a).unwrap().0) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() < 1e-6, "{} vs {}", fd, g[k]);
            }
        }
    }
}
