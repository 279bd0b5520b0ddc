//! Pareto dominance and non-dominated filtering.

use std::cmp::Ordering;

/// `p` dominates `q`: no worse everywhere and strictly better somewhere.
pub fn dominates(p: &[f64], q: &[f64]) -> bool {
    let mut strict = false;
    for (a, b) in p.iter().zip(q) {
        if a > b {
            return false;
        }
        if a < b {
            strict = true;
        }
    }
    strict
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Indices (ascending) of the points not dominated by any other point.
pub fn nondominated_indices(points: &[Vec<f64>]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex(&points[i], &points[j]));
    let mut keep = vec![false; points.len()];

    if points[0].len() == 2 {
        // Sweep in (f1, f2) order; the first point reaching the running
        // minimum of f2 has the smallest f1 among those sharing that f2.
        let mut best: Option<usize> = None;
        for &q in &order {
            let dominated = match best {
                Some(b) => dominates(&points[b], &points[q]),
                None => false,
            };
            keep[q] = !dominated;
            if best.is_none_or(|b| points[q][1] < points[b][1]) {
                best = Some(q);
            }
        }
    } else {
        // A dominator always precedes its victim lexicographically, and
        // dominance is transitive, so checking the archive suffices.
        let mut archive: Vec<usize> = Vec::new();
        for &q in &order {
            if !archive.iter().any(|&a| dominates(&points[a], &points[q])) {
                keep[q] = true;
                archive.push(q);
            }
        }
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}

/// The non-dominated subset, in input order. Duplicates are all kept.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    nondominated_indices(points)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Vec<f64>]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
            .collect()
    }

    #[test]
    fn textbook_case() {
        let pts = vec![vec![0.2, 0.8], vec![0.8, 0.2], vec![0.9, 0.9]];
        assert_eq!(nondominated_filter(&pts), vec![vec![0.2, 0.8], vec![0.8, 0.2]]);
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(nondominated_filter(&[vec![0.3, 0.3]]), vec![vec![0.3, 0.3]]);
        assert!(nondominated_filter(&[]).is_empty());
    }

    #[test]
    fn duplicates_survive() {
        let pts = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.6, 0.6]];
        assert_eq!(nondominated_indices(&pts), vec![0, 1]);
        let pts3 = vec![vec![0.5, 0.5, 0.1], vec![0.5, 0.5, 0.1]];
        assert_eq!(nondominated_indices(&pts3), vec![0, 1]);
    }

    #[test]
    fn equal_first_coordinate() {
        let pts = vec![vec![0.5, 0.7], vec![0.5, 0.3], vec![0.4, 0.7]];
        // (0.5,0.7) is dominated by both others
        assert_eq!(nondominated_indices(&pts), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(pts in proptest::collection::vec(
            proptest::collection::vec(0u8..6, 2..=3usize), 0..40)) {
            let m = pts.first().map(|p| p.len()).unwrap_or(2);
            let pts: Vec<Vec<f64>> = pts.into_iter()
                .map(|p| (0..m).map(|k| *p.get(k).unwrap_or(&0) as f64 / 5.0).collect())
                .collect();
            prop_assert_eq!(nondominated_indices(&pts), brute(&pts));
        }

        #[test]
        fn filtering_is_idempotent(pts in proptest::collection::vec(
            proptest::collection::vec(0.0f64..1.0, 3), 0..60)) {
            let once = nondominated_filter(&pts);
            prop_assert_eq!(nondominated_filter(&once), once.clone());
        }
    }
}
