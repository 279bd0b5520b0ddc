//! Prints the raw front extents frozen into the problem definitions.
//!
//! cargo run --release -p hyperfront-core --example normalization_constants
//!
//! Dense sampling locates each extreme; the extremes of ZDT3 and DTLZ7 are
//! smooth local optima of a 1-D function and get polished by golden section.

use std::f64::consts::PI;

use hyperfront::problems::{dense_normalization, Normalization, Problem, ProblemId};

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let k = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-15 {
        let c = hi - k * (hi - lo);
        let d = lo + k * (hi - lo);
        if f(c) <= f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    for id in [ProblemId::Zdt3, ProblemId::Dtlz7] {
        let mut p = Problem::new(id);
        p.normalization = vec![Normalization::IDENTITY; p.m];
        let dense = dense_normalization(&p);
        let h = 1e-5;
        match id {
            ProblemId::Zdt3 => {
                let f2 = |t: f64| 1.0 - t.sqrt() - t * (10.0 * PI * t).sin();
                let t = golden_min(f2, dense[0].hi - h, dense[0].hi + h);
                println!("ZDT3_F1_MAX = {t:?}");
                println!("ZDT3_F2_MIN = {:?}", f2(t));
            }
            _ => {
                let psi = |t: f64| t * (1.0 + (3.0 * PI * t).sin());
                let t = golden_min(|t| -psi(t), dense[0].hi - h, dense[0].hi + h);
                println!("DTLZ7_F12_MAX = {t:?}");
                println!("DTLZ7_F3_MIN = {:?}", (3.0 - psi(t)) / 3.0);
            }
        }
    }
}
