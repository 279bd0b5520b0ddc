//! Benchmark multi-objective problems with normalized objectives.
//!
//! Every evaluator returns objectives mapped onto `[0,1]^m` over the true
//! front by a per-objective affine map. The maps for problems whose raw
//! front already spans the unit box are the identity; the others are frozen
//! constants regenerated by `cargo run --example normalization_constants`.

mod dominance;
mod front;
mod optimum;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NodeId, Tape, TapeError};

pub use dominance::{dominates, nondominated_filter, nondominated_indices};
pub use front::{count_segments, dense_normalization, sample_true_front, FrontSample};
pub use optimum::{true_optimum, FrontOracle, Optimum};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem id {0:?}")]
    UnknownProblem(String),
    #[error("{problem}: expected {expected} decision variables, got {got}")]
    WrongLength {
        problem: ProblemId,
        expected: usize,
        got: usize,
    },
    #[error("{problem}: x[{index}] = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        problem: ProblemId,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{problem}: decision vector must have unit norm, got {norm}")]
    OffSphere { problem: ProblemId, norm: f64 },
    #[error("front density must be at least 2, got {0}")]
    Density(usize),
    #[error("{problem}: no front point lies in the cone above anchor {anchor:?}")]
    UnreachableAnchor { problem: ProblemId, anchor: Vec<f64> },
    #[error("expected {expected}-dimensional vectors, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("preference vector must be strictly positive: {0:?}")]
    NonPositivePreference(Vec<f64>),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProblemId {
    Cvx1,
    Cvx2,
    Cvx3,
    Zdt1,
    Zdt2,
    Zdt3,
    Zdt3Star,
    Dtlz2,
    Dtlz7,
}

impl ProblemId {
    pub const ALL: [ProblemId; 9] = [
        ProblemId::Cvx1,
        ProblemId::Cvx2,
        ProblemId::Cvx3,
        ProblemId::Zdt1,
        ProblemId::Zdt2,
        ProblemId::Zdt3,
        ProblemId::Zdt3Star,
        ProblemId::Dtlz2,
        ProblemId::Dtlz7,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Cvx1 => "CVX1",
            ProblemId::Cvx2 => "CVX2",
            ProblemId::Cvx3 => "CVX3",
            ProblemId::Zdt1 => "ZDT1",
            ProblemId::Zdt2 => "ZDT2",
            ProblemId::Zdt3 => "ZDT3",
            ProblemId::Zdt3Star => "ZDT3STAR",
            ProblemId::Dtlz2 => "DTLZ2",
            ProblemId::Dtlz7 => "DTLZ7",
        }
    }

    /// Disconnected true front.
    pub fn is_disconnected(&self) -> bool {
        matches!(self, ProblemId::Zdt3 | ProblemId::Zdt3Star | ProblemId::Dtlz7)
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('*', "STAR");
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == key)
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

/// How the decision variables are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionConstraint {
    /// Each variable in `[lo, hi]` (unit box after rescaling).
    Box01,
    /// Non-negative unit-norm vector.
    SimplexSphere,
}

/// Shape parameters of ZDT3*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zdt3StarShape {
    /// Number-of-regions control.
    pub a: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl Default for Zdt3StarShape {
    fn default() -> Self {
        Self {
            a: 2.0,
            gamma: 3.0,
            beta: 1.0 / 3.0,
        }
    }
}

/// Per-objective affine normalization `(f - lo) / (hi - lo)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { lo: 0.0, hi: 1.0 };

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.lo) / (self.hi - self.lo)
    }
}

/// Raw ZDT3 front extent (f1 max, f2 min). Regenerate with
/// `cargo run --release -p hyperfront-core --example normalization_constants`.
pub const ZDT3_F1_MAX: f64 = 0.851_832_865_258_777_2;
pub const ZDT3_F2_MIN: f64 = -0.773_369_012_326_640_6;
/// Raw DTLZ7 front extent (f1/f2 max, f3 min); the f3 max is 1 at the origin.
pub const DTLZ7_F12_MAX: f64 = 0.859_350_659_340_510_9;
pub const DTLZ7_F3_MIN: f64 = 0.435_668_154_854_756_9;

/// A benchmark problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: ProblemId,
    pub n: usize,
    pub m: usize,
    pub constraint: DecisionConstraint,
    /// Native decision-variable bounds (same for every coordinate).
    pub bounds: (f64, f64),
    pub zdt3_star: Zdt3StarShape,
    pub normalization: Vec<Normalization>,
}

impl Problem {
    pub fn new(id: ProblemId) -> Self {
        Self::with_shape(id, Zdt3StarShape::default())
    }

    /// ZDT3* with non-default shape parameters recomputes its normalization.
    pub fn with_shape(id: ProblemId, shape: Zdt3StarShape) -> Self {
        let (n, m) = match id {
            ProblemId::Cvx1 => (1, 2),
            ProblemId::Cvx2 => (2, 2),
            ProblemId::Cvx3 => (3, 3),
            ProblemId::Zdt1 | ProblemId::Zdt2 | ProblemId::Zdt3 | ProblemId::Zdt3Star => (30, 2),
            ProblemId::Dtlz2 | ProblemId::Dtlz7 => (10, 3),
        };
        let constraint = match id {
            ProblemId::Cvx3 => DecisionConstraint::SimplexSphere,
            _ => DecisionConstraint::Box01,
        };
        let bounds = match id {
            ProblemId::Cvx2 => (0.0, 5.0),
            _ => (0.0, 1.0),
        };
        let mut problem = Problem {
            id,
            n,
            m,
            constraint,
            bounds,
            zdt3_star: shape,
            normalization: vec![Normalization::IDENTITY; m],
        };
        problem.normalization = match id {
            // Objectives that equal a decision variable already lie in
            // [0, 1] and stay unscaled; the tabulated anchors sit just below
            // the raw segment starts.
            ProblemId::Zdt3 => vec![Normalization::IDENTITY, Normalization { lo: ZDT3_F2_MIN, hi: 1.0 }],
            ProblemId::Dtlz7 => vec![
                Normalization::IDENTITY,
                Normalization::IDENTITY,
                Normalization { lo: DTLZ7_F3_MIN, hi: 1.0 },
            ],
            ProblemId::Zdt3Star if shape != Zdt3StarShape::default() => dense_normalization(&problem),
            _ => vec![Normalization::IDENTITY; m],
        };
        problem
    }

    pub fn check_decision(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.n {
            return Err(ProblemError::WrongLength {
                problem: self.id,
                expected: self.n,
                got: x.len(),
            });
        }
        let (lo, hi) = self.bounds;
        let slack = 1e-12 * (hi - lo);
        for (index, &value) in x.iter().enumerate() {
            if !(value >= lo - slack && value <= hi + slack) {
                return Err(ProblemError::OutOfBounds {
                    problem: self.id,
                    index,
                    value,
                    lo,
                    hi,
                });
            }
        }
        if self.constraint == DecisionConstraint::SimplexSphere {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(ProblemError::OffSphere { problem: self.id, norm });
            }
        }
        Ok(())
    }

    /// Raw (unnormalized) objectives; `x` is assumed valid.
    pub fn raw_objectives(&self, x: &[f64]) -> Vec<f64> {
        match self.id {
            ProblemId::Cvx1 => vec![x[0], (x[0] - 1.0).powi(2)],
            ProblemId::Cvx2 => vec![
                (x[0] * x[0] + x[1] * x[1]) / 50.0,
                ((x[0] - 5.0).powi(2) + (x[1] - 5.0).powi(2)) / 50.0,
            ],
            ProblemId::Cvx3 => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                vec![
                    (s + x[1] - 12.0 * x[2] + 12.0) / 14.0,
                    (s + 8.0 * x[0] - 44.8 * x[1] + 8.0 * x[2] + 44.0) / 57.0,
                    (s - 44.8 * x[0] + 8.0 * x[1] + 8.0 * x[2] + 43.7) / 56.0,
                ]
            }
            ProblemId::Zdt1 | ProblemId::Zdt2 | ProblemId::Zdt3 | ProblemId::Zdt3Star => {
                let f1 = x[0];
                let g = 1.0 + 9.0 / (self.n - 1) as f64 * x[1..].iter().sum::<f64>();
                let f2 = match self.id {
                    ProblemId::Zdt1 => g - (f1 * g).sqrt(),
                    ProblemId::Zdt2 => g - f1 * f1 / g,
                    ProblemId::Zdt3 => g - (f1 * g).sqrt() - f1 * (10.0 * PI * f1).sin(),
                    _ => {
                        let s = self.zdt3_star;
                        g - (f1 * g).sqrt() - f1.powf(s.gamma) * (s.a * PI * f1.powf(s.beta)).sin()
                    }
                };
                vec![f1, f2]
            }
            ProblemId::Dtlz2 => {
                let g: f64 = x[2..].iter().map(|v| v * v).sum();
                let (c1, s1) = ((PI * x[0] / 2.0).cos(), (PI * x[0] / 2.0).sin());
                let (c2, s2) = ((PI * x[1] / 2.0).cos(), (PI * x[1] / 2.0).sin());
                vec![(1.0 + g) * c1 * c2, (1.0 + g) * c1 * s2, (1.0 + g) * s1]
            }
            ProblemId::Dtlz7 => {
                let k = self.n - self.m + 1;
                let g = 1.0 + 9.0 / k as f64 * x[self.m - 1..].iter().sum::<f64>();
                let h = self.m as f64
                    - x[..self.m - 1]
                        .iter()
                        .map(|&f| f / (1.0 + g) * (1.0 + (3.0 * PI * f).sin()))
                        .sum::<f64>();
                let mut f: Vec<f64> = x[..self.m - 1].to_vec();
                f.push((1.0 + g) * h / 6.0);
                f
            }
        }
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.normalization)
            .map(|(&v, norm)| norm.apply(v))
            .collect()
    }

    /// Normalized objectives at a validated decision vector.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.check_decision(x)?;
        Ok(self.normalize(&self.raw_objectives(x)))
    }

    /// Maps a unit-box node `[1, n]` onto the native decision bounds.
    pub fn decode_node(&self, tape: &mut Tape, unit: NodeId) -> Result<NodeId, TapeError> {
        let (lo, hi) = self.bounds;
        if lo == 0.0 && hi == 1.0 {
            return Ok(unit);
        }
        let scaled = tape.scale(unit, hi - lo)?;
        tape.shift(scaled, lo)
    }

    /// Differentiable normalized objectives: `x` is a `[1, n]` node, the
    /// result an `[m]` node.
    pub fn objectives_node(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, TapeError> {
        let n = self.n;
        // scalar [1] view of x[i]
        let at = |tape: &mut Tape, i: usize| -> Result<NodeId, TapeError> {
            let s = tape.slice(x, 1, i, 1)?;
            tape.sum(s, 1)
        };
        let sum_range = |tape: &mut Tape, start: usize, squared: bool| -> Result<NodeId, TapeError> {
            let s = tape.slice(x, 1, start, n - start)?;
            let s = if squared { tape.square(s)? } else { s };
            tape.sum(s, 1)
        };
        let raw: Vec<NodeId> = match self.id {
            ProblemId::Cvx1 => {
                let f1 = at(tape, 0)?;
                let d = tape.shift(f1, -1.0)?;
                let f2 = tape.square(d)?;
                vec![f1, f2]
            }
            ProblemId::Cvx2 => {
                let sq = sum_range(tape, 0, true)?;
                let f1 = tape.scale(sq, 1.0 / 50.0)?;
                let shifted = tape.shift(x, -5.0)?;
                let sq2 = tape.square(shifted)?;
                let s2 = tape.sum(sq2, 1)?;
                let f2 = tape.scale(s2, 1.0 / 50.0)?;
                vec![f1, f2]
            }
            ProblemId::Cvx3 => {
                let s = sum_range(tape, 0, true)?;
                let coef: [[f64; 3]; 3] = [[0.0, 1.0, -12.0], [8.0, -44.8, 8.0], [-44.8, 8.0, 8.0]];
                let offset = [12.0, 44.0, 43.7];
                let denom = [14.0, 57.0, 56.0];
                let mut fs = Vec::with_capacity(3);
                for k in 0..3 {
                    let mut acc = tape.shift(s, offset[k])?;
                    for (i, &c) in coef[k].iter().enumerate() {
                        if c != 0.0 {
                            let xi = at(tape, i)?;
                            let term = tape.scale(xi, c)?;
                            acc = tape.add(acc, term)?;
                        }
                    }
                    fs.push(tape.scale(acc, 1.0 / denom[k])?);
                }
                fs
            }
            ProblemId::Zdt1 | ProblemId::Zdt2 | ProblemId::Zdt3 | ProblemId::Zdt3Star => {
                let f1 = at(tape, 0)?;
                let tail = sum_range(tape, 1, false)?;
                let g0 = tape.scale(tail, 9.0 / (n - 1) as f64)?;
                let g = tape.shift(g0, 1.0)?;
                let f2 = match self.id {
                    ProblemId::Zdt2 => {
                        let f1sq = tape.square(f1)?;
                        let q = tape.div(f1sq, g)?;
                        tape.sub(g, q)?
                    }
                    _ => {
                        let fg = tape.mul(f1, g)?;
                        let root = tape.sqrt(fg)?;
                        let base = tape.sub(g, root)?;
                        match self.id {
                            ProblemId::Zdt1 => base,
                            ProblemId::Zdt3 => {
                                let arg = tape.scale(f1, 10.0 * PI)?;
                                let s = tape.sin(arg)?;
                                let w = tape.mul(f1, s)?;
                                tape.sub(base, w)?
                            }
                            _ => {
                                let shape = self.zdt3_star;
                                let fb = tape.powf(f1, shape.beta)?;
                                let arg = tape.scale(fb, shape.a * PI)?;
                                let s = tape.sin(arg)?;
                                let fg = tape.powf(f1, shape.gamma)?;
                                let w = tape.mul(fg, s)?;
                                tape.sub(base, w)?
                            }
                        }
                    }
                };
                vec![f1, f2]
            }
            ProblemId::Dtlz2 => {
                let g = sum_range(tape, 2, true)?;
                let scale = tape.shift(g, 1.0)?;
                let x1 = at(tape, 0)?;
                let x2 = at(tape, 1)?;
                let a1 = tape.scale(x1, PI / 2.0)?;
                let a2 = tape.scale(x2, PI / 2.0)?;
                let (c1, s1) = (tape.cos(a1)?, tape.sin(a1)?);
                let (c2, s2) = (tape.cos(a2)?, tape.sin(a2)?);
                let c1c2 = tape.mul(c1, c2)?;
                let c1s2 = tape.mul(c1, s2)?;
                vec![tape.mul(scale, c1c2)?, tape.mul(scale, c1s2)?, tape.mul(scale, s1)?]
            }
            ProblemId::Dtlz7 => {
                let m = self.m;
                let k = n - m + 1;
                let tail = sum_range(tape, m - 1, false)?;
                let g0 = tape.scale(tail, 9.0 / k as f64)?;
                let g = tape.shift(g0, 1.0)?;
                let one_plus_g = tape.shift(g, 1.0)?;
                let mut fs = Vec::with_capacity(m);
                let mut penalty: Option<NodeId> = None;
                for i in 0..m - 1 {
                    let f = at(tape, i)?;
                    fs.push(f);
                    let arg = tape.scale(f, 3.0 * PI)?;
                    let s = tape.sin(arg)?;
                    let bump = tape.shift(s, 1.0)?;
                    let ratio = tape.div(f, one_plus_g)?;
                    let term = tape.mul(ratio, bump)?;
                    penalty = Some(match penalty {
                        Some(p) => tape.add(p, term)?,
                        None => term,
                    });
                }
                let neg = tape.scale(penalty.expect("m >= 2"), -1.0)?;
                let h = tape.shift(neg, m as f64)?;
                let prod = tape.mul(one_plus_g, h)?;
                fs.push(tape.scale(prod, 1.0 / 6.0)?);
                fs
            }
        };
        let mut normalized = Vec::with_capacity(raw.len());
        for (node, norm) in raw.into_iter().zip(&self.normalization) {
            let node = if *norm == Normalization::IDENTITY {
                node
            } else {
                let s = tape.scale(node, 1.0 / (norm.hi - norm.lo))?;
                tape.shift(s, -norm.lo / (norm.hi - norm.lo))?
            };
            normalized.push(node);
        }
        tape.concat(&normalized, 0)
    }
}
