//! Hypernetworks mapping a preference (and anchor) to a decision vector.

mod forward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Gradients, NodeId, Rng, Tape, TapeError};

pub use forward::{
    attention_weights, constraint_layer, forward, forward_hyper_mlp, forward_hyper_trans, forward_joint,
    forward_moe, predict,
};

#[derive(Debug, Error, PartialEq)]
pub enum HypernetError {
    #[error("hidden width {d} is not divisible by head count {e}")]
    Heads { d: usize, e: usize },
    #[error("invalid architecture: {0}")]
    Invalid(String),
    #[error("parameter vector has length {got}, architecture needs {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("expert id {id} out of range for {k} experts")]
    Expert { id: usize, k: usize },
    #[error("expected {expected} inputs, got {got}")]
    Input { expected: usize, got: usize },
    #[error("{kind} networks take no {what}")]
    Unsupported { kind: ArchKind, what: &'static str },
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
    #[error(transparent)]
    Tape(#[from] TapeError),
}

macro_rules! named_enum {
    ($name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = HypernetError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok(Self::$variant),)+
                    _ => Err(HypernetError::Unknown { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

named_enum!(ArchKind, "architecture", {
    Mlp => "mlp",
    Trans => "trans",
    TransJoint => "trans-joint",
    TransMoe => "trans-moe",
});

named_enum!(Activation, "activation", {
    Relu => "relu",
    Gelu => "gelu",
});

named_enum!(ConstraintKind, "constraint", {
    Nonneg => "nonneg",
    Box01 => "box01",
    Simplex => "simplex",
    SimplexSphere => "simplex-sphere",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    /// Attention heads (transformer kinds).
    pub e: usize,
    /// Expert heads (MoE only).
    pub k: usize,
    pub activation: Activation,
    pub constraint: ConstraintKind,
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<(), HypernetError> {
        if self.m < 2 {
            return Err(HypernetError::Invalid(format!("m must be at least 2, got {}", self.m)));
        }
        if self.n == 0 || self.d == 0 {
            return Err(HypernetError::Invalid("n and d must be positive".into()));
        }
        if self.kind != ArchKind::Mlp && (self.e == 0 || self.d % self.e != 0) {
            return Err(HypernetError::Heads { d: self.d, e: self.e });
        }
        if self.kind == ArchKind::TransMoe && self.k == 0 {
            return Err(HypernetError::Invalid("MoE needs at least one expert".into()));
        }
        Ok(())
    }

    pub fn is_transformer(&self) -> bool {
        self.kind != ArchKind::Mlp
    }
}

/// Number of learnable parameters of `arch`.
pub fn param_count(arch: &ArchitectureSpec) -> usize {
    let ArchitectureSpec { m, n, d, k, .. } = *arch;
    let block = 6 * d * d + 6 * d;
    match arch.kind {
        ArchKind::Mlp => block + (m + 1) * d + (d + 1) * n,
        ArchKind::Trans => block + 2 * m * d + (d + 1) * n,
        ArchKind::TransJoint => block + 3 * m * d + (d + 1) * n,
        ArchKind::TransMoe => block + 2 * m * d + k * ((d * d + d) + (d + 1) * n),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Biases start at zero; everything else is a weight with `fan_in` rows.
    pub fn is_bias(&self) -> bool {
        self.name.ends_with(".b") || self.name.ends_with(".c")
    }
}

/// Named sub-tensors in flat-array order.
pub fn layout(arch: &ArchitectureSpec) -> Vec<LayoutEntry> {
    let ArchitectureSpec { m, n, d, k, .. } = *arch;
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    let linear = |shapes: &mut Vec<(String, Vec<usize>)>, name: &str, fan_in: usize, fan_out: usize| {
        shapes.push((format!("{name}.w"), vec![fan_in, fan_out]));
        shapes.push((format!("{name}.b"), vec![fan_out]));
    };
    match arch.kind {
        ArchKind::Mlp => {
            linear(&mut shapes, "mlp.0", m, d);
            for i in 1..=6 {
                linear(&mut shapes, &format!("mlp.{i}"), d, d);
            }
            linear(&mut shapes, "mlp.7", d, n);
        }
        _ => {
            shapes.push(("embed.w".into(), vec![m, d]));
            if arch.kind == ArchKind::TransJoint {
                shapes.push(("embed.u".into(), vec![m, d]));
            }
            shapes.push(("embed.c".into(), vec![m, d]));
            for p in ["q", "k", "v", "o"] {
                linear(&mut shapes, &format!("attn.{p}"), d, d);
            }
            linear(&mut shapes, "ffn.1", d, d);
            linear(&mut shapes, "ffn.2", d, d);
            if arch.kind == ArchKind::TransMoe {
                for i in 0..k {
                    linear(&mut shapes, &format!("expert.{i}.1"), d, d);
                    linear(&mut shapes, &format!("expert.{i}.2"), d, n);
                }
            } else {
                linear(&mut shapes, "head", d, n);
            }
        }
    }
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, shape)| {
            let entry = LayoutEntry { name, shape, offset };
            offset += entry.len();
            entry
        })
        .collect()
}

/// Flat parameters of one hypernetwork plus their named layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBundle {
    pub arch: ArchitectureSpec,
    pub layout: Vec<LayoutEntry>,
    pub params: Vec<f64>,
}

/// Tape leaves holding a bundle's sub-tensors, in layout order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    names: Vec<String>,
    ids: Vec<NodeId>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> NodeId {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        self.ids[i]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

impl ParameterBundle {
    /// Uniform(±1/√fan_in) weights, zero biases.
    pub fn init(arch: &ArchitectureSpec, rng: &mut Rng) -> Result<Self, HypernetError> {
        arch.validate()?;
        let layout = layout(arch);
        let mut params = Vec::with_capacity(param_count(arch));
        for entry in &layout {
            if entry.is_bias() {
                params.extend(std::iter::repeat_n(0.0, entry.len()));
            } else {
                let bound = 1.0 / (entry.shape[0] as f64).sqrt();
                params.extend((0..entry.len()).map(|_| rng.uniform_range(-bound, bound)));
            }
        }
        Ok(Self { arch: arch.clone(), layout, params })
    }

    /// Wraps existing values, checking length against the architecture.
    pub fn from_params(arch: &ArchitectureSpec, params: Vec<f64>) -> Result<Self, HypernetError> {
        arch.validate()?;
        let expected = param_count(arch);
        if params.len() != expected {
            return Err(HypernetError::ParamLength { expected, got: params.len() });
        }
        Ok(Self { arch: arch.clone(), layout: layout(arch), params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn entry(&self, name: &str) -> Option<&LayoutEntry> {
        self.layout.iter().find(|e| e.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.entry(name).map(|e| &self.params[e.offset..e.offset + e.len()])
    }

    pub fn slice_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.entry(name)?.clone();
        Some(&mut self.params[e.offset..e.offset + e.len()])
    }

    /// Places every sub-tensor on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> Result<BoundParams, HypernetError> {
        let mut ids = Vec::with_capacity(self.layout.len());
        for e in &self.layout {
            let value = self.params[e.offset..e.offset + e.len()].to_vec();
            ids.push(tape.leaf(value, &e.shape, requires_grad)?);
        }
        Ok(BoundParams { names: self.layout.iter().map(|e| e.name.clone()).collect(), ids })
    }

    /// Flattens per-leaf gradients back into parameter order.
    pub fn flat_gradient(&self, bound: &BoundParams, grads: &Gradients) -> Vec<f64> {
        let mut out = vec![0.0; self.params.len()];
        for (e, id) in self.layout.iter().zip(&bound.ids) {
            if let Some(g) = grads.get(id) {
                out[e.offset..e.offset + e.len()].copy_from_slice(g);
            }
        }
        out
    }
}

pub fn init_params(arch: &ArchitectureSpec, rng: &mut Rng) -> Result<ParameterBundle, HypernetError> {
    ParameterBundle::init(arch, rng)
}
