use crate::autodiff::{NodeId, Tape};

use super::{Activation, ArchKind, ArchitectureSpec, BoundParams, ConstraintKind, HypernetError, ParameterBundle};

type Result<T> = std::result::Result<T, HypernetError>;

/// Keeps box01 outputs strictly inside (0, 1) even when sigmoid saturates.
const BOX_MARGIN: f64 = 1e-12;

fn act(tape: &mut Tape, x: NodeId, activation: Activation) -> Result<NodeId> {
    Ok(match activation {
        Activation::Relu => tape.relu(x)?,
        Activation::Gelu => tape.gelu(x)?,
    })
}

fn affine(tape: &mut Tape, p: &BoundParams, name: &str, x: NodeId) -> Result<NodeId> {
    let y = tape.matmul(x, p.get(&format!("{name}.w")))?;
    Ok(tape.add(y, p.get(&format!("{name}.b")))?)
}

fn check_input(arch: &ArchitectureSpec, v: &[f64]) -> Result<()> {
    if v.len() != arch.m {
        return Err(HypernetError::Input { expected: arch.m, got: v.len() });
    }
    Ok(())
}

fn diag(tape: &mut Tape, v: &[f64]) -> Result<NodeId> {
    let m = v.len();
    let mut out = vec![0.0; m * m];
    for (i, &x) in v.iter().enumerate() {
        out[i * m + i] = x;
    }
    Ok(tape.constant(out, &[m, m])?)
}

/// `Linear(m,d) → act → [Linear(d,d) → act]×6 → Linear(d,n)`; output `[1, n]`.
pub fn forward_hyper_mlp(tape: &mut Tape, p: &BoundParams, arch: &ArchitectureSpec, r: &[f64]) -> Result<NodeId> {
    check_input(arch, r)?;
    let mut h = tape.constant(r.to_vec(), &[1, arch.m])?;
    for i in 0..7 {
        h = affine(tape, p, &format!("mlp.{i}"), h)?;
        h = act(tape, h, arch.activation)?;
    }
    affine(tape, p, "mlp.7", h)
}

struct Trunk {
    pooled: NodeId,
    attention: Vec<NodeId>,
}

/// Token embedding, one attention + feed-forward block with skips, mean pool.
fn trunk(tape: &mut Tape, p: &BoundParams, arch: &ArchitectureSpec, r: &[f64], a: Option<&[f64]>) -> Result<Trunk> {
    check_input(arch, r)?;
    let (m, d, e) = (arch.m, arch.d, arch.e);
    let dr = diag(tape, r)?;
    let mut x = tape.matmul(dr, p.get("embed.w"))?;
    if let Some(a) = a {
        check_input(arch, a)?;
        let da = diag(tape, a)?;
        let xa = tape.matmul(da, p.get("embed.u"))?;
        x = tape.add(x, xa)?;
    }
    x = tape.add(x, p.get("embed.c"))?;

    let q = affine(tape, p, "attn.q", x)?;
    let k = affine(tape, p, "attn.k", x)?;
    let v = affine(tape, p, "attn.v", x)?;
    let s = d / e;
    let mut heads = Vec::with_capacity(e);
    let mut attention = Vec::with_capacity(e);
    for h in 0..e {
        let qh = tape.slice(q, 1, h * s, s)?;
        let kh = tape.slice(k, 1, h * s, s)?;
        let vh = tape.slice(v, 1, h * s, s)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.scale(scores, 1.0 / (s as f64).sqrt())?;
        let weights = tape.softmax(scores, 1)?;
        attention.push(weights);
        heads.push(tape.matmul(weights, vh)?);
    }
    let cat = if e == 1 { heads[0] } else { tape.concat(&heads, 1)? };
    let o = affine(tape, p, "attn.o", cat)?;
    let x1 = tape.add(x, o)?;

    let z = affine(tape, p, "ffn.1", x1)?;
    let z = act(tape, z, arch.activation)?;
    let z = affine(tape, p, "ffn.2", z)?;
    let x2 = tape.add(x1, z)?;

    let pool = tape.constant(vec![1.0 / m as f64; m], &[1, m])?;
    let pooled = tape.matmul(pool, x2)?;
    Ok(Trunk { pooled, attention })
}

/// Transformer hypernetwork on the preference tokens; output `[1, n]`.
pub fn forward_hyper_trans(tape: &mut Tape, p: &BoundParams, arch: &ArchitectureSpec, r: &[f64]) -> Result<NodeId> {
    let t = trunk(tape, p, arch, r, None)?;
    affine(tape, p, "head", t.pooled)
}

/// Transformer on joint `(r_i, a_i)` tokens; output `[1, n]`.
pub fn forward_joint(
    tape: &mut Tape,
    p: &BoundParams,
    arch: &ArchitectureSpec,
    r: &[f64],
    a: &[f64],
) -> Result<NodeId> {
    let t = trunk(tape, p, arch, r, Some(a))?;
    affine(tape, p, "head", t.pooled)
}

/// Shared trunk, then only expert `expert`'s head; output `[1, n]`.
pub fn forward_moe(
    tape: &mut Tape,
    p: &BoundParams,
    arch: &ArchitectureSpec,
    r: &[f64],
    expert: usize,
) -> Result<NodeId> {
    if expert >= arch.k {
        return Err(HypernetError::Expert { id: expert, k: arch.k });
    }
    let t = trunk(tape, p, arch, r, None)?;
    let h = affine(tape, p, &format!("expert.{expert}.1"), t.pooled)?;
    let h = act(tape, h, arch.activation)?;
    affine(tape, p, &format!("expert.{expert}.2"), h)
}

/// Dispatches on the architecture kind. `a` feeds only joint networks and
/// `expert` only MoE networks.
pub fn forward(
    tape: &mut Tape,
    p: &BoundParams,
    arch: &ArchitectureSpec,
    r: &[f64],
    a: &[f64],
    expert: Option<usize>,
) -> Result<NodeId> {
    if expert.is_some() && arch.kind != ArchKind::TransMoe {
        return Err(HypernetError::Unsupported { kind: arch.kind, what: "expert id" });
    }
    match arch.kind {
        ArchKind::Mlp => forward_hyper_mlp(tape, p, arch, r),
        ArchKind::Trans => forward_hyper_trans(tape, p, arch, r),
        ArchKind::TransJoint => forward_joint(tape, p, arch, r, a),
        ArchKind::TransMoe => {
            let id = match (expert, arch.k) {
                (Some(id), _) => id,
                (None, 1) => 0,
                (None, k) => return Err(HypernetError::Expert { id: k, k }),
            };
            forward_moe(tape, p, arch, r, id)
        }
    }
}

/// Maps raw outputs into the feasible decision set.
pub fn constraint_layer(tape: &mut Tape, raw: NodeId, kind: ConstraintKind) -> Result<NodeId> {
    let axis = tape.shape(raw).len() - 1;
    Ok(match kind {
        ConstraintKind::Nonneg => tape.relu(raw)?,
        ConstraintKind::Box01 => {
            let s = tape.sigmoid(raw)?;
            let s = tape.scale(s, 1.0 - 2.0 * BOX_MARGIN)?;
            tape.shift(s, BOX_MARGIN)?
        }
        ConstraintKind::Simplex => tape.softmax(raw, axis)?,
        ConstraintKind::SimplexSphere => {
            let s = tape.softmax(raw, axis)?;
            tape.sqrt(s)?
        }
    })
}

/// Constrained network output for one query, without gradients.
pub fn predict(bundle: &ParameterBundle, r: &[f64], a: &[f64], expert: Option<usize>) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let p = bundle.bind(&mut tape, false)?;
    let raw = forward(&mut tape, &p, &bundle.arch, r, a, expert)?;
    let x = constraint_layer(&mut tape, raw, bundle.arch.constraint)?;
    Ok(tape.value(x).to_vec())
}

/// Attention matrices (`[m, m]`, row-major, one per head) for a query.
pub fn attention_weights(bundle: &ParameterBundle, r: &[f64], a: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !bundle.arch.is_transformer() {
        return Err(HypernetError::Unsupported { kind: bundle.arch.kind, what: "attention" });
    }
    let mut tape = Tape::new();
    let p = bundle.bind(&mut tape, false)?;
    let joint = (bundle.arch.kind == ArchKind::TransJoint).then_some(a);
    let t = trunk(&mut tape, &p, &bundle.arch, r, joint)?;
    Ok(t.attention.iter().map(|&id| tape.value(id).to_vec()).collect())
}
