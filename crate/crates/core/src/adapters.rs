//! Adapter kernels: LoRA, IA3, prefix tuning, prompt tuning, sequential
//! bottleneck, and the sigmoid gate that scales each of them.
//!
//! Every kernel is a function over tape variables so it can be used both
//! inside the encoder and in isolation. Identity at initialization holds for
//! each kernel: a zero LoRA up-projection, all-ones IA3 vectors, a zero
//! bottleneck up-projection, or a closed prefix gate leave the input as is.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::params::ParamId;
use crate::tensor::Tensor;

/// Attention projections a LoRA member can adapt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoraTarget {
    Query,
    Value,
}

/// Activations an IA3 member rescales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ia3Target {
    Key,
    Value,
    FfnInner,
}

/// Declarative description of one adapter kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdapterSpec {
    Lora {
        r: usize,
        alpha: f64,
        targets: Vec<LoraTarget>,
        use_gating: bool,
    },
    Ia3 {
        targets: Vec<Ia3Target>,
        use_gating: bool,
    },
    Prefix {
        prefix_length: usize,
        reparam_hidden: usize,
        use_gating: bool,
    },
    Prompt {
        prompt_length: usize,
        #[serde(default)]
        use_gating: bool,
    },
    Seqbn {
        reduction_factor: usize,
        use_gating: bool,
    },
}

/// Sigmoid gate parameters: a `hidden`-wide weight and a one-element bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl GateParams {
    pub const fn param_count(hidden: usize) -> u64 {
        hidden as u64 + 1
    }
}

impl AdapterSpec {
    pub fn lora(alpha: f64) -> Self {
        AdapterSpec::Lora {
            r: 8,
            alpha,
            targets: alloc::vec![LoraTarget::Query, LoraTarget::Value],
            use_gating: true,
        }
    }

    pub fn ia3() -> Self {
        AdapterSpec::Ia3 {
            targets: alloc::vec![Ia3Target::Key, Ia3Target::Value, Ia3Target::FfnInner],
            use_gating: true,
        }
    }

    pub fn prefix() -> Self {
        AdapterSpec::Prefix {
            prefix_length: 10,
            reparam_hidden: 512,
            use_gating: true,
        }
    }

    pub fn prompt() -> Self {
        AdapterSpec::Prompt {
            prompt_length: 10,
            use_gating: false,
        }
    }

    pub fn seqbn() -> Self {
        AdapterSpec::Seqbn {
            reduction_factor: 16,
            use_gating: true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AdapterSpec::Lora { .. } => "lora",
            AdapterSpec::Ia3 { .. } => "ia3",
            AdapterSpec::Prefix { .. } => "prefix",
            AdapterSpec::Prompt { .. } => "prompt",
            AdapterSpec::Seqbn { .. } => "seqbn",
        }
    }

    pub fn use_gating(&self) -> bool {
        match *self {
            AdapterSpec::Lora { use_gating, .. }
            | AdapterSpec::Ia3 { use_gating, .. }
            | AdapterSpec::Prefix { use_gating, .. }
            | AdapterSpec::Prompt { use_gating, .. }
            | AdapterSpec::Seqbn { use_gating, .. } => use_gating,
        }
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        match self {
            AdapterSpec::Lora { r, alpha, targets, .. } => {
                if *r == 0 || *r > cfg.hidden {
                    return bad(format!("lora rank {r} must be in 1..={}", cfg.hidden));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return bad(format!("lora alpha {alpha} must be positive"));
                }
                if targets.is_empty() || has_duplicates(targets) {
                    return bad("lora targets must be a non-empty set".into());
                }
            }
            AdapterSpec::Ia3 { targets, .. } => {
                if targets.is_empty() || has_duplicates(targets) {
                    return bad("ia3 targets must be a non-empty set".into());
                }
            }
            AdapterSpec::Prefix {
                prefix_length,
                reparam_hidden,
                ..
            } => {
                if *prefix_length == 0 || *reparam_hidden == 0 {
                    return bad("prefix_length and reparam_hidden must be positive".into());
                }
            }
            AdapterSpec::Prompt {
                prompt_length,
                use_gating,
            } => {
                if *prompt_length == 0 {
                    return bad("prompt_length must be positive".into());
                }
                if *use_gating {
                    return bad("prompt tuning has no gate".into());
                }
                if *prompt_length >= cfg.max_sequence() {
                    return bad(format!(
                        "prompt_length {prompt_length} leaves no room within {} positions",
                        cfg.max_sequence()
                    ));
                }
            }
            AdapterSpec::Seqbn {
                reduction_factor, ..
            } => {
                if *reduction_factor == 0 || cfg.hidden % reduction_factor != 0 {
                    return bad(format!(
                        "reduction_factor {reduction_factor} does not divide hidden {}",
                        cfg.hidden
                    ));
                }
            }
        }
        Ok(())
    }

    /// Gates this member carries in each layer.
    pub fn gates_per_layer(&self) -> usize {
        if !self.use_gating() {
            return 0;
        }
        match self {
            AdapterSpec::Lora { targets, .. } => targets.len(),
            AdapterSpec::Ia3 { targets, .. } => targets.len(),
            AdapterSpec::Prefix { .. } | AdapterSpec::Seqbn { .. } => 1,
            AdapterSpec::Prompt { .. } => 0,
        }
    }

    /// Closed-form count of the member's own parameters, gates excluded.
    pub fn kernel_param_count(&self, cfg: &ModelConfig) -> u64 {
        let l = cfg.num_layers as u64;
        let h = cfg.hidden as u64;
        let f = cfg.ffn_inner as u64;
        match self {
            AdapterSpec::Lora { r, targets, .. } => l * targets.len() as u64 * 2 * (*r as u64) * h,
            AdapterSpec::Ia3 { targets, .. } => {
                let per_layer: u64 = targets
                    .iter()
                    .map(|t| match t {
                        Ia3Target::Key | Ia3Target::Value => h,
                        Ia3Target::FfnInner => f,
                    })
                    .sum();
                l * per_layer
            }
            AdapterSpec::Prefix {
                prefix_length,
                reparam_hidden,
                ..
            } => {
                let (p, rh) = (*prefix_length as u64, *reparam_hidden as u64);
                let out = 2 * l * h;
                p * h + (h * rh + rh) + (rh * out + out)
            }
            AdapterSpec::Prompt { prompt_length, .. } => *prompt_length as u64 * h,
            AdapterSpec::Seqbn {
                reduction_factor, ..
            } => {
                let b = h / *reduction_factor as u64;
                l * ((h * b + b) + (b * h + h))
            }
        }
    }

    /// Closed-form count of the member's gate parameters.
    pub fn gate_param_count(&self, cfg: &ModelConfig) -> u64 {
        cfg.num_layers as u64 * self.gates_per_layer() as u64 * GateParams::param_count(cfg.hidden)
    }
}

fn has_duplicates<T: Ord + Clone>(items: &[T]) -> bool {
    let mut v = items.to_vec();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

/// Per-example gate in (0, 1): sigmoid of the mean over attendable positions
/// of `x·w + b`.
///
/// `x` is `[B, T, H]`, `mask` is `B × T`, `weight` is `[H]`, `bias` is `[1]`.
pub fn gate_value(tape: &mut Tape, x: Var, mask: &[bool], weight: Var, bias: Var) -> Result<Var> {
    let sx = tape.shape(x).to_vec();
    if sx.len() != 3 || mask.len() != sx[0] * sx[1] {
        return Err(Error::dim("gate_value", &sx, &[mask.len()]));
    }
    let (b, t, h) = (sx[0], sx[1], sx[2]);
    if tape.shape(weight) != [h] || tape.value(bias).len() != 1 {
        return Err(Error::dim("gate_value", &[h + 1], tape.shape(weight)));
    }
    let mut weights = Vec::with_capacity(b * t);
    for row in mask.chunks(t) {
        let count = row.iter().filter(|&&m| m).count().max(1) as f64;
        weights.extend(row.iter().map(|&m| if m { 1.0 / count } else { 0.0 }));
    }
    let pool = tape.constant(Tensor::new(&[b, t], weights)?);
    let w = tape.reshape(weight, &[h, 1])?;
    let z = tape.matmul(x, w)?;
    let z = tape.reshape(z, &[b, t])?;
    let z = tape.mul(z, pool)?;
    let z = tape.sum_last(z)?;
    let bias = tape.reshape(bias, &[])?;
    let z = tape.add(z, bias)?;
    Ok(tape.sigmoid(z))
}

/// `base_out + gate · (alpha / r) · (x Aᵀ) Bᵀ` with `A[r, H]`, `B[H, r]`.
#[allow(clippy::too_many_arguments)]
pub fn lora_apply(
    tape: &mut Tape,
    x: Var,
    base_out: Var,
    a: Var,
    b: Var,
    alpha: f64,
    r: usize,
    gate: Option<Var>,
) -> Result<Var> {
    let hidden = *tape.shape(x).last().unwrap_or(&0);
    if r == 0 || r > hidden {
        return Err(Error::Config(format!("lora rank {r} must be in 1..={hidden}")));
    }
    if tape.shape(a).first() != Some(&r) || tape.shape(b).last() != Some(&r) {
        return Err(Error::dim("lora_apply", tape.shape(a), tape.shape(b)));
    }
    let down = tape.matmul_nt(x, a)?;
    let up = tape.matmul_nt(down, b)?;
    let mut delta = tape.scale(up, alpha / r as f64);
    if let Some(g) = gate {
        delta = tape.scale_rows(delta, g)?;
    }
    tape.add(base_out, delta)
}

/// Rescales the last axis of `act` by `scale`; a gate interpolates between the
/// original and the rescaled activation.
pub fn ia3_apply(tape: &mut Tape, act: Var, scale: Var, gate: Option<Var>) -> Result<Var> {
    let width = tape.shape(act).last().copied();
    if width != Some(tape.value(scale).len()) || tape.shape(scale).len() != 1 {
        return Err(Error::dim("ia3_apply", tape.shape(act), tape.shape(scale)));
    }
    let rescaled = tape.mul(act, scale)?;
    match gate {
        None => Ok(rescaled),
        Some(g) => {
            let delta = tape.sub(rescaled, act)?;
            let delta = tape.scale_rows(delta, g)?;
            tape.add(act, delta)
        }
    }
}

/// Expands prefix embeddings `[P, H]` through `tanh(e W1ᵀ + b1) W2ᵀ + b2`
/// into per-layer key and value prefixes `[L, 2, P, H]`.
pub fn prefix_expand(
    tape: &mut Tape,
    emb: Var,
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
    num_layers: usize,
) -> Result<Var> {
    let se = tape.shape(emb).to_vec();
    if se.len() != 2 {
        return Err(Error::dim("prefix_expand", &se, &[]));
    }
    let (p, h) = (se[0], se[1]);
    let out_width = tape.shape(w2).first().copied().unwrap_or(0);
    if out_width != 2 * num_layers * h {
        return Err(Error::dim("prefix_expand", &[2 * num_layers * h], tape.shape(w2)));
    }
    let hid = tape.matmul_nt(emb, w1)?;
    let hid = tape.add(hid, b1)?;
    let hid = tape.tanh(hid);
    let out = tape.matmul_nt(hid, w2)?;
    let out = tape.add(out, b2)?;
    let out = tape.reshape(out, &[p, num_layers, 2, h])?;
    tape.permute(out, &[1, 2, 0, 3])
}

/// Prepends prompt rows `[P, H]` to every sequence of `emb[B, S, H]` and
/// extends the `B × S` mask with `P` attendable positions.
pub fn prompt_prepend(
    tape: &mut Tape,
    emb: Var,
    prompt: Var,
    mask: &[bool],
    max_sequence: usize,
) -> Result<(Var, Vec<bool>)> {
    let se = tape.shape(emb).to_vec();
    let sp = tape.shape(prompt).to_vec();
    if se.len() != 3 || sp.len() != 2 || sp[1] != se[2] || mask.len() != se[0] * se[1] {
        return Err(Error::dim("prompt_prepend", &se, &sp));
    }
    let (b, s, p) = (se[0], se[1], sp[0]);
    if p + s > max_sequence {
        return Err(Error::Input(format!(
            "prompt of {p} plus sequence of {s} exceeds {max_sequence} positions"
        )));
    }
    if p == 0 {
        return Ok((emb, mask.to_vec()));
    }
    let rows = tape.broadcast_leading(prompt, b);
    let out = tape.concat(rows, emb, 1)?;
    let mut ext = Vec::with_capacity(b * (p + s));
    for row in mask.chunks(s.max(1)) {
        ext.extend(core::iter::repeat(true).take(p));
        ext.extend_from_slice(row);
    }
    Ok((out, ext))
}

/// `h + gate · up(gelu(down(h)))` with linear `down: H → H/rf` and
/// `up: H/rf → H`.
pub fn seqbn_apply(
    tape: &mut Tape,
    h: Var,
    down_w: Var,
    down_b: Var,
    up_w: Var,
    up_b: Var,
    gate: Option<Var>,
) -> Result<Var> {
    let z = tape.matmul_nt(h, down_w)?;
    let z = tape.add(z, down_b)?;
    let z = tape.gelu(z);
    let z = tape.matmul_nt(z, up_w)?;
    let mut z = tape.add(z, up_b)?;
    if let Some(g) = gate {
        z = tape.scale_rows(z, g)?;
    }
    tape.add(h, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = crate::tensor::numel(shape);
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn base() -> ModelConfig {
        ModelConfig::roberta_base()
    }

    #[test]
    fn paper_kernel_counts() {
        let cfg = base();
        assert_eq!(AdapterSpec::lora(8.0).kernel_param_count(&cfg), 294_912);
        assert_eq!(AdapterSpec::ia3().kernel_param_count(&cfg), 55_296);
        assert_eq!(AdapterSpec::prefix().kernel_param_count(&cfg), 9_857_024);
        assert_eq!(AdapterSpec::prefix().kernel_param_count(&cfg), 7_680 + 393_728 + 9_455_616);
        assert_eq!(AdapterSpec::seqbn().kernel_param_count(&cfg), 894_528);
        assert_eq!(AdapterSpec::seqbn().kernel_param_count(&cfg), 12 * (36_912 + 37_632));
        assert_eq!(AdapterSpec::prompt().kernel_param_count(&cfg), 7_680);
        assert_eq!(AdapterSpec::prompt().gate_param_count(&cfg), 0);
        assert_eq!(GateParams::param_count(768), 769);
        assert_eq!(AdapterSpec::lora(2.0).gate_param_count(&cfg), 18_456);
        assert_eq!(AdapterSpec::ia3().gate_param_count(&cfg), 27_684);
    }

    #[test]
    fn validation_errors() {
        let cfg = ModelConfig::tiny();
        let bad_rank = AdapterSpec::Lora {
            r: 17,
            alpha: 8.0,
            targets: alloc::vec![LoraTarget::Query],
            use_gating: true,
        };
        assert!(matches!(bad_rank.validate(&cfg), Err(Error::Config(_))));
        let bad_rf = AdapterSpec::Seqbn {
            reduction_factor: 3,
            use_gating: true,
        };
        assert!(bad_rf.validate(&cfg).is_err());
        let gated_prompt = AdapterSpec::Prompt {
            prompt_length: 4,
            use_gating: true,
        };
        assert!(gated_prompt.validate(&cfg).is_err());
        AdapterSpec::seqbn().validate(&cfg).unwrap();
    }

    #[test]
    fn gate_zero_params_is_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new();
        let x = tape.constant(rand_t(&mut rng, &[2, 3, 4]));
        let w = tape.constant(Tensor::zeros(&[4]));
        let b = tape.constant(Tensor::zeros(&[1]));
        let g = gate_value(&mut tape, x, &[true; 6], w, b).unwrap();
        assert_eq!(tape.value(g).data(), &[0.5, 0.5]);
    }

    #[test]
    fn gate_ignores_masked_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let xs = rand_t(&mut rng, &[1, 3, 4]);
        let mut ys = xs.clone();
        for v in &mut ys.data_mut()[8..] {
            *v = 100.0;
        }
        let w = tape.constant(rand_t(&mut rng, &[4]));
        let b = tape.constant(Tensor::new(&[1], alloc::vec![0.3]).unwrap());
        let mask = [true, true, false];
        let x = tape.constant(xs);
        let y = tape.constant(ys);
        let gx = gate_value(&mut tape, x, &mask, w, b).unwrap();
        let gy = gate_value(&mut tape, y, &mask, w, b).unwrap();
        assert_eq!(tape.value(gx), tape.value(gy));
        let v = tape.value(gx).data()[0];
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn lora_zero_b_is_identity_and_alpha_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut tape = Tape::new();
        let x = tape.constant(rand_t(&mut rng, &[2, 3, 8]));
        let base_out = tape.constant(rand_t(&mut rng, &[2, 3, 8]));
        let a = tape.constant(rand_t(&mut rng, &[4, 8]));
        let zero_b = tape.constant(Tensor::zeros(&[8, 4]));
        let out = lora_apply(&mut tape, x, base_out, a, zero_b, 8.0, 4, None).unwrap();
        assert!(tape.value(out).bits_eq(tape.value(base_out)));

        let b = tape.constant(rand_t(&mut rng, &[8, 4]));
        let gate = tape.constant(Tensor::new(&[2], alloc::vec![0.25, 0.75]).unwrap());
        let o8 = lora_apply(&mut tape, x, base_out, a, b, 8.0, 4, Some(gate)).unwrap();
        let o2 = lora_apply(&mut tape, x, base_out, a, b, 2.0, 4, Some(gate)).unwrap();
        let base_v = tape.value(base_out).data();
        for ((p, q), o) in tape.value(o8).data().iter().zip(tape.value(o2).data()).zip(base_v) {
            let (d8, d2) = (p - o, q - o);
            assert!((d8 - 4.0 * d2).abs() <= 1e-12 * d8.abs().max(1.0));
        }

        let big = tape.constant(Tensor::zeros(&[9, 8]));
        assert!(matches!(
            lora_apply(&mut tape, x, base_out, big, b, 8.0, 9, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ia3_identity_and_gate_endpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tape = Tape::new();
        let act = tape.constant(rand_t(&mut rng, &[2, 3, 5]));
        let ones = tape.constant(Tensor::ones(&[5]));
        let out = ia3_apply(&mut tape, act, ones, None).unwrap();
        assert!(tape.value(out).bits_eq(tape.value(act)));
        let l = tape.constant(rand_t(&mut rng, &[5]));
        let zero = tape.constant(Tensor::zeros(&[2]));
        let out = ia3_apply(&mut tape, act, l, Some(zero)).unwrap();
        assert!(tape.value(out).bits_eq(tape.value(act)));
        let bad = tape.constant(Tensor::ones(&[4]));
        assert!(matches!(ia3_apply(&mut tape, act, bad, None), Err(Error::Dimension { .. })));
    }

    #[test]
    fn prefix_expand_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, h, r, l) = (3, 4, 5, 2);
        let mut tape = Tape::new();
        let emb = tape.constant(rand_t(&mut rng, &[p, h]));
        let w1 = tape.constant(rand_t(&mut rng, &[r, h]));
        let b1 = tape.constant(rand_t(&mut rng, &[r]));
        let w2 = tape.constant(rand_t(&mut rng, &[2 * l * h, r]));
        let b2 = tape.constant(rand_t(&mut rng, &[2 * l * h]));
        let out = prefix_expand(&mut tape, emb, w1, b1, w2, b2, l).unwrap();
        assert_eq!(tape.shape(out), &[l, 2, p, h]);
        // entry [layer 1, value, row 2, col 3] is column (1*2+1)*h+3 of row 2
        let hid: std::vec::Vec<f64> = (0..r)
            .map(|i| {
                let e = tape.value(emb).row(2);
                let w = tape.value(w1).row(i);
                (e.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + tape.value(b1).data()[i]).tanh()
            })
            .collect();
        let col = 3 * h + 3;
        let expect: f64 = hid
            .iter()
            .zip(tape.value(w2).row(col))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + tape.value(b2).data()[col];
        let got = tape.value(out).data()[((l + 1) * p + 2) * h + 3];
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn prompt_prepend_mask_and_empty_prompt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tape = Tape::new();
        let emb = tape.constant(rand_t(&mut rng, &[2, 3, 4]));
        let prompt = tape.constant(rand_t(&mut rng, &[2, 4]));
        let mask = [true, true, false, true, false, false];
        let (out, ext) = prompt_prepend(&mut tape, emb, prompt, &mask, 62).unwrap();
        assert_eq!(tape.shape(out), &[2, 5, 4]);
        assert_eq!(ext, [true, true, true, true, false, true, true, true, false, false]);
        assert_eq!(&tape.value(out).data()[20..28], tape.value(prompt).data());

        let empty = tape.constant(Tensor::zeros(&[0, 4]));
        let (out, ext) = prompt_prepend(&mut tape, emb, empty, &mask, 62).unwrap();
        assert_eq!(out, emb);
        assert_eq!(ext, mask);

        assert!(matches!(
            prompt_prepend(&mut tape, emb, prompt, &mask, 4),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn seqbn_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut tape = Tape::new();
        let h = tape.constant(rand_t(&mut rng, &[2, 3, 8]));
        let dw = tape.constant(rand_t(&mut rng, &[2, 8]));
        let db = tape.constant(rand_t(&mut rng, &[2]));
        let uw0 = tape.constant(Tensor::zeros(&[8, 2]));
        let ub0 = tape.constant(Tensor::zeros(&[8]));
        let out = seqbn_apply(&mut tape, h, dw, db, uw0, ub0, None).unwrap();
        assert!(tape.value(out).bits_eq(tape.value(h)));
        let uw = tape.constant(rand_t(&mut rng, &[8, 2]));
        let ub = tape.constant(rand_t(&mut rng, &[8]));
        let zero = tape.constant(Tensor::zeros(&[2]));
        let out = seqbn_apply(&mut tape, h, dw, db, uw, ub, Some(zero)).unwrap();
        assert!(tape.value(out).bits_eq(tape.value(h)));
        let out = seqbn_apply(&mut tape, h, dw, db, uw, ub, None).unwrap();
        assert!(!tape.value(out).bits_eq(tape.value(h)));
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let cfg = AdapterSpec::lora(2.0);
        assert_eq!(cfg.kind(), "lora");
        assert!(cfg.use_gating());
        assert_eq!(cfg.gates_per_layer(), 2);
        assert_eq!(AdapterSpec::ia3().gates_per_layer(), 3);
        assert_eq!(AdapterSpec::prompt().gates_per_layer(), 0);
    }
}
