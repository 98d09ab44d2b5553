//! Property suites runnable at tiny shapes: gradients, identity at
//! initialization, the freeze contract, and the parameter census.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapters::{self, AdapterSpec, Ia3Target, LoraTarget};
use crate::autograd::{KeySegment, Tape, Var};
use crate::census::{census_diff, count_base, count_composition};
use crate::composition::{attach, build_preset, AdaptedModel, CompositionSpec, ParamRole, PRESET_NAMES};
use crate::config::{ModelConfig, TaskHead};
use crate::encoder::{init_model, Batch, ForwardOptions, GateOverride, Targets};
use crate::error::{Error, Result};
use crate::params::{normal, ParamId};
use crate::synthetic::pattern_classification;
use crate::tensor::Tensor;
use crate::train::{loss_and_grads, loss_value, train_steps, TrainConfig};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-3;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const FREEZE_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Grad,
    Identity,
    Freeze,
    Census,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Grad, Suite::Identity, Suite::Freeze, Suite::Census];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Grad => "grad",
            Suite::Identity => "identity",
            Suite::Freeze => "freeze",
            Suite::Census => "census",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Usage(format!("unknown suite `{name}`; valid suites: grad, identity, freeze, census")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity (error, delta, or count), when one applies.
    pub value: f64,
    pub detail: String,
}

impl Check {
    fn bound(name: String, value: f64, limit: f64) -> Self {
        Check {
            passed: value < limit,
            detail: format!("{value:.3e} (limit {limit:.0e})"),
            name,
            value,
        }
    }

    fn exact(name: String, got: i128, want: i128) -> Self {
        Check {
            passed: got == want,
            detail: format!("got {got}, want {want}"),
            name,
            value: got as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Largest measured value across checks.
    pub fn max_value(&self) -> f64 {
        self.checks.iter().map(|c| c.value).fold(0.0, f64::max)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Grad => grad_suite(seed)?,
        Suite::Identity => identity_suite(seed)?,
        Suite::Freeze => freeze_suite(seed)?,
        Suite::Census => census_suite(seed)?,
    };
    Ok(SuiteReport { suite, checks })
}

/// Norm sum below which gradients are treated as exactly zero; central
/// differences cannot resolve anything smaller.
pub const GRAD_NORM_FLOOR: f64 = 1e-10;

/// `‖a − n‖ / max(‖a‖ + ‖n‖, GRAD_NORM_FLOOR)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum());
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    diff / scale.max(GRAD_NORM_FLOOR)
}

type Build<'a> = &'a dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

/// Largest per-input relative error between backprop and central
/// differences of `Σ w ∘ build(inputs)` for fixed random weights `w`.
pub fn tape_gradcheck(inputs: &[Tensor], build: Build<'_>, seed: u64) -> Result<f64> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars)?;
    let out_shape = tape.shape(out).to_vec();
    let weights = normal(&mut ChaCha8Rng::seed_from_u64(seed), &out_shape, 1.0);
    let reduce = |tape: &mut Tape, out: Var| -> Result<Var> {
        let w = tape.constant(weights.clone());
        let p = tape.mul(out, w)?;
        Ok(tape.sum(p))
    };
    let loss = reduce(&mut tape, out)?;
    let grads = tape.backward(loss)?;
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
        let o = build(&mut t, &vs)?;
        let l = reduce(&mut t, o)?;
        Ok(t.value(l).data()[0])
    };
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .map_or_else(|| vec![0.0; inputs[k].len()], |g| g.data().to_vec());
        let mut numeric = Vec::with_capacity(inputs[k].len());
        let mut probe = inputs.to_vec();
        for i in 0..inputs[k].len() {
            let x0 = inputs[k].data()[i];
            probe[k].data_mut()[i] = x0 + FD_STEP;
            let up = eval(&probe)?;
            probe[k].data_mut()[i] = x0 - FD_STEP;
            let down = eval(&probe)?;
            probe[k].data_mut()[i] = x0;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> Tensor {
    normal(rng, shape, std)
}

fn unit_interval(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    Tensor::new(&[n], (0..n).map(|_| rng.random_range(0.1..0.9)).collect()).expect("1-d")
}

/// Gradient checks of every adapter kernel on small random inputs.
pub fn kernel_gradchecks(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, t, h, r) = (2, 3, 4, 2);
    let mask = vec![true, true, false, true, true, true];
    let mut out = Vec::new();

    let inputs = [rand_t(&mut rng, &[b, t, h], 1.0), rand_t(&mut rng, &[h], 0.5), rand_t(&mut rng, &[1], 0.5)];
    let m = mask.clone();
    let f = move |tp: &mut Tape, v: &[Var]| adapters::gate_value(tp, v[0], &m, v[1], v[2]);
    out.push(("gate", tape_gradcheck(&inputs, &f, seed)?));

    let inputs = [
        rand_t(&mut rng, &[b, t, h], 1.0),
        rand_t(&mut rng, &[b, t, h], 1.0),
        rand_t(&mut rng, &[r, h], 0.5),
        rand_t(&mut rng, &[h, r], 0.5),
        unit_interval(&mut rng, b),
    ];
    let f = |tp: &mut Tape, v: &[Var]| adapters::lora_apply(tp, v[0], v[1], v[2], v[3], 2.0, r, Some(v[4]));
    out.push(("lora", tape_gradcheck(&inputs, &f, seed)?));

    let inputs = [rand_t(&mut rng, &[b, t, h], 1.0), rand_t(&mut rng, &[h], 1.0), unit_interval(&mut rng, b)];
    let f = |tp: &mut Tape, v: &[Var]| adapters::ia3_apply(tp, v[0], v[1], Some(v[2]));
    out.push(("ia3", tape_gradcheck(&inputs, &f, seed)?));

    let (p, rh, layers) = (2, 5, 2);
    let inputs = [
        rand_t(&mut rng, &[p, h], 1.0),
        rand_t(&mut rng, &[rh, h], 0.5),
        rand_t(&mut rng, &[rh], 0.5),
        rand_t(&mut rng, &[2 * layers * h, rh], 0.5),
        rand_t(&mut rng, &[2 * layers * h], 0.5),
    ];
    let f = |tp: &mut Tape, v: &[Var]| adapters::prefix_expand(tp, v[0], v[1], v[2], v[3], v[4], layers);
    out.push(("prefix", tape_gradcheck(&inputs, &f, seed)?));

    let inputs = [rand_t(&mut rng, &[b, t, h], 1.0), rand_t(&mut rng, &[p, h], 1.0)];
    let m = mask.clone();
    let f = move |tp: &mut Tape, v: &[Var]| adapters::prompt_prepend(tp, v[0], v[1], &m, 16).map(|(x, _)| x);
    out.push(("prompt", tape_gradcheck(&inputs, &f, seed)?));

    let w = 2;
    let inputs = [
        rand_t(&mut rng, &[b, t, h], 1.0),
        rand_t(&mut rng, &[w, h], 0.5),
        rand_t(&mut rng, &[w], 0.5),
        rand_t(&mut rng, &[h, w], 0.5),
        rand_t(&mut rng, &[h], 0.5),
        unit_interval(&mut rng, b),
    ];
    let f = |tp: &mut Tape, v: &[Var]| adapters::seqbn_apply(tp, v[0], v[1], v[2], v[3], v[4], Some(v[5]));
    out.push(("seqbn", tape_gradcheck(&inputs, &f, seed)?));

    // gated prefix attention: 2 prefix keys then 3 sequence keys
    let n = p + t;
    let key_mask: Vec<bool> = (0..b).flat_map(|_| [true, true, true, true, false]).collect();
    let inputs = [rand_t(&mut rng, &[b, 1, t, n], 1.0), unit_interval(&mut rng, b)];
    let f = move |tp: &mut Tape, v: &[Var]| {
        let segs = [KeySegment { len: p, gate: Some(v[1]) }];
        tp.attn_softmax(v[0], &key_mask, &segs)
    };
    out.push(("prefix-attention", tape_gradcheck(&inputs, &f, seed)?));
    Ok(out)
}

/// A tiny model with a two-class head and `spec` attached.
pub fn tiny_adapted(cfg: &ModelConfig, spec: &CompositionSpec, seed: u64) -> Result<AdaptedModel> {
    let model = init_model(cfg, Some(TaskHead::Classifier { classes: 2 }), seed)?;
    attach(model, spec, seed.wrapping_add(1))
}

/// A small nondegenerate classification batch. Labels agree so that the
/// per-example loss gradients do not cancel.
pub fn probe_batch(cfg: &ModelConfig, seed: u64) -> Result<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lens = [6, 4, 5];
    let seqs: Vec<Vec<usize>> = lens
        .iter()
        .map(|&n| (0..n).map(|_| rng.random_range(4..cfg.vocab_size)).collect())
        .collect();
    Batch::from_sequences(&seqs, None, Targets::Classes(vec![1, 1, 1]))
}

/// Moves every trainable tensor off its initialization so that no gradient
/// path is blocked by a zero factor.
pub fn perturb_trainable(model: &mut AdaptedModel, std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ParamId> = model.trainable_parameters().iter().map(|p| p.id).collect();
    for id in ids {
        let t = model.store_mut().value_mut(id);
        let noise = normal(&mut rng, t.shape(), std);
        for (x, e) in t.data_mut().iter_mut().zip(noise.data()) {
            *x += e;
        }
    }
}

/// Adds normal noise to every tensor, frozen ones included, moving the
/// model to a generic point where attention is far from uniform.
pub fn perturb_all(model: &mut AdaptedModel, std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ParamId> = model.store().ids().collect();
    for id in ids {
        let t = model.store_mut().value_mut(id);
        let noise = normal(&mut rng, t.shape(), std);
        for (x, e) in t.data_mut().iter_mut().zip(noise.data()) {
            *x += e;
        }
    }
}

/// Relative error of the full adapted model's loss gradient, sampling up to
/// `per_tensor` coordinates of each trainable tensor.
pub fn model_gradcheck(model: &AdaptedModel, batch: &Batch, per_tensor: usize, seed: u64) -> Result<f64> {
    Ok(model_gradcheck_by_tensor(model, batch, per_tensor, seed)?
        .iter()
        .map(|(_, e)| *e)
        .fold(0.0, f64::max))
}

/// Per-tensor relative errors behind [`model_gradcheck`].
pub fn model_gradcheck_by_tensor(
    model: &AdaptedModel,
    batch: &Batch,
    per_tensor: usize,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    let opts = ForwardOptions::eval();
    let (_, analytic) = loss_and_grads(model, batch, opts)?;
    let params = model.trainable_parameters();
    let loss_at = |m: &AdaptedModel| loss_value(m, batch, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(params.len());
    for p in params {
        let grad = analytic.iter().find(|(id, _)| *id == p.id).and_then(|(_, g)| g.clone());
        let picks: Vec<usize> = if p.numel <= per_tensor {
            (0..p.numel).collect()
        } else {
            (0..per_tensor).map(|_| rng.random_range(0..p.numel)).collect()
        };
        let mut a = Vec::with_capacity(picks.len());
        let mut n = Vec::with_capacity(picks.len());
        for &i in &picks {
            a.push(grad.as_ref().map_or(0.0, |g| g.data()[i]));
            let x0 = probe.store().value(p.id).data()[i];
            probe.store_mut().value_mut(p.id).data_mut()[i] = x0 + FD_STEP;
            let up = loss_at(&probe)?;
            probe.store_mut().value_mut(p.id).data_mut()[i] = x0 - FD_STEP;
            let down = loss_at(&probe)?;
            probe.store_mut().value_mut(p.id).data_mut()[i] = x0;
            n.push((up - down) / (2.0 * FD_STEP));
        }
        out.push((p.name, relative_error(&a, &n)));
    }
    Ok(out)
}

fn grad_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks: Vec<Check> = kernel_gradchecks(seed)?
        .into_iter()
        .map(|(name, e)| Check::bound(format!("kernel {name}"), e, GRAD_TOLERANCE))
        .collect();
    let cfg = ModelConfig::tiny();
    let batch = probe_batch(&cfg, seed)?;
    for name in PRESET_NAMES {
        let mut model = tiny_adapted(&cfg, &build_preset(name)?, seed)?;
        perturb_trainable(&mut model, 0.05, seed ^ 0x5eed);
        perturb_all(&mut model, 0.05, seed ^ 0xa11);
        let e = model_gradcheck(&model, &batch, 4, seed)?;
        checks.push(Check::bound(format!("model {name}"), e, GRAD_TOLERANCE));
    }
    Ok(checks)
}

/// Logits of the comparison model for the identity property: the bare
/// model, or the bare model with only the prompt rows when `spec` has a
/// prompt (the prompt is ungated and has no pass-through endpoint).
pub fn identity_reference(base: &crate::encoder::EncoderModel, spec: &CompositionSpec, attach_seed: u64, batch: &Batch) -> Result<Tensor> {
    match spec.prompt_member() {
        None => base.classify(batch),
        Some(p) => {
            let only = CompositionSpec {
                name: "prompt-only".into(),
                stack_depth: 1,
                members: vec![p.clone()],
            };
            attach(base.clone(), &only, attach_seed)?.classify(batch)
        }
    }
}

/// Max-abs logit deltas `(all gates closed, only prefix gates closed)` for
/// one preset.
pub fn identity_deltas(cfg: &ModelConfig, spec: &CompositionSpec, seed: u64) -> Result<(f64, f64)> {
    let base = init_model(cfg, Some(TaskHead::Classifier { classes: 2 }), seed)?;
    let batch = probe_batch(cfg, seed)?;
    let attach_seed = seed.wrapping_add(1);
    let reference = identity_reference(&base, spec, attach_seed, &batch)?;
    let adapted = attach(base, spec, attach_seed)?;
    let delta = |gates| -> Result<f64> {
        let opts = ForwardOptions { gates, ..ForwardOptions::eval() };
        let got = adapted.classify_with(&batch, opts)?;
        got.max_abs_diff(&reference)
            .ok_or_else(|| Error::dim("identity", got.shape(), reference.shape()))
    };
    Ok((delta(GateOverride::pass_through())?, delta(GateOverride::prefix_closed())?))
}

fn identity_suite(seed: u64) -> Result<Vec<Check>> {
    let cfg = ModelConfig::tiny();
    let mut checks = Vec::new();
    for name in PRESET_NAMES {
        let (closed, free) = identity_deltas(&cfg, &build_preset(name)?, seed)?;
        checks.push(Check::bound(format!("{name} gates closed"), closed, IDENTITY_TOLERANCE));
        checks.push(Check::bound(format!("{name} free non-prefix gates"), free, IDENTITY_TOLERANCE));
    }
    Ok(checks)
}

/// Outcome of the freeze contract for one preset: names of backbone tensors
/// that moved and of trainable tensors that did not.
pub fn freeze_violations(cfg: &ModelConfig, spec: &CompositionSpec, steps: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let mut model = tiny_adapted(cfg, spec, seed)?;
    let before = model.store().clone();
    let data = pattern_classification(32, seed);
    let tc = TrainConfig {
        learning_rate: 5e-4,
        seed,
        ..TrainConfig::default()
    };
    train_steps(&mut model, &data, &tc, steps)?;
    let mut moved = Vec::new();
    let mut stuck = Vec::new();
    for (id, p) in model.store().iter() {
        let same = p.value.bits_eq(before.value(id));
        if model.model().is_backbone(id) && !same {
            moved.push(p.name.clone());
        }
        if p.trainable && same && !model.model().is_head(id) {
            stuck.push(p.name.clone());
        }
    }
    Ok((moved, stuck))
}

fn freeze_suite(seed: u64) -> Result<Vec<Check>> {
    let cfg = ModelConfig::tiny();
    let mut checks = Vec::new();
    for name in PRESET_NAMES {
        let (moved, stuck) = freeze_violations(&cfg, &build_preset(name)?, FREEZE_STEPS, seed)?;
        checks.push(Check {
            name: format!("{name} backbone frozen"),
            passed: moved.is_empty(),
            value: moved.len() as f64,
            detail: moved.first().map_or("bit-identical".into(), |n| format!("`{n}` changed")),
        });
        checks.push(Check {
            name: format!("{name} adapters updated"),
            passed: stuck.is_empty(),
            value: stuck.len() as f64,
            detail: stuck.first().map_or("all changed".into(), |n| format!("`{n}` unchanged")),
        });
    }
    Ok(checks)
}

/// Reference roberta-base census: preset, trainable total, %Param label.
pub const REFERENCE_TOTALS: [(&str, u64, &str); 6] = [
    ("unipelt-lib", 11_083_376, "8.892"),
    ("unipelt-paper", 11_083_376, "8.892"),
    ("pt-unipelt-lib", 11_091_056, "8.898"),
    ("pt-unipelt-paper", 11_091_056, "8.898"),
    ("ia3-prefix-seqbn", 10_852_988, "8.707"),
    ("unipelt-stack3", 33_250_128, "26.68"),
];
pub const REFERENCE_BASE: u64 = 124_645_632;

/// A random small model config.
pub fn random_tiny_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let heads = rng.random_range(1..=3);
    let hidden = heads * rng.random_range(1..=4) * 2;
    ModelConfig {
        num_layers: rng.random_range(1..=3),
        hidden,
        num_heads: heads,
        ffn_inner: rng.random_range(2..=24),
        vocab_size: rng.random_range(8..=60),
        max_positions: rng.random_range(16..=40),
        type_vocab: rng.random_range(1..=2),
        dropout: 0.1,
        layer_norm_eps: 1e-5,
        initializer_range: 0.02,
    }
}

/// A random composition valid for `cfg`.
pub fn random_spec(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> CompositionSpec {
    let depth = rng.random_range(1..=3);
    let mut members = Vec::new();
    let mut gated = || rng.random_bool(0.7);
    let flags: Vec<bool> = (0..5).map(|_| gated()).collect();
    if rng.random_bool(0.6) {
        let mut targets = vec![];
        if rng.random_bool(0.7) {
            targets.push(LoraTarget::Query);
        }
        if targets.is_empty() || rng.random_bool(0.7) {
            targets.push(LoraTarget::Value);
        }
        members.push(AdapterSpec::Lora {
            r: rng.random_range(1..=cfg.hidden.min(4)),
            alpha: rng.random_range(1.0..16.0),
            targets,
            use_gating: flags[0],
        });
    }
    if rng.random_bool(0.5) {
        let all = [Ia3Target::Key, Ia3Target::Value, Ia3Target::FfnInner];
        let mut targets: Vec<Ia3Target> = all.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        if targets.is_empty() {
            targets.push(Ia3Target::FfnInner);
        }
        members.push(AdapterSpec::Ia3 { targets, use_gating: flags[1] });
    }
    if rng.random_bool(0.6) {
        members.push(AdapterSpec::Prefix {
            prefix_length: rng.random_range(1..=4),
            reparam_hidden: rng.random_range(1..=16),
            use_gating: flags[2],
        });
    }
    if rng.random_bool(0.6) {
        let divisors: Vec<usize> = (1..=cfg.hidden).filter(|d| cfg.hidden % d == 0).collect();
        members.push(AdapterSpec::Seqbn {
            reduction_factor: divisors[rng.random_range(0..divisors.len())],
            use_gating: flags[3],
        });
    }
    if depth == 1 && rng.random_bool(0.4) {
        members.insert(
            0,
            AdapterSpec::Prompt {
                prompt_length: rng.random_range(1..cfg.max_sequence().min(5)),
                use_gating: false,
            },
        );
    }
    CompositionSpec {
        name: "random".into(),
        stack_depth: depth,
        members,
    }
}

/// `(symbolic, instantiated)` adapter counts and `(symbolic, instantiated)`
/// base counts for one configuration.
pub fn census_vs_instantiated(cfg: &ModelConfig, spec: &CompositionSpec, seed: u64) -> Result<((u64, u64), (u64, u64))> {
    let symbolic = count_composition(spec, cfg)?.trainable_total;
    let bare = init_model(cfg, None, seed)?;
    let base = (count_base(cfg).total, bare.store().scalar_count());
    let adapted = attach(bare, spec, seed)?;
    let counted: u64 = adapted
        .trainable_parameters()
        .iter()
        .filter(|p| p.role != ParamRole::Head)
        .map(|p| p.numel as u64)
        .sum();
    Ok(((symbolic, counted), base))
}

fn census_suite(seed: u64) -> Result<Vec<Check>> {
    let rb = ModelConfig::roberta_base();
    let base = count_base(&rb);
    let mut checks = vec![Check::exact("base total".into(), base.total as i128, REFERENCE_BASE as i128)];
    for (name, total, pct) in REFERENCE_TOTALS {
        let c = count_composition(&build_preset(name)?, &rb)?;
        checks.push(Check::exact(format!("{name} total"), c.trainable_total as i128, total as i128));
        let label = c.percent_label();
        checks.push(Check {
            name: format!("{name} %param"),
            passed: label == pct,
            value: c.percent_of_base,
            detail: format!("got {label}, want {pct}"),
        });
    }
    let pt = count_composition(&build_preset("pt-unipelt-paper")?, &rb)?;
    let uni = count_composition(&build_preset("unipelt-paper")?, &rb)?;
    let d = census_diff(&pt, &uni)?;
    checks.push(Check {
        name: "prompt delta".into(),
        passed: d.len() == 1 && d[0].1 == 7_680,
        value: d.iter().map(|(_, v)| *v as f64).sum(),
        detail: format!("{d:?}"),
    });
    let stack = count_composition(&build_preset("unipelt-stack3")?, &rb)?;
    checks.push(Check::exact(
        "stack additivity".into(),
        stack.trainable_total as i128,
        3 * uni.trainable_total as i128,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut first = String::from("all equal");
    for i in 0..50 {
        let cfg = random_tiny_config(&mut rng);
        let spec = random_spec(&mut rng, &cfg);
        let ((s, c), (bs, bc)) = census_vs_instantiated(&cfg, &spec, seed + i)?;
        if s != c || bs != bc {
            if mismatches == 0 {
                first = format!("case {i}: adapters {s} vs {c}, base {bs} vs {bc}");
            }
            mismatches += 1;
        }
    }
    checks.push(Check {
        name: "oracle equivalence (50 random cases)".into(),
        passed: mismatches == 0,
        value: mismatches as f64,
        detail: first,
    });
    Ok(checks)
}
