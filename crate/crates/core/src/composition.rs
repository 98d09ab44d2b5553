//! Named adapter compositions and their attachment to a frozen encoder.
//!
//! A [`CompositionSpec`] is an ordered union of adapter members, optionally
//! replicated `stack_depth` times. Within a layer, attention-level members act
//! at the query/key/value and FFN-inner hook points and bottleneck members
//! follow the FFN output; replicated groups run in order, each feeding the
//! next at every hook point. Each group owns its parameters and gates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::{self, AdapterSpec, GateParams, Ia3Target, LoraTarget};
use crate::autograd::Var;
use crate::config::ModelConfig;
use crate::encoder::{Batch, EncoderModel, ForwardOptions, Linear, Pass};
use crate::error::{Error, Result};
use crate::params::{normal, truncated_normal, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Half-width of the uniform prompt-row initialization.
pub const PROMPT_INIT_SCALE: f64 = 0.5;
const INIT_STD: f64 = 0.02;

/// Preset identifiers accepted by [`build_preset`].
pub const PRESET_NAMES: [&str; 6] = [
    "unipelt-lib",
    "unipelt-paper",
    "pt-unipelt-lib",
    "pt-unipelt-paper",
    "ia3-prefix-seqbn",
    "unipelt-stack3",
];

/// LoRA scale numerator shipped by the adapter library's UniPELT config.
pub const LIBRARY_LORA_ALPHA: f64 = 8.0;
/// LoRA scale numerator of the original UniPELT description.
pub const PAPER_LORA_ALPHA: f64 = 2.0;

/// An ordered union of adapter members, replicated `stack_depth` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub name: String,
    pub stack_depth: usize,
    pub members: Vec<AdapterSpec>,
}

impl CompositionSpec {
    pub fn empty() -> Self {
        CompositionSpec {
            name: "none".into(),
            stack_depth: 1,
            members: Vec::new(),
        }
    }

    pub fn prompt_member(&self) -> Option<&AdapterSpec> {
        self.members
            .iter()
            .find(|m| matches!(m, AdapterSpec::Prompt { .. }))
    }

    /// Members replicated in every stacked group (everything but the prompt).
    pub fn layer_members(&self) -> impl Iterator<Item = &AdapterSpec> {
        self.members
            .iter()
            .filter(|m| !matches!(m, AdapterSpec::Prompt { .. }))
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        if self.stack_depth == 0 {
            return Err(Error::Config("stack_depth must be at least 1".into()));
        }
        let mut kinds: Vec<&str> = self.members.iter().map(AdapterSpec::kind).collect();
        kinds.sort_unstable();
        if let Some(w) = kinds.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("composition has more than one {} member", w[0])));
        }
        if self.prompt_member().is_some() && self.stack_depth > 1 {
            return Err(Error::Config("prompt members cannot be stacked".into()));
        }
        for m in &self.members {
            m.validate(cfg)?;
        }
        Ok(())
    }
}

/// Builds one of the named compositions in [`PRESET_NAMES`].
pub fn build_preset(name: &str) -> Result<CompositionSpec> {
    let unipelt = |alpha| vec![AdapterSpec::lora(alpha), AdapterSpec::prefix(), AdapterSpec::seqbn()];
    let with_prompt = |alpha| {
        let mut m = vec![AdapterSpec::prompt()];
        m.extend(unipelt(alpha));
        m
    };
    let (members, stack_depth) = match name {
        "unipelt-lib" => (unipelt(LIBRARY_LORA_ALPHA), 1),
        "unipelt-paper" => (unipelt(PAPER_LORA_ALPHA), 1),
        "pt-unipelt-lib" => (with_prompt(LIBRARY_LORA_ALPHA), 1),
        "pt-unipelt-paper" => (with_prompt(PAPER_LORA_ALPHA), 1),
        "ia3-prefix-seqbn" => (vec![AdapterSpec::ia3(), AdapterSpec::prefix(), AdapterSpec::seqbn()], 1),
        "unipelt-stack3" => (unipelt(PAPER_LORA_ALPHA), 3),
        other => {
            return Err(Error::Usage(format!(
                "unknown preset `{other}`; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(CompositionSpec {
        name: name.to_string(),
        stack_depth,
        members,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct LoraPair {
    a: ParamId,
    b: ParamId,
    gate: Option<GateParams>,
}

#[derive(Debug, Clone, PartialEq)]
struct Lora {
    alpha: f64,
    r: usize,
    query: Vec<Option<LoraPair>>,
    value: Vec<Option<LoraPair>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Ia3Vec {
    scale: ParamId,
    gate: Option<GateParams>,
}

#[derive(Debug, Clone, PartialEq)]
struct Ia3 {
    key: Vec<Option<Ia3Vec>>,
    value: Vec<Option<Ia3Vec>>,
    ffn: Vec<Option<Ia3Vec>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Prefix {
    len: usize,
    emb: ParamId,
    mlp_in: Linear,
    mlp_out: Linear,
    gates: Vec<Option<GateParams>>,
}

#[derive(Debug, Clone, PartialEq)]
struct SeqBnLayer {
    down: Linear,
    up: Linear,
    gate: Option<GateParams>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Group {
    lora: Option<Lora>,
    ia3: Option<Ia3>,
    prefix: Option<Prefix>,
    seqbn: Option<Vec<SeqBnLayer>>,
}

/// Adapter parameters attached to an encoder, referenced by store id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Attachment {
    prompt: Option<(usize, ParamId)>,
    groups: Vec<Group>,
}

#[derive(Default)]
struct GroupGates {
    lora_q: Option<Var>,
    lora_v: Option<Var>,
    ia3_k: Option<Var>,
    ia3_v: Option<Var>,
    ia3_ff: Option<Var>,
    seqbn: Option<Var>,
}

/// Gates of one layer, computed once from the layer input.
pub(crate) struct LayerHooks {
    layer: usize,
    gates: Vec<GroupGates>,
    /// One entry per group that has a prefix member, in group order.
    pub prefix_gates: Vec<Option<Var>>,
}

fn gate_var(
    pass: &mut Pass<'_, '_>,
    gp: Option<GateParams>,
    forced: Option<f64>,
    x: Var,
    mask: &[bool],
) -> Result<Option<Var>> {
    let Some(gp) = gp else { return Ok(None) };
    let b = pass.sess.tape.shape(x)[0];
    if let Some(v) = forced {
        return Ok(Some(pass.sess.tape.constant(Tensor::full(&[b], v))));
    }
    let w = pass.sess.param(gp.weight);
    let bias = pass.sess.param(gp.bias);
    adapters::gate_value(&mut pass.sess.tape, x, mask, w, bias).map(Some)
}

impl Attachment {
    pub fn prompt_len(&self) -> usize {
        self.prompt.map_or(0, |(p, _)| p)
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub(crate) fn prepend_prompt(
        &self,
        pass: &mut Pass<'_, '_>,
        x: Var,
        mask: &[bool],
        max_sequence: usize,
    ) -> Result<(Var, Vec<bool>)> {
        match self.prompt {
            None => Ok((x, mask.to_vec())),
            Some((_, id)) => {
                let p = pass.sess.param(id);
                adapters::prompt_prepend(&mut pass.sess.tape, x, p, mask, max_sequence)
            }
        }
    }

    pub(crate) fn expand_prefixes(&self, pass: &mut Pass<'_, '_>, cfg: &ModelConfig) -> Result<Vec<(usize, Var)>> {
        let mut out = Vec::new();
        for g in &self.groups {
            if let Some(p) = &g.prefix {
                let emb = pass.sess.param(p.emb);
                let w1 = pass.sess.param(p.mlp_in.weight);
                let b1 = pass.sess.param(p.mlp_in.bias);
                let w2 = pass.sess.param(p.mlp_out.weight);
                let b2 = pass.sess.param(p.mlp_out.bias);
                let e = adapters::prefix_expand(&mut pass.sess.tape, emb, w1, b1, w2, b2, cfg.num_layers)?;
                out.push((p.len, e));
            }
        }
        Ok(out)
    }

    pub(crate) fn layer_hooks(&self, pass: &mut Pass<'_, '_>, l: usize, x: Var, mask: &[bool]) -> Result<LayerHooks> {
        let ov = pass.opts.gates;
        let mut gates = Vec::with_capacity(self.groups.len());
        let mut prefix_gates = Vec::new();
        for g in &self.groups {
            let mut gg = GroupGates::default();
            if let Some(lo) = &g.lora {
                let gq = lo.query[l].as_ref().and_then(|p| p.gate);
                let gv = lo.value[l].as_ref().and_then(|p| p.gate);
                gg.lora_q = gate_var(pass, gq, ov.lora, x, mask)?;
                gg.lora_v = gate_var(pass, gv, ov.lora, x, mask)?;
            }
            if let Some(ia) = &g.ia3 {
                let pick = |v: &Vec<Option<Ia3Vec>>| v[l].as_ref().and_then(|p| p.gate);
                gg.ia3_k = gate_var(pass, pick(&ia.key), ov.ia3, x, mask)?;
                gg.ia3_v = gate_var(pass, pick(&ia.value), ov.ia3, x, mask)?;
                gg.ia3_ff = gate_var(pass, pick(&ia.ffn), ov.ia3, x, mask)?;
            }
            if let Some(p) = &g.prefix {
                prefix_gates.push(gate_var(pass, p.gates[l], ov.prefix, x, mask)?);
            }
            if let Some(sb) = &g.seqbn {
                gg.seqbn = gate_var(pass, sb[l].gate, ov.seqbn, x, mask)?;
            }
            gates.push(gg);
        }
        Ok(LayerHooks {
            layer: l,
            gates,
            prefix_gates,
        })
    }

    fn lora_step(
        pass: &mut Pass<'_, '_>,
        lo: &Lora,
        pair: &Option<LoraPair>,
        gate: Option<Var>,
        x: Var,
        base: Var,
    ) -> Result<Var> {
        match pair {
            None => Ok(base),
            Some(p) => {
                let a = pass.sess.param(p.a);
                let b = pass.sess.param(p.b);
                adapters::lora_apply(&mut pass.sess.tape, x, base, a, b, lo.alpha, lo.r, gate)
            }
        }
    }

    fn ia3_step(pass: &mut Pass<'_, '_>, vec: &Option<Ia3Vec>, gate: Option<Var>, act: Var) -> Result<Var> {
        match vec {
            None => Ok(act),
            Some(v) => {
                let s = pass.sess.param(v.scale);
                adapters::ia3_apply(&mut pass.sess.tape, act, s, gate)
            }
        }
    }

    pub(crate) fn adapt_query(&self, pass: &mut Pass<'_, '_>, hk: &LayerHooks, x: Var, mut q: Var) -> Result<Var> {
        for (g, gg) in self.groups.iter().zip(&hk.gates) {
            if let Some(lo) = &g.lora {
                q = Self::lora_step(pass, lo, &lo.query[hk.layer], gg.lora_q, x, q)?;
            }
        }
        Ok(q)
    }

    pub(crate) fn adapt_key(&self, pass: &mut Pass<'_, '_>, hk: &LayerHooks, mut k: Var) -> Result<Var> {
        for (g, gg) in self.groups.iter().zip(&hk.gates) {
            if let Some(ia) = &g.ia3 {
                k = Self::ia3_step(pass, &ia.key[hk.layer], gg.ia3_k, k)?;
            }
        }
        Ok(k)
    }

    pub(crate) fn adapt_value(&self, pass: &mut Pass<'_, '_>, hk: &LayerHooks, x: Var, mut v: Var) -> Result<Var> {
        for (g, gg) in self.groups.iter().zip(&hk.gates) {
            if let Some(lo) = &g.lora {
                v = Self::lora_step(pass, lo, &lo.value[hk.layer], gg.lora_v, x, v)?;
            }
            if let Some(ia) = &g.ia3 {
                v = Self::ia3_step(pass, &ia.value[hk.layer], gg.ia3_v, v)?;
            }
        }
        Ok(v)
    }

    pub(crate) fn adapt_ffn_inner(&self, pass: &mut Pass<'_, '_>, hk: &LayerHooks, mut inner: Var) -> Result<Var> {
        for (g, gg) in self.groups.iter().zip(&hk.gates) {
            if let Some(ia) = &g.ia3 {
                inner = Self::ia3_step(pass, &ia.ffn[hk.layer], gg.ia3_ff, inner)?;
            }
        }
        Ok(inner)
    }

    pub(crate) fn adapt_ffn_output(&self, pass: &mut Pass<'_, '_>, hk: &LayerHooks, mut h: Var) -> Result<Var> {
        for (g, gg) in self.groups.iter().zip(&hk.gates) {
            if let Some(sb) = &g.seqbn {
                let layer = &sb[hk.layer];
                let dw = pass.sess.param(layer.down.weight);
                let db = pass.sess.param(layer.down.bias);
                let uw = pass.sess.param(layer.up.weight);
                let ub = pass.sess.param(layer.up.bias);
                h = adapters::seqbn_apply(&mut pass.sess.tape, h, dw, db, uw, ub, gg.seqbn)?;
            }
        }
        Ok(h)
    }
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
    hidden: usize,
}

impl Builder<'_> {
    fn add(&mut self, name: String, value: Tensor) -> ParamId {
        self.store.add(name, value, true)
    }

    fn trunc(&mut self, shape: &[usize]) -> Tensor {
        truncated_normal(&mut self.rng, shape, INIT_STD)
    }

    fn uniform(&mut self, shape: &[usize], scale: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-scale..scale)).collect();
        Tensor::new(shape, data).expect("shape matches data")
    }

    fn gate(&mut self, prefix: &str, gated: bool) -> Option<GateParams> {
        if !gated {
            return None;
        }
        let w = self.trunc(&[self.hidden]);
        Some(GateParams {
            weight: self.add(format!("{prefix}.gate.weight"), w),
            bias: self.add(format!("{prefix}.gate.bias"), Tensor::zeros(&[1])),
        })
    }

    fn linear(&mut self, name: &str, out: usize, inp: usize, zero: bool) -> Linear {
        let w = if zero {
            Tensor::zeros(&[out, inp])
        } else {
            self.trunc(&[out, inp])
        };
        Linear {
            weight: self.add(format!("{name}.weight"), w),
            bias: self.add(format!("{name}.bias"), Tensor::zeros(&[out])),
        }
    }
}

/// An encoder with a composition attached and its backbone frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedModel {
    model: EncoderModel,
    spec: CompositionSpec,
    attachment: Attachment,
}

/// Role of a trainable tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Adapter,
    Gate,
    Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParam {
    pub id: ParamId,
    pub name: String,
    pub numel: usize,
    pub role: ParamRole,
}

/// Per-tensor trainable flags, in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct FreezeMask {
    pub entries: Vec<(String, bool)>,
}

impl FreezeMask {
    pub fn is_trainable(&self, name: &str) -> Option<bool> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }
}

/// Attaches `spec` to `model`: creates and initializes adapter parameters,
/// freezes every backbone tensor, and leaves adapters, gates and the head
/// trainable.
pub fn attach(mut model: EncoderModel, spec: &CompositionSpec, seed: u64) -> Result<AdaptedModel> {
    let cfg = model.config().clone();
    spec.validate(&cfg)?;
    let ids: Vec<ParamId> = model.store.ids().collect();
    for id in ids {
        let frozen = model.is_backbone(id);
        model.store.set_trainable(id, !frozen);
    }
    let (h, f, nl) = (cfg.hidden, cfg.ffn_inner, cfg.num_layers);
    let mut bld = Builder {
        store: &mut model.store,
        rng: ChaCha8Rng::seed_from_u64(seed),
        hidden: h,
    };
    let mut att = Attachment::default();
    if let Some(AdapterSpec::Prompt { prompt_length, .. }) = spec.prompt_member() {
        let init = bld.uniform(&[*prompt_length, h], PROMPT_INIT_SCALE);
        let id = bld.add("adapters.prompt".into(), init);
        att.prompt = Some((*prompt_length, id));
    }
    for g in 0..spec.stack_depth {
        let mut group = Group::default();
        for member in spec.layer_members() {
            let gated = member.use_gating();
            match member {
                AdapterSpec::Lora { r, alpha, targets, .. } => {
                    let mut lo = Lora {
                        alpha: *alpha,
                        r: *r,
                        query: vec![None; nl],
                        value: vec![None; nl],
                    };
                    for l in 0..nl {
                        for t in targets {
                            let base = format!(
                                "adapters.{g}.lora.layers.{l}.{}",
                                if *t == LoraTarget::Query { "query" } else { "value" }
                            );
                            let init = normal(&mut bld.rng, &[*r, h], INIT_STD);
                            let a = bld.add(format!("{base}.a"), init);
                            let b = bld.add(format!("{base}.b"), Tensor::zeros(&[h, *r]));
                            let gate = bld.gate(&base, gated);
                            let slot = if *t == LoraTarget::Query { &mut lo.query } else { &mut lo.value };
                            slot[l] = Some(LoraPair { a, b, gate });
                        }
                    }
                    group.lora = Some(lo);
                }
                AdapterSpec::Ia3 { targets, .. } => {
                    let mut ia = Ia3 {
                        key: vec![None; nl],
                        value: vec![None; nl],
                        ffn: vec![None; nl],
                    };
                    for l in 0..nl {
                        for t in targets {
                            let (tag, width, slot) = match t {
                                Ia3Target::Key => ("key", h, &mut ia.key),
                                Ia3Target::Value => ("value", h, &mut ia.value),
                                Ia3Target::FfnInner => ("ffn_inner", f, &mut ia.ffn),
                            };
                            let base = format!("adapters.{g}.ia3.layers.{l}.{tag}");
                            let scale = bld.add(format!("{base}.scale"), Tensor::ones(&[width]));
                            let gate = bld.gate(&base, gated);
                            slot[l] = Some(Ia3Vec { scale, gate });
                        }
                    }
                    group.ia3 = Some(ia);
                }
                AdapterSpec::Prefix {
                    prefix_length,
                    reparam_hidden,
                    ..
                } => {
                    let base = format!("adapters.{g}.prefix");
                    let init = bld.trunc(&[*prefix_length, h]);
                    let emb = bld.add(format!("{base}.embedding"), init);
                    let mlp_in = bld.linear(&format!("{base}.mlp_in"), *reparam_hidden, h, false);
                    let mlp_out = bld.linear(&format!("{base}.mlp_out"), 2 * nl * h, *reparam_hidden, false);
                    let gates = (0..nl)
                        .map(|l| bld.gate(&format!("{base}.layers.{l}"), gated))
                        .collect();
                    group.prefix = Some(Prefix {
                        len: *prefix_length,
                        emb,
                        mlp_in,
                        mlp_out,
                        gates,
                    });
                }
                AdapterSpec::Seqbn {
                    reduction_factor, ..
                } => {
                    let width = h / reduction_factor;
                    let layers = (0..nl)
                        .map(|l| {
                            let base = format!("adapters.{g}.seqbn.layers.{l}");
                            SeqBnLayer {
                                down: bld.linear(&format!("{base}.down"), width, h, false),
                                up: bld.linear(&format!("{base}.up"), h, width, true),
                                gate: bld.gate(&base, gated),
                            }
                        })
                        .collect();
                    group.seqbn = Some(layers);
                }
                AdapterSpec::Prompt { .. } => unreachable!("prompt members are global"),
            }
        }
        att.groups.push(group);
    }
    Ok(AdaptedModel {
        model,
        spec: spec.clone(),
        attachment: att,
    })
}

impl AdaptedModel {
    pub fn model(&self) -> &EncoderModel {
        &self.model
    }

    pub fn spec(&self) -> &CompositionSpec {
        &self.spec
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn store(&self) -> &ParamStore {
        self.model.store()
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        self.model.store_mut()
    }

    pub fn attachment(&self) -> &Attachment {
        &self.attachment
    }

    pub fn into_parts(self) -> (EncoderModel, CompositionSpec) {
        (self.model, self.spec)
    }

    pub fn encode(&self, batch: &Batch, opts: ForwardOptions) -> Result<Tensor> {
        self.model.eval_encode(batch, Some(&self.attachment), opts)
    }

    pub fn classify(&self, batch: &Batch) -> Result<Tensor> {
        self.classify_with(batch, ForwardOptions::eval())
    }

    pub fn classify_with(&self, batch: &Batch, opts: ForwardOptions) -> Result<Tensor> {
        self.model.classify_with(batch, Some(&self.attachment), opts)
    }

    pub fn regress(&self, batch: &Batch) -> Result<Tensor> {
        self.model.regress_with(batch, Some(&self.attachment), ForwardOptions::eval())
    }

    pub fn span_predict(&self, batch: &Batch) -> Result<(Tensor, Tensor)> {
        self.model.span_with(batch, Some(&self.attachment), ForwardOptions::eval())
    }

    pub fn freeze_mask(&self) -> FreezeMask {
        FreezeMask {
            entries: self
                .store()
                .iter()
                .map(|(_, p)| (p.name.clone(), p.trainable))
                .collect(),
        }
    }

    /// Trainable tensors in store order: adapters, gates, and the head.
    pub fn trainable_parameters(&self) -> Vec<TrainableParam> {
        self.store()
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, p)| TrainableParam {
                id,
                name: p.name.clone(),
                numel: p.value.len(),
                role: if self.model.is_head(id) {
                    ParamRole::Head
                } else if p.name.contains(".gate.") {
                    ParamRole::Gate
                } else {
                    ParamRole::Adapter
                },
            })
            .collect()
    }

    /// Trainable scalars excluding the task head.
    pub fn adapter_param_count(&self) -> u64 {
        self.trainable_parameters()
            .iter()
            .filter(|p| p.role != ParamRole::Head)
            .map(|p| p.numel as u64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskHead;
    use crate::encoder::init_model;

    #[test]
    fn presets_have_paper_settings() {
        let p = build_preset("unipelt-paper").unwrap();
        assert_eq!(p.stack_depth, 1);
        assert_eq!(p.members, vec![AdapterSpec::lora(2.0), AdapterSpec::prefix(), AdapterSpec::seqbn()]);
        let p = build_preset("pt-unipelt-lib").unwrap();
        assert!(p.prompt_member().is_some());
        assert!(p.members.contains(&AdapterSpec::lora(8.0)));
        let p = build_preset("unipelt-stack3").unwrap();
        assert_eq!(p.stack_depth, 3);
        assert!(p.prompt_member().is_none());
        let p = build_preset("ia3-prefix-seqbn").unwrap();
        assert_eq!(p.members[0], AdapterSpec::ia3());
    }

    #[test]
    fn unknown_preset_lists_names() {
        match build_preset("nonsense") {
            Err(Error::Usage(msg)) => {
                for n in PRESET_NAMES {
                    assert!(msg.contains(n));
                }
            }
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn stacked_prompt_rejected() {
        let mut spec = build_preset("pt-unipelt-paper").unwrap();
        spec.stack_depth = 2;
        assert!(matches!(spec.validate(&ModelConfig::tiny()), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_kind_rejected() {
        let spec = CompositionSpec {
            name: "dup".into(),
            stack_depth: 1,
            members: vec![AdapterSpec::seqbn(), AdapterSpec::seqbn()],
        };
        assert!(spec.validate(&ModelConfig::tiny()).is_err());
    }

    #[test]
    fn oversized_prompt_rejected_at_attach() {
        let cfg = ModelConfig::tiny();
        let model = init_model(&cfg, None, 0).unwrap();
        let spec = CompositionSpec {
            name: "long".into(),
            stack_depth: 1,
            members: vec![AdapterSpec::Prompt {
                prompt_length: cfg.max_sequence(),
                use_gating: false,
            }],
        };
        assert!(matches!(attach(model, &spec, 0), Err(Error::Config(_))));
    }

    #[test]
    fn freeze_contract_after_attach() {
        let cfg = ModelConfig::tiny();
        let model = init_model(&cfg, Some(TaskHead::Classifier { classes: 2 }), 1).unwrap();
        let adapted = attach(model, &build_preset("pt-unipelt-paper").unwrap(), 2).unwrap();
        let trainable = adapted.trainable_parameters();
        assert!(trainable.iter().all(|p| !adapted.model().is_backbone(p.id)));
        assert!(trainable.iter().any(|p| p.role == ParamRole::Head));
        assert!(trainable.iter().any(|p| p.role == ParamRole::Gate));
        let mask = adapted.freeze_mask();
        assert_eq!(mask.is_trainable("embeddings.word"), Some(false));
        assert_eq!(mask.is_trainable("pooler.weight"), Some(false));
        assert_eq!(mask.is_trainable("adapters.prompt"), Some(true));
        assert_eq!(mask.is_trainable("head.weight"), Some(true));
    }

    #[test]
    fn empty_composition_trains_only_head() {
        let model = init_model(&ModelConfig::tiny(), Some(TaskHead::Regression), 1).unwrap();
        let adapted = attach(model, &CompositionSpec::empty(), 0).unwrap();
        let t = adapted.trainable_parameters();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|p| p.role == ParamRole::Head));
        assert_eq!(adapted.adapter_param_count(), 0);
    }

    #[test]
    fn attach_is_deterministic() {
        let cfg = ModelConfig::tiny();
        let spec = build_preset("unipelt-stack3").unwrap();
        let a = attach(init_model(&cfg, None, 5).unwrap(), &spec, 9).unwrap();
        let b = attach(init_model(&cfg, None, 5).unwrap(), &spec, 9).unwrap();
        assert_eq!(a.store().len(), b.store().len());
        for ((_, p), (_, q)) in a.store().iter().zip(b.store().iter()) {
            assert_eq!(p.name, q.name);
            assert!(p.value.bits_eq(&q.value));
        }
    }
}
