//! RoBERTa-shaped post-LN transformer encoder with pooler and task heads.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composition::Attachment;
use crate::config::{ModelConfig, TaskHead, POSITION_OFFSET};
use crate::error::{Error, Result};
use crate::params::{truncated_normal, ParamId, ParamStore, Session};
use crate::tensor::Tensor;
use crate::tokenizer::PAD_ID;
use crate::Var;

/// Additive bias that removes masked span positions from a softmax while
/// keeping every value finite.
pub(crate) const MASKED_LOGIT: f64 = -1e30;

/// Standard deviation of the task-head weight initialization.
pub const HEAD_INIT_STD: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerParams {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub attn_out: Linear,
    pub attn_norm: Norm,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
    pub ffn_norm: Norm,
}

/// Targets carried by a [`Batch`].
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    None,
    Classes(Vec<usize>),
    Reals(Vec<f64>),
    /// Inclusive `(start, end)` token positions within the sequence.
    Spans(Vec<(usize, usize)>),
}

/// Right-padded token ids with their attention mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch: usize,
    pub seq: usize,
    pub token_ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub targets: Targets,
}

impl Batch {
    /// Pads each sequence on the right to `pad_to` (or the longest sequence).
    pub fn from_sequences(seqs: &[Vec<usize>], pad_to: Option<usize>, targets: Targets) -> Result<Self> {
        let longest = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let seq = pad_to.unwrap_or(longest);
        if longest > seq {
            return Err(Error::Input(format!(
                "sequence of {longest} tokens exceeds padded length {seq}"
            )));
        }
        let mut token_ids = Vec::with_capacity(seqs.len() * seq);
        let mut mask = Vec::with_capacity(seqs.len() * seq);
        for s in seqs {
            token_ids.extend_from_slice(s);
            token_ids.extend(core::iter::repeat(PAD_ID).take(seq - s.len()));
            mask.extend(core::iter::repeat(true).take(s.len()));
            mask.extend(core::iter::repeat(false).take(seq - s.len()));
        }
        let b = Batch {
            batch: seqs.len(),
            seq,
            token_ids,
            mask,
            targets,
        };
        b.check_targets()?;
        Ok(b)
    }

    fn check_targets(&self) -> Result<()> {
        let n = match &self.targets {
            Targets::None => return Ok(()),
            Targets::Classes(v) => v.len(),
            Targets::Reals(v) => v.len(),
            Targets::Spans(v) => v.len(),
        };
        if n != self.batch {
            return Err(Error::Input(format!("{n} targets for a batch of {}", self.batch)));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.mask
            .chunks(self.seq.max(1))
            .map(|r| r.iter().filter(|&&m| m).count())
            .collect()
    }
}

/// Forward-pass mode. Dropout is active only in training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout: f64, seed: u64 },
}

/// Forces gates of one adapter kind to a constant instead of computing them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GateOverride {
    pub lora: Option<f64>,
    pub ia3: Option<f64>,
    pub prefix: Option<f64>,
    pub seqbn: Option<f64>,
}

impl GateOverride {
    /// Every gate at its closed endpoint, where each gated path is a no-op.
    pub fn pass_through() -> Self {
        GateOverride {
            lora: Some(0.0),
            ia3: Some(0.0),
            prefix: Some(0.0),
            seqbn: Some(0.0),
        }
    }

    /// Only prefix gates closed; LoRA, IA3 and bottleneck paths are identity
    /// at initialization whatever their gate value.
    pub fn prefix_closed() -> Self {
        GateOverride {
            prefix: Some(0.0),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub mode: Mode,
    pub gates: GateOverride,
}

impl ForwardOptions {
    pub fn eval() -> Self {
        ForwardOptions {
            mode: Mode::Eval,
            gates: GateOverride::default(),
        }
    }
}

/// Hidden states on a tape plus the bookkeeping the heads need.
pub struct Encoded {
    /// `[B, T, H]` where `T` counts any prepended prompt rows.
    pub hidden: Var,
    /// Index of the first real token (the number of prompt rows).
    pub offset: usize,
    /// `B × T` attention mask, prompt rows included.
    pub mask: Vec<bool>,
    pub batch: usize,
    pub seq: usize,
}

/// Head outputs on a tape.
pub enum HeadOutput {
    Logits(Var),
    Scores(Var),
    Spans { start: Var, end: Var },
}

/// Per-forward scratch state: dropout randomness and layer-level options.
pub(crate) struct Pass<'s, 'm> {
    pub sess: &'s mut Session<'m>,
    pub opts: ForwardOptions,
    rng: Option<(f64, ChaCha8Rng)>,
}

impl<'s, 'm> Pass<'s, 'm> {
    fn new(sess: &'s mut Session<'m>, opts: ForwardOptions) -> Self {
        let rng = match opts.mode {
            Mode::Train { dropout, seed } if dropout > 0.0 => {
                Some((dropout, ChaCha8Rng::seed_from_u64(seed)))
            }
            _ => None,
        };
        Pass { sess, opts, rng }
    }

    pub fn dropout(&mut self, x: Var) -> Result<Var> {
        match &mut self.rng {
            Some((p, rng)) => self.sess.tape.dropout(x, *p, rng),
            None => Ok(x),
        }
    }

    pub fn linear(&mut self, x: Var, lin: Linear) -> Result<Var> {
        let w = self.sess.param(lin.weight);
        let b = self.sess.param(lin.bias);
        let y = self.sess.tape.matmul_nt(x, w)?;
        self.sess.tape.add(y, b)
    }

    fn norm(&mut self, x: Var, n: Norm, eps: f64) -> Result<Var> {
        let g = self.sess.param(n.gamma);
        let b = self.sess.param(n.beta);
        self.sess.tape.layer_norm(x, g, b, eps)
    }
}

/// The encoder backbone, its pooler, and an optional task head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    config: ModelConfig,
    pub(crate) store: ParamStore,
    pub(crate) word: ParamId,
    pub(crate) position: ParamId,
    pub(crate) token_type: ParamId,
    pub(crate) emb_norm: Norm,
    pub(crate) layers: Vec<LayerParams>,
    pub(crate) pooler: Linear,
    pub(crate) head: Option<(TaskHead, Linear)>,
    /// Number of parameters that belong to the backbone (a prefix of the
    /// store).
    pub(crate) backbone_len: usize,
}

fn add_linear<R: rand::Rng>(
    store: &mut ParamStore,
    rng: &mut R,
    name: &str,
    (out, inp): (usize, usize),
    std: f64,
) -> Linear {
    Linear {
        weight: store.add(format!("{name}.weight"), truncated_normal(rng, &[out, inp], std), true),
        bias: store.add(format!("{name}.bias"), Tensor::zeros(&[out]), true),
    }
}

fn add_norm(store: &mut ParamStore, name: &str, h: usize) -> Norm {
    Norm {
        gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[h]), true),
        beta: store.add(format!("{name}.beta"), Tensor::zeros(&[h]), true),
    }
}

/// Builds a randomly initialized encoder. Identical `(config, head, seed)`
/// give bit-identical parameters.
pub fn init_model(config: &ModelConfig, head: Option<TaskHead>, seed: u64) -> Result<EncoderModel> {
    config.validate()?;
    if let Some(TaskHead::Classifier { classes: 0 }) = head {
        return Err(Error::Config("classifier needs at least one class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, f) = (config.hidden, config.ffn_inner);
    let std = config.initializer_range;
    let mut store = ParamStore::new();
    let word = store.add(
        "embeddings.word",
        truncated_normal(&mut rng, &[config.vocab_size, h], std),
        true,
    );
    let position = store.add(
        "embeddings.position",
        truncated_normal(&mut rng, &[config.max_positions, h], std),
        true,
    );
    let token_type = store.add(
        "embeddings.token_type",
        truncated_normal(&mut rng, &[config.type_vocab, h], std),
        true,
    );
    let emb_norm = add_norm(&mut store, "embeddings.norm", h);
    let layers = (0..config.num_layers)
        .map(|l| {
            let p = |s: &str| format!("layers.{l}.{s}");
            LayerParams {
                query: add_linear(&mut store, &mut rng, &p("attention.query"), (h, h), std),
                key: add_linear(&mut store, &mut rng, &p("attention.key"), (h, h), std),
                value: add_linear(&mut store, &mut rng, &p("attention.value"), (h, h), std),
                attn_out: add_linear(&mut store, &mut rng, &p("attention.output"), (h, h), std),
                attn_norm: add_norm(&mut store, &p("attention.norm"), h),
                ffn_in: add_linear(&mut store, &mut rng, &p("ffn.inner"), (f, h), std),
                ffn_out: add_linear(&mut store, &mut rng, &p("ffn.output"), (h, f), std),
                ffn_norm: add_norm(&mut store, &p("ffn.norm"), h),
            }
        })
        .collect();
    let pooler = add_linear(&mut store, &mut rng, "pooler", (h, h), std);
    let backbone_len = store.len();
    // A near-zero head keeps initial logits free of a shared offset while
    // still passing gradient to the adapters from the first step.
    let head = head.map(|kind| (kind, add_linear(&mut store, &mut rng, "head", (kind.outputs(), h), HEAD_INIT_STD)));
    Ok(EncoderModel {
        config: config.clone(),
        store,
        word,
        position,
        token_type,
        emb_norm,
        layers,
        pooler,
        head,
        backbone_len,
    })
}

impl EncoderModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> Option<TaskHead> {
        self.head.map(|(k, _)| k)
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Whether a parameter belongs to the backbone (embeddings, layers, pooler).
    pub fn is_backbone(&self, id: ParamId) -> bool {
        id.0 < self.backbone_len
    }

    pub fn is_head(&self, id: ParamId) -> bool {
        self.head
            .is_some_and(|(_, lin)| id == lin.weight || id == lin.bias)
    }

    /// Scalars in the backbone, pooler included and head excluded.
    pub fn backbone_param_count(&self) -> u64 {
        self.store
            .iter()
            .filter(|(id, _)| self.is_backbone(*id))
            .map(|(_, p)| p.value.len() as u64)
            .sum()
    }

    pub fn validate_batch(&self, batch: &Batch, prompt_len: usize) -> Result<()> {
        if batch.token_ids.len() != batch.batch * batch.seq || batch.mask.len() != batch.token_ids.len() {
            return Err(Error::Input("batch ids and mask disagree with its shape".into()));
        }
        if batch.batch == 0 || batch.seq == 0 {
            return Err(Error::Input("empty batch".into()));
        }
        if let Some(&bad) = batch.token_ids.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Input(format!(
                "token id {bad} not below vocab_size {}",
                self.config.vocab_size
            )));
        }
        if batch.seq + prompt_len > self.config.max_sequence() {
            return Err(Error::Input(format!(
                "sequence of {} (+{prompt_len} prompt) exceeds {} positions",
                batch.seq,
                self.config.max_sequence()
            )));
        }
        Ok(())
    }

    /// Runs the encoder stack on a session's tape.
    pub(crate) fn forward(
        &self,
        sess: &mut Session<'_>,
        batch: &Batch,
        adapters: Option<&Attachment>,
        opts: ForwardOptions,
    ) -> Result<Encoded> {
        let prompt_len = adapters.map_or(0, Attachment::prompt_len);
        self.validate_batch(batch, prompt_len)?;
        let cfg = &self.config;
        let (b, s, h) = (batch.batch, batch.seq, cfg.hidden);
        let mut pass = Pass::new(sess, opts);

        let word = pass.sess.param(self.word);
        let x = pass.sess.tape.gather(word, &batch.token_ids)?;
        let mut x = pass.sess.tape.reshape(x, &[b, s, h])?;
        let mut mask = batch.mask.clone();
        if let Some(att) = adapters {
            let (nx, nm) = att.prepend_prompt(&mut pass, x, &mask, cfg.max_sequence())?;
            x = nx;
            mask = nm;
        }
        let t = s + prompt_len;
        let pos_ids: Vec<usize> = (POSITION_OFFSET..POSITION_OFFSET + t).collect();
        let pos_table = pass.sess.param(self.position);
        let pos = pass.sess.tape.gather(pos_table, &pos_ids)?;
        x = pass.sess.tape.add(x, pos)?;
        let tt_table = pass.sess.param(self.token_type);
        let tt = pass.sess.tape.gather(tt_table, &[0])?;
        let tt = pass.sess.tape.reshape(tt, &[h])?;
        x = pass.sess.tape.add(x, tt)?;
        x = pass.norm(x, self.emb_norm, cfg.layer_norm_eps)?;
        x = pass.dropout(x)?;

        let prefixes = match adapters {
            Some(att) => att.expand_prefixes(&mut pass, cfg)?,
            None => Vec::new(),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            x = self.layer_forward(&mut pass, l, layer, x, &mask, b, t, adapters, &prefixes)?;
        }
        Ok(Encoded {
            hidden: x,
            offset: prompt_len,
            mask,
            batch: b,
            seq: s,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_forward(
        &self,
        pass: &mut Pass<'_, '_>,
        l: usize,
        p: &LayerParams,
        x: Var,
        mask: &[bool],
        b: usize,
        t: usize,
        adapters: Option<&Attachment>,
        prefixes: &[(usize, Var)],
    ) -> Result<Var> {
        let cfg = &self.config;
        let (h, nh, d) = (cfg.hidden, cfg.num_heads, cfg.head_dim());
        let hooks = match adapters {
            Some(att) => Some(att.layer_hooks(pass, l, x, mask)?),
            None => None,
        };

        let mut q = pass.linear(x, p.query)?;
        let mut k = pass.linear(x, p.key)?;
        let mut v = pass.linear(x, p.value)?;
        if let (Some(att), Some(hk)) = (adapters, &hooks) {
            q = att.adapt_query(pass, hk, x, q)?;
            k = att.adapt_key(pass, hk, k)?;
            v = att.adapt_value(pass, hk, x, v)?;
        }
        let split = |pass: &mut Pass<'_, '_>, y: Var| -> Result<Var> {
            let y = pass.sess.tape.reshape(y, &[b, t, nh, d])?;
            pass.sess.tape.permute(y, &[0, 2, 1, 3])
        };
        let qh = split(pass, q)?;
        let mut kh = split(pass, k)?;
        let mut vh = split(pass, v)?;

        let mut segments = Vec::new();
        let mut prefix_total = 0;
        if let Some(hk) = &hooks {
            // group 0's prefix ends up leftmost
            for (gi, &(plen, expanded)) in prefixes.iter().enumerate().rev() {
                let kp = prefix_rows(pass, expanded, l, 0, plen, b, nh, d)?;
                let vp = prefix_rows(pass, expanded, l, 1, plen, b, nh, d)?;
                kh = pass.sess.tape.concat(kp, kh, 2)?;
                vh = pass.sess.tape.concat(vp, vh, 2)?;
                segments.push(crate::autograd::KeySegment {
                    len: plen,
                    gate: hk.prefix_gates[gi],
                });
                prefix_total += plen;
            }
            segments.reverse();
        }
        let n = prefix_total + t;
        let mut key_mask = Vec::with_capacity(b * n);
        for row in mask.chunks(t) {
            key_mask.extend(core::iter::repeat(true).take(prefix_total));
            key_mask.extend_from_slice(row);
        }

        let scores = pass.sess.tape.bmm_nt(qh, kh)?;
        let scores = pass.sess.tape.scale(scores, 1.0 / libm::sqrt(d as f64));
        let probs = pass.sess.tape.attn_softmax(scores, &key_mask, &segments)?;
        let ctx = pass.sess.tape.bmm(probs, vh)?;
        let ctx = pass.sess.tape.permute(ctx, &[0, 2, 1, 3])?;
        let ctx = pass.sess.tape.reshape(ctx, &[b, t, h])?;
        let attn = pass.linear(ctx, p.attn_out)?;
        let attn = pass.dropout(attn)?;
        let x1 = pass.sess.tape.add(x, attn)?;
        let x1 = pass.norm(x1, p.attn_norm, cfg.layer_norm_eps)?;

        let inner = pass.linear(x1, p.ffn_in)?;
        let mut inner = pass.sess.tape.gelu(inner);
        if let (Some(att), Some(hk)) = (adapters, &hooks) {
            inner = att.adapt_ffn_inner(pass, hk, inner)?;
        }
        let ffn = pass.linear(inner, p.ffn_out)?;
        let mut ffn = pass.dropout(ffn)?;
        if let (Some(att), Some(hk)) = (adapters, &hooks) {
            ffn = att.adapt_ffn_output(pass, hk, ffn)?;
        }
        let x2 = pass.sess.tape.add(x1, ffn)?;
        pass.norm(x2, p.ffn_norm, cfg.layer_norm_eps)
    }

    /// Applies the task head to encoded states.
    pub(crate) fn head_output(&self, sess: &mut Session<'_>, enc: &Encoded) -> Result<HeadOutput> {
        let (kind, lin) = self
            .head
            .ok_or_else(|| Error::Usage("model has no task head".into()))?;
        let h = self.config.hidden;
        let mut pass = Pass::new(sess, ForwardOptions::eval());
        match kind {
            TaskHead::Classifier { .. } | TaskHead::Regression => {
                let first = pass.sess.tape.slice(enc.hidden, 1, enc.offset, 1)?;
                let first = pass.sess.tape.reshape(first, &[enc.batch, h])?;
                let pooled = pass.linear(first, self.pooler)?;
                let pooled = pass.sess.tape.tanh(pooled);
                let out = pass.linear(pooled, lin)?;
                if kind == TaskHead::Regression {
                    Ok(HeadOutput::Scores(pass.sess.tape.reshape(out, &[enc.batch])?))
                } else {
                    Ok(HeadOutput::Logits(out))
                }
            }
            TaskHead::Span => {
                let real = pass.sess.tape.slice(enc.hidden, 1, enc.offset, enc.seq)?;
                let out = pass.linear(real, lin)?;
                let mut pick = |which: usize| -> Result<Var> {
                    let o = pass.sess.tape.slice(out, 2, which, 1)?;
                    pass.sess.tape.reshape(o, &[enc.batch, enc.seq])
                };
                let start = pick(0)?;
                let end = pick(1)?;
                Ok(HeadOutput::Spans { start, end })
            }
        }
    }

    fn require_head(&self, want: &str, ok: bool) -> Result<()> {
        match self.head {
            None => Err(Error::Usage(format!("model has no task head; {want} needs one"))),
            Some((k, _)) if !ok => Err(Error::Usage(format!("{want} is not available for a {k:?} head"))),
            _ => Ok(()),
        }
    }

    pub(crate) fn eval_encode(
        &self,
        batch: &Batch,
        adapters: Option<&Attachment>,
        opts: ForwardOptions,
    ) -> Result<Tensor> {
        let mut sess = Session::new(&self.store, false);
        let enc = self.forward(&mut sess, batch, adapters, opts)?;
        Ok(sess.tape.value(enc.hidden).clone())
    }

    pub(crate) fn eval_head(
        &self,
        batch: &Batch,
        adapters: Option<&Attachment>,
        opts: ForwardOptions,
    ) -> Result<Vec<Tensor>> {
        let mut sess = Session::new(&self.store, false);
        let enc = self.forward(&mut sess, batch, adapters, opts)?;
        let out = self.head_output(&mut sess, &enc)?;
        Ok(match out {
            HeadOutput::Logits(v) | HeadOutput::Scores(v) => vec![sess.tape.value(v).clone()],
            HeadOutput::Spans { start, end } => {
                let mut s = sess.tape.value(start).clone();
                let mut e = sess.tape.value(end).clone();
                for (i, &m) in batch.mask.iter().enumerate() {
                    if !m {
                        s.data_mut()[i] = f64::NEG_INFINITY;
                        e.data_mut()[i] = f64::NEG_INFINITY;
                    }
                }
                vec![s, e]
            }
        })
    }

    pub(crate) fn classify_with(&self, batch: &Batch, adapters: Option<&Attachment>, opts: ForwardOptions) -> Result<Tensor> {
        self.require_head("classify", matches!(self.head(), Some(TaskHead::Classifier { .. })))?;
        Ok(self.eval_head(batch, adapters, opts)?.remove(0))
    }

    pub(crate) fn regress_with(&self, batch: &Batch, adapters: Option<&Attachment>, opts: ForwardOptions) -> Result<Tensor> {
        self.require_head("regress", self.head() == Some(TaskHead::Regression))?;
        Ok(self.eval_head(batch, adapters, opts)?.remove(0))
    }

    pub(crate) fn span_with(
        &self,
        batch: &Batch,
        adapters: Option<&Attachment>,
        opts: ForwardOptions,
    ) -> Result<(Tensor, Tensor)> {
        self.require_head("span_predict", self.head() == Some(TaskHead::Span))?;
        let mut out = self.eval_head(batch, adapters, opts)?;
        let end = out.pop().expect("two outputs");
        let start = out.pop().expect("two outputs");
        Ok((start, end))
    }

    /// Hidden states `[B, S, H]`.
    pub fn encode(&self, batch: &Batch, mode: Mode) -> Result<Tensor> {
        self.eval_encode(
            batch,
            None,
            ForwardOptions {
                mode,
                gates: GateOverride::default(),
            },
        )
    }

    /// Class logits `[B, C]` from the pooled first position.
    pub fn classify(&self, batch: &Batch) -> Result<Tensor> {
        self.classify_with(batch, None, ForwardOptions::eval())
    }

    /// Start and end logits `[B, S]`; masked positions are `-inf`.
    pub fn span_predict(&self, batch: &Batch) -> Result<(Tensor, Tensor)> {
        self.span_with(batch, None, ForwardOptions::eval())
    }

    /// One real score per example.
    pub fn regress(&self, batch: &Batch) -> Result<Tensor> {
        self.regress_with(batch, None, ForwardOptions::eval())
    }
}

/// Key or value prefix rows of one layer, `[B, heads, P, d]`.
#[allow(clippy::too_many_arguments)]
fn prefix_rows(
    pass: &mut Pass<'_, '_>,
    expanded: Var,
    layer: usize,
    which: usize,
    plen: usize,
    b: usize,
    nh: usize,
    d: usize,
) -> Result<Var> {
    let tape = &mut pass.sess.tape;
    let y = tape.slice(expanded, 0, layer, 1)?;
    let y = tape.slice(y, 1, which, 1)?;
    let y = tape.reshape(y, &[plen, nh, d])?;
    let y = tape.permute(y, &[1, 0, 2])?;
    Ok(tape.broadcast_leading(y, b))
}

/// Index of the highest score, ignoring `-inf` entries.
pub fn argmax(row: &[f64]) -> Option<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, v)| **v > f64::NEG_INFINITY)
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}
