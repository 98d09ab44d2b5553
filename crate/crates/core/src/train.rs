//! Training loop with early stopping, evaluation, and a learning-rate grid.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composition::AdaptedModel;
use crate::config::TaskHead;
use crate::data::{context_words, encode_example, Dataset, Input, Target, TaskKind};
use crate::encoder::{argmax, Batch, ForwardOptions, HeadOutput, Mode, Targets, MASKED_LOGIT};
use crate::error::{Error, Result};
use crate::metrics::{self, F1Mode};
use crate::optim::{AdamW, AdamWConfig};
use crate::params::{ParamId, Session};
use crate::tensor::Tensor;
use crate::tokenizer::ToyTokenizer;

/// Longest answer, in tokens, considered when decoding spans.
pub const MAX_ANSWER_TOKENS: usize = 30;

/// How "no improvement" is counted for early stopping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Epochs elapsed since the best score (earliest maximum).
    #[default]
    SinceBest,
    /// Trailing run of epochs that did not beat their predecessor.
    ConsecutiveNonIncrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    Mcc,
    F1Binary,
    F1Micro,
    F1Macro,
    Spearman,
    SquadF1,
    SquadEm,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Accuracy,
        Metric::Mcc,
        Metric::F1Binary,
        Metric::F1Micro,
        Metric::F1Macro,
        Metric::Spearman,
        Metric::SquadF1,
        Metric::SquadEm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Mcc => "mcc",
            Metric::F1Binary => "f1-binary",
            Metric::F1Micro => "f1-micro",
            Metric::F1Macro => "f1-macro",
            Metric::Spearman => "spearman",
            Metric::SquadF1 => "squad-f1",
            Metric::SquadEm => "squad-em",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
            Error::Usage(format!("unknown metric `{name}`; valid metrics: {}", names.join(", ")))
        })
    }

    pub fn supports(self, kind: TaskKind) -> bool {
        match self {
            Metric::Accuracy | Metric::Mcc | Metric::F1Binary | Metric::F1Micro | Metric::F1Macro => {
                matches!(kind, TaskKind::SingleClass | TaskKind::PairClass)
            }
            Metric::Spearman => kind == TaskKind::Regression,
            Metric::SquadF1 | Metric::SquadEm => kind == TaskKind::Span,
        }
    }

    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::SingleClass | TaskKind::PairClass => Metric::Accuracy,
            TaskKind::Regression => Metric::Spearman,
            TaskKind::Span => Metric::SquadF1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub input_length: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// When false, training always runs `max_epochs` (infinite patience).
    pub early_stopping: bool,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub lr_grid: Vec<f64>,
    /// Pad each batch to its longest sequence instead of `input_length`.
    pub pad_to_longest: bool,
    /// Interleave classes within each shuffled epoch so batches stay balanced.
    pub balanced_batches: bool,
    pub stop_rule: StopRule,
    pub optimizer: AdamWConfig,
    /// Model-selection metric; the task default when absent.
    pub metric: Option<Metric>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            input_length: 128,
            max_epochs: 50,
            patience: 10,
            early_stopping: true,
            learning_rate: 2e-4,
            dropout: 0.1,
            seed: 0,
            lr_grid: vec![2e-4, 5e-4],
            pad_to_longest: true,
            balanced_batches: true,
            stop_rule: StopRule::SinceBest,
            optimizer: AdamWConfig::default(),
            metric: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.input_length < 4 {
            return bad("input_length must be at least 4");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if self.lr_grid.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return bad("lr_grid entries must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        let o = self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) || o.weight_decay < 0.0 {
            return bad("invalid optimizer settings");
        }
        Ok(())
    }
}

/// Early-stopping decision under [`StopRule::SinceBest`].
pub fn early_stop_check(history: &[f64], patience: usize) -> (bool, usize) {
    early_stop_check_with(history, patience, StopRule::SinceBest)
}

/// Returns `(stop, best index)`; the best index is the earliest maximum.
/// An empty history never stops.
pub fn early_stop_check_with(history: &[f64], patience: usize, rule: StopRule) -> (bool, usize) {
    if history.is_empty() {
        return (false, 0);
    }
    let best = history
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > history[b] { i } else { b });
    let stale = match rule {
        StopRule::SinceBest => history.len() - 1 - best,
        StopRule::ConsecutiveNonIncrease => history
            .windows(2)
            .rev()
            .take_while(|w| !(w[1] > w[0]))
            .count(),
    };
    (stale >= patience, best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub values: Vec<(Metric, f64)>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    /// Selection-metric score after each epoch.
    pub history: Vec<f64>,
    /// Set when a correlation was undefined and reported as 0.
    pub degenerate: bool,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub learning_rate: f64,
    pub metric: Metric,
    pub log: Vec<EpochLog>,
    /// Loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    pub stopped_early: bool,
    /// Dev metrics of the restored (best-epoch) parameters.
    pub report: MetricReport,
}

fn head_fits(head: Option<TaskHead>, ds: &Dataset) -> bool {
    match (head, ds.task_kind) {
        (Some(TaskHead::Classifier { classes }), TaskKind::SingleClass | TaskKind::PairClass) => {
            classes == ds.num_classes()
        }
        (Some(TaskHead::Regression), TaskKind::Regression) => true,
        (Some(TaskHead::Span), TaskKind::Span) => true,
        _ => false,
    }
}

/// Checks that `model`'s head can serve `ds` and that `metric` applies.
pub fn check_compatible(model: &AdaptedModel, ds: &Dataset, metric: Metric) -> Result<()> {
    ds.validate()?;
    if !head_fits(model.model().head(), ds) {
        return Err(Error::Usage(format!(
            "a {:?} head cannot serve a {:?} dataset with {} labels",
            model.model().head(),
            ds.task_kind,
            ds.num_classes()
        )));
    }
    if !metric.supports(ds.task_kind) {
        return Err(Error::Usage(format!(
            "metric {} does not apply to a {:?} task",
            metric.name(),
            ds.task_kind
        )));
    }
    Ok(())
}

pub(crate) struct Prepared {
    ids: Vec<usize>,
    target: Target,
    span: Option<(usize, usize)>,
    context_start: usize,
}

fn max_len(model: &AdaptedModel, input_length: usize) -> usize {
    let room = model.config().max_sequence() - model.attachment().prompt_len();
    input_length.min(room)
}

pub(crate) fn prepare(model: &AdaptedModel, ds: &Dataset, input_length: usize) -> Vec<Prepared> {
    let tok = ToyTokenizer::new(model.config().vocab_size);
    let limit = max_len(model, input_length);
    ds.examples
        .iter()
        .map(|ex| {
            let enc = encode_example(&tok, ex, limit);
            Prepared {
                ids: enc.ids,
                target: ex.target.clone(),
                span: enc.span,
                context_start: enc.context_start,
            }
        })
        .collect()
}

pub(crate) fn make_batch(items: &[&Prepared], pad_to: Option<usize>) -> Result<Batch> {
    let seqs: Vec<Vec<usize>> = items.iter().map(|p| p.ids.clone()).collect();
    let targets = match &items[0].target {
        Target::Class(_) => Targets::Classes(
            items
                .iter()
                .map(|p| match p.target {
                    Target::Class(c) => c,
                    _ => 0,
                })
                .collect(),
        ),
        Target::Real(_) => Targets::Reals(
            items
                .iter()
                .map(|p| match p.target {
                    Target::Real(v) => v,
                    _ => 0.0,
                })
                .collect(),
        ),
        Target::Span { .. } => Targets::Spans(items.iter().map(|p| p.span.unwrap_or((0, 0))).collect()),
    };
    Batch::from_sequences(&seqs, pad_to, targets)
}

/// Mean loss of one batch on a session tape.
pub(crate) fn batch_loss(sess: &mut Session<'_>, model: &AdaptedModel, batch: &Batch, opts: ForwardOptions) -> Result<crate::Var> {
    let enc = model.model().forward(sess, batch, Some(model.attachment()), opts)?;
    let out = model.model().head_output(sess, &enc)?;
    let tape = &mut sess.tape;
    match (out, &batch.targets) {
        (HeadOutput::Logits(l), Targets::Classes(c)) => tape.softmax_cross_entropy(l, c),
        (HeadOutput::Scores(s), Targets::Reals(y)) => {
            let y = tape.constant(Tensor::new(&[y.len()], y.clone())?);
            let d = tape.sub(s, y)?;
            let sq = tape.mul(d, d)?;
            Ok(tape.mean(sq))
        }
        (HeadOutput::Spans { start, end }, Targets::Spans(spans)) => {
            let bias: Vec<f64> = batch.mask.iter().map(|&m| if m { 0.0 } else { MASKED_LOGIT }).collect();
            let bias = tape.constant(Tensor::new(&[batch.batch, batch.seq], bias)?);
            let s = tape.add(start, bias)?;
            let e = tape.add(end, bias)?;
            let starts: Vec<usize> = spans.iter().map(|p| p.0).collect();
            let ends: Vec<usize> = spans.iter().map(|p| p.1).collect();
            let ls = tape.softmax_cross_entropy(s, &starts)?;
            let le = tape.softmax_cross_entropy(e, &ends)?;
            let both = tape.add(ls, le)?;
            Ok(tape.scale(both, 0.5))
        }
        _ => Err(Error::Usage("head output does not match batch targets".into())),
    }
}

/// Gradient per trainable parameter; `None` where it was unused.
pub type ParamGrads = Vec<(ParamId, Option<Tensor>)>;

/// Called with the learning rate and log of every finished epoch.
pub type GridObserver<'a> = &'a mut dyn FnMut(f64, &EpochLog);

/// Loss of `batch` and the gradient of every trainable parameter (`None`
/// where the parameter did not take part in the forward pass).
pub fn loss_and_grads(
    model: &AdaptedModel,
    batch: &Batch,
    opts: ForwardOptions,
) -> Result<(f64, ParamGrads)> {
    let mut sess = Session::new(model.store(), true);
    let loss = batch_loss(&mut sess, model, batch, opts)?;
    let value = sess.tape.value(loss).data()[0];
    let mut g = sess.tape.backward(loss)?;
    Ok((value, sess.param_grads(&mut g)))
}

/// Loss of `batch` without recording gradients.
pub fn loss_value(model: &AdaptedModel, batch: &Batch, opts: ForwardOptions) -> Result<f64> {
    let mut sess = Session::new(model.store(), false);
    let loss = batch_loss(&mut sess, model, batch, opts)?;
    Ok(sess.tape.value(loss).data()[0])
}

fn step_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    seed ^ ((epoch as u64) << 32 | step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One forward/backward pass plus optimizer update. Returns the batch loss.
fn train_step(
    model: &mut AdaptedModel,
    opt: &mut AdamW,
    batch: &Batch,
    dropout: f64,
    seed: u64,
    epoch: usize,
    step: usize,
) -> Result<f64> {
    let opts = ForwardOptions {
        mode: Mode::Train { dropout, seed },
        ..ForwardOptions::eval()
    };
    let (loss, grads) = {
        let mut sess = Session::new(model.store(), true);
        let loss_var = batch_loss(&mut sess, model, batch, opts)?;
        let loss = sess.tape.value(loss_var).data()[0];
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, step, loss });
        }
        let mut g = sess.tape.backward(loss_var)?;
        (loss, sess.param_grads(&mut g))
    };
    if grads.iter().flat_map(|(_, g)| g).any(|g| !g.is_finite()) {
        return Err(Error::Divergence { epoch, step, loss: f64::NAN });
    }
    opt.step(model.store_mut(), &grads)?;
    Ok(loss)
}

fn snapshot(model: &AdaptedModel) -> Vec<(ParamId, Tensor)> {
    model
        .trainable_parameters()
        .into_iter()
        .map(|p| (p.id, model.store().value(p.id).clone()))
        .collect()
}

fn restore(model: &mut AdaptedModel, snap: &[(ParamId, Tensor)]) {
    for (id, t) in snap {
        *model.store_mut().value_mut(*id) = t.clone();
    }
}

/// Trains `model` in place at `cfg.learning_rate`, evaluating `dev` after
/// every epoch and leaving the best-epoch parameters installed.
pub fn train(
    model: &mut AdaptedModel,
    train: &Dataset,
    dev: &Dataset,
    cfg: &TrainConfig,
    mut observer: Option<&mut dyn FnMut(&EpochLog)>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Input("training and dev sets must be nonempty".into()));
    }
    let metric = cfg.metric.unwrap_or_else(|| Metric::default_for(train.task_kind));
    check_compatible(model, train, metric)?;
    check_compatible(model, dev, metric)?;
    if train.task_kind != dev.task_kind {
        return Err(Error::Usage("training and dev sets have different task kinds".into()));
    }
    let items = prepare(model, train, cfg.input_length);
    let pad_to = (!cfg.pad_to_longest).then(|| max_len(model, cfg.input_length));
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(cfg.learning_rate, cfg.optimizer);

    let mut log = Vec::new();
    let mut step_losses = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<(ParamId, Tensor)>)> = None;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        if cfg.balanced_batches {
            stratify(&mut order, &items);
        }
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let picked: Vec<&Prepared> = chunk.iter().map(|&i| &items[i]).collect();
            let batch = make_batch(&picked, pad_to)?;
            let seed = step_seed(cfg.seed, epoch, step);
            let loss = train_step(model, &mut opt, &batch, cfg.dropout, seed, epoch, step + 1)?;
            step_losses.push(loss);
            epoch_loss += loss;
            steps += 1;
        }
        let eval = evaluate_with(model, dev, &[metric], cfg.input_length)?;
        let score = eval.values[0].1;
        history.push(score);
        if best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, snapshot(model)));
        }
        let entry = EpochLog {
            epoch,
            train_loss: epoch_loss / steps as f64,
            dev_score: score,
        };
        if let Some(obs) = observer.as_mut() {
            obs(&entry);
        }
        log.push(entry);
        if cfg.early_stopping && early_stop_check_with(&history, cfg.patience, cfg.stop_rule).0 {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    let (_, best_idx) = early_stop_check(&history, usize::MAX);
    if let Some((_, snap)) = &best {
        restore(model, snap);
    }
    let mut report = evaluate_with(model, dev, &[metric], cfg.input_length)?;
    report.best_epoch = Some(best_idx + 1);
    report.history = history;
    Ok(TrainReport {
        learning_rate: cfg.learning_rate,
        metric,
        log,
        step_losses,
        stopped_early,
        report,
    })
}

/// Reorders a shuffled index list so classes alternate round-robin, keeping
/// each class's shuffled order. Non-class targets are left untouched.
fn stratify(order: &mut Vec<usize>, items: &[Prepared]) {
    let class = |i: usize| match items[i].target {
        Target::Class(c) => Some(c),
        _ => None,
    };
    if order.iter().any(|&i| class(i).is_none()) {
        return;
    }
    let n = order.iter().filter_map(|&i| class(i)).max().map_or(0, |m| m + 1);
    let mut queues: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for &i in order.iter().rev() {
        queues[class(i).unwrap_or(0)].push(i);
    }
    order.clear();
    while queues.iter().any(|q| !q.is_empty()) {
        for q in queues.iter_mut() {
            if let Some(i) = q.pop() {
                order.push(i);
            }
        }
    }
}

/// Runs `steps` optimizer updates at `cfg.learning_rate`, cycling through
/// `ds` in order, and returns each step's loss. No evaluation or stopping.
pub fn train_steps(model: &mut AdaptedModel, ds: &Dataset, cfg: &TrainConfig, steps: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let metric = cfg.metric.unwrap_or_else(|| Metric::default_for(ds.task_kind));
    check_compatible(model, ds, metric)?;
    let items = prepare(model, ds, cfg.input_length);
    let pad_to = (!cfg.pad_to_longest).then(|| max_len(model, cfg.input_length));
    let chunks: Vec<Vec<&Prepared>> = items
        .chunks(cfg.batch_size)
        .map(|c| c.iter().collect())
        .collect();
    let mut opt = AdamW::new(cfg.learning_rate, cfg.optimizer);
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let batch = make_batch(&chunks[step % chunks.len()], pad_to)?;
        let seed = step_seed(cfg.seed, 0, step);
        losses.push(train_step(model, &mut opt, &batch, cfg.dropout, seed, 1, step + 1)?);
    }
    Ok(losses)
}

/// Trains a copy of `initial` at every learning rate of `cfg.lr_grid` and
/// keeps the run with the best dev score (earliest rate on ties).
pub fn train_with_grid(
    initial: &AdaptedModel,
    train_set: &Dataset,
    dev: &Dataset,
    cfg: &TrainConfig,
) -> Result<(AdaptedModel, TrainReport, Vec<TrainReport>)> {
    train_with_grid_observed(initial, train_set, dev, cfg, None)
}

/// [`train_with_grid`] reporting every epoch together with its learning rate.
pub fn train_with_grid_observed(
    initial: &AdaptedModel,
    train_set: &Dataset,
    dev: &Dataset,
    cfg: &TrainConfig,
    mut observer: Option<GridObserver<'_>>,
) -> Result<(AdaptedModel, TrainReport, Vec<TrainReport>)> {
    let grid = if cfg.lr_grid.is_empty() {
        vec![cfg.learning_rate]
    } else {
        cfg.lr_grid.clone()
    };
    let mut runs: Vec<(AdaptedModel, TrainReport)> = Vec::with_capacity(grid.len());
    for lr in grid {
        let mut model = initial.clone();
        let run_cfg = TrainConfig {
            learning_rate: lr,
            ..cfg.clone()
        };
        let report = match observer.as_mut() {
            Some(obs) => {
                let mut each = |e: &EpochLog| obs(lr, e);
                train(&mut model, train_set, dev, &run_cfg, Some(&mut each))?
            }
            None => train(&mut model, train_set, dev, &run_cfg, None)?,
        };
        runs.push((model, report));
    }
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, (_, r))| if r.report.values[0].1 > runs[b].1.report.values[0].1 { i } else { b });
    let all: Vec<TrainReport> = runs.iter().map(|(_, r)| r.clone()).collect();
    let (model, report) = runs.swap_remove(best);
    Ok((model, report, all))
}

/// Predictions of a model on a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Classes(Vec<usize>),
    Reals(Vec<f64>),
    Texts(Vec<String>),
}

const EVAL_BATCH: usize = 32;

/// Best `(start, end)` with `start <= end`, both inside the context tokens.
pub fn decode_span(start: &[f64], end: &[f64], context_start: usize, context_end: usize) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for s in context_start..context_end.min(start.len()) {
        if start[s] == f64::NEG_INFINITY {
            continue;
        }
        for e in s..(s + MAX_ANSWER_TOKENS).min(context_end).min(end.len()) {
            let v = start[s] + end[e];
            if v > f64::NEG_INFINITY && best.map_or(true, |(b, _, _)| v > b) {
                best = Some((v, s, e));
            }
        }
    }
    best.map(|(_, s, e)| (s, e))
}

pub fn predict(model: &AdaptedModel, ds: &Dataset, input_length: usize) -> Result<Predictions> {
    let items = prepare(model, ds, input_length);
    let mut classes = Vec::new();
    let mut reals = Vec::new();
    let mut texts = Vec::new();
    for (ci, chunk) in items.chunks(EVAL_BATCH).enumerate() {
        let refs: Vec<&Prepared> = chunk.iter().collect();
        let batch = make_batch(&refs, None)?;
        match model.model().head() {
            Some(TaskHead::Classifier { .. }) => {
                let logits = model.classify(&batch)?;
                for b in 0..batch.batch {
                    classes.push(argmax(logits.row(b)).unwrap_or(0));
                }
            }
            Some(TaskHead::Regression) => reals.extend_from_slice(model.regress(&batch)?.data()),
            Some(TaskHead::Span) => {
                let (s, e) = model.span_predict(&batch)?;
                for (b, item) in chunk.iter().enumerate() {
                    let ex = &ds.examples[ci * EVAL_BATCH + b];
                    let Input::Pair(ctx, _) = &ex.input else {
                        return Err(Error::Input("span example without a context".into()));
                    };
                    let ctx_end = item.ids.len() - 1;
                    let text = match decode_span(s.row(b), e.row(b), item.context_start, ctx_end) {
                        Some((st, en)) => {
                            context_words(ctx, st - item.context_start, en - item.context_start)
                        }
                        None => String::new(),
                    };
                    texts.push(text);
                }
            }
            None => return Err(Error::Usage("model has no task head".into())),
        }
    }
    Ok(match model.model().head() {
        Some(TaskHead::Classifier { .. }) => Predictions::Classes(classes),
        Some(TaskHead::Regression) => Predictions::Reals(reals),
        _ => Predictions::Texts(texts),
    })
}

/// Eval-mode metrics on `ds` with the default input length.
pub fn evaluate(model: &AdaptedModel, ds: &Dataset, metrics: &[Metric]) -> Result<MetricReport> {
    evaluate_with(model, ds, metrics, TrainConfig::default().input_length)
}

pub fn evaluate_with(model: &AdaptedModel, ds: &Dataset, wanted: &[Metric], input_length: usize) -> Result<MetricReport> {
    if wanted.is_empty() {
        return Err(Error::Usage("no metrics requested".into()));
    }
    for &m in wanted {
        check_compatible(model, ds, m)?;
    }
    let preds = predict(model, ds, input_length)?;
    let mut values = Vec::with_capacity(wanted.len());
    let mut degenerate = false;
    for &m in wanted {
        let v = match (&preds, m) {
            (Predictions::Classes(p), _) => {
                let golds: Vec<usize> = ds
                    .examples
                    .iter()
                    .map(|e| match e.target {
                        Target::Class(c) => c,
                        _ => 0,
                    })
                    .collect();
                let k = ds.num_classes();
                match m {
                    Metric::Accuracy => metrics::accuracy(p, &golds)?,
                    Metric::Mcc => metrics::matthews_corr(p, &golds)?,
                    Metric::F1Binary => metrics::f1_scores(p, &golds, F1Mode::Binary, k)?,
                    Metric::F1Micro => metrics::f1_scores(p, &golds, F1Mode::Micro, k)?,
                    _ => metrics::f1_scores(p, &golds, F1Mode::Macro, k)?,
                }
            }
            (Predictions::Reals(p), _) => {
                let golds: Vec<f64> = ds
                    .examples
                    .iter()
                    .map(|e| match e.target {
                        Target::Real(v) => v,
                        _ => 0.0,
                    })
                    .collect();
                let c = metrics::spearman_corr(p, &golds)?;
                degenerate |= c.degenerate;
                c.value
            }
            (Predictions::Texts(p), _) => {
                let golds: Vec<&str> = ds
                    .examples
                    .iter()
                    .map(|e| match &e.target {
                        Target::Span { text, .. } => text.as_str(),
                        _ => "",
                    })
                    .collect();
                let s = metrics::squad_scores(p, &golds)?;
                if m == Metric::SquadEm {
                    s.exact_match
                } else {
                    s.f1
                }
            }
        };
        values.push((m, v));
    }
    Ok(MetricReport {
        values,
        best_epoch: None,
        history: Vec::new(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_examples() {
        assert_eq!(early_stop_check(&[5.0], 10), (false, 0));
        assert_eq!(early_stop_check(&[3.0, 2.0, 2.0, 2.0], 3), (true, 0));
        let inc: Vec<f64> = (0..60).map(|i| i as f64).collect();
        for n in 1..=inc.len() {
            assert!(!early_stop_check(&inc[..n], 10).0);
        }
        let mut h = vec![1.0, 2.0];
        h.extend(core::iter::repeat(3.0).take(11));
        assert_eq!(early_stop_check(&h[..12], 10), (false, 2));
        assert_eq!(early_stop_check(&h, 10), (true, 2));
    }

    #[test]
    fn consecutive_rule_resets_on_increase() {
        let h = [5.0, 1.0, 2.0, 2.0, 2.0];
        assert_eq!(early_stop_check_with(&h, 3, StopRule::SinceBest), (true, 0));
        assert_eq!(early_stop_check_with(&h, 3, StopRule::ConsecutiveNonIncrease), (false, 0));
        assert!(early_stop_check_with(&h, 2, StopRule::ConsecutiveNonIncrease).0);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.name()).unwrap(), m);
        }
        assert!(matches!(Metric::parse("bleu"), Err(Error::Usage(_))));
    }

    #[test]
    fn span_decoding_respects_order_and_context() {
        let s = [9.0, 0.0, 1.0, 6.0, f64::NEG_INFINITY];
        let e = [9.0, 0.0, 4.0, 0.0, f64::NEG_INFINITY];
        assert_eq!(decode_span(&s, &e, 1, 4), Some((3, 3)));
        assert_eq!(decode_span(&s, &e, 1, 3), Some((2, 2)));
        assert_eq!(decode_span(&s, &e, 4, 5), None);
    }

    #[test]
    fn protocol_defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.input_length, c.max_epochs, c.patience), (16, 128, 50, 10));
        assert_eq!(c.lr_grid, vec![2e-4, 5e-4]);
        assert_eq!(c.dropout, 0.1);
        c.validate().unwrap();
    }
}
