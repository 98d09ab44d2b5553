//! Datasets, their tab-separated text formats, and token encoding.
//!
//! Formats (UTF-8, one record per line, no header):
//! - `records`: `text<TAB>label`
//! - `pairs`: `text_a<TAB>text_b<TAB>label`
//! - `spans`: `context<TAB>question<TAB>answer_start<TAB>answer_text`, with
//!   `answer_start` a character offset into `context`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::ToyTokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    SingleClass,
    PairClass,
    Regression,
    Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Records,
    Pairs,
    Spans,
}

impl DataFormat {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "records" => Ok(DataFormat::Records),
            "pairs" => Ok(DataFormat::Pairs),
            "spans" => Ok(DataFormat::Spans),
            other => Err(Error::Usage(format!(
                "unknown dataset format `{other}`; expected records, pairs or spans"
            ))),
        }
    }

    fn fields(self) -> usize {
        match self {
            DataFormat::Records => 2,
            DataFormat::Pairs => 3,
            DataFormat::Spans => 4,
        }
    }
}

/// How label fields are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSpace {
    /// Label strings, in class-index order.
    Classes(Vec<String>),
    /// Real-valued targets.
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Single(String),
    Pair(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Real(f64),
    /// Answer at character offset `start` of the context.
    Span { start: usize, text: String },
}

/// For span examples the input is `Pair(context, question)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Input,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task_kind: TaskKind,
    /// Class names for classification tasks, empty otherwise.
    pub labels: Vec<String>,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn format(&self) -> DataFormat {
        match self.task_kind {
            TaskKind::SingleClass => DataFormat::Records,
            TaskKind::PairClass => DataFormat::Pairs,
            TaskKind::Regression => match self.examples.first().map(|e| &e.input) {
                Some(Input::Pair(..)) => DataFormat::Pairs,
                _ => DataFormat::Records,
            },
            TaskKind::Span => DataFormat::Spans,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Checks every target against the task kind and label set.
    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::Input("dataset has no examples".into()));
        }
        for (i, ex) in self.examples.iter().enumerate() {
            let ok = match (&ex.target, self.task_kind) {
                (Target::Class(c), TaskKind::SingleClass | TaskKind::PairClass) => *c < self.labels.len(),
                (Target::Real(v), TaskKind::Regression) => v.is_finite(),
                (Target::Span { start, text }, TaskKind::Span) => match &ex.input {
                    Input::Pair(ctx, _) => check_span(ctx, *start, text).is_ok(),
                    Input::Single(_) => false,
                },
                _ => false,
            };
            let shape_ok = matches!(
                (&ex.input, self.task_kind),
                (Input::Single(_), TaskKind::SingleClass | TaskKind::Regression)
                    | (Input::Pair(..), TaskKind::PairClass | TaskKind::Regression | TaskKind::Span)
            );
            if !ok || !shape_ok {
                return Err(Error::Input(format!("example {i} does not fit a {:?} task", self.task_kind)));
            }
        }
        Ok(())
    }
}

/// The answer's character range must lie inside `context` and match `text`.
pub fn check_span(context: &str, start: usize, text: &str) -> Result<()> {
    let n = context.chars().count();
    let len = text.chars().count();
    if len == 0 || start + len > n {
        return Err(Error::Input(format!(
            "answer at {start}..{} outside a context of {n} characters",
            start + len
        )));
    }
    let found: String = context.chars().skip(start).take(len).collect();
    if found != text {
        return Err(Error::Input(format!(
            "answer `{text}` does not match context text `{found}` at offset {start}"
        )));
    }
    Ok(())
}

fn field_ok(s: &str) -> bool {
    !s.contains(['\t', '\n', '\r'])
}

/// Parses dataset text. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_dataset(text: &str, format: DataFormat, labels: &LabelSpace) -> Result<Dataset> {
    let task_kind = match (format, labels) {
        (DataFormat::Spans, _) => TaskKind::Span,
        (_, LabelSpace::Real) => TaskKind::Regression,
        (DataFormat::Records, LabelSpace::Classes(_)) => TaskKind::SingleClass,
        (DataFormat::Pairs, LabelSpace::Classes(_)) => TaskKind::PairClass,
    };
    let class_names = match (task_kind, labels) {
        (TaskKind::SingleClass | TaskKind::PairClass, LabelSpace::Classes(c)) => c.clone(),
        _ => Vec::new(),
    };
    let mut examples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != format.fields() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} tab-separated fields, found {}", format.fields(), fields.len()),
            });
        }
        let label = fields[fields.len() - 1];
        let target = match task_kind {
            TaskKind::SingleClass | TaskKind::PairClass => {
                let c = class_names.iter().position(|n| n == label).ok_or_else(|| {
                    Error::Input(format!(
                        "line {line}: unknown label `{label}` (known: {})",
                        class_names.join(", ")
                    ))
                })?;
                Target::Class(c)
            }
            TaskKind::Regression => {
                let v: f64 = label.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("`{label}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("line {line}: non-finite target")));
                }
                Target::Real(v)
            }
            TaskKind::Span => {
                let start: usize = fields[2].trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("answer_start `{}` is not a non-negative integer", fields[2]),
                })?;
                check_span(fields[0], start, fields[3])
                    .map_err(|e| match e {
                        Error::Input(m) => Error::Input(format!("line {line}: {m}")),
                        other => other,
                    })?;
                Target::Span {
                    start,
                    text: fields[3].to_string(),
                }
            }
        };
        let input = match format {
            DataFormat::Records => Input::Single(fields[0].to_string()),
            _ => Input::Pair(fields[0].to_string(), fields[1].to_string()),
        };
        examples.push(Example { input, target });
    }
    let ds = Dataset {
        task_kind,
        labels: class_names,
        examples,
    };
    ds.validate()?;
    Ok(ds)
}

/// Serializes a dataset in its native format; `parse_dataset` reads it back
/// unchanged.
pub fn write_dataset(ds: &Dataset) -> Result<String> {
    let mut out = String::new();
    for (i, ex) in ds.examples.iter().enumerate() {
        let mut fields: Vec<String> = match &ex.input {
            Input::Single(t) => alloc::vec![t.clone()],
            Input::Pair(a, b) => alloc::vec![a.clone(), b.clone()],
        };
        match &ex.target {
            Target::Class(c) => fields.push(
                ds.labels
                    .get(*c)
                    .cloned()
                    .ok_or_else(|| Error::Input(format!("example {i}: class {c} has no name")))?,
            ),
            Target::Real(v) => fields.push(format!("{v:?}")),
            Target::Span { start, text } => {
                fields.push(format!("{start}"));
                fields.push(text.clone());
            }
        }
        if let Some(bad) = fields.iter().find(|f| !field_ok(f)) {
            return Err(Error::Input(format!("example {i}: field `{bad}` contains a tab or newline")));
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

/// Token ids and word-level target of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    /// For span tasks: inclusive token positions of the answer, or `(0, 0)`
    /// when truncation dropped it.
    pub span: Option<(usize, usize)>,
    /// For span tasks: token position of the first context word.
    pub context_start: usize,
}

/// Character range of each whitespace-separated word.
fn word_char_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, pos));
            }
        } else if start.is_none() {
            start = Some(pos);
        }
        pos += 1;
    }
    if let Some(s) = start {
        out.push((s, pos));
    }
    out
}

/// Words of the span `[start, start + len)` in character units, as word
/// indices (inclusive).
pub fn answer_word_range(context: &str, start: usize, len: usize) -> Option<(usize, usize)> {
    let words = word_char_ranges(context);
    let end = start + len;
    let first = words.iter().position(|&(s, e)| s <= start && start < e)?;
    let last = words.iter().rposition(|&(s, e)| s < end && end <= e)?;
    (first <= last).then_some((first, last))
}

/// Encodes one example. Span inputs are laid out as
/// `<s> question </s></s> context </s>`.
pub fn encode_example(tok: &ToyTokenizer, ex: &Example, max_len: usize) -> Encoded {
    match (&ex.input, &ex.target) {
        (Input::Pair(ctx, q), Target::Span { start, text }) => {
            let ids = tok.encode_pair(q, ctx, max_len);
            let q_kept = ToyTokenizer::words(q)
                .count()
                .min(ids.len().saturating_sub(4));
            let context_start = 1 + q_kept + 2;
            let ctx_kept = ids.len() - context_start - 1;
            let span = answer_word_range(ctx, *start, text.chars().count())
                .filter(|&(_, e)| e < ctx_kept)
                .map(|(s, e)| (context_start + s, context_start + e))
                .unwrap_or((0, 0));
            Encoded {
                ids,
                span: Some(span),
                context_start,
            }
        }
        (Input::Single(t), _) => Encoded {
            ids: tok.encode_single(t, max_len),
            span: None,
            context_start: 1,
        },
        (Input::Pair(a, b), _) => Encoded {
            ids: tok.encode_pair(a, b, max_len),
            span: None,
            context_start: 1,
        },
    }
}

/// Context words `first..=last` joined by single spaces.
pub fn context_words(context: &str, first: usize, last: usize) -> String {
    ToyTokenizer::words(context)
        .skip(first)
        .take(last + 1 - first)
        .collect::<Vec<_>>()
        .join(" ")
}
