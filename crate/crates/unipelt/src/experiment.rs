//! TOML experiment files and their resolution against command-line flags.
//!
//! ```toml
//! preset = "unipelt-paper"
//! shape = "tiny"            # or a full [model] table
//! seed = 0
//! out = "runs/synthetic"
//!
//! [data]
//! train = "data/train.tsv"  # relative to this file
//! dev = "data/dev.tsv"
//! format = "records"        # records | pairs | spans
//! labels = ["blue", "red"]  # omit for real-valued targets
//!
//! [train]                   # any TrainConfig field except `seed`
//! max_epochs = 50
//! ```
//!
//! Every setting resolves with precedence flag > file > default, and the
//! source of each is kept for the run header.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use unipelt_core::data::{DataFormat, LabelSpace};
use unipelt_core::train::TrainConfig;
use unipelt_core::{build_preset, CompositionSpec, ModelConfig, TaskHead};

use crate::error::{read_text, CliError, CliResult};

pub const DEFAULT_PRESET: &str = "unipelt-paper";
pub const DEFAULT_SHAPE: &str = "tiny";
pub const DEFAULT_OUT: &str = "runs/latest";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    train: Option<PathBuf>,
    dev: Option<PathBuf>,
    format: Option<String>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    preset: Option<String>,
    shape: Option<String>,
    model: Option<ModelConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    data: DataSection,
    train: Option<toml::Table>,
}

/// Values given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub shape: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub dev_data: Option<PathBuf>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    File,
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "flag",
            Source::File => "file",
            Source::Default => "default",
        })
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub preset: String,
    pub composition: CompositionSpec,
    pub model: ModelConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub train_data: Option<PathBuf>,
    pub dev_data: Option<PathBuf>,
    pub format: DataFormat,
    pub labels: LabelSpace,
    pub train: TrainConfig,
    /// `(setting, value, source)` in header order.
    pub provenance: Vec<(String, String, Source)>,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: impl FnOnce() -> T) -> (T, Source) {
    match (flag, file) {
        (Some(v), _) => (v, Source::Flag),
        (None, Some(v)) => (v, Source::File),
        (None, None) => (default(), Source::Default),
    }
}

fn bad_file(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::ConfigFile { path: path.to_path_buf(), msg: msg.into() }
}

impl Experiment {
    /// Resolves `flags` over the file at `path` (if any) over defaults.
    /// Relative data and output paths in the file are taken relative to it.
    pub fn resolve(path: Option<&Path>, flags: &Overrides) -> CliResult<Self> {
        let (file, base) = match path {
            Some(p) => {
                let text = read_text(p)?;
                let file: ExperimentFile = toml::from_str(&text).map_err(|e| bad_file(p, e.message()))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ExperimentFile::default(), PathBuf::new()),
        };
        let cfg_path = path.unwrap_or(Path::new("<flags>"));
        let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let mut prov = Vec::new();
        let mut note = |key: &str, value: String, src: Source| prov.push((key.to_string(), value, src));

        let (preset, src) = pick(flags.preset.clone(), file.preset, || DEFAULT_PRESET.into());
        let composition = build_preset(&preset)?;
        note("preset", preset.clone(), src);

        if file.shape.is_some() && file.model.is_some() {
            return Err(bad_file(cfg_path, "give either `shape` or a [model] table, not both"));
        }
        let (model, shape_label, src) = match (&flags.shape, file.model, file.shape) {
            (Some(s), _, _) => (shape(s)?, s.clone(), Source::Flag),
            (None, Some(m), _) => (m, "[model] table".into(), Source::File),
            (None, None, Some(s)) => (shape(&s)?, s, Source::File),
            (None, None, None) => (shape(DEFAULT_SHAPE)?, DEFAULT_SHAPE.into(), Source::Default),
        };
        model.validate()?;
        note("shape", shape_label, src);

        let (seed, src) = pick(flags.seed, file.seed, || 0);
        note("seed", seed.to_string(), src);
        let (out, src) = pick(flags.out.clone(), file.out.map(rel), || DEFAULT_OUT.into());
        note("out", out.display().to_string(), src);

        let data = file.data;
        let shown = |p: &Option<PathBuf>, none: &str| p.as_ref().map_or(none.into(), |p| p.display().to_string());
        let (train_data, src) = pick_opt(flags.train_data.clone(), data.train.map(rel));
        note("data.train", shown(&train_data, "(none)"), src);
        let (dev_data, src) = pick_opt(flags.dev_data.clone(), data.dev.map(rel));
        note("data.dev", shown(&dev_data, "(train set)"), src);
        let format = match data.format {
            Some(f) => {
                note("data.format", f.clone(), Source::File);
                DataFormat::parse(&f)?
            }
            None => {
                note("data.format", "records".into(), Source::Default);
                DataFormat::Records
            }
        };
        let labels = match data.labels {
            Some(l) => {
                note("data.labels", l.join(","), Source::File);
                LabelSpace::Classes(l)
            }
            None => {
                note("data.labels", "(real-valued)".into(), Source::Default);
                LabelSpace::Real
            }
        };

        let table = file.train.unwrap_or_default();
        let known = known_train_keys();
        if let Some(k) = table.keys().find(|k| !known.contains(k)) {
            let msg = if k == "seed" {
                "set the seed at the top level, not in [train]".to_string()
            } else {
                format!("unknown [train] key `{k}`; known keys: {}", known.join(", "))
            };
            return Err(bad_file(cfg_path, msg));
        }
        let mut train: TrainConfig = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| bad_file(cfg_path, e.message()))?;
        train.seed = seed;
        let mut train_note = |key: &str, flag: bool, value: String| {
            let src = if flag {
                Source::Flag
            } else if table.contains_key(key) {
                Source::File
            } else {
                Source::Default
            };
            note(&format!("train.{key}"), value, src);
        };
        if let Some(lr) = flags.learning_rate {
            // A fixed rate replaces the grid.
            train.learning_rate = lr;
            train.lr_grid = vec![lr];
        }
        if let Some(e) = flags.max_epochs {
            train.max_epochs = e;
        }
        if let Some(p) = flags.patience {
            train.patience = p;
        }
        train_note("lr_grid", flags.learning_rate.is_some(), format!("{:?}", train.lr_grid));
        train_note("batch_size", false, train.batch_size.to_string());
        train_note("input_length", false, train.input_length.to_string());
        train_note("max_epochs", flags.max_epochs.is_some(), train.max_epochs.to_string());
        train_note("patience", flags.patience.is_some(), train.patience.to_string());
        train_note("early_stopping", false, train.early_stopping.to_string());
        train_note("dropout", false, train.dropout.to_string());
        for key in ["pad_to_longest", "balanced_batches", "stop_rule", "optimizer", "metric"] {
            let value = toml::Value::try_from(&train)
                .ok()
                .and_then(|v| v.get(key).cloned())
                .map_or("(task default)".into(), |v| v.to_string());
            train_note(key, false, value);
        }
        train.validate()?;

        Ok(Experiment {
            preset,
            composition,
            model,
            seed,
            out,
            train_data,
            dev_data,
            format,
            labels,
            train,
            provenance: prov,
        })
    }

    /// Header lines: one `# key value (source)` line per setting.
    pub fn header(&self) -> String {
        let width = self.provenance.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
        self.provenance
            .iter()
            .map(|(k, v, s)| format!("# {k:<width$}  {v}  ({s})\n"))
            .collect()
    }

    /// The head implied by the dataset format and labels.
    pub fn head(&self) -> TaskHead {
        match (&self.format, &self.labels) {
            (DataFormat::Spans, _) => TaskHead::Span,
            (_, LabelSpace::Real) => TaskHead::Regression,
            (_, LabelSpace::Classes(l)) => TaskHead::Classifier { classes: l.len() },
        }
    }
}

fn pick_opt<T>(flag: Option<T>, file: Option<T>) -> (Option<T>, Source) {
    match (flag, file) {
        (Some(v), _) => (Some(v), Source::Flag),
        (None, Some(v)) => (Some(v), Source::File),
        (None, None) => (None, Source::Default),
    }
}

pub fn shape(name: &str) -> CliResult<ModelConfig> {
    ModelConfig::by_name(name)
        .ok_or_else(|| CliError::Usage(format!("unknown model shape `{name}`; valid shapes: roberta-base, tiny")))
}

fn known_train_keys() -> Vec<String> {
    let v = toml::Value::try_from(TrainConfig::default()).expect("TrainConfig serializes");
    let mut keys: Vec<String> = v.as_table().map(|t| t.keys().cloned().collect()).unwrap_or_default();
    keys.retain(|k| k != "seed");
    keys.push("metric".into());
    keys.sort();
    keys.dedup();
    keys
}
