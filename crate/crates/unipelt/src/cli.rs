//! Command-line surface. Each subcommand writes its human report to `out`
//! and returns an error carrying the process exit code on failure.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use unipelt_core::census::{count_composition, group_thousands};
use unipelt_core::composition::PRESET_NAMES;
use unipelt_core::data::{DataFormat, LabelSpace, TaskKind};
use unipelt_core::train::{evaluate_with, train_with_grid_observed, EpochLog, Metric, MetricReport};
use unipelt_core::verify::{run_suite, Check, Suite};
use unipelt_core::{attach, build_preset, init_model, ModelConfig, TaskHead};

use crate::census_io::{self, CensusRecord, OutputFormat};
use crate::checkpoint::{self, TaskInfo};
use crate::data_io::load_dataset;
use crate::error::{write_bytes, CliError, CliResult};
use crate::experiment::{self, Experiment, Overrides};

#[derive(Debug, Parser)]
#[command(name = "unipelt", version, about = "Gated adapter compositions: censuses, training, evaluation and checks")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output location: run directory for `train`, report file otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Compare censuses against the bundled golden files.
    #[arg(long, global = true)]
    pub golden: bool,
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter census of one or more presets (all six when none is named).
    CountParams {
        #[arg(long)]
        preset: Vec<String>,
        /// Model shape: roberta-base or tiny.
        #[arg(long)]
        shape: Option<String>,
    },
    /// List the preset compositions.
    Presets,
    /// Train an adapted model as described by `--config` and flags.
    Train {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        train_data: Option<PathBuf>,
        #[arg(long)]
        dev_data: Option<PathBuf>,
        /// Fixed learning rate, replacing the grid.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
    },
    /// Evaluate a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// records, pairs or spans; inferred from the checkpoint's task otherwise.
        #[arg(long)]
        data_format: Option<String>,
        /// Metric to report; repeatable. The task default when absent.
        #[arg(long)]
        metric: Vec<String>,
    },
    /// Run a property suite: grad, identity, freeze or census.
    Verify { suite: String },
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut text = String::new();
    let result = match &cli.command {
        Command::CountParams { preset, shape } => count_params(cli, preset, shape.as_deref(), &mut text),
        Command::Presets => presets(cli, &mut text),
        Command::Train { preset, shape, train_data, dev_data, lr, epochs, patience } => {
            let flags = Overrides {
                preset: preset.clone(),
                shape: shape.clone(),
                seed: cli.seed,
                out: cli.out.clone(),
                train_data: train_data.clone(),
                dev_data: dev_data.clone(),
                learning_rate: *lr,
                max_epochs: *epochs,
                patience: *patience,
            };
            return train(cli, &flags, out);
        }
        Command::Eval { checkpoint, data, data_format, metric } => {
            eval(cli, checkpoint, data, data_format.as_deref(), metric, &mut text)
        }
        Command::Verify { suite } => verify(cli, suite, &mut text),
    };
    emit(out, &text)?;
    result
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Write { path: "<stdout>".into(), source })
}

fn count_params(cli: &Cli, names: &[String], shape: Option<&str>, text: &mut String) -> CliResult<()> {
    let (names, cfg): (Vec<String>, ModelConfig) = match &cli.config {
        Some(path) => {
            // The file supplies the preset and model shape unless flags override them.
            let flags = Overrides {
                preset: names.first().cloned(),
                shape: shape.map(str::to_string),
                ..Overrides::default()
            };
            let exp = Experiment::resolve(Some(path), &flags)?;
            let names = if names.is_empty() { vec![exp.preset.clone()] } else { names.to_vec() };
            (names, exp.model)
        }
        None => {
            let names = if names.is_empty() { PRESET_NAMES.iter().map(|s| s.to_string()).collect() } else { names.to_vec() };
            (names, experiment::shape(shape.unwrap_or("roberta-base"))?)
        }
    };
    if cli.golden && cfg != ModelConfig::roberta_base() {
        return Err(CliError::Usage("golden censuses exist only for the roberta-base shape".into()));
    }
    let mut records = String::new();
    let mut failures = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let census = count_composition(&build_preset(name)?, &cfg)?;
        let rec = CensusRecord::from_census(name, &census);
        if i > 0 && cli.format == OutputFormat::Table {
            text.push('\n');
        }
        text.push_str(&census_io::render(&rec, cli.format));
        records.push_str(&census_io::render_records(&rec));
        if cli.golden {
            let diffs = census_io::golden_mismatches(&rec, &census_io::golden(name)?);
            if diffs.is_empty() {
                let _ = writeln!(text, "golden {name}: match");
            } else {
                let _ = writeln!(text, "golden {name}: MISMATCH");
                for d in &diffs {
                    let _ = writeln!(text, "  {d}");
                }
                failures.push(name.clone());
            }
        }
    }
    if let Some(path) = &cli.out {
        write_bytes(path, records.as_bytes())?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("golden census mismatch: {}", failures.join(", "))))
    }
}

fn presets(cli: &Cli, text: &mut String) -> CliResult<()> {
    let cfg = ModelConfig::roberta_base();
    if cli.format == OutputFormat::Table {
        let _ = writeln!(text, "{:<18} {:>5}  {:<28} {:>12} {:>7}", "preset", "stack", "members", "trainable", "%Param");
    }
    for name in PRESET_NAMES {
        let spec = build_preset(name)?;
        let members: Vec<&str> = spec.members.iter().map(|m| m.kind()).collect();
        let c = count_composition(&spec, &cfg)?;
        match cli.format {
            OutputFormat::Table => {
                let _ = writeln!(
                    text,
                    "{name:<18} {:>5}  {:<28} {:>12} {:>7}",
                    spec.stack_depth,
                    members.join("+"),
                    group_thousands(c.trainable_total as i64),
                    c.percent_label()
                );
            }
            OutputFormat::Records => {
                let _ = writeln!(text, "{name}\t{}\t{}\t{}\t{}", spec.stack_depth, members.join(","), c.trainable_total, c.percent_label());
            }
        }
    }
    Ok(())
}

/// Writes each line to stdout and the run log.
struct Tee<'a> {
    out: &'a mut dyn Write,
    log: File,
    path: PathBuf,
}

impl Tee<'_> {
    fn line(&mut self, s: &str) -> CliResult<()> {
        let write = |w: &mut dyn Write| writeln!(w, "{s}").and_then(|_| w.flush());
        write(self.out).map_err(|source| CliError::Write { path: "<stdout>".into(), source })?;
        write(&mut self.log).map_err(|source| CliError::Write { path: self.path.clone(), source })
    }
}

fn task_info(kind: TaskKind, labels: &LabelSpace) -> TaskInfo {
    let labels = match labels {
        LabelSpace::Classes(l) => l.clone(),
        LabelSpace::Real => vec![],
    };
    TaskInfo { kind, labels }
}

fn train(cli: &Cli, flags: &Overrides, out: &mut dyn Write) -> CliResult<()> {
    let exp = Experiment::resolve(cli.config.as_deref(), flags)?;
    let train_path = exp
        .train_data
        .clone()
        .ok_or_else(|| CliError::Usage("no training data; set [data].train or --train-data".into()))?;
    let train_set = load_dataset(&train_path, exp.format, &exp.labels)?;
    let dev_set = match &exp.dev_data {
        Some(p) => load_dataset(p, exp.format, &exp.labels)?,
        None => train_set.clone(),
    };
    let base = init_model(&exp.model, Some(exp.head()), exp.seed)?;
    let initial = attach(base, &exp.composition, exp.seed.wrapping_add(1))?;

    let log_path = exp.out.join("train.log");
    std::fs::create_dir_all(&exp.out).map_err(|source| CliError::Write { path: exp.out.clone(), source })?;
    let log = File::create(&log_path).map_err(|source| CliError::Write { path: log_path.clone(), source })?;
    let mut tee = Tee { out, log, path: log_path };
    tee.line("# unipelt train")?;
    for l in exp.header().lines() {
        tee.line(l)?;
    }

    let metric = exp.train.metric.unwrap_or_else(|| Metric::default_for(train_set.task_kind));
    let start = Instant::now();
    let mut log_error = None;
    let mut observe = |lr: f64, e: &EpochLog| {
        let line = format!(
            "lr={lr:e}\tepoch={}\ttrain_loss={:.6}\tdev_{}={:.6}\telapsed_s={:.3}",
            e.epoch,
            e.train_loss,
            metric.name(),
            e.dev_score,
            start.elapsed().as_secs_f64()
        );
        if let Err(err) = tee.line(&line) {
            log_error.get_or_insert(err);
        }
    };
    let result = train_with_grid_observed(&initial, &train_set, &dev_set, &exp.train, Some(&mut observe));
    if let Some(err) = log_error {
        return Err(err);
    }
    let (model, best, runs) = result?;
    for r in &runs {
        let last = r.log.last().map_or(0, |e| e.epoch);
        let how = if r.stopped_early { "stopped early" } else { "ran to the epoch limit" };
        tee.line(&format!(
            "# lr={:e}: {how} at epoch {last}; best epoch {}",
            r.learning_rate,
            r.report.best_epoch.unwrap_or(0)
        ))?;
    }
    let train_score = evaluate_with(&model, &train_set, &[metric], exp.train.input_length)?.values[0].1;
    tee.line(&format!("final\tlr={:e}\tbest_epoch={}\ttrain_{}={train_score:.6}", best.learning_rate, best.report.best_epoch.unwrap_or(0), metric.name()))?;

    let ckpt = exp.out.join("model.ckpt");
    checkpoint::save(&ckpt, &model, Some(&task_info(train_set.task_kind, &exp.labels)))?;
    let mut text = String::new();
    render_report(&best.report, cli.format, &mut text);
    let _ = writeln!(text, "checkpoint {}", ckpt.display());
    emit(tee.out, &text)
}

fn render_report(r: &MetricReport, format: OutputFormat, text: &mut String) {
    for (m, v) in &r.values {
        match format {
            OutputFormat::Table => {
                let _ = writeln!(text, "{:<10} {v:.6}", m.name());
            }
            OutputFormat::Records => {
                let _ = writeln!(text, "metric\t{}\t{v}", m.name());
            }
        }
    }
    let sep = if format == OutputFormat::Table { " " } else { "\t" };
    if let Some(b) = r.best_epoch {
        let _ = writeln!(text, "best_epoch{sep}{b}");
    }
    if r.degenerate {
        let _ = writeln!(text, "degenerate{sep}true");
    }
}

fn eval(
    cli: &Cli,
    ckpt: &Path,
    data: &Path,
    data_format: Option<&str>,
    metrics: &[String],
    text: &mut String,
) -> CliResult<()> {
    let loaded = checkpoint::load(ckpt)?;
    let head = loaded.model.model().head();
    let task = loaded.task.clone().unwrap_or_else(|| match head {
        Some(TaskHead::Classifier { classes }) => TaskInfo {
            kind: TaskKind::SingleClass,
            labels: (0..classes).map(|c| c.to_string()).collect(),
        },
        Some(TaskHead::Span) => TaskInfo { kind: TaskKind::Span, labels: vec![] },
        _ => TaskInfo { kind: TaskKind::Regression, labels: vec![] },
    });
    let format = match data_format {
        Some(f) => DataFormat::parse(f)?,
        None => match task.kind {
            TaskKind::PairClass => DataFormat::Pairs,
            TaskKind::Span => DataFormat::Spans,
            _ => DataFormat::Records,
        },
    };
    let labels = if task.labels.is_empty() { LabelSpace::Real } else { LabelSpace::Classes(task.labels.clone()) };
    let ds = load_dataset(data, format, &labels)?;
    let wanted = if metrics.is_empty() {
        vec![Metric::default_for(ds.task_kind)]
    } else {
        metrics.iter().map(|m| Metric::parse(m)).collect::<Result<Vec<_>, _>>()?
    };
    let input_length = unipelt_core::train::TrainConfig::default().input_length;
    let report = evaluate_with(&loaded.model, &ds, &wanted, input_length)?;
    render_report(&report, cli.format, text);
    if let Some(path) = &cli.out {
        let mut records = String::new();
        render_report(&report, OutputFormat::Records, &mut records);
        write_bytes(path, records.as_bytes())?;
    }
    Ok(())
}

fn verify(cli: &Cli, suite: &str, text: &mut String) -> CliResult<()> {
    let suite = Suite::parse(suite)?;
    let seed = cli.seed.unwrap_or(0);
    let mut report = run_suite(suite, seed)?;
    if suite == Suite::Census {
        for (name, _) in census_io::GOLDEN {
            let census = count_composition(&build_preset(name)?, &ModelConfig::roberta_base())?;
            let diffs = census_io::golden_mismatches(&CensusRecord::from_census(name, &census), &census_io::golden(name)?);
            report.checks.push(Check {
                name: format!("golden {name}"),
                passed: diffs.is_empty(),
                value: diffs.len() as f64,
                detail: diffs.first().cloned().unwrap_or_else(|| "match".into()),
            });
        }
    }
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut records = String::new();
    for c in &report.checks {
        let status = if c.passed { "ok" } else { "FAIL" };
        let _ = writeln!(records, "{}\t{status}\t{}\t{}", c.name, c.value, c.detail);
        if cli.format == OutputFormat::Table {
            let _ = writeln!(text, "{:<width$}  {status:<4}  {}", c.name, c.detail);
        }
    }
    if cli.format == OutputFormat::Records {
        text.push_str(&records);
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    let summary = match suite {
        Suite::Grad => format!("max relative error {:.3e}", report.max_value()),
        Suite::Identity => format!("max logit delta {:.3e}", report.max_value()),
        _ => format!("{} checks", report.checks.len()),
    };
    let _ = writeln!(
        text,
        "verify {}: {} ({summary}, seed {seed})",
        suite.name(),
        if failed.is_empty() { "passed" } else { "FAILED" }
    );
    if let Some(path) = &cli.out {
        write_bytes(path, records.as_bytes())?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} failed: {}", suite.name(), failed.join(", "))))
    }
}
