//! Census rendering as a human table or as tab-separated records, and the
//! golden censuses shipped with the tool.
//!
//! Records format, one tab-separated line each:
//!
//! ```text
//! preset          <name>
//! entry           <component path>  <count>
//! trainable_total <count>
//! base_total      <count>
//! percent         <label>
//! ```

use std::fmt::Write as _;

use unipelt_core::census::{group_thousands, ParameterCensus};

use crate::error::{CliError, CliResult};

/// The figures a census file carries; comparable across formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusRecord {
    pub preset: String,
    pub entries: Vec<(String, u64)>,
    pub trainable_total: u64,
    pub base_total: u64,
    pub percent: String,
}

impl CensusRecord {
    pub fn from_census(preset: &str, c: &ParameterCensus) -> Self {
        CensusRecord {
            preset: preset.to_string(),
            entries: c.entries.clone(),
            trainable_total: c.trainable_total,
            base_total: c.base_total,
            percent: c.percent_label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Table,
    Records,
}

pub fn render(r: &CensusRecord, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(r),
        OutputFormat::Records => render_records(r),
    }
}

pub fn render_table(r: &CensusRecord) -> String {
    let mut rows: Vec<(String, String)> = r
        .entries
        .iter()
        .map(|(p, n)| (p.clone(), group_thousands(*n as i64)))
        .collect();
    rows.push(("trainable total".into(), group_thousands(r.trainable_total as i64)));
    rows.push(("base model".into(), group_thousands(r.base_total as i64)));
    rows.push(("%Param".into(), r.percent.clone()));
    let left = rows.iter().map(|(a, _)| a.len()).max().unwrap_or(0).max(9);
    let right = rows.iter().map(|(_, b)| b.len()).max().unwrap_or(0).max(10);
    let mut out = format!("preset {}\n", r.preset);
    let _ = writeln!(out, "{:<left$}  {:>right$}", "component", "parameters");
    for (i, (a, b)) in rows.iter().enumerate() {
        if i == r.entries.len() {
            let _ = writeln!(out, "{}", "-".repeat(left + right + 2));
        }
        let _ = writeln!(out, "{a:<left$}  {b:>right$}");
    }
    out
}

pub fn render_records(r: &CensusRecord) -> String {
    let mut out = format!("preset\t{}\n", r.preset);
    for (p, n) in &r.entries {
        let _ = writeln!(out, "entry\t{p}\t{n}");
    }
    let _ = writeln!(out, "trainable_total\t{}", r.trainable_total);
    let _ = writeln!(out, "base_total\t{}", r.base_total);
    let _ = writeln!(out, "percent\t{}", r.percent);
    out
}

/// Parses one or more records blocks; each `preset` line starts a new one.
pub fn parse_records(text: &str) -> CliResult<Vec<CensusRecord>> {
    let bad = |line: usize, msg: &str| CliError::Usage(format!("census records line {line}: {msg}"));
    let mut out: Vec<CensusRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let number = |s: &str| s.parse::<u64>().map_err(|_| bad(line, "expected an integer"));
        if fields[0] == "preset" {
            let [_, name] = fields[..] else { return Err(bad(line, "expected `preset<TAB>name`")) };
            out.push(CensusRecord {
                preset: name.into(),
                entries: vec![],
                trainable_total: 0,
                base_total: 0,
                percent: String::new(),
            });
            continue;
        }
        let cur = out.last_mut().ok_or_else(|| bad(line, "record before any `preset` line"))?;
        match fields[..] {
            ["entry", path, n] => cur.entries.push((path.into(), number(n)?)),
            ["trainable_total", n] => cur.trainable_total = number(n)?,
            ["base_total", n] => cur.base_total = number(n)?,
            ["percent", p] => cur.percent = p.into(),
            _ => return Err(bad(line, &format!("unrecognized record `{raw}`"))),
        }
    }
    Ok(out)
}

/// Golden censuses at the roberta-base shape, one records file per preset.
pub const GOLDEN: [(&str, &str); 6] = [
    ("unipelt-lib", include_str!("../golden/unipelt-lib.tsv")),
    ("unipelt-paper", include_str!("../golden/unipelt-paper.tsv")),
    ("pt-unipelt-lib", include_str!("../golden/pt-unipelt-lib.tsv")),
    ("pt-unipelt-paper", include_str!("../golden/pt-unipelt-paper.tsv")),
    ("ia3-prefix-seqbn", include_str!("../golden/ia3-prefix-seqbn.tsv")),
    ("unipelt-stack3", include_str!("../golden/unipelt-stack3.tsv")),
];

pub fn golden(preset: &str) -> CliResult<CensusRecord> {
    let (_, text) = GOLDEN
        .iter()
        .find(|(n, _)| *n == preset)
        .ok_or_else(|| CliError::Usage(format!("no golden census for `{preset}`")))?;
    parse_records(text)?
        .pop()
        .ok_or_else(|| CliError::Usage(format!("golden census for `{preset}` is empty")))
}

/// Differences between a computed census and its golden copy, one line each.
pub fn golden_mismatches(got: &CensusRecord, want: &CensusRecord) -> Vec<String> {
    let mut out = Vec::new();
    if got.entries != want.entries {
        for (p, n) in &want.entries {
            match got.entries.iter().find(|(q, _)| q == p) {
                Some((_, m)) if m == n => {}
                Some((_, m)) => out.push(format!("{p}: {m} (golden {n})")),
                None => out.push(format!("{p}: missing (golden {n})")),
            }
        }
        for (p, m) in &got.entries {
            if !want.entries.iter().any(|(q, _)| q == p) {
                out.push(format!("{p}: {m} (not in golden)"));
            }
        }
        if out.is_empty() {
            out.push("component order differs".into());
        }
    }
    if got.trainable_total != want.trainable_total {
        out.push(format!("trainable total {} (golden {})", got.trainable_total, want.trainable_total));
    }
    if got.base_total != want.base_total {
        out.push(format!("base total {} (golden {})", got.base_total, want.base_total));
    }
    if got.percent != want.percent {
        out.push(format!("percent {} (golden {})", got.percent, want.percent));
    }
    out
}
