//! Closed-form parameter accounting by component.
//!
//! Nothing here allocates tensors; the counts are derived from shapes alone
//! and cross-checked against instantiated models in tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::composition::CompositionSpec;
use crate::config::ModelConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterCensus {
    pub config: ModelConfig,
    /// `(component path, count)` in a stable order.
    pub entries: Vec<(String, u64)>,
    pub total: u64,
    pub trainable_total: u64,
    pub base_total: u64,
    pub percent_of_base: f64,
}

impl ParameterCensus {
    fn from_entries(config: &ModelConfig, entries: Vec<(String, u64)>, base_total: u64) -> Self {
        let total = entries.iter().map(|(_, n)| n).sum();
        ParameterCensus {
            config: config.clone(),
            entries,
            total,
            trainable_total: total,
            base_total,
            percent_of_base: 100.0 * total as f64 / base_total as f64,
        }
    }

    pub fn get(&self, path: &str) -> Option<u64> {
        self.entries.iter().find(|(p, _)| p == path).map(|(_, n)| *n)
    }

    /// `percent_of_base` at four significant figures.
    pub fn percent_label(&self) -> String {
        format_percent(self.percent_of_base)
    }
}

pub fn embedding_params(cfg: &ModelConfig) -> u64 {
    let h = cfg.hidden as u64;
    (cfg.vocab_size + cfg.max_positions + cfg.type_vocab) as u64 * h + 2 * h
}

pub fn layer_params(cfg: &ModelConfig) -> u64 {
    let (h, f) = (cfg.hidden as u64, cfg.ffn_inner as u64);
    4 * (h * h + h) + (f * h + f) + (h * f + h) + 2 * (2 * h)
}

pub fn pooler_params(cfg: &ModelConfig) -> u64 {
    let h = cfg.hidden as u64;
    h * h + h
}

/// Embeddings, each layer, and the pooler; every entry counts as trainable
/// (full fine-tuning).
pub fn count_base(cfg: &ModelConfig) -> ParameterCensus {
    let mut entries = Vec::with_capacity(cfg.num_layers + 2);
    entries.push(("embeddings".into(), embedding_params(cfg)));
    for l in 0..cfg.num_layers {
        entries.push((format!("layers.{l}"), layer_params(cfg)));
    }
    entries.push(("pooler".into(), pooler_params(cfg)));
    let base: u64 = entries.iter().map(|(_, n)| n).sum();
    ParameterCensus::from_entries(cfg, entries, base)
}

/// Adapter and gate parameters of `spec` on `cfg`, task head excluded.
///
/// Paths are `prompt`, `group{g}.{kind}` and `group{g}.{kind}.gates`; gate
/// entries appear only for gated members.
pub fn count_composition(spec: &CompositionSpec, cfg: &ModelConfig) -> Result<ParameterCensus> {
    cfg.validate()?;
    spec.validate(cfg)?;
    let mut entries = Vec::new();
    if let Some(p) = spec.prompt_member() {
        entries.push(("prompt".into(), p.kernel_param_count(cfg)));
    }
    for g in 0..spec.stack_depth {
        for m in spec.layer_members() {
            entries.push((format!("group{g}.{}", m.kind()), m.kernel_param_count(cfg)));
            let gates = m.gate_param_count(cfg);
            if gates > 0 {
                entries.push((format!("group{g}.{}.gates", m.kind()), gates));
            }
        }
    }
    Ok(ParameterCensus::from_entries(cfg, entries, count_base(cfg).total))
}

/// Per-component `a − b`, skipping components that agree. A component
/// missing on one side counts as zero there.
pub fn census_diff(a: &ParameterCensus, b: &ParameterCensus) -> Result<Vec<(String, i64)>> {
    if a.config != b.config {
        return Err(Error::Usage("censuses were taken on different model configs".into()));
    }
    let mut out: Vec<(String, i64)> = Vec::new();
    for (path, n) in &a.entries {
        let other = b.get(path).unwrap_or(0);
        if *n != other {
            out.push((path.clone(), *n as i64 - other as i64));
        }
    }
    for (path, n) in &b.entries {
        if a.get(path).is_none() && *n != 0 {
            out.push((path.clone(), -(*n as i64)));
        }
    }
    Ok(out)
}

/// Four significant figures with trailing zeros dropped: `8.892`, `26.68`,
/// `100`.
pub fn format_percent(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let magnitude = libm::floor(libm::log10(libm::fabs(p))) as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    let s = format!("{p:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').into()
    } else {
        s
    }
}

/// `1234567` as `1,234,567`.
pub fn group_thousands(n: i64) -> String {
    let digits = format!("{}", n.unsigned_abs());
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
    if n < 0 {
        out.push('-');
    }
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::build_preset;

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(8.8923), "8.892");
        assert_eq!(format_percent(26.6757), "26.68");
        assert_eq!(format_percent(100.0), "100");
        assert_eq!(format_percent(0.5), "0.5");
        assert_eq!(format_percent(0.0), "0");
    }

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(124_645_632), "124,645,632");
        assert_eq!(group_thousands(-7680), "-7,680");
        assert_eq!(group_thousands(769), "769");
        assert_eq!(group_thousands(0), "0");
    }

    #[test]
    fn diff_of_self_is_empty() {
        let cfg = ModelConfig::tiny();
        let c = count_composition(&build_preset("unipelt-lib").unwrap(), &cfg).unwrap();
        assert!(census_diff(&c, &c).unwrap().is_empty());
    }

    #[test]
    fn diff_requires_same_config() {
        let a = count_base(&ModelConfig::tiny());
        let b = count_base(&ModelConfig::roberta_base());
        assert!(matches!(census_diff(&a, &b), Err(Error::Usage(_))));
    }
}
