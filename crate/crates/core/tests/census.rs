use unipelt_core::census::*;
use unipelt_core::composition::PRESET_NAMES;
use unipelt_core::{build_preset, Error, ModelConfig};

fn rb() -> ModelConfig {
    ModelConfig::roberta_base()
}

fn preset(name: &str) -> ParameterCensus {
    count_composition(&build_preset(name).unwrap(), &rb()).unwrap()
}

#[test]
fn base_breakdown_from_first_principles() {
    // Independent arithmetic: word/position/type tables plus one LayerNorm.
    let (h, v, p, t, f) = (768u64, 50_265u64, 514u64, 1u64, 3_072u64);
    let embeddings = (v + p + t) * h + 2 * h;
    let attention = 4 * (h * h + h) + 2 * h;
    let ffn = (h * f + f) + (f * h + h) + 2 * h;
    let pooler = h * h + h;
    assert_eq!(embeddings, 39_000_576);
    assert_eq!(attention + ffn, 7_087_872);
    assert_eq!(pooler, 590_592);

    let cfg = rb();
    assert_eq!(embedding_params(&cfg), embeddings);
    assert_eq!(layer_params(&cfg), attention + ffn);
    assert_eq!(pooler_params(&cfg), pooler);
    let base = count_base(&cfg);
    assert_eq!(base.total, embeddings + 12 * (attention + ffn) + pooler);
    assert_eq!(base.total, 124_645_632);
    assert_eq!(base.percent_label(), "100");
}

#[test]
fn table_totals_and_percentages() {
    let expected = [
        ("unipelt-lib", 11_083_376, "8.892"),
        ("unipelt-paper", 11_083_376, "8.892"),
        ("pt-unipelt-lib", 11_091_056, "8.898"),
        ("pt-unipelt-paper", 11_091_056, "8.898"),
        ("ia3-prefix-seqbn", 10_852_988, "8.707"),
        ("unipelt-stack3", 33_250_128, "26.68"),
    ];
    assert_eq!(expected.len(), PRESET_NAMES.len());
    for (name, total, pct) in expected {
        let c = preset(name);
        assert_eq!(c.trainable_total, total, "{name}");
        assert_eq!(c.total, c.entries.iter().map(|(_, n)| n).sum::<u64>(), "{name}");
        assert_eq!(c.base_total, 124_645_632);
        assert_eq!(c.percent_label(), pct, "{name}");
    }
}

#[test]
fn prompt_adds_one_component() {
    let diff = census_diff(&preset("pt-unipelt-lib"), &preset("unipelt-lib")).unwrap();
    assert_eq!(diff, vec![("prompt".to_string(), 7_680)]);
    assert!(census_diff(&preset("unipelt-lib"), &preset("unipelt-lib")).unwrap().is_empty());
}

#[test]
fn unipelt_versus_ia3_variant() {
    let diff = census_diff(&preset("unipelt-lib"), &preset("ia3-prefix-seqbn")).unwrap();
    let get = |p: &str| diff.iter().find(|(k, _)| k == p).map(|(_, v)| *v).unwrap_or(0);
    assert_eq!(get("group0.lora"), 294_912);
    assert_eq!(get("group0.lora.gates"), 18_456);
    assert_eq!(get("group0.ia3"), -55_296);
    assert_eq!(get("group0.ia3.gates"), -27_684);
    assert_eq!(diff.iter().map(|(_, v)| v).sum::<i64>(), 230_388);
    assert_eq!(diff.len(), 4);
}

#[test]
fn stacking_is_additive() {
    let one = preset("unipelt-lib").trainable_total;
    for k in 1..=3 {
        let mut spec = build_preset("unipelt-lib").unwrap();
        spec.stack_depth = k;
        assert_eq!(count_composition(&spec, &rb()).unwrap().trainable_total, k as u64 * one);
    }
    assert_eq!(preset("unipelt-stack3").trainable_total, 3 * one);
}

#[test]
fn alpha_does_not_change_counts() {
    assert_eq!(preset("unipelt-lib").entries, preset("unipelt-paper").entries);
}

#[test]
fn mismatched_configs_cannot_be_diffed() {
    let tiny = count_composition(&build_preset("unipelt-lib").unwrap(), &ModelConfig::tiny()).unwrap();
    assert!(matches!(census_diff(&tiny, &preset("unipelt-lib")), Err(Error::Usage(_))));
}

#[test]
fn empty_composition_trains_only_the_head() {
    let c = count_composition(&unipelt_core::CompositionSpec::empty(), &rb()).unwrap();
    assert_eq!(c.trainable_total, 0);
}

#[test]
fn formatting_helpers() {
    assert_eq!(group_thousands(124_645_632), "124,645,632");
    assert_eq!(group_thousands(-7_680), "-7,680");
    assert_eq!(group_thousands(0), "0");
    assert_eq!(format_percent(26.6765), "26.68");
    assert_eq!(format_percent(8.8920), "8.892");
    assert_eq!(format_percent(0.5), "0.5");
}

#[test]
fn census_is_pure() {
    assert_eq!(preset("unipelt-stack3"), preset("unipelt-stack3"));
}
