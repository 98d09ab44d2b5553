use std::path::{Path, PathBuf};

use proptest::prelude::*;
use unipelt::census_io::*;
use unipelt::data_io::{load_dataset, save_dataset};
use unipelt::experiment::{Experiment, Overrides, Source};
use unipelt::CliError;
use unipelt_core::census::count_composition;
use unipelt_core::data::{DataFormat, LabelSpace};
use unipelt_core::verify::{REFERENCE_BASE, REFERENCE_TOTALS};
use unipelt_core::{build_preset, synthetic, ModelConfig};

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic.toml")
}

fn source(exp: &Experiment, key: &str) -> (String, Source) {
    let (_, v, s) = exp.provenance.iter().find(|(k, _, _)| k == key).unwrap();
    (v.clone(), *s)
}

#[test]
fn golden_files_carry_the_reference_totals() {
    for (name, total, pct) in REFERENCE_TOTALS {
        let g = golden(name).unwrap();
        assert_eq!(g.preset, name);
        assert_eq!(g.trainable_total, total);
        assert_eq!(g.entries.iter().map(|(_, n)| n).sum::<u64>(), total);
        assert_eq!(g.base_total, REFERENCE_BASE);
        assert_eq!(g.percent, pct);
        let got = CensusRecord::from_census(name, &count_composition(&build_preset(name).unwrap(), &ModelConfig::roberta_base()).unwrap());
        assert!(golden_mismatches(&got, &g).is_empty());
    }
    assert!(golden("nonsense").is_err());
}

#[test]
fn mismatches_name_the_component() {
    let mut g = golden("unipelt-lib").unwrap();
    let want = g.clone();
    g.entries[0].1 += 1;
    g.trainable_total += 1;
    let d = golden_mismatches(&g, &want);
    assert_eq!(d.len(), 2);
    assert!(d[0].starts_with("group0.lora: 294913"));
}

fn record() -> impl Strategy<Value = CensusRecord> {
    (
        "[a-z][a-z0-9-]{0,12}",
        prop::collection::vec(("[a-z][a-z0-9.]{0,16}", any::<u64>()), 0..8),
        any::<u64>(),
        any::<u64>(),
        "[0-9]{1,3}(\\.[0-9]{1,3})?",
    )
        .prop_map(|(preset, entries, trainable_total, base_total, percent)| CensusRecord {
            preset,
            entries,
            trainable_total,
            base_total,
            percent,
        })
}

proptest! {
    #[test]
    fn records_round_trip(recs in prop::collection::vec(record(), 1..4)) {
        let text: String = recs.iter().map(render_records).collect();
        prop_assert_eq!(parse_records(&text).unwrap(), recs);
    }
}

#[test]
fn malformed_records_are_rejected() {
    assert!(parse_records("entry\tx\t1\n").is_err());
    assert!(parse_records("preset\tp\nentry\tx\tmany\n").is_err());
    assert!(parse_records("preset\tp\nwhat\t1\n").is_err());
    assert!(parse_records("").unwrap().is_empty());
}

#[test]
fn table_lists_every_component_and_the_totals() {
    let t = render_table(&golden("pt-unipelt-lib").unwrap());
    assert!(t.contains("prompt"));
    assert!(t.contains("7,680"));
    assert!(t.contains("11,091,056"));
    assert!(t.contains("124,645,632"));
    assert!(t.lines().any(|l| l.starts_with("%Param") && l.ends_with("8.898")));
}

#[test]
fn bundled_data_is_the_synthetic_task() {
    let exp = Experiment::resolve(Some(&bundled()), &Overrides::default()).unwrap();
    let ds = load_dataset(exp.train_data.as_ref().unwrap(), exp.format, &exp.labels).unwrap();
    assert_eq!(ds, synthetic::pattern_classification(32, 0));
}

#[test]
fn dataset_files_round_trip_and_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic::span_copy(10, 2);
    let p = dir.path().join("spans.tsv");
    save_dataset(&p, &ds).unwrap();
    assert_eq!(load_dataset(&p, DataFormat::Spans, &LabelSpace::Real).unwrap(), ds);

    std::fs::write(&p, "a\t0\nb\n").unwrap();
    let labels = LabelSpace::Classes(vec!["0".into()]);
    match load_dataset(&p, DataFormat::Records, &labels) {
        Err(CliError::Usage(m)) => assert!(m.contains(":2:"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_dataset(&dir.path().join("none.tsv"), DataFormat::Records, &labels), Err(CliError::Read { .. })));
}

#[test]
fn flags_override_file_over_defaults() {
    let exp = Experiment::resolve(Some(&bundled()), &Overrides::default()).unwrap();
    assert_eq!(source(&exp, "preset"), ("unipelt-paper".into(), Source::File));
    assert_eq!(source(&exp, "seed"), ("0".into(), Source::File));
    assert_eq!(source(&exp, "train.max_epochs"), ("50".into(), Source::File));
    assert_eq!(source(&exp, "train.early_stopping").1, Source::Default);
    assert_eq!(exp.train.lr_grid, vec![2e-4, 5e-4]);

    let flags = Overrides {
        preset: Some("unipelt-stack3".into()),
        seed: Some(9),
        learning_rate: Some(1e-3),
        max_epochs: Some(4),
        ..Overrides::default()
    };
    let exp = Experiment::resolve(Some(&bundled()), &flags).unwrap();
    assert_eq!(exp.composition.stack_depth, 3);
    assert_eq!((exp.seed, exp.train.seed), (9, 9));
    assert_eq!(exp.train.lr_grid, vec![1e-3]);
    assert_eq!(exp.train.max_epochs, 4);
    assert_eq!(source(&exp, "preset").1, Source::Flag);
    assert_eq!(source(&exp, "train.max_epochs"), ("4".into(), Source::Flag));
    assert_eq!(source(&exp, "train.patience").1, Source::File);
    let header = exp.header();
    assert!(header.lines().all(|l| l.starts_with("# ")));
    assert!(header.contains("(flag)") && header.contains("(file)") && header.contains("(default)"));

    let none = Experiment::resolve(None, &Overrides::default()).unwrap();
    assert!(none.provenance.iter().all(|(_, _, s)| *s == Source::Default));
    assert_eq!(none.model, ModelConfig::tiny());
    assert_eq!(none.train.max_epochs, 50);
}

#[test]
fn bad_experiment_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let write = |body: &str| {
        let p = dir.path().join("x.toml");
        std::fs::write(&p, body).unwrap();
        Experiment::resolve(Some(&p), &Overrides::default())
    };
    assert!(matches!(write("presett = 1\n"), Err(CliError::ConfigFile { .. })));
    assert!(matches!(write("[train]\nseed = 3\n"), Err(CliError::ConfigFile { msg, .. }) if msg.contains("top level")));
    assert!(matches!(write("[train]\nbatchsize = 3\n"), Err(CliError::ConfigFile { .. })));
    assert!(matches!(write("[train]\nbatch_size = 0\n"), Err(CliError::Core(_))));
    assert!(matches!(write("preset = \"nope\"\n"), Err(CliError::Core(_))));
    assert!(matches!(write("shape = \"huge\"\n"), Err(CliError::Usage(_))));
    assert!(write("shape = \"tiny\"\n[model]\nhidden = 4\n").is_err());
    let ok = write("[train]\nmetric = \"mcc\"\nstop_rule = \"consecutive-non-increase\"\n").unwrap();
    assert_eq!(ok.train.metric, Some(unipelt_core::train::Metric::Mcc));
}
