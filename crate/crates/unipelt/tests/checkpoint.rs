use proptest::prelude::*;
use unipelt::checkpoint::{decode, encode, load, save, TaskInfo, MAGIC};
use unipelt::CliError;
use unipelt_core::composition::PRESET_NAMES;
use unipelt_core::data::TaskKind;
use unipelt_core::{attach, build_preset, init_model, AdaptedModel, ModelConfig, TaskHead};

fn model(preset: &str, head: TaskHead, seed: u64) -> AdaptedModel {
    let base = init_model(&ModelConfig::tiny(), Some(head), seed).unwrap();
    attach(base, &build_preset(preset).unwrap(), seed + 1).unwrap()
}

fn same_bits(a: &AdaptedModel, b: &AdaptedModel) -> bool {
    a.store().len() == b.store().len()
        && a.store().iter().zip(b.store().iter()).all(|((_, p), (_, q))| {
            p.name == q.name && p.trainable == q.trainable && p.value.bits_eq(&q.value)
        })
}

#[test]
fn every_preset_and_head_round_trips_bit_exactly() {
    let heads = [TaskHead::Classifier { classes: 3 }, TaskHead::Regression, TaskHead::Span];
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let head = heads[i % 3];
        let m = model(name, head, i as u64);
        let task = TaskInfo { kind: TaskKind::PairClass, labels: vec!["a".into(), "b".into(), "c".into()] };
        let bytes = encode(&m, Some(&task)).unwrap();
        let back = decode(&bytes).unwrap();
        assert!(same_bits(&m, &back.model), "{name}");
        assert_eq!(back.model.spec(), m.spec());
        assert_eq!(back.model.config(), m.config());
        assert_eq!(back.model.model().head(), Some(head));
        assert_eq!(back.task, Some(task.clone()));
        assert_eq!(encode(&back.model, back.task.as_ref()).unwrap(), bytes, "{name}");
    }
}

#[test]
fn headless_checkpoints_and_files() {
    let base = init_model(&ModelConfig::tiny(), None, 0).unwrap();
    let m = attach(base, &build_preset("unipelt-lib").unwrap(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/m.ckpt");
    save(&path, &m, None).unwrap();
    let back = load(&path).unwrap();
    assert!(same_bits(&m, &back.model));
    assert_eq!(back.task, None);
    assert!(matches!(load(&dir.path().join("missing.ckpt")), Err(CliError::Read { .. })));
}

#[test]
fn damaged_files_are_rejected() {
    let m = model("unipelt-lib", TaskHead::Classifier { classes: 2 }, 0);
    let bytes = encode(&m, None).unwrap();
    let reject = |b: &[u8]| matches!(decode(b), Err(CliError::Checkpoint(_)));

    assert!(reject(b"not a checkpoint"));
    assert!(reject(&bytes[..bytes.len() - 20]));
    let mut v = bytes.clone();
    v[MAGIC.len()] = 9;
    assert!(reject(&v));
    let mut v = bytes.clone();
    v.extend_from_slice(b"junk");
    assert!(reject(&v));
    // Drop the END section: the reader runs off the end.
    assert!(reject(&bytes[..bytes.len() - 12]));

    // A model with a different composition has different tensor names.
    let other = encode(&model("ia3-prefix-seqbn", TaskHead::Classifier { classes: 2 }, 0), None).unwrap();
    let conf_end = 8 + 4 + 4 + 8 + u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let other_conf_end = 8 + 4 + 4 + 8 + u64::from_le_bytes(other[16..24].try_into().unwrap()) as usize;
    let mut spliced = other[..other_conf_end].to_vec();
    spliced.extend_from_slice(&bytes[conf_end..]);
    assert!(reject(&spliced));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Arbitrary bit patterns (NaN payloads, infinities, -0.0) survive.
    #[test]
    fn arbitrary_values_survive(bits in prop::collection::vec(any::<u64>(), 1..64), seed in 0u64..100) {
        let mut m = model("pt-unipelt-paper", TaskHead::Span, seed);
        let ids: Vec<_> = m.store().ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let data = m.store_mut().value_mut(id).data_mut();
            for (j, x) in data.iter_mut().enumerate().take(bits.len()) {
                *x = f64::from_bits(bits[(j + k) % bits.len()]);
            }
        }
        let bytes = encode(&m, None).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert!(same_bits(&m, &back.model));
        prop_assert_eq!(encode(&back.model, None).unwrap(), bytes);
    }
}
