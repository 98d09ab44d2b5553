use proptest::prelude::*;
use unipelt_core::data::*;
use unipelt_core::synthetic;
use unipelt_core::tokenizer::ToyTokenizer;
use unipelt_core::Error;

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-zA-Z0-9,.!?'é]{1,8}", 1..8).prop_map(|w| w.join(" "))
}

fn classes() -> LabelSpace {
    LabelSpace::Classes(vec!["neg".into(), "pos".into(), "mixed".into()])
}

fn span_example() -> impl Strategy<Value = Example> {
    (text(), text(), any::<prop::sample::Index>(), 1usize..4).prop_map(|(ctx, q, at, take)| {
        let words: Vec<&str> = ctx.split(' ').collect();
        let first = at.index(words.len());
        let last = (first + take).min(words.len());
        let start: usize = words[..first].iter().map(|w| w.chars().count() + 1).sum();
        let answer = words[first..last].join(" ");
        Example {
            input: Input::Pair(ctx.clone(), q),
            target: Target::Span { start, text: answer },
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_round_trip(rows in prop::collection::vec((text(), 0usize..3), 1..12)) {
        let ds = Dataset {
            task_kind: TaskKind::SingleClass,
            labels: vec!["neg".into(), "pos".into(), "mixed".into()],
            examples: rows.into_iter().map(|(t, c)| Example { input: Input::Single(t), target: Target::Class(c) }).collect(),
        };
        let written = write_dataset(&ds).unwrap();
        prop_assert_eq!(parse_dataset(&written, DataFormat::Records, &classes()).unwrap(), ds);
    }

    #[test]
    fn pairs_round_trip_with_real_targets(rows in prop::collection::vec((text(), text(), -1e6f64..1e6), 1..12)) {
        let ds = Dataset {
            task_kind: TaskKind::Regression,
            labels: vec![],
            examples: rows.into_iter().map(|(a, b, v)| Example { input: Input::Pair(a, b), target: Target::Real(v) }).collect(),
        };
        let written = write_dataset(&ds).unwrap();
        prop_assert_eq!(parse_dataset(&written, DataFormat::Pairs, &LabelSpace::Real).unwrap(), ds);
    }

    #[test]
    fn spans_round_trip_and_encode_inside_context(examples in prop::collection::vec(span_example(), 1..8)) {
        let ds = Dataset { task_kind: TaskKind::Span, labels: vec![], examples };
        let written = write_dataset(&ds).unwrap();
        let back = parse_dataset(&written, DataFormat::Spans, &LabelSpace::Real).unwrap();
        prop_assert_eq!(&back, &ds);
        let tok = ToyTokenizer::new(100);
        for ex in &ds.examples {
            let enc = encode_example(&tok, ex, 62);
            if let Some((s, e)) = enc.span {
                prop_assert!(s <= e && e < enc.ids.len());
                prop_assert!(s >= enc.context_start);
                // Decoding the word range gives back the answer text.
                let (Input::Pair(ctx, _), Target::Span { text, .. }) = (&ex.input, &ex.target) else { unreachable!() };
                let words = context_words(ctx, s - enc.context_start, e - enc.context_start);
                prop_assert_eq!(&words, text);
            }
        }
    }
}

#[test]
fn malformed_lines_report_their_line_number() {
    let bad = "good text\tpos\nonly one field\n";
    match parse_dataset(bad, DataFormat::Records, &classes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    let unknown = "a\tpos\nb\tmaybe\n";
    let err = parse_dataset(unknown, DataFormat::Records, &classes()).unwrap_err();
    assert!(matches!(&err, Error::Input(m) if m.contains("line 2") && m.contains("maybe")), "{err:?}");
    let nan = "a\tb\tNaN\n";
    assert!(parse_dataset(nan, DataFormat::Pairs, &LabelSpace::Real).is_err());
    let span = "the cat sat\twho\t4\tdog\n";
    assert!(matches!(parse_dataset(span, DataFormat::Spans, &LabelSpace::Real), Err(Error::Input(_))));
    assert!(matches!(parse_dataset("", DataFormat::Records, &classes()), Err(Error::Input(_))));
    assert!(DataFormat::parse("csv").is_err());
}

#[test]
fn blank_lines_and_crlf_are_tolerated() {
    let ds = parse_dataset("a b\tneg\r\n\r\nc\tpos\r\n", DataFormat::Records, &classes()).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.examples[1].target, Target::Class(1));
}

#[test]
fn fields_with_tabs_cannot_be_written() {
    let ds = Dataset {
        task_kind: TaskKind::SingleClass,
        labels: vec!["x".into()],
        examples: vec![Example { input: Input::Single("a\tb".into()), target: Target::Class(0) }],
    };
    assert!(write_dataset(&ds).is_err());
}

#[test]
fn truncated_answers_map_to_the_first_position() {
    let tok = ToyTokenizer::new(100);
    let ctx = (0..40).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    let start = ctx.find("w39").unwrap();
    let ex = Example { input: Input::Pair(ctx, "where".into()), target: Target::Span { start, text: "w39".into() } };
    assert_eq!(encode_example(&tok, &ex, 16).span, Some((0, 0)));
    let full = encode_example(&tok, &ex, 62);
    assert!(full.span.unwrap().0 >= full.context_start);
}

#[test]
fn synthetic_tasks_are_valid_balanced_and_seeded() {
    let ds = synthetic::pattern_classification(32, 0);
    ds.validate().unwrap();
    assert_eq!(ds.len(), 32);
    let ones = ds.examples.iter().filter(|e| e.target == Target::Class(1)).count();
    assert_eq!(ones, 16);
    assert_eq!(ds, synthetic::pattern_classification(32, 0));
    for ds in [synthetic::rank_regression(20, 3), synthetic::span_copy(20, 3)] {
        ds.validate().unwrap();
        let text = write_dataset(&ds).unwrap();
        let labels = LabelSpace::Real;
        assert_eq!(parse_dataset(&text, ds.format(), &labels).unwrap(), ds);
    }
}
