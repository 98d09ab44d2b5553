//! Small generated tasks for offline training checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Example, Input, Target, TaskKind};

fn vocab(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Balanced two-class task: each text repeats its class's marker word
/// (`red` for class 0, `blue` for class 1) 5 to 10 times, so a single token
/// identity separates the classes. Labels are `"0"` and `"1"`.
pub fn pattern_classification(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let markers = ["red", "blue"];
    let mut examples: Vec<Example> = (0..n)
        .map(|i| {
            let class = i % 2;
            let len = rng.random_range(5..=10);
            Example {
                input: Input::Single(alloc::vec![markers[class]; len].join(" ")),
                target: Target::Class(class),
            }
        })
        .collect();
    examples.shuffle(&mut rng);
    Dataset {
        task_kind: TaskKind::SingleClass,
        labels: alloc::vec!["0".into(), "1".into()],
        examples,
    }
}

/// Regression task: the target is the fraction of `up` words in a text of
/// `up` and `down` words.
pub fn rank_regression(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|_| {
            let len = rng.random_range(4..=10);
            let ups = rng.random_range(0..=len);
            let mut words: Vec<&str> = (0..len).map(|i| if i < ups { "up" } else { "down" }).collect();
            words.shuffle(&mut rng);
            Example {
                input: Input::Single(words.join(" ")),
                target: Target::Real(ups as f64 / len as f64),
            }
        })
        .collect();
    Dataset {
        task_kind: TaskKind::Regression,
        labels: Vec::new(),
        examples,
    }
}

/// Extractive task: the question names one word of the context and the
/// answer is that word.
pub fn span_copy(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = vocab("w", 24);
    let examples = (0..n)
        .map(|_| {
            let len = rng.random_range(4..=8);
            let mut words: Vec<&String> = pool.choose_multiple(&mut rng, len).collect();
            words.shuffle(&mut rng);
            let pick = rng.random_range(0..len);
            let start: usize = words[..pick].iter().map(|w| w.chars().count() + 1).sum();
            let context = words.iter().map(|w| w.as_str()).collect::<Vec<_>>().join(" ");
            Example {
                input: Input::Pair(context, format!("find {}", words[pick])),
                target: Target::Span {
                    start,
                    text: words[pick].clone(),
                },
            }
        })
        .collect();
    Dataset {
        task_kind: TaskKind::Span,
        labels: Vec::new(),
        examples,
    }
}
