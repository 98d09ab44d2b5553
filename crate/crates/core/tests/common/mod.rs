//! Helpers and brute-force metric oracles shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unipelt_core::encoder::Targets;
use unipelt_core::tokenizer::ToyTokenizer;
use unipelt_core::{Batch, ModelConfig};

/// A batch of random-length token sequences with optional padding target.
pub fn random_batch(cfg: &ModelConfig, rows: usize, max_len: usize, seed: u64, targets: Targets) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tok = ToyTokenizer::new(cfg.vocab_size);
    let seqs: Vec<Vec<usize>> = (0..rows)
        .map(|_| {
            let n = rng.random_range(2..=max_len.saturating_sub(2).max(2));
            let words: Vec<String> = (0..n).map(|_| format!("w{}", rng.random_range(0..40))).collect();
            tok.encode_single(&words.join(" "), max_len)
        })
        .collect();
    Batch::from_sequences(&seqs, None, targets).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Oracles below deliberately use different formulations from the library.

pub fn oracle_accuracy(p: &[usize], g: &[usize]) -> f64 {
    let mut hits = 0usize;
    for i in 0..p.len() {
        hits += usize::from(p[i] == g[i]);
    }
    hits as f64 / p.len() as f64
}

/// Pearson via pairwise differences: sum_{i<j} dx dy / sqrt(sum dx^2 sum dy^2).
/// Returns `None` when either side is constant.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Phi coefficient of the two 0/1 indicator vectors.
pub fn oracle_mcc(p: &[usize], g: &[usize]) -> f64 {
    let x: Vec<f64> = p.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = g.iter().map(|&v| v as f64).collect();
    oracle_pearson(&x, &y).unwrap_or(0.0)
}

/// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

fn class_f1(p: &[usize], g: &[usize], c: usize) -> f64 {
    let predicted = p.iter().filter(|&&v| v == c).count() as f64;
    let actual = g.iter().filter(|&&v| v == c).count() as f64;
    let hit = p.iter().zip(g).filter(|&(&a, &b)| a == c && b == c).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let precision = hit / predicted;
    let recall = hit / actual;
    2.0 * precision * recall / (precision + recall)
}

pub fn oracle_f1_binary(p: &[usize], g: &[usize]) -> f64 {
    class_f1(p, g, 1)
}

pub fn oracle_f1_macro(p: &[usize], g: &[usize], classes: usize) -> f64 {
    (0..classes).map(|c| class_f1(p, g, c)).sum::<f64>() / classes as f64
}

/// Pooled counts over classes; for single-label data this is the accuracy.
pub fn oracle_f1_micro(p: &[usize], g: &[usize], classes: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        for i in 0..p.len() {
            match (p[i] == c, g[i] == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

fn oracle_tokens(s: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else if !ch.is_ascii_punctuation() {
            cur.extend(ch.to_lowercase());
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.retain(|w| w != "a" && w != "an" && w != "the");
    words
}

pub fn oracle_em(p: &str, g: &str) -> f64 {
    f64::from(u8::from(oracle_tokens(p) == oracle_tokens(g)))
}

/// Token F1 with the multiset intersection found by merging sorted lists.
pub fn oracle_squad_f1(p: &str, g: &str) -> f64 {
    let (mut a, mut b) = (oracle_tokens(p), oracle_tokens(g));
    if a.is_empty() || b.is_empty() {
        return f64::from(u8::from(a.is_empty() && b.is_empty()));
    }
    a.sort();
    b.sort();
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let pr = common as f64 / a.len() as f64;
    let rc = common as f64 / b.len() as f64;
    2.0 * pr * rc / (pr + rc)
}

/// Random label vectors, correlated with each other about half the time.
pub fn random_labels(rng: &mut ChaCha8Rng, classes: usize) -> (Vec<usize>, Vec<usize>) {
    let n = rng.random_range(1..=40);
    let g: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let p = g
        .iter()
        .map(|&v| if rng.random_bool(0.5) { v } else { rng.random_range(0..classes) })
        .collect();
    (p, g)
}

/// Random real pairs with frequent ties (values on a coarse grid).
pub fn random_reals(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=30);
    let coarse = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        if coarse {
            rng.random_range(0..5) as f64
        } else {
            rng.random_range(-3.0..3.0)
        }
    };
    let x: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + draw(rng)).collect();
    (x, y)
}

const WORDS: &[&str] = &["The", "cat", "a", "sat", "on", "mat.", "An", "dog,", "red", "the", "blue!", "cat"];

/// Random answer strings sharing a small vocabulary with punctuation and articles.
pub fn random_answers(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let n = rng.random_range(1..=10);
    let phrase = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(0..5);
        (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
    };
    let g: Vec<String> = (0..n).map(|_| phrase(rng)).collect();
    let p = g.iter().map(|s| if rng.random_bool(0.3) { s.clone() } else { phrase(rng) }).collect();
    (p, g)
}
