//! Classification, correlation and extractive-QA metrics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn same_len(op: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Input(format!("{op}: {a} predictions for {b} references")));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<f64> {
    same_len("accuracy", preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(Error::Input("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Matthews correlation over binary labels; 0 when any marginal is empty.
pub fn matthews_corr(preds: &[usize], golds: &[usize]) -> Result<f64> {
    same_len("matthews_corr", preds.len(), golds.len())?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in preds.iter().zip(golds) {
        if p > 1 || g > 1 {
            return Err(Error::Input(format!("matthews_corr needs binary labels, got {p}/{g}")));
        }
        match (p, g) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fn_ += 1,
        }
    }
    let denom = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if denom.contains(&0) {
        return Ok(0.0);
    }
    let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
    let den = libm::sqrt(denom.iter().map(|&d| d as f64).product());
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Mode {
    /// F1 of class 1.
    Binary,
    /// Pooled counts over all classes.
    Micro,
    /// Unweighted mean of per-class F1.
    Macro,
}

fn f1_from(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// F1 over labels in `0..num_classes`. Under [`F1Mode::Macro`] a class absent
/// from both predictions and references contributes 0.
pub fn f1_scores(preds: &[usize], golds: &[usize], mode: F1Mode, num_classes: usize) -> Result<f64> {
    same_len("f1_scores", preds.len(), golds.len())?;
    if let Some(&bad) = preds.iter().chain(golds).find(|&&c| c >= num_classes) {
        return Err(Error::Input(format!("label {bad} outside {num_classes} classes")));
    }
    if mode == F1Mode::Binary && num_classes != 2 {
        return Err(Error::Input(format!("binary F1 needs 2 classes, got {num_classes}")));
    }
    let mut tp = vec![0u64; num_classes];
    let mut fp = vec![0u64; num_classes];
    let mut fn_ = vec![0u64; num_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    Ok(match mode {
        F1Mode::Binary => f1_from(tp[1], fp[1], fn_[1]),
        F1Mode::Micro => f1_from(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum()),
        F1Mode::Macro => {
            let sum: f64 = (0..num_classes).map(|c| f1_from(tp[c], fp[c], fn_[c])).sum();
            sum / num_classes as f64
        }
    })
}

/// Correlation value plus whether it was undefined (constant ranks) and
/// reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

/// 1-based fractional ranks; ties share their average rank.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<Correlation> {
    same_len("pearson_corr", a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::Input("correlation needs at least two points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: (sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Pearson correlation of fractional ranks.
pub fn spearman_corr(preds: &[f64], golds: &[f64]) -> Result<Correlation> {
    same_len("spearman_corr", preds.len(), golds.len())?;
    if preds.iter().chain(golds).any(|v| v.is_nan()) {
        return Err(Error::Input("spearman_corr on NaN input".into()));
    }
    pearson_corr(&fractional_ranks(preds), &fractional_ranks(golds))
}

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, and split
/// on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquadScores {
    pub f1: f64,
    pub exact_match: f64,
}

fn token_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for w in gold {
        *counts.entry(w).or_default() += 1;
    }
    let mut common = 0;
    for w in pred {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean token-overlap F1 and exact match after [`normalize_answer`].
pub fn squad_scores<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G]) -> Result<SquadScores> {
    same_len("squad_scores", preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(Error::Input("squad_scores of an empty set".into()));
    }
    let (mut f1, mut em) = (0.0, 0.0);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (normalize_answer(p.as_ref()), normalize_answer(g.as_ref()));
        if p == g {
            em += 1.0;
        }
        f1 += token_f1(&p, &g);
    }
    let n = preds.len() as f64;
    Ok(SquadScores {
        f1: f1 / n,
        exact_match: em / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcc_worked_example() {
        // TP=3, TN=4, FP=1, FN=2
        let preds = [1, 1, 1, 0, 0, 0, 0, 1, 0, 0];
        let golds = [1, 1, 1, 0, 0, 0, 0, 0, 1, 1];
        let v = matthews_corr(&preds, &golds).unwrap();
        assert!((v - 10.0 / libm::sqrt(600.0)).abs() < 1e-15);
        assert_eq!(matthews_corr(&[1, 1, 1], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(matthews_corr(&[1, 0], &[0, 1]).unwrap(), -1.0);
        assert!(matthews_corr(&[2], &[1]).is_err());
    }

    #[test]
    fn macro_f1_hand_example() {
        // class 0 perfect, class 1 half right, class 2 never right
        let preds = [0, 0, 1, 1, 1];
        let golds = [0, 0, 1, 2, 2];
        let per_class_1 = 2.0 * 1.0 / (2.0 + 2.0);
        assert_eq!(per_class_1, 0.5);
        assert!((f1_scores(&preds, &golds, F1Mode::Macro, 3).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn micro_f1_equals_accuracy() {
        let preds = [0, 2, 1, 1, 0, 2];
        let golds = [0, 1, 1, 2, 0, 2];
        assert_eq!(
            f1_scores(&preds, &golds, F1Mode::Micro, 3).unwrap(),
            accuracy(&preds, &golds).unwrap()
        );
    }

    #[test]
    fn spearman_worked_example() {
        let c = spearman_corr(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((c.value - 0.8).abs() < 1e-12);
        let c = spearman_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
        assert!(spearman_corr(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn squad_normalization() {
        let s = squad_scores(&["black cat"], &["cat"]).unwrap();
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.exact_match, 0.0);
        // articles are stripped before comparison
        let s = squad_scores(&["The Cat!"], &["cat"]).unwrap();
        assert_eq!((s.f1, s.exact_match), (1.0, 1.0));
        let s = squad_scores(&["the"], &["a ."]).unwrap();
        assert_eq!((s.f1, s.exact_match), (1.0, 1.0));
        let s = squad_scores(&["dog"], &[""]).unwrap();
        assert_eq!((s.f1, s.exact_match), (0.0, 0.0));
        assert!(squad_scores(&["a"], &["a", "b"]).is_err());
    }
}
