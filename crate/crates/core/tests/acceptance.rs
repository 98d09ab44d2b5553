//! Acceptance run: one PASS/FAIL line per criterion, with wall time against
//! its budget. Exits nonzero when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unipelt_core::census::{census_diff, count_base, count_composition};
use unipelt_core::composition::PRESET_NAMES;
use unipelt_core::metrics::{self, F1Mode};
use unipelt_core::synthetic::pattern_classification;
use unipelt_core::train::{early_stop_check, evaluate, train, train_with_grid, Metric, TrainConfig};
use unipelt_core::verify::{self, run_suite, Suite};
use unipelt_core::{build_preset, ModelConfig, Result};

type Outcome = Result<(bool, String)>;

struct Criterion {
    id: usize,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn table_totals() -> Outcome {
    let cfg = ModelConfig::roberta_base();
    let base = count_base(&cfg).total;
    let mut ok = base == verify::REFERENCE_BASE;
    let mut parts = vec![format!("base {base}")];
    for (name, total, pct) in verify::REFERENCE_TOTALS {
        let c = count_composition(&build_preset(name)?, &cfg)?;
        let hit = c.trainable_total == total && c.percent_label() == pct;
        ok &= hit;
        parts.push(format!("{name} {} / {}%", c.trainable_total, c.percent_label()));
    }
    Ok((ok, parts.join(", ")))
}

fn census_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut mismatches = 0;
    for i in 0..50 {
        let cfg = verify::random_tiny_config(&mut rng);
        let spec = verify::random_spec(&mut rng, &cfg);
        let ((sym, counted), (base, allocated)) = verify::census_vs_instantiated(&cfg, &spec, i)?;
        mismatches += usize::from(sym != counted || base != allocated);
    }
    Ok((mismatches == 0, format!("50 random pairs, {mismatches} mismatches")))
}

fn prompt_delta_and_stacking() -> Outcome {
    let cfg = ModelConfig::roberta_base();
    let count = |n: &str| count_composition(&build_preset(n).unwrap(), &cfg);
    let diff = census_diff(&count("pt-unipelt-lib")?, &count("unipelt-lib")?)?;
    let stack = count("unipelt-stack3")?.trainable_total;
    let one = count("unipelt-lib")?.trainable_total;
    let ok = diff == vec![("prompt".to_string(), 7_680)] && stack == 3 * one && stack == 33_250_128;
    Ok((ok, format!("diff {diff:?}; stack3 {stack} = 3 x {one}")))
}

fn identity() -> Outcome {
    let cfg = ModelConfig::tiny();
    let mut worst: f64 = 0.0;
    for name in PRESET_NAMES {
        let (closed, free) = verify::identity_deltas(&cfg, &build_preset(name)?, 0)?;
        worst = worst.max(closed).max(free);
    }
    Ok((worst <= 1e-10, format!("max |delta logit| {worst:.3e} over 6 presets (tol 1e-10)")))
}

fn gradients() -> Outcome {
    let r = run_suite(Suite::Grad, 0)?;
    let n = r.checks.len();
    Ok((r.passed() && r.max_value() < 1e-4, format!("{n} checks, max relative error {:.3e} (tol 1e-4)", r.max_value())))
}

fn freeze() -> Outcome {
    let r = run_suite(Suite::Freeze, 0)?;
    let failed: Vec<String> = r.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let detail = if failed.is_empty() {
        "6 presets x 20 steps: backbone bit-identical, adapters moved".to_string()
    } else {
        failed.join("; ")
    };
    Ok((failed.is_empty(), detail))
}

fn overfitting() -> Outcome {
    let data = pattern_classification(32, 0);
    let cfg = TrainConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in PRESET_NAMES {
        let initial = verify::tiny_adapted(&ModelConfig::tiny(), &build_preset(name)?, 0)?;
        let (model, best, _) = train_with_grid(&initial, &data, &data, &cfg)?;
        let acc = evaluate(&model, &data, &[Metric::Accuracy])?.values[0].1;
        let epoch = best.report.best_epoch.unwrap_or(0);
        ok &= acc == 1.0 && epoch <= cfg.max_epochs;
        parts.push(format!("{name} {:.0}% @ep{epoch} lr {:.0e}", acc * 100.0, best.learning_rate));
    }
    Ok((ok, parts.join(", ")))
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    for _ in 0..100 {
        let (p, g) = random_labels(&mut rng, 4);
        if metrics::accuracy(&p, &g)? != oracle_accuracy(&p, &g) {
            bad.push("accuracy");
        }
        if !close(metrics::f1_scores(&p, &g, F1Mode::Micro, 4)?, oracle_f1_micro(&p, &g, 4)) {
            bad.push("f1-micro");
        }
        if !close(metrics::f1_scores(&p, &g, F1Mode::Macro, 4)?, oracle_f1_macro(&p, &g, 4)) {
            bad.push("f1-macro");
        }
        let (p, g) = random_labels(&mut rng, 2);
        if !close(metrics::matthews_corr(&p, &g)?, oracle_mcc(&p, &g)) {
            bad.push("mcc");
        }
        if !close(metrics::f1_scores(&p, &g, F1Mode::Binary, 2)?, oracle_f1_binary(&p, &g)) {
            bad.push("f1-binary");
        }
        let (x, y) = random_reals(&mut rng);
        let s = metrics::spearman_corr(&x, &y)?;
        let want = oracle_spearman(&x, &y);
        if !(close(s.value, want.unwrap_or(0.0)) && s.degenerate == want.is_none()) {
            bad.push("spearman");
        }
        let (p, g) = random_answers(&mut rng);
        let sq = metrics::squad_scores(&p, &g)?;
        let n = p.len() as f64;
        let em: f64 = p.iter().zip(&g).map(|(a, b)| oracle_em(a, b)).sum::<f64>() / n;
        let f1: f64 = p.iter().zip(&g).map(|(a, b)| oracle_squad_f1(a, b)).sum::<f64>() / n;
        if sq.exact_match != em || !close(sq.f1, f1) {
            bad.push("squad");
        }
    }
    // Worked examples.
    let p = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
    let g = [1, 1, 1, 0, 0, 0, 0, 0, 1, 1];
    let mcc = metrics::matthews_corr(&p, &g)?;
    let rho = metrics::spearman_corr(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])?.value;
    let sq = metrics::squad_scores(&["black cat"], &["cat"])?;
    let worked = close(mcc, 10.0 / 600f64.sqrt()) && close(rho, 0.8) && close(sq.f1, 2.0 / 3.0) && sq.exact_match == 0.0;
    if !worked {
        bad.push("worked examples");
    }
    bad.sort();
    bad.dedup();
    let detail = format!(
        "7 metrics x 100 instances; MCC {mcc:.4}, Spearman {rho:.4}, SQuAD F1 {:.4}; mismatches: {}",
        sq.f1,
        if bad.is_empty() { "none".into() } else { bad.join(", ") }
    );
    Ok((bad.is_empty(), detail))
}

fn early_stopping() -> Outcome {
    let h = [1.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
    let stop = (1..=h.len()).find(|&n| early_stop_check(&h[..n], 10).0);
    let best = early_stop_check(&h, 10).1 + 1;
    let small = early_stop_check(&[3.0, 2.0, 2.0, 2.0], 3);
    let rising: Vec<f64> = (0..50).map(f64::from).collect();
    let never = (1..=50).all(|n| !early_stop_check(&rising[..n], 10).0);

    let data = pattern_classification(32, 0);
    let mut model = verify::tiny_adapted(&ModelConfig::tiny(), &build_preset("unipelt-paper")?, 0)?;
    let run = train(&mut model, &data, &data, &TrainConfig::default(), None)?;
    let hist = &run.report.history;
    let max = hist.iter().cloned().fold(f64::MIN, f64::max);
    let restored = evaluate(&model, &data, &[Metric::Accuracy])?.values[0].1;
    let last = hist.last().copied().unwrap_or(f64::NAN);
    let ok = stop == Some(13) && best == 3 && small == (true, 0) && never && restored == max && run.report.values[0].1 == max;
    Ok((
        ok,
        format!(
            "plateau stops at epoch {stop:?} (best {best}); [3,2,2,2]/3 -> {small:?}; real run {} epochs, last {last}, restored {restored} = max {max}",
            hist.len()
        ),
    ))
}

fn determinism() -> Outcome {
    let data = pattern_classification(32, 0);
    let cfg = TrainConfig { max_epochs: 10, ..TrainConfig::default() };
    let run = || -> Result<_> {
        let mut model = verify::tiny_adapted(&ModelConfig::tiny(), &build_preset("pt-unipelt-paper")?, 0)?;
        let r = train(&mut model, &data, &data, &cfg, None)?;
        Ok((r.step_losses, r.log))
    };
    let (a, b) = (run()?, run()?);
    let bitwise = a.0.len() == b.0.len() && a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((bitwise && a.1 == b.1, format!("{} step losses bit-identical across two runs", a.0.len())))
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "reference census totals", budget: secs(1), run: table_totals },
        Criterion { id: 2, title: "census vs instantiation", budget: secs(30), run: census_oracle },
        Criterion { id: 3, title: "prompt delta and stacking", budget: secs(1), run: prompt_delta_and_stacking },
        Criterion { id: 4, title: "identity at initialization", budget: secs(10), run: identity },
        Criterion { id: 5, title: "gradient checks", budget: secs(120), run: gradients },
        Criterion { id: 6, title: "freeze contract", budget: secs(60), run: freeze },
        Criterion { id: 7, title: "overfitting oracle", budget: secs(300), run: overfitting },
        Criterion { id: 8, title: "metric oracles", budget: secs(30), run: metric_oracles },
        Criterion { id: 9, title: "early stopping", budget: secs(60), run: early_stopping },
        Criterion { id: 10, title: "determinism", budget: secs(120), run: determinism },
    ];
    let mut failed = 0;
    for c in criteria {
        let t = Instant::now();
        let outcome = (c.run)();
        let took = t.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && took <= c.budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<28} {}  [{:.2}s / {}s]  {detail}",
            c.id,
            c.title,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
