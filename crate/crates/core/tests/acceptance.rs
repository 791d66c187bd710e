//! Acceptance checks. Each criterion prints one PASS/FAIL line with its
//! measured value, and the target exits non-zero if any fails.
//!
//!     cargo test --test acceptance

mod common;

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;
use narrative_forecast::harness::experiment::{
    audit, baseline_context, with_train_stats, ArchitectureSpec, DataConfig, EvalConfig,
    FeatureConfig, FinancialRepr, ModelSpec, Penalty, Split, SyntheticText, TaskSection, TextRepr,
};
use narrative_forecast::harness::{
    evaluate_classification, mcnemar, mcnemar_counts, run_experiment, ExperimentConfig,
    McNemarMethod, TaskKind,
};
use narrative_forecast::ingest::Indicator;
use narrative_forecast::models::darnn::{gradient_check, AttentionRnn, DarnnConfig, DarnnSample};
use narrative_forecast::models::linear::objective;
use narrative_forecast::models::{
    financial_baseline, fit_linear, BaselineKind, InputClass, Regularization, TrainOptions,
};
use narrative_forecast::narrative::predict::{llm_predict_weekly_average, PromptMode};
use narrative_forecast::narrative::stub::StubServer;
use narrative_forecast::narrative::{build_integration_prompt, NarrativeError};
use narrative_forecast::synthgen::SynthConfig;
use narrative_forecast::Direction::{self, Decrease, Increase};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- baselines

/// Ten closes chosen by hand: the daily directions are
/// I D D(tie) I D I I D I.
const SERIES: [f64; 10] = [10.0, 11.0, 10.5, 10.5, 12.0, 11.0, 13.0, 14.0, 13.5, 15.0];

fn baseline_arithmetic() -> Outcome {
    use BaselineKind::*;
    // Direction labels at t = 0..5 are d1..d6 = I D D I D I: a 3-3 tie,
    // which resolves to Decrease.
    let train_dirs = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
    // Next-value labels at t = 0..5 are V1..V6, mean 68 / 6.
    let train_values = [11.0, 10.5, 10.5, 12.0, 11.0, 13.0];
    // t = 7: last seven directions d1..d7 = I D D I D I I (4 up), previous d7 = I.
    // t = 8: d2..d8 = D D I D I I D (3 up), previous d8 = D.
    let expected_dir: [(usize, [(BaselineKind, Direction); 6]); 2] = [
        (
            7,
            [
                (AsPrevious, Increase),
                (InversePrevious, Decrease),
                (WeekMajority, Increase),
                (TrainMajority, Decrease),
                (Up, Increase),
                (Down, Decrease),
            ],
        ),
        (
            8,
            [
                (AsPrevious, Decrease),
                (InversePrevious, Increase),
                (WeekMajority, Decrease),
                (TrainMajority, Decrease),
                (Up, Increase),
                (Down, Decrease),
            ],
        ),
    ];
    let mut checked = 0;
    for (t, cases) in expected_dir {
        let ctx = with_train_stats(
            baseline_context(&SERIES, t, TaskKind::DirectionChange),
            &train_dirs,
        );
        for (kind, want) in cases {
            let got = financial_baseline(kind, &ctx).map_err(|e| e.to_string())?;
            ensure(
                got.as_f64() == want.as_f64(),
                format!("{} at t={t}: {got:?} != {want:?}", kind.name()),
            )?;
            checked += 1;
        }
    }
    // Regression: as-previous repeats V(t), train-mean is 68 / 6.
    for (t, prev) in [(7, 14.0), (8, 13.5)] {
        let ctx = with_train_stats(
            baseline_context(&SERIES, t, TaskKind::NextValue),
            &train_values,
        );
        let as_prev = financial_baseline(AsPrevious, &ctx)
            .map_err(|e| e.to_string())?
            .as_f64();
        let mean = financial_baseline(TrainMean, &ctx)
            .map_err(|e| e.to_string())?
            .as_f64();
        ensure(
            as_prev == prev,
            format!("as-previous regression at t={t}: {as_prev}"),
        )?;
        ensure(mean == 68.0 / 6.0, format!("train-mean {mean}"))?;
        checked += 2;
    }
    Ok(format!("{checked} predictions exact"))
}

// ------------------------------------------------------------------ metrics

fn metric_identities() -> Outcome {
    let mut labels = vec![Increase; 576];
    labels.extend(vec![Decrease; 424]);
    let up = evaluate_classification(&vec![Increase; 1000], &labels).map_err(|e| e.to_string())?;
    let down =
        evaluate_classification(&vec![Decrease; 1000], &labels).map_err(|e| e.to_string())?;
    let (acc, f1) = (up.accuracy.unwrap(), up.f1.unwrap());
    ensure((acc - 0.576).abs() < 1e-12, format!("up accuracy {acc}"))?;
    ensure(format!("{f1:.3}") == "0.731", format!("up F1 {f1:.6}"))?;
    ensure(down.f1 == Some(0.0), format!("down F1 {:?}", down.f1))?;

    // The identities on arbitrary label sets.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.gen_range(1..300);
        let labels: Vec<Direction> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Increase
                } else {
                    Decrease
                }
            })
            .collect();
        let a = labels.iter().filter(|l| **l == Increase).count() as f64 / n as f64;
        let r = evaluate_classification(&vec![Increase; n], &labels).map_err(|e| e.to_string())?;
        let want_f1 = if a == 0.0 { 0.0 } else { 2.0 * a / (a + 1.0) };
        ensure(
            (r.accuracy.unwrap() - a).abs() < 1e-12,
            "accuracy != increase fraction",
        )?;
        ensure((r.f1.unwrap() - want_f1).abs() < 1e-12, "F1 != 2a/(a+1)")?;
    }
    Ok(format!(
        "accuracy {acc:.3}, F1 {f1:.3}, down F1 0.0; 200 random sets"
    ))
}

// ------------------------------------------------------------------ mcnemar

/// Two-sided exact binomial p-value in exact integer arithmetic.
fn exact_oracle(b: u64, c: u64) -> f64 {
    let n = b + c;
    let k = b.min(c);
    let mut tail = BigUint::zero();
    let mut coef = BigUint::one();
    for i in 0..=k {
        if i > 0 {
            coef = coef * BigUint::from(n - i + 1) / BigUint::from(i);
        }
        tail += &coef;
    }
    let num = tail * 2u32;
    let den = BigUint::one() << n;
    if num >= den {
        1.0
    } else {
        num.to_f64().unwrap() / den.to_f64().unwrap()
    }
}

fn mcnemar_correctness() -> Outcome {
    let r = mcnemar_counts(5, 15);
    let oracle = exact_oracle(5, 15);
    ensure(
        r.method == McNemarMethod::Exact,
        "b+c=20 should use the exact test",
    )?;
    ensure(
        (r.p_value - oracle).abs() < 1e-9,
        format!("p(5,15) = {} vs oracle {oracle}", r.p_value),
    )?;
    for b in 0..13 {
        for c in 0..(25 - b) {
            let (p, o) = (mcnemar_counts(b, c).p_value, exact_oracle(b, c));
            ensure((p - o).abs() < 1e-9, format!("p({b},{c}) = {p} vs {o}"))?;
        }
    }
    // Large-sample branch against the chi-square CDF.
    let chi = ChiSquared::new(1.0).unwrap();
    for (b, c) in [(30, 12), (40, 25), (100, 70)] {
        let stat = ((b as f64 - c as f64).abs() - 1.0).powi(2) / (b + c) as f64;
        let want = 1.0 - chi.cdf(stat);
        let got = mcnemar_counts(b, c).p_value;
        ensure(
            (got - want).abs() < 1e-9,
            format!("chi-square p({b},{c}) = {got} vs {want}"),
        )?;
    }
    for k in [0, 1, 7, 12, 13, 40, 500] {
        let p = mcnemar_counts(k, k).p_value;
        ensure((p - 1.0).abs() < 1e-12, format!("p({k},{k}) = {p}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..200);
        let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        let ab = mcnemar(&a, &b).unwrap();
        let ba = mcnemar(&b, &a).unwrap();
        ensure(
            ab.p_value == ba.p_value && ab.b == ba.c,
            "not symmetric under swap",
        )?;
    }
    Ok(format!("p(5,15) = {:.12} (oracle {oracle:.12})", r.p_value))
}

// ---------------------------------------------------------------- gradients

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (t, n) = (rng.gen_range(2..=5), rng.gen_range(1..=3));
        let config = DarnnConfig {
            window: t,
            drivers: n,
            encoder_hidden: rng.gen_range(1..=8),
            decoder_hidden: rng.gen_range(1..=8),
            seed: rng.gen(),
        };
        let model = AttentionRnn::new(config).map_err(|e| e.to_string())?;
        let batch: Vec<DarnnSample> = (0..rng.gen_range(1..=3))
            .map(|_| DarnnSample {
                drivers: (0..t)
                    .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect(),
                history: (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let err = gradient_check(&model, &batch, 1e-5);
        ensure(
            err < 1e-4,
            format!("instance {i} ({config:?}): relative error {err:.3e}"),
        )?;
        worst = worst.max(err);
    }
    Ok(format!("max relative error {worst:.2e} over 20 instances"))
}

// ---------------------------------------------------------------- optimizers

fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
    (x, y)
}

/// Plain full-batch gradient descent on the ridge objective with an
/// unpenalized bias.
fn ridge_by_gradient_descent(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let d = x[0].len();
    let lipschitz = x
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum::<f64>()
        + lambda;
    let step = 1.0 / lipschitz;
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    for _ in 0..200_000 {
        let r: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(row, yi)| yi - b - row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        for j in 0..d {
            let g = -x.iter().zip(&r).map(|(row, ri)| row[j] * ri).sum::<f64>() + lambda * w[j];
            w[j] -= step * g;
        }
        b += step * r.iter().sum::<f64>();
    }
    (w, b)
}

/// Solves a small dense system by Gaussian elimination with pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut out = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * out[k]).sum();
        out[i] = (rhs[i] - s) / a[i][i];
    }
    Some(out)
}

/// Exact lasso minimum by enumerating sign patterns: on the true support
/// with signs `s`, the centered normal equations read
/// `Xa'Xa w = Xa'y - lambda s`; every sign-consistent candidate is a
/// feasible point, and the optimum is one of them.
fn lasso_by_sign_enumeration(x: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let (n, d) = (x.len(), x[0].len());
    let xm: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(d as u32) {
        let signs: Vec<i32> = (0..d)
            .map(|j| (code / 3usize.pow(j as u32) % 3) as i32 - 1)
            .collect();
        let active: Vec<usize> = (0..d).filter(|j| signs[*j] != 0).collect();
        let mut w = vec![0.0; d];
        if !active.is_empty() {
            let gram: Vec<Vec<f64>> = active
                .iter()
                .map(|&a| {
                    active
                        .iter()
                        .map(|&b| x.iter().map(|r| (r[a] - xm[a]) * (r[b] - xm[b])).sum())
                        .collect()
                })
                .collect();
            let rhs: Vec<f64> = active
                .iter()
                .map(|&a| {
                    x.iter()
                        .zip(y)
                        .map(|(r, yi)| (r[a] - xm[a]) * (yi - ym))
                        .sum::<f64>()
                        - lambda * signs[a] as f64
                })
                .collect();
            let Some(sol) = solve(gram, rhs) else {
                continue;
            };
            if active
                .iter()
                .zip(&sol)
                .any(|(&a, v)| v.signum() as i32 != signs[a] || *v == 0.0)
            {
                continue;
            }
            active.iter().zip(sol).for_each(|(&a, v)| w[a] = v);
        }
        let b = ym - xm.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>();
        best = best.min(objective(&w, b, x, y, Regularization::L1(lambda)));
    }
    best
}

/// Proximal gradient (ISTA): slow but convergent.
fn lasso_by_ista(x: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let d = x[0].len();
    let lipschitz = x
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum::<f64>();
    let step = 1.0 / lipschitz;
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    for _ in 0..300_000 {
        let r: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(row, yi)| yi - b - row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        for j in 0..d {
            let g = -x.iter().zip(&r).map(|(row, ri)| row[j] * ri).sum::<f64>();
            let z = w[j] - step * g;
            w[j] = z.signum() * (z.abs() - step * lambda).max(0.0);
        }
        b += step * r.iter().sum::<f64>();
    }
    objective(&w, b, x, y, Regularization::L1(lambda))
}

fn optimizer_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut ridge_gap, mut lasso_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let (x, y) = random_problem(&mut rng);
        for lambda in [0.1, 1.0] {
            let fit = fit_linear(&x, &y, Regularization::L2(lambda)).map_err(|e| e.to_string())?;
            let (w, b) = ridge_by_gradient_descent(&x, &y, lambda);
            let gd = objective(&w, b, &x, &y, Regularization::L2(lambda));
            let gap = (fit.objective(&x, &y) - gd).abs();
            ensure(gap < 1e-6, format!("ridge lambda={lambda}: gap {gap:.3e}"))?;
            ridge_gap = ridge_gap.max(gap);
        }
        for lambda in [0.05, 0.5, 3.0] {
            let fit = fit_linear(&x, &y, Regularization::L1(lambda)).map_err(|e| e.to_string())?;
            let got = fit.objective(&x, &y);
            let exact = lasso_by_sign_enumeration(&x, &y, lambda);
            let slow = lasso_by_ista(&x, &y, lambda);
            let gap = (got - exact).abs().max((got - slow).abs());
            ensure(
                gap < 1e-6,
                format!("lasso lambda={lambda}: {got} vs exact {exact}, ista {slow}"),
            )?;
            lasso_gap = lasso_gap.max(gap);
        }
    }
    Ok(format!(
        "ridge gap {ridge_gap:.1e}, lasso gap {lasso_gap:.1e} on 10 random 5x3 problems"
    ))
}

// ------------------------------------------------------------ experiments

fn logistic(name: &str, kind: InputClass) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        kind,
        architecture: ArchitectureSpec::Logistic { lambda: 1e-2 },
    }
}

fn synthetic(text: SyntheticText, models: Vec<ModelSpec>) -> ExperimentConfig {
    ExperimentConfig {
        data: DataConfig::Synthetic {
            days: 500,
            sigma: 0.01,
            start_value: 100.0,
            text,
            synth: SynthConfig::default(),
        },
        features: FeatureConfig::default(),
        models,
        task: TaskSection {
            target: Indicator::Other("RW".into()),
            task: TaskKind::DirectionChange,
            horizon: 1,
        },
        eval: EvalConfig::default(),
        seed: 7,
    }
}

fn planted_signal() -> Outcome {
    let models = || vec![logistic("F", InputClass::F), logistic("TF", InputClass::Tf)];
    let mut lines = Vec::new();
    for (name, text, tf_band) in [
        ("narratives", SyntheticText::Narratives, (0.9, 1.0)),
        ("random", SyntheticText::Random, (0.4, 0.6)),
        ("shuffled", SyntheticText::ShuffledNarratives, (0.4, 0.6)),
    ] {
        let out = run_experiment(&synthetic(text, models())).map_err(|e| e.to_string())?;
        let acc = |i: usize| out.report.models[i].metrics.accuracy.unwrap();
        let (f, tf) = (acc(0), acc(1));
        ensure(
            (0.4..=0.6).contains(&f),
            format!("{name}: F accuracy {f:.3} outside 0.5 +- 0.1"),
        )?;
        ensure(
            (tf_band.0..=tf_band.1).contains(&tf),
            format!(
                "{name}: TF accuracy {tf:.3} outside [{}, {}]",
                tf_band.0, tf_band.1
            ),
        )?;
        lines.push(format!("{name} F {f:.3} TF {tf:.3}"));
    }
    Ok(lines.join("; "))
}

/// Every config the experiment tests run, covering horizons, tasks,
/// feature kinds and architectures.
fn suite() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    out.push(synthetic(
        SyntheticText::Narratives,
        vec![logistic("F", InputClass::F), logistic("TF", InputClass::Tf)],
    ));
    out.push(synthetic(
        SyntheticText::Random,
        vec![logistic("F", InputClass::F), logistic("TF", InputClass::Tf)],
    ));
    out.push(synthetic(
        SyntheticText::ShuffledNarratives,
        vec![logistic("TF", InputClass::Tf)],
    ));
    for horizon in [7, 30] {
        let mut c = synthetic(
            SyntheticText::Narratives,
            vec![
                ModelSpec {
                    name: "week".into(),
                    kind: InputClass::F,
                    architecture: ArchitectureSpec::Baseline {
                        baseline: BaselineKind::WeekMajority,
                    },
                },
                logistic("TF", InputClass::Tf),
            ],
        );
        c.task.horizon = horizon;
        out.push(c);
    }
    let mut reg = synthetic(
        SyntheticText::Narratives,
        vec![
            ModelSpec {
                name: "mean".into(),
                kind: InputClass::F,
                architecture: ArchitectureSpec::Baseline {
                    baseline: BaselineKind::TrainMean,
                },
            },
            ModelSpec {
                name: "ridge".into(),
                kind: InputClass::Tf,
                architecture: ArchitectureSpec::Linear {
                    penalty: Penalty::L2,
                    lambda: 1.0,
                },
            },
            ModelSpec {
                name: "lasso".into(),
                kind: InputClass::T,
                architecture: ArchitectureSpec::Linear {
                    penalty: Penalty::L1,
                    lambda: 0.1,
                },
            },
            ModelSpec {
                name: "darnn".into(),
                kind: InputClass::Tf,
                architecture: ArchitectureSpec::Darnn {
                    train: TrainOptions {
                        epochs: 2,
                        ..TrainOptions::default()
                    },
                    hidden: 4,
                },
            },
        ],
    );
    reg.task.task = TaskKind::PctChange;
    reg.data = DataConfig::Synthetic {
        days: 200,
        sigma: 0.01,
        start_value: 100.0,
        text: SyntheticText::Narratives,
        synth: SynthConfig::default(),
    };
    out.push(reg);
    let mut emb = synthetic(SyntheticText::Random, vec![logistic("TF", InputClass::Tf)]);
    emb.features = FeatureConfig {
        text: TextRepr::Embedding,
        financial: FinancialRepr::Direction,
        window: 5,
        ..FeatureConfig::default()
    };
    out.push(emb);
    let mut values = synthetic(SyntheticText::None, vec![logistic("F", InputClass::F)]);
    values.features.financial = FinancialRepr::Value;
    values.features.text = TextRepr::None;
    values.task.task = TaskKind::DirectionChange;
    out.push(values);
    out
}

fn no_leakage() -> Outcome {
    let configs = suite();
    for (i, cfg) in configs.iter().enumerate() {
        let out = run_experiment(cfg).map_err(|e| format!("config {i}: {e}"))?;
        let recs = &out.samples;
        // Recompute from the sample bookkeeping, not only the report.
        let max_feature_ok = recs.iter().all(|r| r.feature_max_date <= r.date);
        let max_train: NaiveDate = recs
            .iter()
            .filter(|r| r.split == Split::Train)
            .flat_map(|r| [r.date, r.feature_max_date, r.label_date])
            .max()
            .ok_or(format!("config {i}: no training samples"))?;
        let min_test = recs
            .iter()
            .filter(|r| r.split == Split::Test)
            .map(|r| r.date)
            .min()
            .ok_or(format!("config {i}: no test samples"))?;
        ensure(
            max_feature_ok,
            format!("config {i}: a feature postdates its prediction date"),
        )?;
        ensure(
            max_train < min_test,
            format!("config {i}: train reaches {max_train}, test starts {min_test}"),
        )?;
        let a = audit(recs);
        ensure(
            a.features_not_after_prediction && a.train_before_test,
            format!("config {i}: report audit failed"),
        )?;
        ensure(
            out.report.leakage == a,
            format!("config {i}: report audit differs"),
        )?;
    }
    Ok(format!("{} configs clean", configs.len()))
}

fn determinism() -> Outcome {
    let render = || -> Result<Vec<String>, String> {
        let mut all = Vec::new();
        for cfg in suite() {
            let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
            all.extend([
                out.report_json(),
                out.report_markdown(),
                out.predictions_csv(),
            ]);
        }
        Ok(all)
    };
    let (a, b) = (render()?, render()?);
    ensure(a == b, "reports differ between runs")?;
    let bytes: usize = a.iter().map(String::len).sum();
    Ok(format!("{} files, {bytes} bytes identical", a.len()))
}

// ---------------------------------------------------------------- narrative

fn prompt_goldens() -> Outcome {
    let analysis_prompt = golden_analysis_prompt().render();
    ensure(
        analysis_prompt == golden("analysis_prompt.txt"),
        "analysis prompt differs from golden",
    )?;
    let dirs = [
        Decrease, Increase, Increase, Increase, Decrease, Decrease, Decrease,
    ];
    let integration = build_integration_prompt(
        &analysis("Tweets express moderate fear about inflation."),
        &dirs,
        &Indicator::Sp500,
        1,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        integration == golden("integration_prompt.txt"),
        "integration prompt differs from golden",
    )?;
    ensure(
        integration.contains(
            "decrease=0, increase=1, increase=1, increase=1, decrease=0, decrease=0, decrease=0",
        ),
        "direction rendering",
    )?;
    let vix = build_integration_prompt(
        &analysis("Volatility talk dominates."),
        &[Increase, Decrease],
        &Indicator::Vix,
        7,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        vix == golden("integration_prompt_vix_week.txt"),
        "VIX weekly prompt differs from golden",
    )?;
    Ok("3 goldens byte-exact".into())
}

fn llm_contract() -> Outcome {
    let err = |e: std::io::Error| e.to_string();
    let cache = tempfile::tempdir().map_err(err)?;
    let ok = StubServer::chat(|_| WELL_FORMED.to_owned()).map_err(err)?;
    let prompt = golden_analysis_prompt();
    client(ok.url("/chat"), Some(cache.path()))
        .request_analysis(&prompt)
        .map_err(|e| e.to_string())?;
    let again = client(ok.url("/chat"), Some(cache.path()));
    again.request_analysis(&prompt).map_err(|e| e.to_string())?;
    ensure(
        again.network_calls() == 0 && ok.request_count() == 1,
        "cached request reached the network",
    )?;

    let refuse =
        StubServer::chat(|_| "As a language model I cannot provide financial advice.".into())
            .map_err(err)?;
    let tweets = [tweet("1", "2022-03-01", "Volatility ahead.")];
    let values = [(date("2022-03-01"), 25.0)];
    let r = llm_predict_weekly_average(
        &client(refuse.url("/chat"), None),
        &tweets,
        &values,
        &Indicator::Vix,
        PromptMode::ZeroShot,
        &[],
    );
    ensure(
        matches!(r, Err(NarrativeError::Refusal { .. })),
        format!("refusal gave {r:?}"),
    )?;

    let broken = StubServer::chat(|_| "<Analysis of Tweets>half</Analysis of Tweets>".into())
        .map_err(err)?;
    let failed = tempfile::tempdir().map_err(err)?;
    let r = client(broken.url("/chat"), Some(failed.path())).request_analysis(&prompt);
    let Err(NarrativeError::Parse {
        persisted: Some(path),
        ..
    }) = r
    else {
        return Err(format!("malformed tags gave {r:?}"));
    };
    let saved = std::fs::read_to_string(&path).map_err(err)?;
    ensure(
        saved.contains("half") && path.starts_with(failed.path().join("failed")),
        "raw response not persisted",
    )?;
    Ok("cache hit with 0 calls, refusal, persisted parse error".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        (
            "baseline arithmetic",
            baseline_arithmetic,
            Duration::from_secs(1),
        ),
        (
            "metric identities",
            metric_identities,
            Duration::from_secs(1),
        ),
        (
            "mcnemar correctness",
            mcnemar_correctness,
            Duration::from_secs(1),
        ),
        (
            "gradient fidelity",
            gradient_fidelity,
            Duration::from_secs(30),
        ),
        (
            "optimizer cross-check",
            optimizer_cross_check,
            Duration::from_secs(10),
        ),
        (
            "planted-signal recovery",
            planted_signal,
            Duration::from_secs(60),
        ),
        (
            "prompt golden files",
            prompt_goldens,
            Duration::from_secs(1),
        ),
        ("llm client contract", llm_contract, Duration::from_secs(5)),
        ("no-leakage audit", no_leakage, Duration::MAX),
        ("determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget:.0?}"))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name:<24} {detail} ({elapsed:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {why} ({elapsed:.2?})");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
