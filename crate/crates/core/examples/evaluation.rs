//! Baselines, metrics and McNemar's test on a synthetic random walk.
//!
//!     cargo run --release --example evaluation

use narrative_forecast::harness::experiment::{baseline_context, with_train_stats};
use narrative_forecast::harness::{evaluate_classification, mcnemar, TaskKind};
use narrative_forecast::models::{financial_baseline, BaselineKind, Prediction};
use narrative_forecast::synthgen::gen_random_walk;
use narrative_forecast::Direction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = gen_random_walk(400, 0.01, 100.0, 9)?;
    let v = series.values();
    let label = |t: usize| Direction::between(v[t], v[t + 1]);
    let split = 300;
    let train: Vec<f64> = (7..split).map(|t| label(t).as_f64()).collect();
    let test: Vec<usize> = (split..v.len() - 1).collect();
    let labels: Vec<Direction> = test.iter().map(|&t| label(t)).collect();

    let mut correct = Vec::new();
    for kind in [
        BaselineKind::AsPrevious,
        BaselineKind::WeekMajority,
        BaselineKind::TrainMajority,
        BaselineKind::Up,
    ] {
        let preds: Vec<Direction> = test
            .iter()
            .map(|&t| {
                let ctx =
                    with_train_stats(baseline_context(v, t, TaskKind::DirectionChange), &train);
                match financial_baseline(kind, &ctx)? {
                    Prediction::Direction(d) => Ok(d),
                    Prediction::Value(_) => unreachable!("direction task"),
                }
            })
            .collect::<Result<_, Box<dyn std::error::Error>>>()?;
        let m = evaluate_classification(&preds, &labels)?;
        println!(
            "{:<16} accuracy {:.3}  F1 {:.3}",
            kind.name(),
            m.accuracy.unwrap(),
            m.f1.unwrap()
        );
        correct.push(
            preds
                .iter()
                .zip(&labels)
                .map(|(p, l)| p == l)
                .collect::<Vec<_>>(),
        );
    }
    let r = mcnemar(&correct[0], &correct[1])?;
    println!(
        "\nas-previous vs week-majority: b={} c={} p={:.4} ({:?})",
        r.b, r.c, r.p_value, r.method
    );
    Ok(())
}
