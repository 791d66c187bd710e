//! Counterfactual text baselines on a synthetic random walk.
//!
//! Runs the same direction-change experiment with planted narratives,
//! random texts and date-shuffled narratives, and prints test accuracy of
//! an F-only and a TF logistic model for each.
//!
//!     cargo run --release --example counterfactual

use narrative_forecast::harness::experiment::{
    ArchitectureSpec, DataConfig, EvalConfig, FeatureConfig, ModelSpec, SyntheticText, TaskSection,
};
use narrative_forecast::harness::{run_experiment, ExperimentConfig, TaskKind};
use narrative_forecast::ingest::Indicator;
use narrative_forecast::models::InputClass;
use narrative_forecast::synthgen::SynthConfig;

fn config(text: SyntheticText) -> ExperimentConfig {
    let logistic = |name: &str, kind| ModelSpec {
        name: name.into(),
        kind,
        architecture: ArchitectureSpec::Logistic { lambda: 1e-2 },
    };
    ExperimentConfig {
        data: DataConfig::Synthetic {
            days: 500,
            sigma: 0.01,
            start_value: 100.0,
            text,
            synth: SynthConfig::default(),
        },
        features: FeatureConfig::default(),
        models: vec![logistic("F", InputClass::F), logistic("TF", InputClass::Tf)],
        task: TaskSection {
            target: Indicator::Other("RW".into()),
            task: TaskKind::DirectionChange,
            horizon: 1,
        },
        eval: EvalConfig::default(),
        seed: 7,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<22} {:>8} {:>8}", "text", "F acc", "TF acc");
    for (name, text) in [
        ("narratives", SyntheticText::Narratives),
        ("random texts", SyntheticText::Random),
        ("shuffled narratives", SyntheticText::ShuffledNarratives),
    ] {
        let out = run_experiment(&config(text))?;
        let acc = |i: usize| out.report.models[i].metrics.accuracy.unwrap_or(f64::NAN);
        println!("{name:<22} {:>8.3} {:>8.3}", acc(0), acc(1));
    }
    Ok(())
}
