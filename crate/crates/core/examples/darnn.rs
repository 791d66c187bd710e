//! Dual-stage attention RNN on a noisy sine with one informative driver
//! and one noise driver. After training, input attention should favour
//! the informative driver.
//!
//!     cargo run --release --example darnn

use narrative_forecast::models::darnn::{
    train_darnn, AttentionRnn, DarnnConfig, DarnnSample, TrainOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let signal: Vec<f64> = (0..400).map(|i| (i as f64 * 0.2).sin()).collect();
    let samples: Vec<DarnnSample> = (window..signal.len() - 1)
        .map(|t| DarnnSample {
            drivers: (t - window + 1..=t)
                .map(|i| vec![signal[i + 1], rng.gen_range(-1.0..1.0)])
                .collect(),
            history: signal[t - window + 1..=t].to_vec(),
            label: signal[t + 1],
        })
        .collect();
    let (train, test) = samples.split_at(300);

    let model = AttentionRnn::new(DarnnConfig {
        window,
        drivers: 2,
        encoder_hidden: 16,
        decoder_hidden: 16,
        seed: 0,
    })?;
    let opts = TrainOptions {
        epochs: 40,
        learning_rate: 5e-3,
        batch_size: 16,
        seed: 0,
    };
    let (model, curve) = train_darnn(model, train, &opts)?;
    println!(
        "train MSE: first epoch {:.2e}, last {:.2e}",
        curve[0],
        curve[curve.len() - 1]
    );
    println!("test MSE: {:.2e}", model.mse(test));

    let (alpha, _) = model.attention(&test[0].drivers, &test[0].history)?;
    let mean = |j: usize| alpha.iter().map(|row| row[j]).sum::<f64>() / alpha.len() as f64;
    println!(
        "mean input attention: informative {:.3}, noise {:.3}",
        mean(0),
        mean(1)
    );
    Ok(())
}
