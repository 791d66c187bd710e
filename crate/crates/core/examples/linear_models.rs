//! Least squares, ridge, lasso and logistic regression on a toy problem
//! where only the first of four features matters.
//!
//!     cargo run --example linear_models

use narrative_forecast::models::{fit_linear, fit_logistic, Regularization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 2.0 * r[0] + 0.5 + rng.gen_range(-0.1..0.1))
        .collect();

    for reg in [
        Regularization::None,
        Regularization::L2(10.0),
        Regularization::L1(5.0),
    ] {
        let m = fit_linear(&x, &y, reg)?;
        let w: Vec<String> = m.weights.iter().map(|w| format!("{w:+.3}")).collect();
        println!("{reg:?}: w = [{}], b = {:+.3}", w.join(", "), m.bias);
    }

    let up: Vec<bool> = y.iter().map(|v| *v > 0.5).collect();
    let clf = fit_logistic(&x, &up, 1e-2)?;
    let acc = x
        .iter()
        .zip(&up)
        .filter(|(r, l)| clf.predict(r) == **l)
        .count() as f64
        / x.len() as f64;
    println!("logistic training accuracy {acc:.3}");
    Ok(())
}
