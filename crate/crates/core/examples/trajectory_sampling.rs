//! Reduces a pooled set of futures to k representatives with k-means++.

use mtp::evaluation::min_ade;
use mtp::prediction::{kmeanspp_sample, to_samples, ConstantVelocity, ObjectKey, Predictor};
use mtp::tracker::PredictorNoise;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cv = ConstantVelocity::new(PredictorNoise {
        sigma_speed: 0.1,
        sigma_heading: 0.1,
    });
    let key = ObjectKey::Detection(0);

    // Twenty "hypotheses" that disagree about the heading of the same object.
    let mut pooled = Vec::new();
    for h in 0..20u64 {
        let heading = (h as f64 - 10.0) * 0.02;
        let past: Vec<[f64; 2]> = (0..10)
            .map(|t| [t as f64 * heading.cos(), t as f64 * heading.sin()])
            .collect();
        pooled.extend(to_samples(&cv.predict(&past, None, 10, 10, h)?, key, None));
    }

    let truth: Vec<[f64; 2]> = (10..20).map(|t| [t as f64, 0.0]).collect();
    let sampled = kmeanspp_sample(&pooled, 10, 7)?;
    println!(
        "pooled  {:>3} samples, minADE {:.3}",
        pooled.len(),
        min_ade(&pooled, &truth)?
    );
    println!(
        "sampled {:>3} samples, minADE {:.3}",
        sampled.len(),
        min_ade(&sampled, &truth)?
    );
    Ok(())
}
