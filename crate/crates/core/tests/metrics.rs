mod common;

use common::{naive_min_ade, naive_min_fde};
use mtp::evaluation::{min_ade, min_fde, MetricError};
use mtp::prediction::{ObjectKey, TrajectorySample, Waypoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(waypoints: Vec<Waypoint>) -> TrajectorySample {
    TrajectorySample {
        object_key: ObjectKey::Detection(0),
        waypoints,
        source_hypothesis: None,
    }
}

fn random_instance(rng: &mut impl Rng) -> (Vec<TrajectorySample>, Vec<Waypoint>) {
    let horizon = rng.gen_range(1..=15);
    let k = rng.gen_range(1..=25);
    let mut path = || {
        (0..horizon)
            .map(|_| [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)])
            .collect::<Vec<_>>()
    };
    let gt = path();
    let samples = (0..k).map(|_| sample(path())).collect();
    (samples, gt)
}

#[test]
fn matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (samples, gt) = random_instance(&mut rng);
        assert!((min_ade(&samples, &gt).unwrap() - naive_min_ade(&samples, &gt)).abs() <= 1e-12);
        assert!((min_fde(&samples, &gt).unwrap() - naive_min_fde(&samples, &gt)).abs() <= 1e-12);
    }
}

#[test]
fn more_samples_never_hurt() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let (samples, gt) = random_instance(&mut rng);
        for k in 1..samples.len() {
            assert!(min_ade(&samples[..k + 1], &gt).unwrap() <= min_ade(&samples[..k], &gt).unwrap());
            assert!(min_fde(&samples[..k + 1], &gt).unwrap() <= min_fde(&samples[..k], &gt).unwrap());
        }
    }
}

#[test]
fn exact_sample_scores_zero() {
    let gt = vec![[1.0, 2.0], [3.0, 4.0]];
    let samples = vec![sample(vec![[9.0, 9.0], [9.0, 9.0]]), sample(gt.clone())];
    assert_eq!(min_ade(&samples, &gt).unwrap(), 0.0);
    assert_eq!(min_fde(&samples, &gt).unwrap(), 0.0);
}

#[test]
fn bad_inputs_are_errors() {
    let gt = vec![[0.0, 0.0], [1.0, 0.0]];
    assert_eq!(min_ade(&[], &gt), Err(MetricError::NoSamples));
    assert_eq!(min_ade(&[sample(vec![[0.0, 0.0]])], &[]), Err(MetricError::EmptyFuture));
    assert_eq!(
        min_fde(&[sample(vec![[0.0, 0.0]])], &gt),
        Err(MetricError::HorizonMismatch { expected: 2, found: 1 })
    );
}
