//! k-means++ reduction of pooled trajectory samples.
//!
//! Trajectories are flattened to `2 * horizon` vectors and clustered with
//! Euclidean distance; the returned trajectories are the Lloyd centroids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PredictionError, PredictionSet, TrajectorySample};
use crate::util::combine;

const MAX_ITERATIONS: usize = 100;
const SHIFT_TOLERANCE: f64 = 1e-6;

fn flatten(s: &TrajectorySample) -> Vec<f64> {
    s.waypoints.iter().flat_map(|w| [w[0], w[1]]).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Reduces `samples` to exactly `k_out` trajectories.
///
/// With at most `k_out` distinct samples the distinct ones are returned in
/// first-seen order, padded by repeating the last. Otherwise k-means++
/// seeding is followed by Lloyd iterations until no centroid moves more
/// than 1e-6 or 100 iterations pass.
pub fn kmeanspp_sample(
    samples: &[TrajectorySample],
    k_out: usize,
    seed: u64,
) -> Result<Vec<TrajectorySample>, PredictionError> {
    let first = samples.first().ok_or(PredictionError::EmptySamples)?;
    if k_out == 0 {
        return Err(PredictionError::ZeroSamples);
    }
    let horizon = first.waypoints.len();
    if let Some(bad) = samples.iter().find(|s| s.waypoints.len() != horizon) {
        return Err(PredictionError::HorizonMismatch(horizon, bad.waypoints.len()));
    }

    let points: Vec<Vec<f64>> = samples.iter().map(flatten).collect();
    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if !distinct.iter().any(|&j| bits(&points[j]) == bits(p)) {
            distinct.push(i);
        }
        if distinct.len() > k_out {
            break;
        }
    }
    if distinct.len() <= k_out {
        let mut out: Vec<TrajectorySample> = distinct.iter().map(|&i| samples[i].clone()).collect();
        while out.len() < k_out {
            out.push(out.last().expect("non-empty").clone());
        }
        return Ok(out);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k_out {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just past the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick].clone();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let dim = 2 * horizon;
    let mut labels = vec![0usize; points.len()];
    for _ in 0..MAX_ITERATIONS {
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(p, &centers).0;
        }
        let mut sums = vec![vec![0.0; dim]; k_out];
        let mut counts = vec![0usize; k_out];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for (c, (sum, &n)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if n == 0 {
                continue;
            }
            let updated: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            shift = shift.max(sq_dist(c, &updated).sqrt());
            *c = updated;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }

    Ok(centers
        .into_iter()
        .map(|c| {
            let (member, _) = nearest(&c, &points);
            TrajectorySample {
                object_key: first.object_key,
                waypoints: c.chunks_exact(2).map(|xy| [xy[0], xy[1]]).collect(),
                source_hypothesis: samples[member].source_hypothesis,
            }
        })
        .collect())
}

/// Applies [`kmeanspp_sample`] to every object of a set. Each object gets
/// its own seed derived from `seed`, the frame and its key.
pub fn sample_prediction_set(set: &PredictionSet, k_out: usize, seed: u64) -> Result<PredictionSet, PredictionError> {
    let mut out = PredictionSet::new(set.frame);
    out.anchors = set.anchors.clone();
    for (key, samples) in &set.samples {
        let object_seed = combine(&[seed, u64::from(set.frame), crate::util::mix64(key_word(key))]);
        out.samples.insert(*key, kmeanspp_sample(samples, k_out, object_seed)?);
    }
    Ok(out)
}

fn key_word(key: &super::ObjectKey) -> u64 {
    use super::ObjectKey::*;
    match *key {
        Detection(d) => u64::from(d),
        Gt(g) => 1 << 40 | u64::from(g),
        Track { hypothesis, track } => combine(&[2, u64::from(hypothesis.step), u64::from(hypothesis.rank), track]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::ObjectKey;

    fn sample(points: &[[f64; 2]]) -> TrajectorySample {
        TrajectorySample {
            object_key: ObjectKey::Detection(0),
            waypoints: points.to_vec(),
            source_hypothesis: None,
        }
    }

    #[test]
    fn identical_samples_repeat() {
        let s = sample(&[[1.0, 2.0], [3.0, 4.0]]);
        let out = kmeanspp_sample(&vec![s.clone(); 7], 4, 0).unwrap();
        assert_eq!(out, vec![s; 4]);
    }

    #[test]
    fn exact_count_returns_inputs() {
        let input: Vec<_> = (0..5).map(|i| sample(&[[i as f64, 0.0]])).collect();
        assert_eq!(kmeanspp_sample(&input, 5, 3).unwrap(), input);
    }

    #[test]
    fn two_clusters_give_their_means() {
        let mut input = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.01;
            input.push(sample(&[[e, 0.0], [1.0 + e, 0.0]]));
            input.push(sample(&[[100.0 + e, 0.0], [101.0 + e, 0.0]]));
        }
        let out = kmeanspp_sample(&input, 2, 11).unwrap();
        let mut starts: Vec<f64> = out.iter().map(|s| s.waypoints[0][0]).collect();
        starts.sort_by(f64::total_cmp);
        assert!((starts[0] - 0.045).abs() < 1e-6, "{starts:?}");
        assert!((starts[1] - 100.045).abs() < 1e-6, "{starts:?}");
    }

    #[test]
    fn output_size_is_exact() {
        let input: Vec<_> = (0..50)
            .map(|i| sample(&[[i as f64, (i * i) as f64], [0.0, 1.0]]))
            .collect();
        for k in [1, 3, 10, 49, 50, 60] {
            let out = kmeanspp_sample(&input, k, 5).unwrap();
            assert_eq!(out.len(), k);
            assert!(out.iter().all(|s| s.waypoints.len() == 2));
        }
    }

    #[test]
    fn errors() {
        assert_eq!(kmeanspp_sample(&[], 3, 0), Err(PredictionError::EmptySamples));
        let mixed = vec![sample(&[[0.0, 0.0]]), sample(&[[0.0, 0.0], [1.0, 1.0]])];
        assert_eq!(
            kmeanspp_sample(&mixed, 1, 0),
            Err(PredictionError::HorizonMismatch(1, 2))
        );
    }
}
