use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ObjectKey, PredictionError, Predictor, TrajectorySample, Waypoint};
use crate::tracker::{HypothesisId, PredictorNoise, Tracklet};

/// Least-squares slope of positions sampled at consecutive frames. Falls
/// back to `hint` (or zero) with fewer than two points.
pub fn estimate_velocity(past: &[Waypoint], hint: Option<Waypoint>) -> Waypoint {
    let n = past.len();
    if n < 2 {
        return hint.unwrap_or([0.0, 0.0]);
    }
    let t_mean = (n as f64 - 1.0) / 2.0;
    let mut p_mean = [0.0; 2];
    for p in past {
        p_mean[0] += p[0] / n as f64;
        p_mean[1] += p[1] / n as f64;
    }
    let mut num = [0.0; 2];
    let mut den = 0.0;
    for (i, p) in past.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num[0] += dt * (p[0] - p_mean[0]);
        num[1] += dt * (p[1] - p_mean[1]);
        den += dt * dt;
    }
    [num[0] / den, num[1] / den]
}

/// Constant-velocity rollout with Gaussian speed and heading perturbations.
///
/// Sample 0 is always the unperturbed rollout; samples `1..k` draw one speed
/// and one heading offset each from a generator seeded by `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantVelocity {
    pub noise: PredictorNoise,
}

impl ConstantVelocity {
    pub fn new(noise: PredictorNoise) -> Self {
        Self { noise }
    }
}

impl Predictor for ConstantVelocity {
    fn predict(
        &self,
        past: &[Waypoint],
        velocity_hint: Option<Waypoint>,
        horizon: usize,
        k: usize,
        seed: u64,
    ) -> Result<Vec<Vec<Waypoint>>, PredictionError> {
        if horizon == 0 {
            return Err(PredictionError::ZeroHorizon);
        }
        if k == 0 {
            return Err(PredictionError::ZeroSamples);
        }
        let &current = past.last().ok_or(PredictionError::EmptyPast)?;
        let v = estimate_velocity(past, velocity_hint);
        let speed = v[0].hypot(v[1]);
        let heading = v[1].atan2(v[0]);

        let rollout = |vel: Waypoint| -> Vec<Waypoint> {
            (1..=horizon)
                .map(|i| [current[0] + vel[0] * i as f64, current[1] + vel[1] * i as f64])
                .collect()
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let speed_noise = Normal::new(0.0, self.noise.sigma_speed).ok();
        let heading_noise = Normal::new(0.0, self.noise.sigma_heading).ok();
        let mut out = Vec::with_capacity(k);
        out.push(rollout(v));
        for _ in 1..k {
            let ds = speed_noise.map_or(0.0, |d| d.sample(&mut rng));
            let dh = heading_noise.map_or(0.0, |d| d.sample(&mut rng));
            let s = (speed + ds).max(0.0);
            let (sin, cos) = (heading + dh).sin_cos();
            out.push(rollout([s * cos, s * sin]));
        }
        Ok(out)
    }
}

/// Runs `predictor` on a tracklet's last `past_len` filtered positions,
/// with the filter velocity as the hint.
pub fn predict_tracklet(
    predictor: &dyn Predictor,
    tracklet: &Tracklet,
    past_len: usize,
    horizon: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<Waypoint>>, PredictionError> {
    let past = tracklet.recent_positions(past_len);
    predictor.predict(&past, Some(tracklet.state().velocity()), horizon, k, seed)
}

/// [`predict_tracklet`] with the constant-velocity model.
pub fn predict_cv(
    tracklet: &Tracklet,
    past_len: usize,
    horizon: usize,
    k: usize,
    seed: u64,
    noise: &PredictorNoise,
) -> Result<Vec<Vec<Waypoint>>, PredictionError> {
    predict_tracklet(
        &ConstantVelocity::new(noise.clone()),
        tracklet,
        past_len,
        horizon,
        k,
        seed,
    )
}

/// Wraps raw futures as samples of one object.
pub fn to_samples(
    futures: &[Vec<Waypoint>],
    object_key: ObjectKey,
    source: Option<HypothesisId>,
) -> Vec<TrajectorySample> {
    futures
        .iter()
        .map(|w| TrajectorySample {
            object_key,
            waypoints: w.clone(),
            source_hypothesis: source,
        })
        .collect()
}
