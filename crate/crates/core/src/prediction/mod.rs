//! Trajectory prediction from tracklets, pooling across hypotheses and
//! k-means++ reduction of pooled samples.

mod cv;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::Box3D;
use crate::tracker::{HypothesisId, TrackId};

pub use cv::{estimate_velocity, predict_cv, predict_tracklet, to_samples, ConstantVelocity};
pub use sampling::{kmeanspp_sample, sample_prediction_set};

pub type Waypoint = [f64; 2];

/// A trajectory model producing `k` futures of `horizon` waypoints from a
/// past trajectory (oldest first, ending at the current position).
pub trait Predictor: Send + Sync {
    fn predict(
        &self,
        past: &[Waypoint],
        velocity_hint: Option<Waypoint>,
        horizon: usize,
        k: usize,
        seed: u64,
    ) -> Result<Vec<Vec<Waypoint>>, PredictionError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictionError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("past trajectory is empty")]
    EmptyPast,
    #[error("no samples to reduce")]
    EmptySamples,
    #[error("prediction sets from different frames: {0} and {1}")]
    FrameMismatch(u32, u32),
    #[error("samples disagree on horizon: {0} vs {1}")]
    HorizonMismatch(usize, usize),
}

/// Cross-hypothesis identity of a predicted object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectKey {
    /// Tracklet matched to this detection at the prediction frame; shared by
    /// every hypothesis that made the same match.
    Detection(u32),
    /// Tracklet coasting without a detection; never pooled.
    Track { hypothesis: HypothesisId, track: TrackId },
    /// Ground-truth object, when predicting from ground-truth pasts.
    Gt(u32),
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Detection(d) => write!(f, "d{d}"),
            Self::Track { hypothesis, track } => write!(f, "{hypothesis}t{track}"),
            Self::Gt(g) => write!(f, "g{g}"),
        }
    }
}

impl FromStr for ObjectKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed object key `{s}`");
        if let Some(rest) = s.strip_prefix('d') {
            return rest.parse().map(Self::Detection).map_err(|_| bad());
        }
        if let Some(rest) = s.strip_prefix('g') {
            return rest.parse().map(Self::Gt).map_err(|_| bad());
        }
        let rest = s.strip_prefix('s').ok_or_else(bad)?;
        let (step, rest) = rest.split_once('r').ok_or_else(bad)?;
        let (rank, track) = rest.split_once('t').ok_or_else(bad)?;
        Ok(Self::Track {
            hypothesis: HypothesisId {
                step: step.parse().map_err(|_| bad())?,
                rank: rank.parse().map_err(|_| bad())?,
            },
            track: track.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for ObjectKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One predicted future for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub object_key: ObjectKey,
    pub waypoints: Vec<Waypoint>,
    pub source_hypothesis: Option<HypothesisId>,
}

/// All predictions made at one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    pub frame: u32,
    pub samples: BTreeMap<ObjectKey, Vec<TrajectorySample>>,
    /// Box of each object at the prediction frame, used to find its ground
    /// truth.
    pub anchors: BTreeMap<ObjectKey, Box3D>,
}

impl PredictionSet {
    pub fn new(frame: u32) -> Self {
        Self {
            frame,
            ..Self::default()
        }
    }

    pub fn insert(&mut self, anchor: Box3D, samples: Vec<TrajectorySample>) {
        let Some(first) = samples.first() else { return };
        let key = first.object_key;
        self.anchors.entry(key).or_insert(anchor);
        self.samples.entry(key).or_default().extend(samples);
    }

    pub fn sample_count(&self) -> usize {
        self.samples.values().map(Vec::len).sum()
    }
}

/// Concatenates per-object samples across hypotheses. Anchors come from the
/// first set that contains the object.
pub fn pool_predictions(per_hypothesis: &[PredictionSet]) -> Result<PredictionSet, PredictionError> {
    let Some(first) = per_hypothesis.first() else {
        return Ok(PredictionSet::default());
    };
    let mut pooled = PredictionSet::new(first.frame);
    for set in per_hypothesis {
        if set.frame != first.frame {
            return Err(PredictionError::FrameMismatch(first.frame, set.frame));
        }
        for (key, samples) in &set.samples {
            pooled.samples.entry(*key).or_default().extend(samples.iter().cloned());
        }
        for (key, anchor) in &set.anchors {
            pooled.anchors.entry(*key).or_insert(*anchor);
        }
    }
    Ok(pooled)
}
