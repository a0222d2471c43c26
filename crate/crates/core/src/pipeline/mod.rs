//! Frame loop tying tracking to prediction: single-hypothesis,
//! multi-hypothesis and ground-truth-past runs, with per-frame timing.

mod bench;
mod log;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prediction::{
    pool_predictions, predict_tracklet, sample_prediction_set, to_samples, ConstantVelocity, ObjectKey,
    PredictionError, PredictionSet, Predictor, Waypoint,
};
use crate::scenario::{Detection, Scenario};
use crate::tracker::{
    step_multi, step_single, ConfigError, Hypothesis, PipelineConfig, TrackId, TrackStatus, Tracklet,
};
use crate::util::combine;

pub use bench::{bench, BenchError, BenchReport, BenchRow};
pub use log::{
    content_hash, load_run, predictions_jsonl, save_run, FrameTrace, HypothesisLog, HypothesisSummary, LogError,
    OutputPaths, RecordLog, RunFiles, RunManifest, ScenarioRef, TimingSummary, TrackLog, TrackingLog,
    LOG_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("prediction failed at frame {frame}: {source}")]
    Prediction { frame: u32, source: PredictionError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Optimal assignment only.
    Stp,
    /// Ranked assignments, `H` hypotheses.
    Mtp,
    /// Predict from ground-truth pasts; no tracking.
    GtPast,
}

/// Predictions made at one frame, before and after k-means++ reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePredictions {
    pub frame: u32,
    pub pooled: PredictionSet,
    pub sampled: Option<PredictionSet>,
}

impl FramePredictions {
    /// The set handed downstream: sampled when sampling is on.
    pub fn output(&self) -> &PredictionSet {
        self.sampled.as_ref().unwrap_or(&self.pooled)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    /// Association and filter updates.
    pub tracking_ms: f64,
    /// Predictor invocations.
    pub prediction_ms: f64,
    /// Per-hypothesis assembly, pooling and k-means++ reduction.
    pub pooling_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: RunMode,
    /// Hypotheses alive after the last frame, best first.
    pub hypotheses: Vec<Hypothesis>,
    pub trace: Vec<FrameTrace>,
    pub predictions: Vec<FramePredictions>,
    pub timing: Vec<FrameTiming>,
}

impl RunOutput {
    pub fn tracking_log(&self) -> TrackingLog {
        TrackingLog::new(self)
    }

    /// Final prediction sets, one per frame.
    pub fn outputs(&self) -> Vec<PredictionSet> {
        self.predictions.iter().map(|p| p.output().clone()).collect()
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn prediction_seed(cfg: &PipelineConfig, frame: u32, t: &Tracklet) -> u64 {
    combine(&[cfg.rng_seed, u64::from(frame), t.track_id, t.lineage])
}

fn wants_prediction(t: &Tracklet) -> bool {
    t.is_live() && t.status == TrackStatus::Confirmed
}

/// Futures of every distinct tracklet across a set of hypotheses, keyed by
/// `(track_id, lineage)`.
pub type SharedFutures = BTreeMap<(TrackId, u64), Vec<Vec<Waypoint>>>;

/// Runs the predictor once per distinct tracklet. Tracklets with equal id
/// and lineage carry equal histories, so hypotheses holding the same
/// tracklet share its futures. Distinct tracklets are predicted in
/// parallel.
pub fn predict_distinct(
    hyps: &[Hypothesis],
    frame: u32,
    cfg: &PipelineConfig,
    predictor: &dyn Predictor,
) -> Result<SharedFutures, PredictionError> {
    let mut unique: BTreeMap<(TrackId, u64), &Tracklet> = BTreeMap::new();
    for h in hyps {
        for t in h.tracklets.iter().filter(|t| wants_prediction(t)) {
            unique.entry((t.track_id, t.lineage)).or_insert(t);
        }
    }
    let jobs: Vec<((TrackId, u64), &Tracklet)> = unique.into_iter().collect();
    let futures: Vec<Vec<Vec<Waypoint>>> = jobs
        .par_iter()
        .map(|(_, t)| {
            let seed = prediction_seed(cfg, frame, t);
            predict_tracklet(predictor, t, cfg.past_len, cfg.horizon, cfg.samples, seed)
        })
        .collect::<Result<_, _>>()?;
    Ok(jobs.into_iter().map(|(key, _)| key).zip(futures).collect())
}

/// Per-hypothesis prediction sets built from shared futures. A tracklet
/// matched at `frame` is keyed by its detection, a coasting one by its
/// hypothesis and track id.
pub fn assemble_hypotheses(
    hyps: &[Hypothesis],
    frame: u32,
    detections: &[Detection],
    futures: &SharedFutures,
) -> Vec<PredictionSet> {
    hyps.par_iter()
        .map(|h| {
            let mut set = PredictionSet::new(frame);
            for t in h.tracklets.iter().filter(|t| wants_prediction(t)) {
                let matched = h
                    .detection_of(t.track_id)
                    .filter(|_| t.last_frame() == frame)
                    .and_then(|d| detections.iter().find(|x| x.detection_id == d));
                let (key, anchor) = match matched {
                    Some(det) => (ObjectKey::Detection(det.detection_id), det.bbox),
                    None => (
                        ObjectKey::Track {
                            hypothesis: h.id,
                            track: t.track_id,
                        },
                        t.state().to_box(),
                    ),
                };
                set.insert(anchor, to_samples(&futures[&(t.track_id, t.lineage)], key, Some(h.id)));
            }
            set
        })
        .collect()
}

/// Predictions from ground-truth positions at `frame`.
pub fn predict_gt_past(
    scenario: &Scenario,
    frame: u32,
    cfg: &PipelineConfig,
    predictor: &dyn Predictor,
) -> Result<PredictionSet, PredictionError> {
    let mut set = PredictionSet::new(frame);
    for traj in &scenario.gt {
        let Some(anchor) = traj.box_at(frame) else {
            continue;
        };
        let mut past: Vec<Waypoint> = Vec::with_capacity(cfg.past_len);
        let mut f = frame;
        while past.len() < cfg.past_len {
            match traj.box_at(f) {
                Some(b) => past.push([b.cx, b.cy]),
                None => break,
            }
            if f == 0 {
                break;
            }
            f -= 1;
        }
        past.reverse();
        let seed = combine(&[cfg.rng_seed, u64::from(frame), u64::from(traj.gt_id)]);
        let futures = predictor.predict(&past, None, cfg.horizon, cfg.samples, seed)?;
        set.insert(*anchor, to_samples(&futures, ObjectKey::Gt(traj.gt_id), None));
    }
    Ok(set)
}

enum Stage {
    Sets(Vec<PredictionSet>),
    Shared(SharedFutures),
}

fn finish_frame(
    per_hypothesis: Vec<PredictionSet>,
    frame: u32,
    cfg: &PipelineConfig,
) -> Result<FramePredictions, PipelineError> {
    let wrap = |source| PipelineError::Prediction { frame, source };
    let pooled = match per_hypothesis.len() {
        1 => per_hypothesis.into_iter().next().expect("one set"),
        _ => pool_predictions(&per_hypothesis).map_err(wrap)?,
    };
    let sampled = if cfg.sampling {
        Some(sample_prediction_set(&pooled, cfg.samples, cfg.rng_seed).map_err(wrap)?)
    } else {
        None
    };
    Ok(FramePredictions { frame, pooled, sampled })
}

/// Runs the whole scenario in the given mode with the constant-velocity
/// predictor.
pub fn run(scenario: &Scenario, cfg: &PipelineConfig, mode: RunMode) -> Result<RunOutput, PipelineError> {
    run_with(scenario, cfg, mode, &ConstantVelocity::new(cfg.predictor.clone()))
}

pub fn run_with(
    scenario: &Scenario,
    cfg: &PipelineConfig,
    mode: RunMode,
    predictor: &dyn Predictor,
) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let mut hyps = vec![Hypothesis::root()];
    let mut out = RunOutput {
        mode,
        hypotheses: Vec::new(),
        trace: Vec::with_capacity(scenario.frames as usize),
        predictions: Vec::with_capacity(scenario.frames as usize),
        timing: Vec::with_capacity(scenario.frames as usize),
    };
    for frame in 0..scenario.frames {
        let detections = &scenario.detections[frame as usize];
        let mut timing = FrameTiming::default();

        let t = Instant::now();
        match mode {
            RunMode::Stp => hyps = vec![step_single(&hyps[0], frame, detections, cfg)],
            RunMode::Mtp => hyps = step_multi(&hyps, frame, detections, cfg),
            RunMode::GtPast => {}
        }
        timing.tracking_ms = ms_since(t);
        if mode != RunMode::GtPast {
            out.trace.push(FrameTrace::new(frame, &hyps));
        }

        let wrap = |source| PipelineError::Prediction { frame, source };
        let t = Instant::now();
        let stage = match mode {
            RunMode::GtPast => Stage::Sets(vec![predict_gt_past(scenario, frame, cfg, predictor).map_err(wrap)?]),
            _ => Stage::Shared(predict_distinct(&hyps, frame, cfg, predictor).map_err(wrap)?),
        };
        timing.prediction_ms = ms_since(t);

        let t = Instant::now();
        let per_hypothesis = match stage {
            Stage::Sets(sets) => sets,
            Stage::Shared(futures) => assemble_hypotheses(&hyps, frame, detections, &futures),
        };
        let preds = finish_frame(per_hypothesis, frame, cfg)?;
        timing.pooling_ms = ms_since(t);
        out.predictions.push(preds);
        out.timing.push(timing);
    }
    if mode != RunMode::GtPast {
        out.hypotheses = hyps;
    }
    Ok(out)
}
