//! Tracking by detection with single- or multi-hypothesis data association.
//!
//! Each frame, live tracklets are propagated by the Kalman filter, gated
//! against the frame's detections, and associated. The single-hypothesis
//! step commits to the optimal assignment; the multi-hypothesis step expands
//! every parent hypothesis into its ranked assignments and keeps the
//! globally cheapest `H` children.

mod hypothesis;
mod kalman;
mod tracklet;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, murty_h_best, Assignment, CostMatrix};
use crate::geometry::{Gate, MatchingMode};
use crate::scenario::Detection;

pub use hypothesis::{Hypothesis, HypothesisId};
pub use kalman::{KalmanFilter, MotionNoise, StateCovariance, StateVector, TrackState};
pub use tracklet::{History, TrackId, TrackRecord, TrackStatus, Tracklet};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid pipeline configuration: {field} {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: &'static str,
}

/// Spread of the constant-velocity predictor's perturbed samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorNoise {
    /// Meters per frame.
    pub sigma_speed: f64,
    /// Radians.
    pub sigma_heading: f64,
}

impl Default for PredictorNoise {
    fn default() -> Self {
        Self {
            sigma_speed: 0.05,
            sigma_heading: 0.05,
        }
    }
}

/// Everything that parameterizes a tracking-and-prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Hypotheses kept per frame (`H`).
    pub hypotheses: usize,
    /// Prediction samples per tracklet (`k`).
    pub samples: usize,
    pub children_per_parent: usize,
    pub matching: MatchingMode,
    pub gate: f64,
    pub past_len: usize,
    pub horizon: usize,
    pub max_age: u32,
    pub min_hits: u32,
    /// Added to a frame's cost per unmatched tracklet or detection.
    pub unmatched_penalty: f64,
    /// Reduce pooled samples to `samples` per object with k-means++.
    pub sampling: bool,
    pub rng_seed: u64,
    pub motion: MotionNoise,
    pub predictor: PredictorNoise,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::kitti()
    }
}

impl PipelineConfig {
    /// 3D IoU gating at 0.5, 10 past and 10 future frames at 10 Hz.
    pub fn kitti() -> Self {
        Self {
            hypotheses: 1,
            samples: 10,
            children_per_parent: 1,
            matching: MatchingMode::Iou3d,
            gate: 0.5,
            past_len: 10,
            horizon: 10,
            max_age: 2,
            min_hits: 3,
            unmatched_penalty: 1.0,
            sampling: false,
            rng_seed: 0,
            motion: MotionNoise::default(),
            predictor: PredictorNoise::default(),
        }
    }

    /// 2 m center-distance gating, 4 past and 12 future frames at 2 Hz.
    pub fn nuscenes() -> Self {
        Self {
            matching: MatchingMode::Center2d,
            gate: 2.0,
            past_len: 4,
            horizon: 12,
            ..Self::kitti()
        }
    }

    /// Sets `H` and the matching children-per-parent default.
    pub fn with_hypotheses(mut self, h: usize) -> Self {
        self.hypotheses = h;
        self.children_per_parent = h;
        self
    }

    pub fn gate(&self) -> Gate {
        Gate::new(self.matching, self.gate)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field, reason| Err(ConfigError { field, reason });
        if self.hypotheses < 1 {
            return fail("hypotheses", "must be at least 1");
        }
        if self.samples < 1 {
            return fail("samples", "must be at least 1");
        }
        if self.children_per_parent < 1 {
            return fail("children_per_parent", "must be at least 1");
        }
        if self.horizon < 1 {
            return fail("horizon", "must be at least 1");
        }
        if self.past_len < 1 {
            return fail("past_len", "must be at least 1");
        }
        if !(self.gate.is_finite() && self.gate > 0.0) {
            return fail("gate", "must be positive");
        }
        if !(self.unmatched_penalty.is_finite() && self.unmatched_penalty >= 0.0) {
            return fail("unmatched_penalty", "must be non-negative");
        }
        Ok(())
    }
}

/// Gated costs between predicted tracklet states (rows) and detections
/// (columns).
pub fn build_cost_matrix(predicted: &[TrackState], detections: &[Detection], cfg: &PipelineConfig) -> CostMatrix {
    let gate = cfg.gate();
    let boxes: Vec<_> = predicted.iter().map(TrackState::to_box).collect();
    CostMatrix::from_fn(boxes.len(), detections.len(), |r, c| {
        gate.cost(&boxes[r], &detections[c].bbox)
    })
    .expect("gated costs are finite")
}

/// A parent's live tracklets propagated to the new frame, with their cost
/// matrix against the frame's detections.
/// Parent tracklets as `(track_id, lineage)` plus the match set in track ids.
type DedupKey = (Vec<(TrackId, u64)>, Vec<(TrackId, usize)>);

struct Expansion<'a> {
    parent: &'a Hypothesis,
    live: Vec<usize>,
    predicted: Vec<TrackState>,
    matrix: CostMatrix,
}

impl<'a> Expansion<'a> {
    fn new(parent: &'a Hypothesis, detections: &[Detection], kf: &KalmanFilter, cfg: &PipelineConfig) -> Self {
        let live: Vec<usize> = (0..parent.tracklets.len())
            .filter(|&i| parent.tracklets[i].is_live())
            .collect();
        let predicted: Vec<TrackState> = live.iter().map(|&i| kf.predict(parent.tracklets[i].state())).collect();
        let matrix = build_cost_matrix(&predicted, detections, cfg);
        Self {
            parent,
            live,
            predicted,
            matrix,
        }
    }

    fn frame_cost(&self, a: &Assignment, cfg: &PipelineConfig) -> f64 {
        let unmatched = a.unmatched_rows.len() + a.unmatched_cols.len();
        a.total_cost + cfg.unmatched_penalty * unmatched as f64
    }

    /// Identity used to collapse clones across parents: the parent's live
    /// tracklets (id and association lineage) and the match set expressed in
    /// track ids.
    fn dedup_key(&self, a: &Assignment) -> DedupKey {
        let ids: Vec<(TrackId, u64)> = self
            .live
            .iter()
            .map(|&i| (self.parent.tracklets[i].track_id, self.parent.tracklets[i].lineage))
            .collect();
        let matches = a.matches.iter().map(|&(r, c)| (ids[r].0, c)).collect();
        (ids, matches)
    }

    fn apply(
        &self,
        assignment: &Assignment,
        frame: u32,
        detections: &[Detection],
        kf: &KalmanFilter,
        cfg: &PipelineConfig,
        id: HypothesisId,
    ) -> Hypothesis {
        let parent = self.parent;
        let mut tracklets = parent.tracklets.clone();
        let mut last_matches = Vec::with_capacity(detections.len());
        for (row, &idx) in self.live.iter().enumerate() {
            let t = &mut tracklets[idx];
            match assignment.col_of(row) {
                Some(col) => {
                    let det = &detections[col];
                    let posterior = kf.update(&self.predicted[row], &det.bbox);
                    t.matched(frame, det.detection_id, posterior, cfg.min_hits);
                    last_matches.push((t.track_id, det.detection_id));
                }
                None => t.missed(frame, self.predicted[row].clone(), cfg.max_age),
            }
        }
        let mut next_track_id = parent.next_track_id;
        for &col in &assignment.unmatched_cols {
            let det = &detections[col];
            let t = Tracklet::born(
                next_track_id,
                frame,
                det.detection_id,
                kf.initiate(&det.bbox),
                cfg.min_hits,
            );
            last_matches.push((t.track_id, det.detection_id));
            tracklets.push(t);
            next_track_id += 1;
        }
        last_matches.sort_unstable();
        Hypothesis {
            id,
            parent: Some(parent.id),
            tracklets,
            cumulative_cost: parent.cumulative_cost + self.frame_cost(assignment, cfg),
            frame: Some(frame),
            last_matches,
            next_track_id,
        }
    }
}

fn check_frame(hyp: &Hypothesis, frame: u32) {
    debug_assert!(
        hyp.frame.is_none_or(|f| f < frame),
        "frames must be processed in increasing order"
    );
}

/// One frame of single-hypothesis tracking: optimal assignment, Kalman
/// updates, lifecycle bookkeeping and births.
pub fn step_single(hyp: &Hypothesis, frame: u32, detections: &[Detection], cfg: &PipelineConfig) -> Hypothesis {
    check_frame(hyp, frame);
    let kf = KalmanFilter::new(&cfg.motion);
    let expansion = Expansion::new(hyp, detections, &kf, cfg);
    let assignment = hungarian(&expansion.matrix);
    let id = HypothesisId {
        step: hyp.id.step + 1,
        rank: 0,
    };
    expansion.apply(&assignment, frame, detections, &kf, cfg, id)
}

/// One frame of multi-hypothesis tracking. Every parent contributes its
/// `children_per_parent` best assignments; the pooled children are sorted
/// by cumulative cost, clones are dropped and the best `hypotheses` kept.
pub fn step_multi(hyps: &[Hypothesis], frame: u32, detections: &[Detection], cfg: &PipelineConfig) -> Vec<Hypothesis> {
    assert!(!hyps.is_empty(), "at least one parent hypothesis is required");
    let kf = KalmanFilter::new(&cfg.motion);
    let expansions: Vec<(Expansion, Vec<Assignment>)> = hyps
        .par_iter()
        .map(|parent| {
            check_frame(parent, frame);
            let expansion = Expansion::new(parent, detections, &kf, cfg);
            let ranked = murty_h_best(&expansion.matrix, cfg.children_per_parent);
            (expansion, ranked)
        })
        .collect();

    let mut candidates: Vec<(f64, usize, &Assignment)> = expansions
        .iter()
        .enumerate()
        .flat_map(|(pi, (exp, ranked))| {
            ranked
                .iter()
                .map(move |a| (exp.parent.cumulative_cost + exp.frame_cost(a, cfg), pi, a))
        })
        .collect();
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.cmp(&y.1))
            .then_with(|| x.2.matches.cmp(&y.2.matches))
    });

    let mut seen = HashSet::new();
    let mut survivors = Vec::with_capacity(cfg.hypotheses);
    for (_, pi, assignment) in candidates {
        if survivors.len() == cfg.hypotheses {
            break;
        }
        if seen.insert(expansions[pi].0.dedup_key(assignment)) {
            survivors.push((pi, assignment));
        }
    }

    let step = hyps.iter().map(|h| h.id.step).max().unwrap_or(0) + 1;
    survivors
        .into_iter()
        .enumerate()
        .map(|(rank, (pi, assignment))| {
            let id = HypothesisId {
                step,
                rank: rank as u32,
            };
            expansions[pi].0.apply(assignment, frame, detections, &kf, cfg, id)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;

    fn det(frame: u32, id: u32, x: f64, y: f64) -> Detection {
        Detection {
            frame,
            detection_id: id,
            class: "car".into(),
            score: 0.9,
            bbox: Box3D::new([x, y, 0.0], [4.0, 1.8, 1.5], 0.0).unwrap(),
        }
    }

    fn center_cfg() -> PipelineConfig {
        PipelineConfig {
            matching: MatchingMode::Center2d,
            gate: 2.0,
            ..PipelineConfig::kitti()
        }
    }

    #[test]
    fn presets() {
        let k = PipelineConfig::kitti();
        assert_eq!(
            (k.matching, k.gate, k.past_len, k.horizon),
            (MatchingMode::Iou3d, 0.5, 10, 10)
        );
        let n = PipelineConfig::nuscenes();
        assert_eq!(
            (n.matching, n.gate, n.past_len, n.horizon),
            (MatchingMode::Center2d, 2.0, 4, 12)
        );
        assert!(k.validate().is_ok());
        assert_eq!(
            PipelineConfig {
                hypotheses: 0,
                ..k.clone()
            }
            .validate()
            .unwrap_err()
            .field,
            "hypotheses"
        );
        assert_eq!(
            PipelineConfig { samples: 0, ..k }.validate().unwrap_err().field,
            "samples"
        );
    }

    #[test]
    fn cost_matrix_gating() {
        let cfg = PipelineConfig::kitti();
        let kf = KalmanFilter::new(&cfg.motion);
        let d = det(0, 0, 0.0, 0.0);
        let same = kf.initiate(&d.bbox);
        let m = build_cost_matrix(&[same], std::slice::from_ref(&d), &cfg);
        assert_eq!(m.get(0, 0), Some(0.0));
        // 4 m long boxes offset 1.7 m along x overlap with IoU 2.3/5.7 ≈ 0.40
        let shifted = kf.initiate(&det(0, 0, 1.7, 0.0).bbox);
        let m = build_cost_matrix(&[shifted], std::slice::from_ref(&d), &cfg);
        assert_eq!(m.get(0, 0), None);
        let center = center_cfg();
        let far = kf.initiate(&det(0, 0, 2.5, 0.0).bbox);
        assert_eq!(build_cost_matrix(&[far], &[d], &center).get(0, 0), None);
        assert_eq!(build_cost_matrix(&[], &[], &center).n_rows(), 0);
    }

    #[test]
    fn single_track_matches_and_counts_hits() {
        let cfg = center_cfg();
        let h0 = step_single(&Hypothesis::root(), 0, &[det(0, 0, 0.0, 0.0)], &cfg);
        assert_eq!(h0.tracklets.len(), 1);
        let h1 = step_single(&h0, 1, &[det(1, 0, 0.3, 0.0)], &cfg);
        assert_eq!(h1.tracklets.len(), 1);
        assert_eq!(h1.tracklets[0].hits, 2);
        assert_eq!(h1.last_matches, vec![(1, 0)]);
    }

    #[test]
    fn misses_kill_after_max_age() {
        let cfg = center_cfg();
        let mut h = Hypothesis::root();
        for f in 0..3 {
            h = step_single(&h, f, &[det(f, 0, f as f64 * 0.1, 0.0)], &cfg);
        }
        assert_eq!(h.tracklets[0].status, TrackStatus::Confirmed);
        for f in 3..5 {
            h = step_single(&h, f, &[], &cfg);
        }
        assert_eq!(h.tracklets[0].misses, cfg.max_age);
        assert!(h.tracklets[0].is_live());
        h = step_single(&h, 5, &[], &cfg);
        assert_eq!(h.tracklets[0].status, TrackStatus::Dead);
        // a later detection births a new track rather than reviving
        h = step_single(&h, 6, &[det(6, 0, 0.6, 0.0)], &cfg);
        assert_eq!(h.tracklets.len(), 2);
        assert_eq!(h.tracklets[0].status, TrackStatus::Dead);
        assert_eq!(h.tracklets[0].history_len(), 6);
    }

    #[test]
    fn cumulative_cost_includes_unmatched_penalty() {
        let cfg = center_cfg();
        let h = step_single(
            &Hypothesis::root(),
            0,
            &[det(0, 0, 0.0, 0.0), det(0, 1, 9.0, 0.0)],
            &cfg,
        );
        // two births, both detections unmatched
        assert_eq!(h.cumulative_cost, 2.0);
    }

    #[test]
    fn multi_with_one_hypothesis_matches_single() {
        let cfg = center_cfg();
        let frames: Vec<Vec<Detection>> = (0..6)
            .map(|f| {
                vec![
                    det(f, 0, f as f64, 0.1 * f as f64),
                    det(f, 1, f as f64, 1.5 - 0.1 * f as f64),
                ]
            })
            .collect();
        let mut single = Hypothesis::root();
        let mut multi = vec![Hypothesis::root()];
        for (f, dets) in frames.iter().enumerate() {
            single = step_single(&single, f as u32, dets, &cfg);
            multi = step_multi(&multi, f as u32, dets, &cfg);
            assert_eq!(multi.len(), 1);
            assert_eq!(multi[0].id, single.id);
            assert_eq!(multi[0].cumulative_cost, single.cumulative_cost);
            assert_eq!(multi[0].last_matches, single.last_matches);
        }
    }

    #[test]
    fn ambiguous_pair_yields_both_permutations() {
        let cfg = center_cfg().with_hypotheses(2);
        let mut hyps = vec![Hypothesis::root()];
        hyps = step_multi(&hyps, 0, &[det(0, 0, 0.0, 0.0), det(0, 1, 0.0, 1.0)], &cfg);
        assert_eq!(hyps.len(), 1);
        hyps = step_multi(&hyps, 1, &[det(1, 0, 0.0, 0.2), det(1, 1, 0.0, 0.9)], &cfg);
        assert_eq!(hyps.len(), 2);
        assert_eq!(hyps[0].last_matches, vec![(1, 0), (2, 1)]);
        assert_eq!(hyps[1].last_matches, vec![(1, 1), (2, 0)]);
        assert!(hyps[0].cumulative_cost <= hyps[1].cumulative_cost);
        assert_eq!(hyps[0].id, HypothesisId { step: 2, rank: 0 });
        assert_eq!(hyps[1].parent, Some(HypothesisId { step: 1, rank: 0 }));
    }
}
