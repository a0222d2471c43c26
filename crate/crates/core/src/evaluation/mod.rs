//! Tracking-error classification against ground truth and best-of-k
//! trajectory metrics.

mod report;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, CostMatrix};
use crate::geometry::{Box3D, Gate};
use crate::prediction::{TrajectorySample, Waypoint};
use crate::scenario::Scenario;
use crate::tracker::TrackId;

pub use report::{
    evaluate, histogram_csv, shared_errors, tables_csv, ErrorCounts, EvalConfig, Evaluation, HistogramBin,
    InstanceResult, MetricsReport, SharedErrors, SubsetMetrics, HISTOGRAM_BIN_M,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no prediction samples")]
    NoSamples,
    #[error("sample has {found} waypoints, ground truth has {expected}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("ground-truth future is empty")]
    EmptyFuture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "IDS")]
    Ids,
    #[serde(rename = "FRAG_wrong")]
    FragWrong,
    #[serde(rename = "FRAG_under")]
    FragUnder,
    #[serde(rename = "SPURIOUS")]
    Spurious,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ids => "IDS",
            Self::FragWrong => "FRAG_wrong",
            Self::FragUnder => "FRAG_under",
            Self::Spurious => "SPURIOUS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub kind: ErrorKind,
    pub frame: u32,
    pub gt_id: Option<u32>,
    /// `[previous, new]` for IDS, the offending track for SPURIOUS, the
    /// nearby tracks for FRAG_wrong.
    pub track_ids: Vec<TrackId>,
    /// BEV distance from the origin, where the ego vehicle sits.
    pub ego_distance: f64,
}

impl ErrorEvent {
    /// Identity used to compare events across hypotheses.
    pub fn key(&self) -> (ErrorKind, u32, Option<u32>) {
        (self.kind, self.frame, self.gt_id)
    }
}

/// Ground truth and tracker output at one frame, and their optimal pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePairing {
    pub frame: u32,
    pub gt: Vec<(u32, Box3D)>,
    pub tracks: Vec<(TrackId, Box3D)>,
    /// `(gt_id, track_id)`, sorted by gt id.
    pub matches: Vec<(u32, TrackId)>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_tracks: Vec<TrackId>,
}

impl FramePairing {
    pub fn track_of(&self, gt_id: u32) -> Option<TrackId> {
        self.matches.iter().find(|(g, _)| *g == gt_id).map(|(_, t)| *t)
    }
}

/// Gated optimal pairing of ground truth (rows) with tracks (columns).
pub fn match_frame(frame: u32, tracks: &[(TrackId, Box3D)], gt: &[(u32, Box3D)], gate: Gate) -> FramePairing {
    let matrix = CostMatrix::from_fn(gt.len(), tracks.len(), |r, c| gate.cost(&gt[r].1, &tracks[c].1))
        .expect("gated costs are finite");
    let assignment = hungarian(&matrix);
    let mut matches: Vec<(u32, TrackId)> = assignment
        .matches
        .iter()
        .map(|&(r, c)| (gt[r].0, tracks[c].0))
        .collect();
    matches.sort_unstable();
    let mut unmatched_gt: Vec<u32> = assignment.unmatched_rows.iter().map(|&r| gt[r].0).collect();
    unmatched_gt.sort_unstable();
    let mut unmatched_tracks: Vec<TrackId> = assignment.unmatched_cols.iter().map(|&c| tracks[c].0).collect();
    unmatched_tracks.sort_unstable();
    FramePairing {
        frame,
        gt: gt.to_vec(),
        tracks: tracks.to_vec(),
        matches,
        unmatched_gt,
        unmatched_tracks,
    }
}

/// Pairs every scenario frame with the tracks reported there.
pub fn pair_sequence(
    scenario: &Scenario,
    tracks: &BTreeMap<u32, Vec<(TrackId, Box3D)>>,
    gate: Gate,
) -> Vec<FramePairing> {
    (0..scenario.frames)
        .map(|f| {
            let reported = tracks.get(&f).map(Vec::as_slice).unwrap_or(&[]);
            match_frame(f, reported, &scenario.gt_at(f), gate)
        })
        .collect()
}

fn ego_distance(b: &Box3D) -> f64 {
    b.cx.hypot(b.cy)
}

/// Walks the pairings in frame order and emits identity switches,
/// fragments and spurious tracks.
///
/// A fragment is wrongly tracked when some track lies inside the widened
/// gate of the lost object, under-tracked otherwise. Fragments are only
/// counted once an object has been matched at least once.
pub fn classify_errors(pairings: &[FramePairing], gate: Gate) -> Vec<ErrorEvent> {
    let wide = gate.widened();
    let mut last_track: HashMap<u32, TrackId> = HashMap::new();
    let mut events = Vec::new();
    for p in pairings {
        for &(gt_id, track) in &p.matches {
            if let Some(prev) = last_track.insert(gt_id, track) {
                if prev != track {
                    let b = p.gt.iter().find(|(g, _)| *g == gt_id).expect("matched gt present").1;
                    events.push(ErrorEvent {
                        kind: ErrorKind::Ids,
                        frame: p.frame,
                        gt_id: Some(gt_id),
                        track_ids: vec![prev, track],
                        ego_distance: ego_distance(&b),
                    });
                }
            }
        }
        for &gt_id in &p.unmatched_gt {
            if !last_track.contains_key(&gt_id) {
                continue;
            }
            let b = p.gt.iter().find(|(g, _)| *g == gt_id).expect("unmatched gt present").1;
            let nearby: Vec<TrackId> = p
                .tracks
                .iter()
                .filter(|(_, t)| wide.cost(&b, t).is_some())
                .map(|(id, _)| *id)
                .collect();
            events.push(ErrorEvent {
                kind: if nearby.is_empty() {
                    ErrorKind::FragUnder
                } else {
                    ErrorKind::FragWrong
                },
                frame: p.frame,
                gt_id: Some(gt_id),
                track_ids: nearby,
                ego_distance: ego_distance(&b),
            });
        }
        for &track in &p.unmatched_tracks {
            let b = p
                .tracks
                .iter()
                .find(|(t, _)| *t == track)
                .expect("unmatched track present")
                .1;
            events.push(ErrorEvent {
                kind: ErrorKind::Spurious,
                frame: p.frame,
                gt_id: None,
                track_ids: vec![track],
                ego_distance: ego_distance(&b),
            });
        }
    }
    events
}

fn check_horizon(samples: &[TrajectorySample], gt_future: &[Waypoint]) -> Result<(), MetricError> {
    if samples.is_empty() {
        return Err(MetricError::NoSamples);
    }
    if gt_future.is_empty() {
        return Err(MetricError::EmptyFuture);
    }
    match samples.iter().find(|s| s.waypoints.len() != gt_future.len()) {
        Some(s) => Err(MetricError::HorizonMismatch {
            expected: gt_future.len(),
            found: s.waypoints.len(),
        }),
        None => Ok(()),
    }
}

fn dist(a: Waypoint, b: Waypoint) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Best-of-k average displacement error.
pub fn min_ade(samples: &[TrajectorySample], gt_future: &[Waypoint]) -> Result<f64, MetricError> {
    check_horizon(samples, gt_future)?;
    let n = gt_future.len() as f64;
    Ok(samples
        .iter()
        .map(|s| {
            s.waypoints
                .iter()
                .zip(gt_future)
                .map(|(&p, &g)| dist(p, g))
                .sum::<f64>()
                / n
        })
        .fold(f64::INFINITY, f64::min))
}

/// Best-of-k final displacement error.
pub fn min_fde(samples: &[TrajectorySample], gt_future: &[Waypoint]) -> Result<f64, MetricError> {
    check_horizon(samples, gt_future)?;
    let g = *gt_future.last().expect("non-empty");
    Ok(samples
        .iter()
        .map(|s| dist(*s.waypoints.last().expect("checked length"), g))
        .fold(f64::INFINITY, f64::min))
}
