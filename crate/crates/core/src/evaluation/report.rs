use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{min_ade, min_fde, ErrorEvent, ErrorKind};
use crate::assignment::{hungarian, CostMatrix};
use crate::geometry::{Box3D, Gate};
use crate::prediction::{ObjectKey, PredictionSet, Waypoint};
use crate::scenario::Scenario;

pub const HISTOGRAM_BIN_M: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub gate: Gate,
    pub past_len: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub ids: usize,
    pub frag_wrong: usize,
    pub frag_under: usize,
    pub spurious: usize,
}

impl ErrorCounts {
    pub fn from_events(events: &[ErrorEvent]) -> Self {
        let mut c = Self::default();
        for e in events {
            c.add(e.kind, 1);
        }
        c
    }

    pub fn add(&mut self, kind: ErrorKind, n: usize) {
        match kind {
            ErrorKind::Ids => self.ids += n,
            ErrorKind::FragWrong => self.frag_wrong += n,
            ErrorKind::FragUnder => self.frag_under += n,
            ErrorKind::Spurious => self.spurious += n,
        }
    }

    pub fn frag(&self) -> usize {
        self.frag_wrong + self.frag_under
    }

    pub fn total(&self) -> usize {
        self.ids + self.frag() + self.spurious
    }
}

/// Mean best-of-k errors over the instances of one subset; `None` when the
/// subset is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub objects: usize,
    pub min_ade: Option<f64>,
    pub min_fde: Option<f64>,
}

impl SubsetMetrics {
    pub fn from_instances<'a>(instances: impl Iterator<Item = &'a InstanceResult>) -> Self {
        let (mut n, mut ade, mut fde) = (0usize, 0.0, 0.0);
        for i in instances {
            n += 1;
            ade += i.min_ade;
            fde += i.min_fde;
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            objects: n,
            min_ade: Some(ade / n as f64),
            min_fde: Some(fde / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower_m: f64,
    pub upper_m: f64,
    pub counts: ErrorCounts,
}

/// Errors of hypothesis 0 next to the errors every final hypothesis makes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedErrors {
    pub hypotheses: usize,
    pub baseline: ErrorCounts,
    pub shared: ErrorCounts,
}

/// One evaluated prediction: an object at a frame, matched to ground truth
/// with a complete future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub frame: u32,
    pub gt_id: u32,
    pub object_key: ObjectKey,
    pub samples: usize,
    pub min_ade: f64,
    pub min_fde: f64,
    pub ids: bool,
    pub frag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub all: SubsetMetrics,
    pub ids: SubsetMetrics,
    pub frag: SubsetMetrics,
    /// Predicted objects with no ground truth at the prediction frame.
    pub spurious_predictions: usize,
    /// Matched objects whose ground-truth future is shorter than the horizon.
    pub truncated: usize,
    pub errors: ErrorCounts,
    pub per_gt: BTreeMap<u32, ErrorCounts>,
    pub ego_distance_histogram: Vec<HistogramBin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared: Option<SharedErrors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub instances: Vec<InstanceResult>,
}

fn gt_future(scenario: &Scenario, gt_id: u32, frame: u32, horizon: usize) -> Option<Vec<Waypoint>> {
    let traj = scenario.gt.iter().find(|t| t.gt_id == gt_id)?;
    (1..=horizon as u32)
        .map(|i| traj.box_at(frame + i).map(|b| [b.cx, b.cy]))
        .collect()
}

/// Matches `keys` to the still-free ground truth and marks it taken.
fn match_anchors<'a>(
    keys: &[(&'a ObjectKey, &'a Box3D)],
    gt: &[(u32, Box3D)],
    taken: &mut [bool],
    gate: Gate,
) -> Vec<(&'a ObjectKey, Option<u32>)> {
    let free: Vec<usize> = (0..gt.len()).filter(|&i| !taken[i]).collect();
    let matrix = CostMatrix::from_fn(free.len(), keys.len(), |r, c| gate.cost(&gt[free[r]].1, keys[c].1))
        .expect("gated costs are finite");
    let assignment = hungarian(&matrix);
    let mut out: Vec<(&ObjectKey, Option<u32>)> = keys.iter().map(|(k, _)| (*k, None)).collect();
    for &(r, c) in &assignment.matches {
        taken[free[r]] = true;
        out[c].1 = Some(gt[free[r]].0);
    }
    out
}

fn in_window(events: &[ErrorEvent], gt_id: u32, frame: u32, past_len: usize, kinds: &[ErrorKind]) -> bool {
    events.iter().any(|e| {
        e.gt_id == Some(gt_id)
            && kinds.contains(&e.kind)
            && e.frame <= frame
            && (e.frame as usize) + past_len > frame as usize
    })
}

fn histogram(events: &[ErrorEvent]) -> Vec<HistogramBin> {
    let Some(max) = events.iter().map(|e| e.ego_distance).reduce(f64::max) else {
        return Vec::new();
    };
    let bins = (max / HISTOGRAM_BIN_M).floor() as usize + 1;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lower_m: i as f64 * HISTOGRAM_BIN_M,
            upper_m: (i + 1) as f64 * HISTOGRAM_BIN_M,
            counts: ErrorCounts::default(),
        })
        .collect();
    for e in events {
        let i = ((e.ego_distance / HISTOGRAM_BIN_M).floor() as usize).min(bins - 1);
        out[i].counts.add(e.kind, 1);
    }
    out
}

/// Scores predictions against ground-truth futures.
///
/// Each prediction frame's anchors are matched to ground truth, detection-
/// and ground-truth-keyed objects first, then coasting tracks against what
/// is left. `events` feed the error statistics; `targets` decide which
/// instances fall in the IDS and FRAG subsets (pass the same slice for a
/// self-contained report, or a baseline's events to compare methods on
/// identical subsets).
pub fn evaluate(
    predictions: &[PredictionSet],
    scenario: &Scenario,
    events: &[ErrorEvent],
    targets: &[ErrorEvent],
    cfg: &EvalConfig,
) -> Evaluation {
    let mut instances = Vec::new();
    let mut spurious_predictions = 0;
    let mut truncated = 0;
    for set in predictions {
        let gt = scenario.gt_at(set.frame);
        let mut taken = vec![false; gt.len()];
        let (coasting, primary): (Vec<_>, Vec<_>) = set
            .anchors
            .iter()
            .filter(|(k, _)| set.samples.get(k).is_some_and(|s| !s.is_empty()))
            .partition(|(k, _)| matches!(k, ObjectKey::Track { .. }));
        spurious_predictions += set.samples.keys().filter(|k| !set.anchors.contains_key(k)).count();
        let mut pairs = match_anchors(&primary, &gt, &mut taken, cfg.gate);
        pairs.extend(match_anchors(&coasting, &gt, &mut taken, cfg.gate));
        pairs.sort_by_key(|(k, _)| **k);
        for (key, gt_id) in pairs {
            let Some(gt_id) = gt_id else {
                spurious_predictions += 1;
                continue;
            };
            let Some(future) = gt_future(scenario, gt_id, set.frame, cfg.horizon) else {
                truncated += 1;
                continue;
            };
            let samples = &set.samples[key];
            let (Ok(ade), Ok(fde)) = (min_ade(samples, &future), min_fde(samples, &future)) else {
                truncated += 1;
                continue;
            };
            instances.push(InstanceResult {
                frame: set.frame,
                gt_id,
                object_key: *key,
                samples: samples.len(),
                min_ade: ade,
                min_fde: fde,
                ids: in_window(targets, gt_id, set.frame, cfg.past_len, &[ErrorKind::Ids]),
                frag: in_window(
                    targets,
                    gt_id,
                    set.frame,
                    cfg.past_len,
                    &[ErrorKind::FragWrong, ErrorKind::FragUnder],
                ),
            });
        }
    }

    let mut per_gt: BTreeMap<u32, ErrorCounts> = BTreeMap::new();
    for e in events {
        if let Some(g) = e.gt_id {
            per_gt.entry(g).or_default().add(e.kind, 1);
        }
    }
    let report = MetricsReport {
        all: SubsetMetrics::from_instances(instances.iter()),
        ids: SubsetMetrics::from_instances(instances.iter().filter(|i| i.ids)),
        frag: SubsetMetrics::from_instances(instances.iter().filter(|i| i.frag)),
        spurious_predictions,
        truncated,
        errors: ErrorCounts::from_events(events),
        per_gt,
        ego_distance_histogram: histogram(events),
        shared: None,
    };
    Evaluation { report, instances }
}

/// Counts errors present in every hypothesis, matching events by kind,
/// frame and ground-truth id (with multiplicity, so spurious tracks of one
/// frame are shared up to the smallest count). Hypothesis 0 is the
/// baseline.
pub fn shared_errors(per_hypothesis: &[Vec<ErrorEvent>]) -> SharedErrors {
    let tally = |events: &[ErrorEvent]| {
        let mut m: BTreeMap<_, usize> = BTreeMap::new();
        for e in events {
            *m.entry(e.key()).or_default() += 1;
        }
        m
    };
    let baseline_events = per_hypothesis.first().map(Vec::as_slice).unwrap_or(&[]);
    let mut common = tally(baseline_events);
    for events in per_hypothesis.iter().skip(1) {
        let other = tally(events);
        common.retain(|k, n| {
            *n = (*n).min(other.get(k).copied().unwrap_or(0));
            *n > 0
        });
    }
    let mut shared = ErrorCounts::default();
    for ((kind, _, _), n) in common {
        shared.add(kind, n);
    }
    SharedErrors {
        hypotheses: per_hypothesis.len(),
        baseline: ErrorCounts::from_events(baseline_events),
        shared,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// One row per method and subset: objects, minADE_k, minFDE_k.
pub fn tables_csv(rows: &[(&str, &MetricsReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "subset", "objects", "min_ade", "min_fde"])
        .expect("in-memory write");
    for (method, report) in rows {
        for (subset, m) in [("all", &report.all), ("ids", &report.ids), ("frag", &report.frag)] {
            w.write_record([
                method.to_string(),
                subset.to_string(),
                m.objects.to_string(),
                fmt_opt(m.min_ade),
                fmt_opt(m.min_fde),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Ego-distance histogram, one row per method and bin.
pub fn histogram_csv(rows: &[(&str, &MetricsReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "lower_m",
        "upper_m",
        "ids",
        "frag_wrong",
        "frag_under",
        "spurious",
    ])
    .expect("in-memory write");
    for (method, report) in rows {
        for b in &report.ego_distance_histogram {
            let c = b.counts;
            w.write_record([
                method.to_string(),
                b.lower_m.to_string(),
                b.upper_m.to_string(),
                c.ids.to_string(),
                c.frag_wrong.to_string(),
                c.frag_under.to_string(),
                c.spurious.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MatchingMode;
    use crate::prediction::TrajectorySample;
    use crate::scenario::GtTrajectory;

    fn bx(x: f64, y: f64) -> Box3D {
        Box3D::new([x, y, 0.0], [4.0, 1.8, 1.5], 0.0).unwrap()
    }

    fn moving_scenario(frames: u32) -> Scenario {
        let mut s = Scenario::empty(10.0);
        s.frames = frames;
        s.detections = vec![Vec::new(); frames as usize];
        s.gt.push(GtTrajectory {
            gt_id: 0,
            class: "car".into(),
            boxes: (0..frames).map(|f| (f, bx(f as f64, 0.0))).collect(),
        });
        s
    }

    fn cfg() -> EvalConfig {
        EvalConfig {
            gate: Gate::new(MatchingMode::Center2d, 2.0),
            past_len: 3,
            horizon: 4,
        }
    }

    fn set_at(frame: u32, key: ObjectKey, anchor: Box3D, offset: f64) -> PredictionSet {
        let mut set = PredictionSet::new(frame);
        let waypoints = (1..=4).map(|i| [anchor.cx + i as f64, anchor.cy + offset]).collect();
        set.insert(
            anchor,
            vec![TrajectorySample {
                object_key: key,
                waypoints,
                source_hypothesis: None,
            }],
        );
        set
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let s = moving_scenario(12);
        let preds: Vec<_> = (0..12)
            .map(|f| set_at(f, ObjectKey::Gt(0), bx(f as f64, 0.0), 0.0))
            .collect();
        let ev = evaluate(&preds, &s, &[], &[], &cfg());
        assert_eq!(ev.report.all.objects, 8);
        assert_eq!(ev.report.truncated, 4);
        assert_eq!(ev.report.all.min_ade, Some(0.0));
        assert_eq!(ev.report.ids.objects, 0);
        assert_eq!(ev.report.ids.min_ade, None);
    }

    #[test]
    fn unmatched_anchor_is_a_spurious_prediction() {
        let s = moving_scenario(10);
        let ev = evaluate(
            &[set_at(2, ObjectKey::Detection(5), bx(50.0, 0.0), 0.0)],
            &s,
            &[],
            &[],
            &cfg(),
        );
        assert_eq!(ev.report.spurious_predictions, 1);
        assert!(ev.instances.is_empty());
    }

    #[test]
    fn ids_window_selects_instances() {
        let s = moving_scenario(20);
        let preds: Vec<_> = (0..15)
            .map(|f| set_at(f, ObjectKey::Detection(0), bx(f as f64, 0.0), 1.0))
            .collect();
        let event = ErrorEvent {
            kind: ErrorKind::Ids,
            frame: 6,
            gt_id: Some(0),
            track_ids: vec![1, 2],
            ego_distance: 6.0,
        };
        let ev = evaluate(
            &preds,
            &s,
            std::slice::from_ref(&event),
            std::slice::from_ref(&event),
            &cfg(),
        );
        let frames: Vec<u32> = ev.instances.iter().filter(|i| i.ids).map(|i| i.frame).collect();
        assert_eq!(frames, vec![6, 7, 8]);
        assert_eq!(ev.report.ids.min_ade, Some(1.0));
        assert_eq!(ev.report.errors.ids, 1);
        assert_eq!(ev.report.per_gt[&0].ids, 1);
        assert_eq!(ev.report.ego_distance_histogram.len(), 2);
        assert_eq!(ev.report.ego_distance_histogram[1].counts.ids, 1);
    }

    #[test]
    fn coasting_keys_take_leftover_ground_truth() {
        let s = moving_scenario(10);
        let mut set = set_at(1, ObjectKey::Detection(0), bx(1.0, 0.0), 0.0);
        let other = set_at(
            1,
            ObjectKey::Track {
                hypothesis: crate::tracker::HypothesisId { step: 1, rank: 1 },
                track: 3,
            },
            bx(1.0, 0.0),
            0.0,
        );
        set.samples.extend(other.samples);
        set.anchors.extend(other.anchors);
        let ev = evaluate(&[set], &s, &[], &[], &cfg());
        assert_eq!(ev.instances.len(), 1);
        assert_eq!(ev.instances[0].object_key, ObjectKey::Detection(0));
        assert_eq!(ev.report.spurious_predictions, 1);
    }

    #[test]
    fn shared_counts_use_intersection() {
        let e = |kind, frame, gt| ErrorEvent {
            kind,
            frame,
            gt_id: gt,
            track_ids: vec![],
            ego_distance: 0.0,
        };
        let h0 = vec![
            e(ErrorKind::Ids, 5, Some(0)),
            e(ErrorKind::Spurious, 2, None),
            e(ErrorKind::Spurious, 2, None),
        ];
        let h1 = vec![e(ErrorKind::Spurious, 2, None), e(ErrorKind::FragUnder, 3, Some(1))];
        let s = shared_errors(&[h0.clone(), h1]);
        assert_eq!(s.baseline.ids, 1);
        assert_eq!(
            s.shared,
            ErrorCounts {
                spurious: 1,
                ..ErrorCounts::default()
            }
        );
        let alone = shared_errors(std::slice::from_ref(&h0));
        assert_eq!(alone.shared, alone.baseline);
    }

    #[test]
    fn csv_layout() {
        let s = moving_scenario(8);
        let ev = evaluate(&[set_at(0, ObjectKey::Gt(0), bx(0.0, 0.0), 0.0)], &s, &[], &[], &cfg());
        let csv = tables_csv(&[("stp", &ev.report)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,subset,objects,min_ade,min_fde");
        assert_eq!(lines[1], "stp,all,1,0.000000,0.000000");
        assert_eq!(lines[2], "stp,ids,0,,");
    }
}
