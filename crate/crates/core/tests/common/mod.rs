//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use mtp::assignment::{Assignment, CostMatrix};
use mtp::evaluation::{match_frame, ErrorKind, FramePairing};
use mtp::geometry::{Box3D, Gate, MatchingMode};
use mtp::prediction::{TrajectorySample, Waypoint};
use mtp::scenario::{
    synth_clutter, synth_crossing, synth_dropout, synth_lanes, ClutterParams, CrossingParams, DropWindow,
    DropoutParams, LaneParams, Scenario,
};
use mtp::tracker::{PipelineConfig, TrackId};
use rand::Rng;

// ---------------------------------------------------------------------------
// Assignment

/// Random matrix; each entry is forbidden with probability `p_forbid`.
/// `integer` draws costs from {0..5} so exact ties are common.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, p_forbid: f64, integer: bool) -> CostMatrix {
    CostMatrix::from_fn(rows, cols, |_, _| {
        if rng.gen_bool(p_forbid) {
            None
        } else if integer {
            Some(rng.gen_range(0..5) as f64)
        } else {
            Some(rng.gen_range(0.0..10.0))
        }
    })
    .unwrap()
}

fn extend(
    m: &CostMatrix,
    row: usize,
    used: &mut Vec<bool>,
    cur: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if row == m.n_rows() {
        out.push(cur.clone());
        return;
    }
    extend(m, row + 1, used, cur, out);
    for c in 0..m.n_cols() {
        if !used[c] && m.is_allowed(row, c) {
            used[c] = true;
            cur.push((row, c));
            extend(m, row + 1, used, cur, out);
            cur.pop();
            used[c] = false;
        }
    }
}

/// Every maximum-cardinality matching, in ranking order (cost, then
/// lexicographic match list).
pub fn enumerate_ranked(m: &CostMatrix) -> Vec<Assignment> {
    let mut all = Vec::new();
    extend(m, 0, &mut vec![false; m.n_cols()], &mut Vec::new(), &mut all);
    let best = all.iter().map(Vec::len).max().unwrap_or(0);
    let mut ranked: Vec<Assignment> = all
        .into_iter()
        .filter(|s| s.len() == best)
        .map(|s| Assignment::from_matches(m, s))
        .collect();
    ranked.sort_by(|a, b| a.rank_cmp(b));
    ranked
}

// ---------------------------------------------------------------------------
// Geometry

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn inside(b: &Box3D, (s, c): (f64, f64), p: [f64; 3]) -> bool {
    let (dx, dy) = (p[0] - b.cx, p[1] - b.cy);
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= b.length / 2.0 && v.abs() <= b.width / 2.0 && (p[2] - b.cz).abs() <= b.height / 2.0
}

/// Quasi-Monte-Carlo IoU: `n` Halton points (bases 2, 3, 5) spread over
/// `a`, counted inside `b`.
pub fn qmc_iou(a: &Box3D, b: &Box3D, n: u64) -> f64 {
    let (s, c) = a.yaw.sin_cos();
    let rot_b = b.yaw.sin_cos();
    let mut hits = 0u64;
    for i in 1..=n {
        let u = (radical_inverse(i, 2) - 0.5) * a.length;
        let v = (radical_inverse(i, 3) - 0.5) * a.width;
        let w = (radical_inverse(i, 5) - 0.5) * a.height;
        let p = [a.cx + c * u - s * v, a.cy + s * u + c * v, a.cz + w];
        hits += inside(b, rot_b, p) as u64;
    }
    let va = a.length * a.width * a.height;
    let vb = b.length * b.width * b.height;
    let inter = va * hits as f64 / n as f64;
    inter / (va + vb - inter)
}

pub fn random_box(rng: &mut impl Rng, spread: f64) -> Box3D {
    Box3D::new(
        [
            rng.gen_range(-spread..spread),
            rng.gen_range(-spread..spread),
            rng.gen_range(-spread / 4.0..spread / 4.0),
        ],
        [
            rng.gen_range(1.0..5.0),
            rng.gen_range(0.5..2.5),
            rng.gen_range(0.5..2.0),
        ],
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Metrics

#[allow(clippy::needless_range_loop)]
pub fn naive_min_ade(samples: &[TrajectorySample], gt: &[Waypoint]) -> f64 {
    let mut best = f64::INFINITY;
    for s in samples {
        let mut sum = 0.0;
        for t in 0..gt.len() {
            let dx = s.waypoints[t][0] - gt[t][0];
            let dy = s.waypoints[t][1] - gt[t][1];
            sum += (dx * dx + dy * dy).sqrt();
        }
        best = best.min(sum / gt.len() as f64);
    }
    best
}

pub fn naive_min_fde(samples: &[TrajectorySample], gt: &[Waypoint]) -> f64 {
    let last = gt.len() - 1;
    let mut best = f64::INFINITY;
    for s in samples {
        let dx = s.waypoints[last][0] - gt[last][0];
        let dy = s.waypoints[last][1] - gt[last][1];
        best = best.min((dx * dx + dy * dy).sqrt());
    }
    best
}

// ---------------------------------------------------------------------------
// Classifier truth tables

pub type Expected = Vec<(ErrorKind, u32, Option<u32>, Vec<TrackId>)>;

pub struct ClassifierCase {
    pub name: &'static str,
    pub pairings: Vec<FramePairing>,
    pub expected: Expected,
}

pub fn center_gate() -> Gate {
    Gate::new(MatchingMode::Center2d, 2.0)
}

fn at(x: f64, y: f64) -> Box3D {
    Box3D::new([x, y, 0.0], [4.0, 2.0, 1.5], 0.0).unwrap()
}

/// Builds pairings from per-frame `(gt_id, x)` and `(track_id, x)` lists,
/// everything on the x axis at y = 10.
type FrameSpec<'a> = (&'a [(u32, f64)], &'a [(TrackId, f64)]);

fn frames(spec: &[FrameSpec]) -> Vec<FramePairing> {
    spec.iter()
        .enumerate()
        .map(|(f, (gt, tracks))| {
            let gt: Vec<(u32, Box3D)> = gt.iter().map(|&(g, x)| (g, at(x, 10.0))).collect();
            let tracks: Vec<(TrackId, Box3D)> = tracks.iter().map(|&(t, x)| (t, at(x, 10.0))).collect();
            match_frame(f as u32, &tracks, &gt, center_gate())
        })
        .collect()
}

/// Ten hand-built sequences under a 2 m center gate (4 m widened).
pub fn classifier_cases() -> Vec<ClassifierCase> {
    use ErrorKind::*;
    vec![
        ClassifierCase {
            name: "clean",
            pairings: frames(&[
                (&[(0, 0.0), (1, 10.0)], &[(1, 0.1), (2, 10.1)]),
                (&[(0, 1.0), (1, 11.0)], &[(1, 1.1), (2, 11.1)]),
                (&[(0, 2.0), (1, 12.0)], &[(1, 2.0), (2, 12.0)]),
            ]),
            expected: vec![],
        },
        ClassifierCase {
            name: "single_switch",
            pairings: frames(&[
                (&[(0, 0.0)], &[(1, 0.0)]),
                (&[(0, 1.0)], &[(2, 1.0)]),
                (&[(0, 2.0)], &[(2, 2.0)]),
            ]),
            expected: vec![(Ids, 1, Some(0), vec![1, 2])],
        },
        ClassifierCase {
            name: "under_tracked_gap",
            pairings: frames(&[
                (&[(0, 0.0)], &[(1, 0.0)]),
                (&[(0, 1.0)], &[]),
                (&[(0, 2.0)], &[(1, 2.0)]),
            ]),
            expected: vec![(FragUnder, 1, Some(0), vec![])],
        },
        ClassifierCase {
            name: "wrong_track_nearby",
            pairings: frames(&[
                (&[(0, 0.0)], &[(1, 0.0)]),
                (&[(0, 1.0)], &[(1, 4.0)]),
                (&[(0, 2.0)], &[(1, 2.5)]),
            ]),
            expected: vec![(FragWrong, 1, Some(0), vec![1]), (Spurious, 1, None, vec![1])],
        },
        ClassifierCase {
            name: "spurious_only",
            pairings: frames(&[(&[(0, 0.0)], &[(1, 0.0), (9, 50.0)]), (&[(0, 1.0)], &[(1, 1.0)])]),
            expected: vec![(Spurious, 0, None, vec![9])],
        },
        ClassifierCase {
            name: "never_matched_is_not_fragmented",
            pairings: frames(&[(&[(0, 0.0)], &[(4, 30.0)]), (&[(0, 1.0)], &[])]),
            expected: vec![(Spurious, 0, None, vec![4])],
        },
        ClassifierCase {
            name: "switch_after_gap",
            pairings: frames(&[
                (&[(0, 0.0)], &[(1, 0.0)]),
                (&[(0, 1.0)], &[]),
                (&[(0, 2.0)], &[(2, 2.0)]),
            ]),
            expected: vec![(FragUnder, 1, Some(0), vec![]), (Ids, 2, Some(0), vec![1, 2])],
        },
        ClassifierCase {
            name: "two_object_swap",
            pairings: frames(&[
                (&[(0, 0.0), (1, 10.0)], &[(1, 0.0), (2, 10.0)]),
                (&[(0, 1.0), (1, 11.0)], &[(2, 1.0), (1, 11.0)]),
            ]),
            expected: vec![(Ids, 1, Some(0), vec![1, 2]), (Ids, 1, Some(1), vec![2, 1])],
        },
        ClassifierCase {
            name: "switch_and_back",
            pairings: frames(&[
                (&[(0, 0.0)], &[(1, 0.0)]),
                (&[(0, 1.0)], &[(2, 1.0)]),
                (&[(0, 2.0)], &[(1, 2.0)]),
            ]),
            expected: vec![(Ids, 1, Some(0), vec![1, 2]), (Ids, 2, Some(0), vec![2, 1])],
        },
        ClassifierCase {
            name: "merged_track_covers_neighbour",
            pairings: frames(&[
                (&[(0, 0.0), (1, 3.0)], &[(1, 0.0), (2, 3.0)]),
                (&[(0, 1.0), (1, 4.0)], &[(1, 1.5)]),
                (&[(0, 2.0), (1, 5.0)], &[(1, 2.0), (3, 5.0), (7, 40.0)]),
            ]),
            expected: vec![
                (FragWrong, 1, Some(1), vec![1]),
                (Ids, 2, Some(1), vec![2, 3]),
                (Spurious, 2, None, vec![7]),
            ],
        },
    ]
}

// ---------------------------------------------------------------------------
// Crossing suite

pub const SUITE_SEEDS: u64 = 100;
pub const SUITE_HYPOTHESES: [usize; 4] = [1, 5, 10, 20];

/// Two agents crossing at 10 degrees, noisy detections.
pub fn crossing_params() -> CrossingParams {
    CrossingParams {
        frames: 40,
        fps: 10.0,
        speed: 1.0,
        half_angle_deg: 5.0,
        sigma: 0.3,
        cross_frame: Some(20),
    }
}

pub fn crossing_config() -> PipelineConfig {
    PipelineConfig {
        past_len: 10,
        horizon: 10,
        samples: 10,
        ..PipelineConfig::nuscenes()
    }
}

// ---------------------------------------------------------------------------
// Scenarios

/// Cycles through the four generators with small, noisy settings.
pub fn mixed_scenario(i: u64) -> Scenario {
    let lanes = LaneParams {
        agents: 3,
        frames: 30,
        sigma: 0.2,
        ..LaneParams::default()
    };
    match i % 4 {
        0 => synth_crossing(
            &CrossingParams {
                frames: 30,
                half_angle_deg: 10.0,
                sigma: 0.3,
                ..CrossingParams::default()
            },
            i,
        ),
        1 => synth_lanes(&lanes, i),
        2 => synth_dropout(
            &DropoutParams {
                lanes,
                windows: vec![DropWindow {
                    agent: 1,
                    start: 8,
                    end: 12,
                }],
                drop_prob: 0.1,
            },
            i,
        ),
        _ => synth_clutter(
            &ClutterParams {
                lanes,
                rate: 1.5,
                ..ClutterParams::default()
            },
            i,
        ),
    }
    .unwrap()
}

const HEADER: &str =
    r#"{"type":"header","schema_version":1,"name":"t","fps":10.0,"frames":3,"seed":null,"generator":null}"#;
const BOX: &str = r#"{"cx":0.0,"cy":0.0,"cz":0.0,"length":4.0,"width":2.0,"height":1.5,"yaw":0.0}"#;

fn det(frame: u32, id: u32, score: &str, bbox: &str) -> String {
    format!(r#"{{"type":"det","frame":{frame},"detection_id":{id},"class":"car","score":{score},"box":{bbox}}}"#)
}

fn gt(id: u32, frame: u32, class: &str) -> String {
    format!(r#"{{"type":"gt","gt_id":{id},"class":"{class}","frame":{frame},"box":{BOX}}}"#)
}

/// A valid three-frame log used as the base of the malformed variants.
pub fn valid_log() -> String {
    [
        HEADER.to_string(),
        gt(0, 0, "car"),
        gt(0, 1, "car"),
        det(0, 0, "0.9", BOX),
    ]
    .join("\n")
        + "\n"
}

/// Inputs the parser must reject, with a short label each.
pub fn malformed_inputs() -> Vec<(&'static str, String)> {
    let body = |lines: &[String]| {
        let mut all = vec![HEADER.to_string()];
        all.extend_from_slice(lines);
        all.join("\n") + "\n"
    };
    vec![
        ("empty file", String::new()),
        ("not json", "{type: header\n".to_string()),
        ("detection before header", det(0, 0, "0.9", BOX) + "\n" + HEADER + "\n"),
        (
            "future schema version",
            HEADER.replace("\"schema_version\":1", "\"schema_version\":9") + "\n",
        ),
        ("zero fps", HEADER.replace("10.0", "0.0") + "\n"),
        ("truncated record", body(&[r#"{"type":"det","frame":0,"#.to_string()])),
        (
            "missing box",
            body(&[r#"{"type":"det","frame":0,"detection_id":0,"class":"car","score":0.5}"#.to_string()]),
        ),
        (
            "negative length",
            body(&[det(0, 0, "0.9", &BOX.replace("4.0", "-4.0"))]),
        ),
        (
            "string coordinate",
            body(&[det(0, 0, "0.9", &BOX.replace("\"cx\":0.0", "\"cx\":\"0\""))]),
        ),
        ("score above one", body(&[det(0, 0, "1.5", BOX)])),
        ("frame out of range", body(&[det(3, 0, "0.9", BOX)])),
        (
            "duplicate detection id",
            body(&[det(1, 4, "0.9", BOX), det(1, 4, "0.8", BOX)]),
        ),
        ("gt frames not increasing", body(&[gt(0, 1, "car"), gt(0, 1, "car")])),
        ("gt class changes", body(&[gt(0, 0, "car"), gt(0, 1, "truck")])),
        (
            "unknown record type",
            body(&[r#"{"type":"radar","frame":0}"#.to_string()]),
        ),
        ("missing record type", body(&[r#"{"frame":0}"#.to_string()])),
    ]
}
