//! Seeded generators that provoke specific tracking failures: crossing
//! agents (identity switches), dropped detections (under-tracked fragments)
//! and persistent clutter (spurious tracks).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Detection, GtTrajectory, Scenario, ScenarioMeta};
use crate::geometry::{center_distance_2d, Box3D};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid generator parameter `{param}`: {reason}")]
pub struct SynthError {
    pub param: &'static str,
    pub reason: String,
}

fn invalid(param: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError {
        param,
        reason: reason.into(),
    }
}

const CAR_DIMS: [f64; 3] = [4.0, 1.8, 1.5];
// keeps clutter streams independent of the base scenario's noise
const CLUTTER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Two constant-velocity agents heading at `+half_angle_deg` and
/// `-half_angle_deg` from +x that pass through the origin at `cross_frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossingParams {
    pub frames: u32,
    pub fps: f64,
    /// Meters per frame.
    pub speed: f64,
    pub half_angle_deg: f64,
    /// Standard deviation of the detection center noise, meters.
    pub sigma: f64,
    /// Defaults to `frames / 2`.
    pub cross_frame: Option<u32>,
}

impl Default for CrossingParams {
    fn default() -> Self {
        Self {
            frames: 20,
            fps: 10.0,
            speed: 1.0,
            half_angle_deg: 45.0,
            sigma: 0.0,
            cross_frame: None,
        }
    }
}

/// Agents driving along parallel lanes in +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneParams {
    pub agents: u32,
    pub frames: u32,
    pub fps: f64,
    pub speed: f64,
    pub lane_spacing: f64,
    pub sigma: f64,
    pub start_x: f64,
}

impl Default for LaneParams {
    fn default() -> Self {
        Self {
            agents: 3,
            frames: 40,
            fps: 10.0,
            speed: 1.0,
            lane_spacing: 6.0,
            sigma: 0.0,
            start_x: -20.0,
        }
    }
}

/// Inclusive frame range during which one agent is not detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropWindow {
    pub agent: u32,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DropoutParams {
    pub lanes: LaneParams,
    pub windows: Vec<DropWindow>,
    /// Independent per-frame, per-agent miss probability.
    pub drop_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClutterParams {
    pub lanes: LaneParams,
    /// Mean number of new false detections per frame.
    pub rate: f64,
    /// Clutter spawns uniformly in `[-extent, extent]^2`.
    pub extent: f64,
    /// Consecutive frames a false detection re-appears near its spot.
    pub persistence: u32,
    /// Minimum center distance between clutter and any ground truth.
    pub min_separation: f64,
}

impl Default for ClutterParams {
    fn default() -> Self {
        Self {
            lanes: LaneParams::default(),
            rate: 0.0,
            extent: 30.0,
            persistence: 3,
            min_separation: 5.0,
        }
    }
}

fn check_common(frames: u32, fps: f64, speed: f64, sigma: f64) -> Result<(), SynthError> {
    if frames == 0 {
        return Err(invalid("frames", "must be at least 1"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(invalid("fps", "must be positive"));
    }
    if !(speed.is_finite() && speed >= 0.0) {
        return Err(invalid("speed", "must be non-negative"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid("sigma", "must be non-negative"));
    }
    Ok(())
}

fn car_box(x: f64, y: f64, yaw: f64) -> Box3D {
    Box3D::new([x, y, 0.0], CAR_DIMS, yaw).expect("car dimensions are valid")
}

/// Turns noise-free tracks into noisy detections, keeping only the frames
/// where `visible` says the agent was seen.
fn detections_from_gt(
    gt: &[GtTrajectory],
    frames: u32,
    sigma: f64,
    rng: &mut ChaCha8Rng,
    mut visible: impl FnMut(u32, u32, &mut ChaCha8Rng) -> bool,
) -> Vec<Vec<Detection>> {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut out = vec![Vec::new(); frames as usize];
    for frame in 0..frames {
        for traj in gt {
            let Some(b) = traj.box_at(frame) else {
                continue;
            };
            if !visible(traj.gt_id, frame, rng) {
                continue;
            }
            let (dx, dy) = if sigma > 0.0 {
                (noise.sample(rng), noise.sample(rng))
            } else {
                (0.0, 0.0)
            };
            let score = rng.gen_range(0.5..=1.0);
            let bbox = Box3D::new([b.cx + dx, b.cy + dy, b.cz], [b.length, b.width, b.height], b.yaw)
                .expect("perturbed box stays valid");
            let frame_dets = &mut out[frame as usize];
            frame_dets.push(Detection {
                frame,
                detection_id: frame_dets.len() as u32,
                class: traj.class.clone(),
                score,
                bbox,
            });
        }
    }
    out
}

fn meta(name: &str, seed: u64, generator: &str, params: &impl Serialize) -> ScenarioMeta {
    ScenarioMeta {
        name: name.to_string(),
        seed: Some(seed),
        generator: Some(serde_json::json!({
            "kind": generator,
            "params": serde_json::to_value(params).expect("params serialize"),
        })),
    }
}

/// Two agents whose straight paths intersect at the origin.
pub fn synth_crossing(params: &CrossingParams, seed: u64) -> Result<Scenario, SynthError> {
    check_common(params.frames, params.fps, params.speed, params.sigma)?;
    let half = params.half_angle_deg;
    if !(half.is_finite() && half > 0.0 && half < 90.0) {
        return Err(invalid(
            "half_angle_deg",
            "must lie strictly between 0 and 90 degrees, otherwise the paths are parallel",
        ));
    }
    if params.speed == 0.0 {
        return Err(invalid("speed", "stationary agents never cross"));
    }
    let cross = params.cross_frame.unwrap_or(params.frames / 2);
    if cross >= params.frames {
        return Err(invalid("cross_frame", "must lie inside the sequence"));
    }
    let theta = half.to_radians();
    let gt = [theta, -theta]
        .iter()
        .enumerate()
        .map(|(id, &heading)| {
            let (s, c) = heading.sin_cos();
            let boxes = (0..params.frames)
                .map(|f| {
                    let t = (f as f64 - cross as f64) * params.speed;
                    (f, car_box(t * c, t * s, heading))
                })
                .collect();
            GtTrajectory {
                gt_id: id as u32,
                class: "car".into(),
                boxes,
            }
        })
        .collect::<Vec<_>>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detections = detections_from_gt(&gt, params.frames, params.sigma, &mut rng, |_, _, _| true);
    Ok(Scenario {
        fps: params.fps,
        frames: params.frames,
        detections,
        gt,
        meta: meta(&format!("crossing-{seed}"), seed, "crossing", params),
    })
}

fn lane_gt(params: &LaneParams) -> Result<Vec<GtTrajectory>, SynthError> {
    check_common(params.frames, params.fps, params.speed, params.sigma)?;
    if params.agents == 0 {
        return Err(invalid("agents", "must be at least 1"));
    }
    if !(params.lane_spacing.is_finite() && params.lane_spacing > 0.0) {
        return Err(invalid("lane_spacing", "must be positive"));
    }
    let offset = (params.agents as f64 - 1.0) / 2.0;
    Ok((0..params.agents)
        .map(|i| {
            let y = (i as f64 - offset) * params.lane_spacing;
            GtTrajectory {
                gt_id: i,
                class: "car".into(),
                boxes: (0..params.frames)
                    .map(|f| (f, car_box(params.start_x + params.speed * f as f64, y, 0.0)))
                    .collect(),
            }
        })
        .collect())
}

/// Agents on parallel lanes, all detected every frame.
pub fn synth_lanes(params: &LaneParams, seed: u64) -> Result<Scenario, SynthError> {
    let gt = lane_gt(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detections = detections_from_gt(&gt, params.frames, params.sigma, &mut rng, |_, _, _| true);
    Ok(Scenario {
        fps: params.fps,
        frames: params.frames,
        detections,
        gt,
        meta: meta(&format!("lanes-{seed}"), seed, "lanes", params),
    })
}

/// Lane scenario with detections removed inside drop windows and, with
/// probability `drop_prob`, on any other frame.
pub fn synth_dropout(params: &DropoutParams, seed: u64) -> Result<Scenario, SynthError> {
    let gt = lane_gt(&params.lanes)?;
    if !(0.0..=1.0).contains(&params.drop_prob) {
        return Err(invalid("drop_prob", "must lie in [0, 1]"));
    }
    for w in &params.windows {
        if w.agent >= params.lanes.agents {
            return Err(invalid("windows", format!("agent {} does not exist", w.agent)));
        }
        if w.start > w.end || w.end >= params.lanes.frames {
            return Err(invalid(
                "windows",
                format!(
                    "window {}..={} outside frame range [0, {})",
                    w.start, w.end, params.lanes.frames
                ),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detections = detections_from_gt(
        &gt,
        params.lanes.frames,
        params.lanes.sigma,
        &mut rng,
        |agent, frame, rng| {
            let dropped = params
                .windows
                .iter()
                .any(|w| w.agent == agent && (w.start..=w.end).contains(&frame));
            let random_drop = params.drop_prob > 0.0 && rng.gen_bool(params.drop_prob);
            !(dropped || random_drop)
        },
    );
    Ok(Scenario {
        fps: params.lanes.fps,
        frames: params.lanes.frames,
        detections,
        gt,
        meta: meta(&format!("dropout-{seed}"), seed, "dropout", params),
    })
}

/// Lane scenario plus Poisson clutter that persists for a few frames and
/// never comes within `min_separation` of any ground truth.
pub fn synth_clutter(params: &ClutterParams, seed: u64) -> Result<Scenario, SynthError> {
    if !(params.rate.is_finite() && params.rate >= 0.0) {
        return Err(invalid("rate", "must be non-negative"));
    }
    if !(params.extent.is_finite() && params.extent > 0.0) {
        return Err(invalid("extent", "must be positive"));
    }
    if params.persistence == 0 {
        return Err(invalid("persistence", "must be at least 1"));
    }
    let base = synth_lanes(&params.lanes, seed)?;
    let mut scenario = Scenario {
        meta: meta(&format!("clutter-{seed}"), seed, "clutter", params),
        ..base
    };
    if params.rate == 0.0 {
        return Ok(scenario);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CLUTTER_STREAM);
    let poisson = Poisson::new(params.rate).expect("positive rate");
    let jitter = Normal::new(0.0, 0.1).expect("valid jitter");
    for frame in 0..scenario.frames {
        let spawned = poisson.sample(&mut rng) as u32;
        for _ in 0..spawned {
            let last = (frame + params.persistence).min(scenario.frames);
            // rejection-sample a spot clear of every ground truth for the
            // clutter's whole lifetime
            let spot = (0..50).find_map(|_| {
                let x = rng.gen_range(-params.extent..=params.extent);
                let y = rng.gen_range(-params.extent..=params.extent);
                let probe = car_box(x, y, 0.0);
                let clear = (frame..last).all(|f| {
                    scenario
                        .gt_at(f)
                        .iter()
                        .all(|(_, g)| center_distance_2d(g, &probe) >= params.min_separation + 0.5)
                });
                clear.then_some((x, y, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)))
            });
            let Some((x, y, yaw)) = spot else { continue };
            for f in frame..last {
                let frame_dets = &mut scenario.detections[f as usize];
                frame_dets.push(Detection {
                    frame: f,
                    detection_id: frame_dets.len() as u32,
                    class: "car".into(),
                    score: rng.gen_range(0.3..=0.7),
                    bbox: car_box(x + jitter.sample(&mut rng), y + jitter.sample(&mut rng), yaw),
                });
            }
        }
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_paths_meet_at_origin() {
        let s = synth_crossing(&CrossingParams::default(), 3).unwrap();
        assert_eq!(s.frames, 20);
        for g in &s.gt {
            let b = g.box_at(10).unwrap();
            assert!(b.cx.abs() < 1e-12 && b.cy.abs() < 1e-12);
        }
        let a = s.gt[0].box_at(9).unwrap();
        let b = s.gt[1].box_at(9).unwrap();
        assert!((a.cx - b.cx).abs() < 1e-12);
        assert!((a.cy + b.cy).abs() < 1e-12);
    }

    #[test]
    fn noise_free_detections_equal_gt() {
        let s = synth_crossing(&CrossingParams::default(), 0).unwrap();
        for f in 0..s.frames {
            for (det, (_, gt)) in s.detections[f as usize].iter().zip(s.gt_at(f)) {
                assert_eq!(det.bbox, gt);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let p = CrossingParams {
            sigma: 0.3,
            ..Default::default()
        };
        assert_eq!(synth_crossing(&p, 5).unwrap(), synth_crossing(&p, 5).unwrap());
        assert_ne!(synth_crossing(&p, 5).unwrap(), synth_crossing(&p, 6).unwrap());
        let c = ClutterParams {
            rate: 1.5,
            ..Default::default()
        };
        assert_eq!(synth_clutter(&c, 9).unwrap(), synth_clutter(&c, 9).unwrap());
    }

    #[test]
    fn parallel_crossing_rejected() {
        for angle in [0.0, 90.0, -10.0] {
            let p = CrossingParams {
                half_angle_deg: angle,
                ..Default::default()
            };
            assert_eq!(synth_crossing(&p, 0).unwrap_err().param, "half_angle_deg");
        }
    }

    #[test]
    fn drop_window_removes_detections() {
        let p = DropoutParams {
            windows: vec![DropWindow {
                agent: 1,
                start: 5,
                end: 7,
            }],
            ..Default::default()
        };
        let s = synth_dropout(&p, 0).unwrap();
        for f in 0..s.frames {
            let expected = if (5..=7).contains(&f) { 2 } else { 3 };
            assert_eq!(s.detections[f as usize].len(), expected, "frame {f}");
        }
    }

    #[test]
    fn drop_window_out_of_range_rejected() {
        let p = DropoutParams {
            windows: vec![DropWindow {
                agent: 0,
                start: 35,
                end: 45,
            }],
            ..Default::default()
        };
        assert_eq!(synth_dropout(&p, 0).unwrap_err().param, "windows");
    }

    #[test]
    fn zero_clutter_equals_base() {
        let c = ClutterParams::default();
        let s = synth_clutter(&c, 4).unwrap();
        let base = synth_lanes(&c.lanes, 4).unwrap();
        assert_eq!(s.detections, base.detections);
        assert_eq!(s.gt, base.gt);
    }

    #[test]
    fn negative_clutter_rate_rejected() {
        let c = ClutterParams {
            rate: -1.0,
            ..Default::default()
        };
        assert_eq!(synth_clutter(&c, 0).unwrap_err().param, "rate");
    }

    #[test]
    fn clutter_stays_clear_of_gt() {
        let c = ClutterParams {
            rate: 2.0,
            ..Default::default()
        };
        let s = synth_clutter(&c, 1).unwrap();
        assert!(s.total_detections() > 3 * 40);
        for f in 0..s.frames {
            let gt = s.gt_at(f);
            for det in &s.detections[f as usize][3..] {
                for (_, g) in &gt {
                    assert!(center_distance_2d(g, &det.bbox) > 4.0);
                }
            }
        }
    }
}
