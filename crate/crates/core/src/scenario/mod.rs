//! Detection and ground-truth logs, plus seeded synthetic scenarios.

mod io;
mod synth;

use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

pub use io::{load_scenario, parse_scenario, save_scenario, write_scenario, ScenarioError, SCHEMA_VERSION};
pub use synth::{
    synth_clutter, synth_crossing, synth_dropout, synth_lanes, ClutterParams, CrossingParams, DropWindow,
    DropoutParams, LaneParams, SynthError,
};

/// One detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    /// Unique within its frame.
    pub detection_id: u32,
    pub class: String,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: Box3D,
}

/// A ground-truth object over the frames where it exists.
#[derive(Debug, Clone, PartialEq)]
pub struct GtTrajectory {
    pub gt_id: u32,
    pub class: String,
    /// `(frame, box)` with strictly increasing frames.
    pub boxes: Vec<(u32, Box3D)>,
}

impl GtTrajectory {
    pub fn box_at(&self, frame: u32) -> Option<&Box3D> {
        self.boxes
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .map(|i| &self.boxes[i].1)
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.boxes.first().map(|(f, _)| *f)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: String,
    pub seed: Option<u64>,
    /// Generator name and parameters, when the scenario is synthetic.
    pub generator: Option<serde_json::Value>,
}

/// A sequence of per-frame detections with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub fps: f64,
    pub frames: u32,
    /// Indexed by frame; `detections.len() == frames`.
    pub detections: Vec<Vec<Detection>>,
    pub gt: Vec<GtTrajectory>,
    pub meta: ScenarioMeta,
}

impl Scenario {
    pub fn empty(fps: f64) -> Self {
        Self {
            fps,
            frames: 0,
            detections: Vec::new(),
            gt: Vec::new(),
            meta: ScenarioMeta::default(),
        }
    }

    /// Ground-truth boxes present at `frame`, in trajectory order.
    pub fn gt_at(&self, frame: u32) -> Vec<(u32, Box3D)> {
        self.gt
            .iter()
            .filter_map(|g| g.box_at(frame).map(|b| (g.gt_id, *b)))
            .collect()
    }

    pub fn total_detections(&self) -> usize {
        self.detections.iter().map(Vec::len).sum()
    }
}
