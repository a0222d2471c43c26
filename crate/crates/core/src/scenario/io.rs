//! Line-delimited JSON scenario logs.
//!
//! Line 1 is a header record; every following line is either a ground-truth
//! box (`"type":"gt"`) or a detection (`"type":"det"`). Ground truth comes
//! first, grouped by trajectory; detections follow in frame order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Detection, GtTrajectory, Scenario, ScenarioMeta};
use crate::geometry::Box3D;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u32 },
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    #[serde(rename = "type")]
    kind: String,
    schema_version: u32,
    name: String,
    fps: f64,
    frames: u32,
    seed: Option<u64>,
    generator: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct GtRecord {
    #[serde(rename = "type")]
    kind: String,
    gt_id: u32,
    class: String,
    frame: u32,
    #[serde(rename = "box")]
    bbox: Box3D,
}

#[derive(Serialize, Deserialize)]
struct DetRecord {
    #[serde(rename = "type")]
    kind: String,
    frame: u32,
    detection_id: u32,
    class: String,
    score: f64,
    #[serde(rename = "box")]
    bbox: Box3D,
}

fn field_error(line: usize, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_record<T: serde::de::DeserializeOwned>(line_no: usize, text: &str) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let message = err.into_inner().to_string();
        if field == "." {
            ScenarioError::Malformed { line: line_no, message }
        } else {
            field_error(line_no, &field, message)
        }
    })
}

/// Serializes a scenario to its JSONL text form.
pub fn write_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    let header = HeaderRecord {
        kind: "header".into(),
        schema_version: SCHEMA_VERSION,
        name: scenario.meta.name.clone(),
        fps: scenario.fps,
        frames: scenario.frames,
        seed: scenario.meta.seed,
        generator: scenario.meta.generator.clone(),
    };
    push_line(&mut out, &header);
    for traj in &scenario.gt {
        for &(frame, bbox) in &traj.boxes {
            push_line(
                &mut out,
                &GtRecord {
                    kind: "gt".into(),
                    gt_id: traj.gt_id,
                    class: traj.class.clone(),
                    frame,
                    bbox,
                },
            );
        }
    }
    for det in scenario.detections.iter().flatten() {
        push_line(
            &mut out,
            &DetRecord {
                kind: "det".into(),
                frame: det.frame,
                detection_id: det.detection_id,
                class: det.class.clone(),
                score: det.score,
                bbox: det.bbox,
            },
        );
    }
    out
}

fn push_line<T: Serialize>(out: &mut String, record: &T) {
    out.push_str(&serde_json::to_string(record).expect("records serialize"));
    out.push('\n');
}

/// Parses JSONL text produced by [`write_scenario`] or by hand.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, first) = lines.next().ok_or(ScenarioError::Malformed {
        line: 1,
        message: "missing header record".into(),
    })?;
    let probe: serde_json::Value = serde_json::from_str(first).map_err(|e| ScenarioError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    if probe.get("type").and_then(|t| t.as_str()) != Some("header") {
        return Err(field_error(line_no, "type", "first record must be the header"));
    }
    if let Some(v) = probe.get("schema_version").and_then(|v| v.as_u64()) {
        if v != u64::from(SCHEMA_VERSION) {
            return Err(ScenarioError::UnsupportedVersion { found: v as u32 });
        }
    }
    let header: HeaderRecord = parse_record(line_no, first)?;
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(field_error(line_no, "fps", "must be positive"));
    }

    let mut scenario = Scenario {
        fps: header.fps,
        frames: header.frames,
        detections: vec![Vec::new(); header.frames as usize],
        gt: Vec::new(),
        meta: ScenarioMeta {
            name: header.name,
            seed: header.seed,
            generator: header.generator,
        },
    };

    for (line_no, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        match value.get("type").and_then(|t| t.as_str()) {
            Some("gt") => {
                let rec: GtRecord = parse_record(line_no, text)?;
                if rec.frame >= scenario.frames {
                    return Err(field_error(
                        line_no,
                        "frame",
                        format!("{} outside [0, {})", rec.frame, scenario.frames),
                    ));
                }
                let idx = match scenario.gt.iter().position(|g| g.gt_id == rec.gt_id) {
                    Some(i) => i,
                    None => {
                        scenario.gt.push(GtTrajectory {
                            gt_id: rec.gt_id,
                            class: rec.class.clone(),
                            boxes: Vec::new(),
                        });
                        scenario.gt.len() - 1
                    }
                };
                let traj = &mut scenario.gt[idx];
                if traj.boxes.last().is_some_and(|(f, _)| *f >= rec.frame) {
                    return Err(field_error(
                        line_no,
                        "frame",
                        "ground-truth frames must be strictly increasing",
                    ));
                }
                if traj.class != rec.class {
                    return Err(field_error(line_no, "class", "class changes within a trajectory"));
                }
                traj.boxes.push((rec.frame, rec.bbox));
            }
            Some("det") => {
                let rec: DetRecord = parse_record(line_no, text)?;
                if !(0.0..=1.0).contains(&rec.score) {
                    return Err(field_error(line_no, "score", format!("{} outside [0, 1]", rec.score)));
                }
                if rec.frame >= scenario.frames {
                    return Err(field_error(
                        line_no,
                        "frame",
                        format!("{} outside [0, {})", rec.frame, scenario.frames),
                    ));
                }
                let frame = &mut scenario.detections[rec.frame as usize];
                if frame.iter().any(|d| d.detection_id == rec.detection_id) {
                    return Err(field_error(line_no, "detection_id", "duplicate within frame"));
                }
                frame.push(Detection {
                    frame: rec.frame,
                    detection_id: rec.detection_id,
                    class: rec.class,
                    score: rec.score,
                    bbox: rec.bbox,
                });
            }
            Some(other) => return Err(field_error(line_no, "type", format!("unknown record type `{other}`"))),
            None => return Err(field_error(line_no, "type", "missing record type")),
        }
    }
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, write_scenario(scenario)).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}
