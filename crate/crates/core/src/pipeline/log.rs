//! On-disk run layout: `manifest.json`, `tracklets.json` and
//! `predictions.jsonl` (one frame per line) inside a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{FramePredictions, FrameTiming, RunMode, RunOutput};
use crate::geometry::Box3D;
use crate::scenario::Scenario;
use crate::tracker::{Hypothesis, HypothesisId, PipelineConfig, TrackId, TrackStatus, Tracklet};

pub const LOG_SCHEMA_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const TRACKLETS: &str = "tracklets.json";
const PREDICTIONS: &str = "predictions.jsonl";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: unsupported log schema version {found}")]
    Version { path: PathBuf, found: u32 },
}

/// `sha256:` followed by the hex digest of `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    format!("sha256:{}", hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLog {
    pub frame: u32,
    pub detection_id: Option<u32>,
    pub status: TrackStatus,
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub velocity: [f64; 2],
}

impl RecordLog {
    pub fn is_reported(&self) -> bool {
        self.detection_id.is_some() && self.status == TrackStatus::Confirmed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLog {
    pub track_id: TrackId,
    pub birth_frame: u32,
    pub lineage: u64,
    pub records: Vec<RecordLog>,
}

impl From<&Tracklet> for TrackLog {
    fn from(t: &Tracklet) -> Self {
        Self {
            track_id: t.track_id,
            birth_frame: t.birth_frame,
            lineage: t.lineage,
            records: t
                .records()
                .into_iter()
                .map(|r| RecordLog {
                    frame: r.frame,
                    detection_id: r.detection_id,
                    status: r.status,
                    bbox: r.state.to_box(),
                    velocity: r.state.velocity(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLog {
    pub id: HypothesisId,
    pub parent: Option<HypothesisId>,
    pub cumulative_cost: f64,
    pub tracks: Vec<TrackLog>,
}

impl HypothesisLog {
    /// Boxes the tracker reports at each frame.
    pub fn reported_boxes(&self) -> BTreeMap<u32, Vec<(TrackId, Box3D)>> {
        let mut out: BTreeMap<u32, Vec<(TrackId, Box3D)>> = BTreeMap::new();
        for t in &self.tracks {
            for r in t.records.iter().filter(|r| r.is_reported()) {
                out.entry(r.frame).or_default().push((t.track_id, r.bbox));
            }
        }
        out
    }
}

impl From<&Hypothesis> for HypothesisLog {
    fn from(h: &Hypothesis) -> Self {
        Self {
            id: h.id,
            parent: h.parent,
            cumulative_cost: h.cumulative_cost,
            tracks: h.tracklets.iter().map(TrackLog::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub id: HypothesisId,
    pub parent: Option<HypothesisId>,
    pub cumulative_cost: f64,
    pub live_tracks: usize,
}

/// Hypotheses kept after one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub frame: u32,
    pub hypotheses: Vec<HypothesisSummary>,
}

impl FrameTrace {
    pub fn new(frame: u32, hyps: &[Hypothesis]) -> Self {
        Self {
            frame,
            hypotheses: hyps
                .iter()
                .map(|h| HypothesisSummary {
                    id: h.id,
                    parent: h.parent,
                    cumulative_cost: h.cumulative_cost,
                    live_tracks: h.live().count(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingLog {
    pub frames: Vec<FrameTrace>,
    /// Full per-frame tracklet histories of the surviving hypotheses.
    pub final_hypotheses: Vec<HypothesisLog>,
}

impl TrackingLog {
    pub fn new(out: &RunOutput) -> Self {
        Self {
            frames: out.trace.clone(),
            final_hypotheses: out.hypotheses.iter().map(HypothesisLog::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub path: String,
    pub name: String,
    pub seed: Option<u64>,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub frames: usize,
    pub tracking_ms_per_frame: f64,
    pub prediction_ms_per_frame: f64,
    pub pooling_ms_per_frame: f64,
}

impl TimingSummary {
    pub fn from_frames(timing: &[FrameTiming]) -> Self {
        let n = timing.len().max(1) as f64;
        Self {
            frames: timing.len(),
            tracking_ms_per_frame: timing.iter().map(|t| t.tracking_ms).sum::<f64>() / n,
            prediction_ms_per_frame: timing.iter().map(|t| t.prediction_ms).sum::<f64>() / n,
            pooling_ms_per_frame: timing.iter().map(|t| t.pooling_ms).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub tracklets: String,
    pub predictions: String,
}

/// Describes one run: what produced it, from which input, and how long it
/// took. Timing is the only part that changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub mode: RunMode,
    pub config: PipelineConfig,
    pub scenario: ScenarioRef,
    pub timing: TimingSummary,
    pub outputs: OutputPaths,
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub tracking: TrackingLog,
    pub predictions: Vec<FramePredictions>,
}

fn write(path: &Path, contents: &[u8]) -> Result<(), LogError> {
    fs::write(path, contents).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, LogError> {
    fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: DeserializeOwned>(path: &Path, line: usize, text: &str) -> Result<T, LogError> {
    serde_json::from_str(text).map_err(|source| LogError::Json {
        path: path.to_path_buf(),
        line: line + source.line().saturating_sub(1),
        source,
    })
}

/// Serializes the prediction log, one JSON object per frame.
pub fn predictions_jsonl(predictions: &[FramePredictions]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("predictions serialize"));
        out.push('\n');
    }
    out
}

/// Writes a run directory and returns its manifest.
pub fn save_run(
    dir: &Path,
    scenario: &Scenario,
    scenario_path: &str,
    scenario_bytes: &[u8],
    cfg: &PipelineConfig,
    out: &RunOutput,
) -> Result<RunManifest, LogError> {
    fs::create_dir_all(dir).map_err(|source| LogError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let tracking = serde_json::to_string(&out.tracking_log()).expect("tracking log serializes") + "\n";
    write(&dir.join(TRACKLETS), tracking.as_bytes())?;
    write(&dir.join(PREDICTIONS), predictions_jsonl(&out.predictions).as_bytes())?;
    let manifest = RunManifest {
        schema_version: LOG_SCHEMA_VERSION,
        mode: out.mode,
        config: cfg.clone(),
        scenario: ScenarioRef {
            path: scenario_path.to_string(),
            name: scenario.meta.name.clone(),
            seed: scenario.meta.seed,
            content_hash: content_hash(scenario_bytes),
        },
        timing: TimingSummary::from_frames(&out.timing),
        outputs: OutputPaths {
            tracklets: TRACKLETS.into(),
            predictions: PREDICTIONS.into(),
        },
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub fn load_run(dir: &Path) -> Result<RunFiles, LogError> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: RunManifest = parse(&manifest_path, 1, &read(&manifest_path)?)?;
    if manifest.schema_version != LOG_SCHEMA_VERSION {
        return Err(LogError::Version {
            path: manifest_path,
            found: manifest.schema_version,
        });
    }
    let tracking_path = dir.join(&manifest.outputs.tracklets);
    let tracking = parse(&tracking_path, 1, &read(&tracking_path)?)?;
    let predictions_path = dir.join(&manifest.outputs.predictions);
    let predictions = read(&predictions_path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(&predictions_path, i + 1, l))
        .collect::<Result<_, _>>()?;
    Ok(RunFiles {
        dir: dir.to_path_buf(),
        manifest,
        tracking,
        predictions,
    })
}
