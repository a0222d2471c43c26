use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run, FrameTiming, PipelineError, RunMode};
use crate::scenario::Scenario;
use crate::tracker::PipelineConfig;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("no hypothesis counts given")]
    NoHypotheses,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub hypotheses: usize,
    pub tracking_ms_mean: f64,
    pub tracking_ms_median: f64,
    pub prediction_ms_mean: f64,
    pub prediction_ms_median: f64,
    pub pooling_ms_mean: f64,
    pub pooling_ms_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub frames: u32,
    pub repeats: usize,
    pub threads: usize,
    pub rows: Vec<BenchRow>,
}

fn mean_median(mut xs: Vec<f64>) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let mid = xs.len() / 2;
    let median = if xs.len().is_multiple_of(2) {
        (xs[mid - 1] + xs[mid]) / 2.0
    } else {
        xs[mid]
    };
    (mean, median)
}

/// Times the multi-hypothesis pipeline for each `H`. One untimed warm-up
/// run precedes the `repeats` timed runs; statistics are over all timed
/// frames.
pub fn bench(
    scenario: &Scenario,
    base: &PipelineConfig,
    hypotheses: &[usize],
    repeats: usize,
) -> Result<BenchReport, BenchError> {
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }
    if hypotheses.is_empty() {
        return Err(BenchError::NoHypotheses);
    }
    let mut rows = Vec::with_capacity(hypotheses.len());
    for &h in hypotheses {
        let cfg = base.clone().with_hypotheses(h);
        run(scenario, &cfg, RunMode::Mtp)?;
        let mut frames: Vec<FrameTiming> = Vec::new();
        for _ in 0..repeats {
            frames.extend(run(scenario, &cfg, RunMode::Mtp)?.timing);
        }
        let (tracking_ms_mean, tracking_ms_median) = mean_median(frames.iter().map(|t| t.tracking_ms).collect());
        let (prediction_ms_mean, prediction_ms_median) = mean_median(frames.iter().map(|t| t.prediction_ms).collect());
        let (pooling_ms_mean, pooling_ms_median) = mean_median(frames.iter().map(|t| t.pooling_ms).collect());
        rows.push(BenchRow {
            hypotheses: h,
            tracking_ms_mean,
            tracking_ms_median,
            prediction_ms_mean,
            prediction_ms_median,
            pooling_ms_mean,
            pooling_ms_median,
        });
    }
    Ok(BenchReport {
        scenario: scenario.meta.name.clone(),
        frames: scenario.frames,
        repeats,
        threads: rayon::current_num_threads(),
        rows,
    })
}
