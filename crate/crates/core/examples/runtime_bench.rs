//! Per-frame tracking and prediction time as H grows.

use mtp::pipeline::bench;
use mtp::scenario::{synth_lanes, LaneParams};
use mtp::tracker::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = synth_lanes(
        &LaneParams {
            agents: 20,
            frames: 100,
            lane_spacing: 2.5,
            sigma: 0.3,
            ..LaneParams::default()
        },
        0,
    )?;
    let report = bench(&scenario, &PipelineConfig::nuscenes(), &[1, 5, 10, 20], 3)?;
    println!("{} threads, {} frames", report.threads, report.frames);
    println!("   H  tracking ms  prediction ms  pooling ms");
    for r in &report.rows {
        println!(
            "{:>4}  {:>11.3}  {:>13.3}  {:>10.3}",
            r.hypotheses, r.tracking_ms_median, r.prediction_ms_median, r.pooling_ms_median
        );
    }
    Ok(())
}
