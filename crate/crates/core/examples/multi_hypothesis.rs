//! Keeps the H best association histories and pools their predictions.

use mtp::pipeline::{run, RunMode};
use mtp::scenario::{synth_crossing, CrossingParams};
use mtp::tracker::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = synth_crossing(
        &CrossingParams {
            frames: 40,
            half_angle_deg: 5.0,
            sigma: 0.3,
            ..CrossingParams::default()
        },
        3,
    )?;
    let cfg = PipelineConfig::nuscenes().with_hypotheses(10);
    let out = run(&scenario, &cfg, RunMode::Mtp)?;

    for trace in out.trace.iter().step_by(5) {
        let costs: Vec<String> = trace
            .hypotheses
            .iter()
            .map(|h| format!("{:.2}", h.cumulative_cost))
            .collect();
        println!(
            "frame {:>2}: {} hypotheses, costs [{}]",
            trace.frame,
            costs.len(),
            costs.join(", ")
        );
    }

    if let Some(p) = out.predictions.iter().find(|p| p.frame == 22) {
        for (key, samples) in &p.pooled.samples {
            println!("frame 22 {key}: {} pooled samples", samples.len());
        }
    }
    Ok(())
}
