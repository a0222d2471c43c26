//! Compares STP and MTP on a crossing suite: targeted metrics on the
//! instances where the single-hypothesis tracker made IDS/FRAG errors.

use mtp::evaluation::{
    classify_errors, evaluate, pair_sequence, ErrorCounts, ErrorEvent, EvalConfig, InstanceResult, SubsetMetrics,
};
use mtp::pipeline::{run, RunMode, RunOutput};
use mtp::scenario::{synth_crossing, CrossingParams, Scenario};
use mtp::tracker::PipelineConfig;

fn events(out: &RunOutput, scenario: &Scenario, cfg: &PipelineConfig) -> Vec<ErrorEvent> {
    let log = out.tracking_log();
    let pairings = pair_sequence(scenario, &log.final_hypotheses[0].reported_boxes(), cfg.gate());
    classify_errors(&pairings, cfg.gate())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = CrossingParams {
        frames: 40,
        half_angle_deg: 5.0,
        sigma: 0.3,
        ..CrossingParams::default()
    };
    let base = PipelineConfig {
        past_len: 10,
        horizon: 10,
        ..PipelineConfig::nuscenes()
    };
    let eval_cfg = EvalConfig {
        gate: base.gate(),
        past_len: base.past_len,
        horizon: base.horizon,
    };

    let mut stp_instances: Vec<InstanceResult> = Vec::new();
    let mut mtp_instances: Vec<InstanceResult> = Vec::new();
    let mut stp_errors = ErrorCounts::default();
    for seed in 0..10 {
        let scenario = synth_crossing(&params, seed)?;
        let stp = run(&scenario, &base, RunMode::Stp)?;
        let mtp_cfg = base.clone().with_hypotheses(20);
        let mtp = run(&scenario, &mtp_cfg, RunMode::Mtp)?;

        let targets = events(&stp, &scenario, &base);
        let s = evaluate(&stp.outputs(), &scenario, &targets, &targets, &eval_cfg);
        let m = evaluate(
            &mtp.outputs(),
            &scenario,
            &events(&mtp, &scenario, &mtp_cfg),
            &targets,
            &eval_cfg,
        );
        for e in &targets {
            stp_errors.add(e.kind, 1);
        }
        stp_instances.extend(s.instances);
        mtp_instances.extend(m.instances);
    }
    println!("stp errors over the suite: {stp_errors:?}");
    for (name, instances) in [("stp", &stp_instances), ("mtp-h20", &mtp_instances)] {
        let all = SubsetMetrics::from_instances(instances.iter());
        let ids = SubsetMetrics::from_instances(instances.iter().filter(|i| i.ids));
        println!(
            "{name:>8}: all {} objects minADE {:.3}; IDS subset {} objects minADE {:.3}",
            all.objects,
            all.min_ade.unwrap_or(f64::NAN),
            ids.objects,
            ids.min_ade.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
