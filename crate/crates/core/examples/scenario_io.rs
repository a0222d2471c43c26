//! Writes a scenario to JSONL, reads it back and shows the content hash
//! that run manifests record.

use mtp::pipeline::content_hash;
use mtp::scenario::{load_scenario, save_scenario, synth_clutter, ClutterParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = synth_clutter(
        &ClutterParams {
            rate: 2.0,
            ..ClutterParams::default()
        },
        11,
    )?;
    let dir = std::env::temp_dir().join("mtp-scenario-io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("clutter.jsonl");
    save_scenario(&scenario, &path)?;

    let back = load_scenario(&path)?;
    assert_eq!(back, scenario);
    let detections: usize = back.detections.iter().map(Vec::len).sum();
    println!(
        "{}: {} frames, {} ground-truth objects, {} detections",
        path.display(),
        back.frames,
        back.gt.len(),
        detections
    );
    println!("content hash {}", content_hash(&std::fs::read(&path)?));
    Ok(())
}
