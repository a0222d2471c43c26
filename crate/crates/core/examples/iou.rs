//! Rotated 3D IoU and the two gating modes.

use mtp::geometry::{center_distance_2d, iou3d, Box3D, Gate, MatchingMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let car = Box3D::new([0.0, 0.0, 0.0], [4.0, 2.0, 1.5], 0.0)?;
    for yaw_deg in [0.0, 15.0, 45.0, 90.0] {
        let other = Box3D::new([0.5, 0.2, 0.0], [4.0, 2.0, 1.5], f64::to_radians(yaw_deg))?;
        println!(
            "yaw {yaw_deg:>4}: iou3d {:.4}  center dist {:.3} m",
            iou3d(&car, &other),
            center_distance_2d(&car, &other)
        );
    }

    let shifted = Box3D::new([1.5, 0.0, 0.0], [4.0, 2.0, 1.5], 0.0)?;
    for gate in [
        Gate::new(MatchingMode::Iou3d, 0.5),
        Gate::new(MatchingMode::Center2d, 2.0),
    ] {
        println!("{:?}: cost {:?}", gate, gate.cost(&car, &shifted));
    }
    Ok(())
}
