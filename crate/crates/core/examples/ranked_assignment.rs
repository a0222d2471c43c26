//! Optimal and H-best assignments of a small cost matrix.

use mtp::assignment::{hungarian, murty_h_best, CostMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Rows are tracks, columns detections; NaN-free, with one forbidden pair.
    let mut m = CostMatrix::from_rows(&[[0.3, 1.2, 0.9], [0.4, 0.5, 2.0], [1.1, 0.6, 0.2]])?;
    m.forbid(1, 2);

    let best = hungarian(&m);
    println!("optimal {:?} cost {:.2}", best.matches, best.total_cost);

    for (rank, a) in murty_h_best(&m, 5).iter().enumerate() {
        println!("#{rank}: {:?} cost {:.2}", a.matches, a.total_cost);
    }
    Ok(())
}
