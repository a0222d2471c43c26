//! Murty's ranked assignment enumeration.
//!
//! The solution space is partitioned around each popped solution: the i-th
//! child keeps the solution's first i-1 free pairs fixed and forbids the
//! i-th. Every other maximum-cardinality matching lives in exactly one
//! child, so popping children by cost yields matchings in rank order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::matching::{hungarian, solve, Constraints};
use super::{Assignment, CostMatrix};

struct Node {
    solution: Assignment,
    constraints: Constraints,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.solution.rank_cmp(&self.solution)
    }
}

/// The `h` cheapest distinct maximum-cardinality matchings, sorted by total
/// cost and then by lexicographic match set. Element 0 equals
/// [`hungarian`]. Returns fewer than `h` when fewer matchings exist.
pub fn murty_h_best(matrix: &CostMatrix, h: usize) -> Vec<Assignment> {
    if h == 0 {
        return Vec::new();
    }
    let best = hungarian(matrix);
    if h == 1 {
        return vec![best];
    }
    let cardinality = best.cardinality();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        solution: best,
        constraints: Constraints::new(matrix),
    });
    let mut ranked: Vec<Assignment> = Vec::with_capacity(h);

    while let Some(node) = heap.pop() {
        if ranked.len() >= h {
            // keep draining only exact ties with the h-th cost so the
            // lexicographic tie order is complete
            let boundary = ranked[h - 1].total_cost;
            if node.solution.total_cost.total_cmp(&boundary) == Ordering::Greater {
                break;
            }
        }
        let Node { solution, constraints } = node;

        let mut fixed = constraints.fixed.clone();
        for &(r, c) in &solution.matches {
            if constraints.fixed.contains(&(r, c)) {
                continue;
            }
            let mut child = Constraints {
                fixed: fixed.clone(),
                excluded: constraints.excluded.clone(),
            };
            child.exclude(matrix, r, c);
            if let Some(child_solution) = solve(matrix, &child) {
                if child_solution.cardinality() == cardinality {
                    heap.push(Node {
                        solution: child_solution,
                        constraints: child,
                    });
                }
            }
            fixed.push((r, c));
        }
        ranked.push(solution);
        if ranked.len() >= h
            && heap.peek().is_none_or(|top| {
                top.solution.total_cost.total_cmp(&ranked[h - 1].total_cost) == Ordering::Greater
            })
        {
            break;
        }
    }

    ranked.sort_by(Assignment::rank_cmp);
    ranked.truncate(h);
    ranked
}
