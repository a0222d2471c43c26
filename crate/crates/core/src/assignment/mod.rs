//! Gated linear assignment: the optimal matching and its ranked successors.
//!
//! All solvers work on maximum-cardinality matchings over the allowed cells
//! of a [`CostMatrix`]: as many pairs as the gating permits are matched, and
//! among those matchings the total cost is minimised.

mod matching;
mod murty;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::hungarian;
pub use murty::murty_h_best;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost at ({row}, {col}) is not finite: {value}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("ragged cost rows: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
}

/// Rectangular cost matrix with an explicit forbidden mask.
///
/// Rows are tracklets (or ground truth), columns detections (or tracks).
/// Lower cost is better. A forbidden cell can never be matched.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    allowed: Vec<bool>,
}

impl CostMatrix {
    /// A matrix with every cell forbidden.
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            costs: vec![0.0; rows * cols],
            allowed: vec![false; rows * cols],
        }
    }

    /// Dense matrix, every cell allowed.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AssignmentError> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::forbidden(rows.len(), n_cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(AssignmentError::Ragged {
                    row: r,
                    found: row.len(),
                    expected: n_cols,
                });
            }
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v)?;
            }
        }
        Ok(m)
    }

    /// Builds a matrix cell by cell; `None` marks a forbidden cell.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Result<Self, AssignmentError> {
        let mut m = Self::forbidden(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if let Some(v) = f(r, c) {
                    m.set(r, c, v)?;
                }
            }
        }
        Ok(m)
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) -> Result<(), AssignmentError> {
        if !cost.is_finite() {
            return Err(AssignmentError::NonFinite { row, col, value: cost });
        }
        let i = row * self.cols + col;
        self.costs[i] = cost;
        self.allowed[i] = true;
        Ok(())
    }

    pub fn forbid(&mut self, row: usize, col: usize) {
        self.allowed[row * self.cols + col] = false;
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    /// Cost of a cell, `None` when forbidden.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        self.allowed[i].then_some(self.costs[i])
    }

    pub fn is_allowed(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.cols + col]
    }

    fn cost_unchecked(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    /// Sum of matched costs, accumulated in row order.
    fn total_of(&self, matches: &[(usize, usize)]) -> f64 {
        matches.iter().map(|&(r, c)| self.cost_unchecked(r, c)).sum()
    }
}

/// A matching between rows and columns of a cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    /// Completes a set of pairs into an assignment over `matrix`.
    pub fn from_matches(matrix: &CostMatrix, mut matches: Vec<(usize, usize)>) -> Self {
        matches.sort_unstable();
        let mut row_used = vec![false; matrix.rows];
        let mut col_used = vec![false; matrix.cols];
        for &(r, c) in &matches {
            row_used[r] = true;
            col_used[c] = true;
        }
        let total_cost = matrix.total_of(&matches);
        Self {
            unmatched_rows: (0..matrix.rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..matrix.cols).filter(|&c| !col_used[c]).collect(),
            matches,
            total_cost,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.matches.len()
    }

    /// Column matched to `row`, if any.
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.matches
            .binary_search_by_key(&row, |&(r, _)| r)
            .ok()
            .map(|i| self.matches[i].1)
    }

    /// Ranking order: total cost, then lexicographic match set.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.total_cost
            .total_cmp(&other.total_cost)
            .then_with(|| self.matches.cmp(&other.matches))
    }
}
