use std::fmt;

use serde::{Deserialize, Serialize};

use super::tracklet::{TrackId, Tracklet};

/// `step` counts processed frames (0 for the root); `rank` is the position
/// in the cost-sorted list produced at that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HypothesisId {
    pub step: u32,
    pub rank: u32,
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}r{}", self.step, self.rank)
    }
}

/// One internally consistent set of tracklets and its accumulated
/// association cost.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub parent: Option<HypothesisId>,
    /// Sorted by track id; dead tracklets are kept for evaluation.
    pub tracklets: Vec<Tracklet>,
    pub cumulative_cost: f64,
    /// Last processed frame.
    pub frame: Option<u32>,
    /// `(track_id, detection_id)` pairs matched at the last frame, births
    /// included.
    pub last_matches: Vec<(TrackId, u32)>,
    pub(crate) next_track_id: TrackId,
}

impl Hypothesis {
    /// Empty hypothesis before the first frame.
    pub fn root() -> Self {
        Self {
            id: HypothesisId { step: 0, rank: 0 },
            parent: None,
            tracklets: Vec::new(),
            cumulative_cost: 0.0,
            frame: None,
            last_matches: Vec::new(),
            next_track_id: 1,
        }
    }

    pub fn live(&self) -> impl Iterator<Item = &Tracklet> {
        self.tracklets.iter().filter(|t| t.is_live())
    }

    pub fn tracklet(&self, id: TrackId) -> Option<&Tracklet> {
        self.tracklets
            .binary_search_by_key(&id, |t| t.track_id)
            .ok()
            .map(|i| &self.tracklets[i])
    }

    /// Detection matched by `track` at the last frame, if any.
    pub fn detection_of(&self, track: TrackId) -> Option<u32> {
        self.last_matches.iter().find(|(t, _)| *t == track).map(|(_, d)| *d)
    }
}
