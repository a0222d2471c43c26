use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kalman::TrackState;
use crate::util::mix64;

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// Filter state of one tracklet at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub state: TrackState,
    /// Detection the tracklet was updated with, `None` on a miss.
    pub detection_id: Option<u32>,
    pub status: TrackStatus,
}

impl TrackRecord {
    /// Whether the tracker reports this tracklet at this frame.
    pub fn is_reported(&self) -> bool {
        self.detection_id.is_some() && self.status == TrackStatus::Confirmed
    }
}

struct Node<T> {
    item: T,
    prev: Option<Arc<Node<T>>>,
}

/// Append-only history shared structurally between hypotheses: cloning is
/// O(1) and children only allocate their own newest entries.
pub struct History<T> {
    head: Option<Arc<Node<T>>>,
    len: usize,
}

impl<T> Clone for History<T> {
    fn clone(&self) -> Self {
        Self {
            head: self.head.clone(),
            len: self.len,
        }
    }
}

impl<T> Default for History<T> {
    fn default() -> Self {
        Self { head: None, len: 0 }
    }
}

impl<T> History<T> {
    pub fn push(&mut self, item: T) {
        let prev = self.head.take();
        self.head = Some(Arc::new(Node { item, prev }));
        self.len += 1;
    }

    pub fn last(&self) -> Option<&T> {
        self.head.as_deref().map(|n| &n.item)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Newest first.
    pub fn iter_rev(&self) -> impl Iterator<Item = &T> {
        let mut cur = self.head.as_deref();
        std::iter::from_fn(move || {
            let node = cur?;
            cur = node.prev.as_deref();
            Some(&node.item)
        })
    }

    /// Oldest first.
    pub fn to_vec(&self) -> Vec<&T> {
        let mut v: Vec<&T> = self.iter_rev().collect();
        v.reverse();
        v
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        match (&self.head, &other.head) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        }
    }
}

impl<T> Drop for History<T> {
    fn drop(&mut self) {
        // unlink iteratively; long chains would otherwise recurse per node
        let mut cur = self.head.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut n) => cur = n.prev.take(),
                Err(_) => break,
            }
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for History<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.to_vec()).finish()
    }
}

/// A tracked object: identity, lifecycle counters and per-frame states from
/// birth to the current (or death) frame.
#[derive(Debug, Clone)]
pub struct Tracklet {
    pub track_id: TrackId,
    pub birth_frame: u32,
    pub last_detection_id: Option<u32>,
    pub hits: u32,
    /// Consecutive hits up to the latest frame.
    pub hit_streak: u32,
    pub misses: u32,
    pub status: TrackStatus,
    /// Hash of the birth and every association since; equal lineages mean
    /// equal state histories.
    pub lineage: u64,
    history: History<TrackRecord>,
}

impl Tracklet {
    pub(crate) fn born(track_id: TrackId, frame: u32, detection_id: u32, state: TrackState, min_hits: u32) -> Self {
        let status = if min_hits <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        let mut history = History::default();
        history.push(TrackRecord {
            frame,
            state,
            detection_id: Some(detection_id),
            status,
        });
        Self {
            track_id,
            birth_frame: frame,
            last_detection_id: Some(detection_id),
            hits: 1,
            hit_streak: 1,
            misses: 0,
            status,
            lineage: mix64(track_id ^ mix64(u64::from(frame) << 32 | u64::from(detection_id))),
            history,
        }
    }

    pub(crate) fn matched(&mut self, frame: u32, detection_id: u32, state: TrackState, min_hits: u32) {
        debug_assert!(self.is_live());
        self.hits += 1;
        self.hit_streak += 1;
        self.misses = 0;
        self.last_detection_id = Some(detection_id);
        if self.status == TrackStatus::Tentative && self.hit_streak >= min_hits {
            self.status = TrackStatus::Confirmed;
        }
        self.lineage = mix64(self.lineage ^ (u64::from(detection_id) + 1));
        self.history.push(TrackRecord {
            frame,
            state,
            detection_id: Some(detection_id),
            status: self.status,
        });
    }

    pub(crate) fn missed(&mut self, frame: u32, state: TrackState, max_age: u32) {
        debug_assert!(self.is_live());
        self.misses += 1;
        self.hit_streak = 0;
        if self.misses > max_age {
            self.status = TrackStatus::Dead;
        }
        self.lineage = mix64(self.lineage);
        self.history.push(TrackRecord {
            frame,
            state,
            detection_id: None,
            status: self.status,
        });
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Dead
    }

    pub fn state(&self) -> &TrackState {
        &self.latest().state
    }

    pub fn latest(&self) -> &TrackRecord {
        self.history.last().expect("tracklets are born with one record")
    }

    pub fn last_frame(&self) -> u32 {
        self.latest().frame
    }

    /// All records, oldest first.
    pub fn records(&self) -> Vec<&TrackRecord> {
        self.history.to_vec()
    }

    /// Up to `n` most recent ground-plane positions, oldest first.
    pub fn recent_positions(&self, n: usize) -> Vec<[f64; 2]> {
        let mut v: Vec<[f64; 2]> = self.history.iter_rev().take(n).map(|r| r.state.position()).collect();
        v.reverse();
        v
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use crate::tracker::kalman::{KalmanFilter, MotionNoise};

    fn state(x: f64) -> TrackState {
        KalmanFilter::new(&MotionNoise::default()).initiate(&Box3D::new([x, 0.0, 0.0], [1.0; 3], 0.0).unwrap())
    }

    #[test]
    fn history_shares_prefix() {
        let mut a: History<u32> = History::default();
        a.push(1);
        a.push(2);
        let mut b = a.clone();
        b.push(3);
        assert_eq!(a.to_vec(), vec![&1, &2]);
        assert_eq!(b.to_vec(), vec![&1, &2, &3]);
        assert_eq!(b.iter_rev().copied().collect::<Vec<_>>(), vec![3, 2, 1]);
        assert!(!a.ptr_eq(&b));
    }

    #[test]
    fn long_history_drops_without_overflow() {
        let mut h: History<u64> = History::default();
        for i in 0..200_000 {
            h.push(i);
        }
        drop(h);
    }

    #[test]
    fn lifecycle_transitions() {
        let mut t = Tracklet::born(1, 0, 0, state(0.0), 3);
        assert_eq!(t.status, TrackStatus::Tentative);
        t.matched(1, 0, state(1.0), 3);
        assert_eq!(t.status, TrackStatus::Tentative);
        t.matched(2, 0, state(2.0), 3);
        assert_eq!(t.status, TrackStatus::Confirmed);
        t.missed(3, state(3.0), 2);
        t.missed(4, state(4.0), 2);
        assert!(t.is_live());
        assert_eq!(t.misses, 2);
        t.missed(5, state(5.0), 2);
        assert_eq!(t.status, TrackStatus::Dead);
        assert_eq!(t.history_len(), 6);
        assert_eq!(t.recent_positions(2), vec![[4.0, 0.0], [5.0, 0.0]]);
    }

    #[test]
    fn match_resets_misses() {
        let mut t = Tracklet::born(1, 0, 0, state(0.0), 1);
        t.missed(1, state(0.0), 2);
        t.matched(2, 4, state(0.0), 1);
        assert_eq!(t.misses, 0);
        assert_eq!(t.last_detection_id, Some(4));
    }

    #[test]
    fn lineage_tracks_associations() {
        let base = Tracklet::born(1, 0, 0, state(0.0), 3);
        let mut a = base.clone();
        let mut b = base.clone();
        a.matched(1, 0, state(1.0), 3);
        b.matched(1, 1, state(1.0), 3);
        assert_ne!(a.lineage, b.lineage);
        let mut c = base;
        c.matched(1, 0, state(1.0), 3);
        assert_eq!(a.lineage, c.lineage);
    }
}
