use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::moo::{Candidate, ObjectiveVector};

/// `M` accepted candidates whose objective-space bounding box guides
/// deterministic exploration.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    members: Vec<Candidate>,
    mid: ObjectiveVector,
    volume: f64,
    sequence_id: u64,
}

impl Region {
    pub fn members(&self) -> &[Candidate] {
        &self.members
    }

    /// Objective-space mean of the members.
    pub fn mid(&self) -> &ObjectiveVector {
        &self.mid
    }

    /// Volume of the members' objective-space bounding box.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn sequence_id(&self) -> u64 {
        self.sequence_id
    }

    /// Decision-space mean of the members.
    pub fn decision_mean(&self) -> Vec<f64> {
        mean(self.members.iter().map(|c| c.x.as_slice()))
    }
}

fn mean<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut k = 0usize;
    for row in rows {
        if acc.is_empty() {
            acc = vec![0.0; row.len()];
        }
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        k += 1;
    }
    acc.iter_mut().for_each(|a| *a /= k as f64);
    acc
}

/// Builds a region, or `None` when the bounding box has no volume (or less
/// than `minimum_volume`).
///
/// # Panics
///
/// Panics if `members` is empty or its objective vectors differ in length.
pub fn create_region(members: Vec<Candidate>, minimum_volume: f64, sequence_id: u64) -> Option<Region> {
    assert!(!members.is_empty(), "a region needs members");
    let m = members[0].y.len();
    assert!(members.iter().all(|c| c.y.len() == m), "mixed objective counts");
    let mut volume = 1.0;
    for i in 0..m {
        let (lo, hi) = members
            .iter()
            .map(|c| c.y[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        volume *= hi - lo;
    }
    if !(volume > 0.0) || volume < minimum_volume {
        return None;
    }
    let mid = ObjectiveVector::new(mean(members.iter().map(|c| c.y.as_slice())))
        .expect("mean of finite objective vectors");
    Some(Region {
        members,
        mid,
        volume,
        sequence_id,
    })
}

/// Child regions after `new_point` was found from `parent`: every
/// `(M−1)`-subset of the parent's members joined with the new point, in
/// lexicographic subset order. Degenerate children are dropped.
pub fn create_regions(
    parent: &Region,
    new_point: &Candidate,
    minimum_volume: f64,
    next_sequence_id: &mut u64,
) -> Vec<Region> {
    let m = parent.members.len();
    let mut out = Vec::with_capacity(m);
    for drop in (0..m).rev() {
        let mut members: Vec<Candidate> = parent
            .members
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != drop)
            .map(|(_, c)| c.clone())
            .collect();
        members.push(new_point.clone());
        let id = *next_sequence_id;
        *next_sequence_id += 1;
        if let Some(r) = create_region(members, minimum_volume, id) {
            out.push(r);
        }
    }
    out
}

struct ByVolume(Region);

impl PartialEq for ByVolume {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ByVolume {}

impl PartialOrd for ByVolume {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByVolume {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .volume
            .total_cmp(&other.0.volume)
            .then(other.0.sequence_id.cmp(&self.0.sequence_id))
    }
}

/// Max-volume priority queue; on equal volume the older region wins.
#[derive(Default)]
pub struct RegionQueue {
    heap: BinaryHeap<ByVolume>,
}

impl RegionQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, region: Region) {
        self.heap.push(ByVolume(region));
    }

    pub fn pop(&mut self) -> Option<Region> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&Region> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

impl std::fmt::Debug for RegionQueue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegionQueue").field("len", &self.heap.len()).finish()
    }
}
