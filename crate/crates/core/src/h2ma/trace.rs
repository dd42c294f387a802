use crate::moo::Candidate;

/// Quality of the reported front after a given number of evaluations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub evaluations: u64,
    pub hypervolume: f64,
    /// `None` when some front member has no `g` value.
    pub p_distance: Option<f64>,
    /// Size of the reported front.
    pub points: usize,
}

/// Snapshots of one run, strictly increasing in evaluations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    snapshots: Vec<Snapshot>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a snapshot. A snapshot at the same evaluation count as the last
    /// one replaces it.
    ///
    /// # Panics
    ///
    /// Panics if `s` is older than the last snapshot.
    pub fn record(&mut self, s: Snapshot) {
        match self.snapshots.last_mut() {
            Some(last) if last.evaluations == s.evaluations => *last = s,
            Some(last) => {
                assert!(last.evaluations < s.evaluations, "snapshots out of order");
                self.snapshots.push(s);
            }
            None => self.snapshots.push(s),
        }
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Latest snapshot taken at or before `evaluations`.
    pub fn at(&self, evaluations: u64) -> Option<&Snapshot> {
        let k = self.snapshots.partition_point(|s| s.evaluations <= evaluations);
        k.checked_sub(1).map(|i| &self.snapshots[i])
    }

    /// First evaluation count at which the hypervolume reached `level`.
    pub fn first_reaching(&self, level: f64) -> Option<u64> {
        self.snapshots
            .iter()
            .find(|s| s.hypervolume >= level)
            .map(|s| s.evaluations)
    }

    /// Adds a carry-forward snapshot at every multiple of `interval` up to
    /// `limit` that is not already present. Boundaries before the first
    /// snapshot are skipped.
    pub fn fill_boundaries(&mut self, interval: u64, limit: u64) {
        assert!(interval > 0, "trace interval must be positive");
        let mut merged = Vec::with_capacity(self.snapshots.len() + (limit / interval) as usize);
        let mut boundary = interval;
        for s in &self.snapshots {
            while boundary < s.evaluations && boundary <= limit {
                if let Some(prev) = merged.last().copied() {
                    merged.push(Snapshot {
                        evaluations: boundary,
                        ..prev
                    });
                }
                boundary += interval;
            }
            if boundary == s.evaluations {
                boundary += interval;
            }
            merged.push(*s);
        }
        while boundary <= limit {
            if let Some(prev) = merged.last().copied() {
                merged.push(Snapshot {
                    evaluations: boundary,
                    ..prev
                });
            }
            boundary += interval;
        }
        self.snapshots = merged;
    }
}

/// Mean of `max(g − 1, 0)` over `front`, or `None` if the front is empty or
/// some member lacks `g`.
pub fn front_distance(front: &[&Candidate]) -> Option<f64> {
    if front.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for c in front {
        total += (c.g? - 1.0).max(0.0);
    }
    Some(total / front.len() as f64)
}
