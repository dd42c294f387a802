//! Exact bi-objective hypervolume, exclusive contributions and their gradient
//! with respect to the moving point's objectives.
//!
//! Every routine here is restricted to two objectives. A point only counts
//! towards the hypervolume when it strictly dominates the reference (Nadir)
//! point `z`.
//!
//! The exclusive contribution of `y` against a fixed set `S` is
//!
//! ```text
//! C(y) = H(S ∪ {y}; z) − H(S; z) = ∫_{y1}^{z1} max(0, m(u) − y2) du,
//! m(u) = min { p2 : p ∈ S, p1 < u }   (z2 when empty)
//! ```
//!
//! so its partial derivatives are minus the lengths of the two edges of the
//! exclusive region that touch `y`: `∂C/∂y1 = −(left_cap − y2)` and
//! `∂C/∂y2 = −(right_cap − y1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::moo::{dominates, ObjectiveVector};

/// The two edges bounding the exclusive region of a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContributionGeometry {
    /// Second objective of the nearest staircase point to the left, or `z2`.
    pub left_cap: f64,
    /// First objective of the first staircase point to the right that is not
    /// dominated by the candidate, or `z1`.
    pub right_cap: f64,
}

fn check_pair(v: &ObjectiveVector) -> Result<()> {
    if v.len() != 2 {
        return Err(Error::UnsupportedDimension(v.len()));
    }
    Ok(())
}

/// Non-dominated staircase of a bi-objective point set, restricted to points
/// that strictly dominate the reference point. Sorted by increasing `f1`
/// (hence strictly decreasing `f2`).
#[derive(Clone, Debug, PartialEq)]
pub struct SortedFront {
    z: [f64; 2],
    points: Vec<[f64; 2]>,
}

impl SortedFront {
    pub fn new(z: &ObjectiveVector) -> Result<Self> {
        check_pair(z)?;
        Ok(Self {
            z: [z[0], z[1]],
            points: Vec::new(),
        })
    }

    pub fn from_points<'a, I>(points: I, z: &ObjectiveVector) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ObjectiveVector>,
    {
        let mut front = Self::new(z)?;
        let mut raw = Vec::new();
        for p in points {
            check_pair(p)?;
            if p[0] < front.z[0] && p[1] < front.z[1] {
                raw.push([p[0], p[1]]);
            }
        }
        raw.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut best = f64::INFINITY;
        for p in raw {
            if p[1] < best {
                best = p[1];
                front.points.push(p);
            }
        }
        Ok(front)
    }

    pub fn nadir(&self) -> [f64; 2] {
        self.z
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Adds a point, dropping anything it weakly dominates. Points that do not
    /// strictly dominate `z` or are weakly dominated themselves are ignored.
    pub fn insert(&mut self, y: &ObjectiveVector) -> Result<()> {
        check_pair(y)?;
        let p = [y[0], y[1]];
        if !(p[0] < self.z[0] && p[1] < self.z[1]) {
            return Ok(());
        }
        // first index with f1 > p1
        let right = self.points.partition_point(|q| q[0] <= p[0]);
        if right > 0 && self.points[right - 1][1] <= p[1] {
            return Ok(());
        }
        // points at or right of p with f2 >= p2 are weakly dominated by p;
        // include an equal-f1 point sitting just left of `right`
        let mut start = right;
        while start > 0 && self.points[start - 1][0] == p[0] {
            start -= 1;
        }
        let mut end = right;
        while end < self.points.len() && self.points[end][1] >= p[1] {
            end += 1;
        }
        self.points.splice(start..end, std::iter::once(p));
        Ok(())
    }

    /// Hypervolume of the staircase by a single sweep.
    pub fn hypervolume(&self) -> f64 {
        let [z1, z2] = self.z;
        let mut area = 0.0;
        let mut ceiling = z2;
        for &[p1, p2] in &self.points {
            area += (z1 - p1) * (ceiling - p2);
            ceiling = p2;
        }
        area
    }

    // min f2 over points with f1 <= y1, or z2
    fn left_level(&self, y1: f64) -> (usize, f64) {
        let right = self.points.partition_point(|q| q[0] <= y1);
        let level = if right > 0 {
            self.points[right - 1][1]
        } else {
            self.z[1]
        };
        (right, level)
    }

    /// Exclusive hypervolume `y` would add to the set.
    pub fn contribution(&self, y: &ObjectiveVector) -> f64 {
        self.contribution_at(y[0], y[1])
    }

    fn contribution_at(&self, y1: f64, y2: f64) -> f64 {
        let [z1, z2] = self.z;
        if !(y1 < z1 && y2 < z2) {
            return 0.0;
        }
        let (right, level) = self.left_level(y1);
        let mut height = level - y2;
        if height <= 0.0 {
            return 0.0;
        }
        let mut area = 0.0;
        let mut x_prev = y1;
        for &[p1, p2] in &self.points[right..] {
            area += (p1 - x_prev) * height;
            height = p2 - y2;
            if height <= 0.0 {
                return area;
            }
            x_prev = p1;
        }
        area + (z1 - x_prev) * height
    }

    /// Caps of the exclusive region of `y`; `None` when `y` adds nothing.
    pub fn geometry(&self, y: &ObjectiveVector) -> Option<ContributionGeometry> {
        let (y1, y2) = (y[0], y[1]);
        if self.contribution_at(y1, y2) <= 0.0 {
            return None;
        }
        let (right, left_cap) = self.left_level(y1);
        let right_cap = self.points[right..]
            .iter()
            .find(|p| p[1] <= y2)
            .map_or(self.z[0], |p| p[0]);
        Some(ContributionGeometry {
            left_cap,
            right_cap,
        })
    }

    /// Gradient of the exclusive contribution with respect to `y`.
    ///
    /// Fails with [`Error::UndefinedGradient`] when `y` adds nothing or shares
    /// a coordinate with a staircase point, where the contribution has a kink.
    pub fn gradient(&self, y: &ObjectiveVector) -> Result<[f64; 2]> {
        let geometry = self
            .geometry(y)
            .ok_or(Error::UndefinedGradient("point has no exclusive contribution"))?;
        if self.points.iter().any(|p| p[0] == y[0] || p[1] == y[1]) {
            return Err(Error::UndefinedGradient("coordinate tie with a neighbour"));
        }
        Ok([
            -(geometry.left_cap - y[1]),
            -(geometry.right_cap - y[0]),
        ])
    }

    /// One-sided difference of the contribution in objective space, stepping
    /// towards smaller objectives (the direction in which it never vanishes).
    pub fn gradient_one_sided(&self, y: &ObjectiveVector) -> [f64; 2] {
        let base = self.contribution_at(y[0], y[1]);
        let h1 = f64::EPSILON.sqrt() * y[0].abs().max(1.0);
        let h2 = f64::EPSILON.sqrt() * y[1].abs().max(1.0);
        [
            (base - self.contribution_at(y[0] - h1, y[1])) / h1,
            (base - self.contribution_at(y[0], y[1] - h2)) / h2,
        ]
    }
}

/// Hypervolume of `points` with respect to `z`, by sort-and-sweep.
///
/// Points that do not strictly dominate `z` add nothing, as do dominated
/// points.
///
/// ```
/// use h2ma::hypervolume::hypervolume;
/// use h2ma::ObjectiveVector;
///
/// let z = ObjectiveVector::pair(1.0, 1.0)?;
/// let pts = [
///     ObjectiveVector::pair(0.25, 0.75)?,
///     ObjectiveVector::pair(0.5, 0.5)?,
///     ObjectiveVector::pair(0.75, 0.25)?,
/// ];
/// assert!((hypervolume(&pts, &z)? - 0.375).abs() < 1e-12);
/// # Ok::<(), h2ma::Error>(())
/// ```
pub fn hypervolume<'a, I>(points: I, z: &ObjectiveVector) -> Result<f64>
where
    I: IntoIterator<Item = &'a ObjectiveVector>,
{
    Ok(SortedFront::from_points(points, z)?.hypervolume())
}

/// `H(others ∪ {y}) − H(others)`.
pub fn contribution<'a, I>(y: &ObjectiveVector, others: I, z: &ObjectiveVector) -> Result<f64>
where
    I: IntoIterator<Item = &'a ObjectiveVector>,
{
    check_pair(y)?;
    Ok(SortedFront::from_points(others, z)?.contribution(y))
}

pub fn contribution_geometry<'a, I>(
    y: &ObjectiveVector,
    others: I,
    z: &ObjectiveVector,
) -> Result<Option<ContributionGeometry>>
where
    I: IntoIterator<Item = &'a ObjectiveVector>,
{
    check_pair(y)?;
    Ok(SortedFront::from_points(others, z)?.geometry(y))
}

/// `(∂C/∂y1, ∂C/∂y2)` for a single movable point, all others fixed.
pub fn contribution_gradient<'a, I>(
    y: &ObjectiveVector,
    others: I,
    z: &ObjectiveVector,
) -> Result<[f64; 2]>
where
    I: IntoIterator<Item = &'a ObjectiveVector>,
{
    check_pair(y)?;
    SortedFront::from_points(others, z)?.gradient(y)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of the hypervolume integral, sampling the bounding
/// box spanned by the contributing points and `z`. Uses a brute-force
/// dominance test per sample, sharing no code with the sweep.
///
/// # Panics
///
/// Panics if `sample_count` is zero.
pub fn mc_hypervolume_oracle(
    points: &[ObjectiveVector],
    z: &ObjectiveVector,
    sample_count: usize,
    seed: u64,
) -> McEstimate {
    assert!(sample_count > 0, "sample_count must be positive");
    let inside: Vec<&ObjectiveVector> = points.iter().filter(|p| dominates(p, z)).collect();
    if inside.is_empty() {
        return McEstimate {
            value: 0.0,
            std_error: 0.0,
        };
    }
    let m = z.len();
    let lower: Vec<f64> = (0..m)
        .map(|i| inside.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let volume: f64 = (0..m).map(|i| z[i] - lower[i]).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..sample_count {
        for i in 0..m {
            sample[i] = rng.gen_range(lower[i]..z[i]);
        }
        if inside
            .iter()
            .any(|p| (0..m).all(|i| p[i] < sample[i]))
        {
            hits += 1;
        }
    }
    let frac = hits as f64 / sample_count as f64;
    McEstimate {
        value: volume * frac,
        std_error: volume * (frac * (1.0 - frac) / sample_count as f64).sqrt(),
    }
}
