//! Domain primitives shared by the rest of the crate: objective vectors,
//! strict Pareto dominance, evaluated candidates, the append-only archive and
//! evaluation accounting.

use std::fmt;
use std::ops::Index;

use rand::Rng;

use crate::error::{Error, Result};

/// A point in objective space. All objectives are minimized.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    /// Builds an objective vector, rejecting vectors with fewer than two
    /// entries or with any non-finite entry.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewObjectives(values.len()));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    /// Shorthand for the bi-objective case.
    pub fn pair(f1: f64, f2: f64) -> Result<Self> {
        Self::new(vec![f1, f2])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `true` iff `self` strictly dominates `other`.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        dominates(self, other)
    }
}

impl Index<usize> for ObjectiveVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Strict dominance: every coordinate of `a` is strictly smaller than the
/// corresponding coordinate of `b`. A tie in any coordinate means neither
/// vector dominates.
///
/// # Panics
///
/// Panics if the vectors have different lengths.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    assert_eq!(a.len(), b.len(), "objective vectors of different length");
    a.0.iter().zip(&b.0).all(|(x, y)| x < y)
}

/// A decision vector together with its cached objective vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub y: ObjectiveVector,
    /// Auxiliary distance-to-front function, when the problem exposes one
    /// (the ZDT `g`).
    pub g: Option<f64>,
}

/// How a candidate entered the archive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Single-objective minimizer used to seed the first region.
    Warmup,
    /// Found by region-based exploration and then exploited.
    Deterministic,
    /// Found by the evolutionary explorer and then exploited.
    Stochastic,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Deterministic => "deterministic",
            Phase::Stochastic => "stochastic",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub candidate: Candidate,
    pub phase: Phase,
}

/// Append-only record of accepted candidates, in acceptance order.
///
/// Warm-up candidates are kept so that exploration and exploitation see them,
/// but [`Archive::front`] reports only the greedily added candidates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    entries: Vec<ArchiveEntry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, candidate: Candidate, phase: Phase) {
        self.entries.push(ArchiveEntry { candidate, phase });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> + '_ {
        self.entries.iter().map(|e| &e.candidate)
    }

    /// Candidates added by exploitation, i.e. everything except warm-up seeds.
    pub fn greedy(&self) -> impl Iterator<Item = &Candidate> + '_ {
        self.entries
            .iter()
            .filter(|e| e.phase != Phase::Warmup)
            .map(|e| &e.candidate)
    }

    pub fn greedy_len(&self) -> usize {
        self.greedy().count()
    }

    pub fn count_phase(&self, phase: Phase) -> usize {
        self.entries.iter().filter(|e| e.phase == phase).count()
    }

    /// The reporting set: non-dominated greedy candidates in insertion order.
    pub fn front(&self) -> Vec<&Candidate> {
        nondominated_filter(self.greedy())
    }
}

/// `true` iff no member of `archive` strictly dominates `y`.
pub fn is_nondominated(y: &ObjectiveVector, archive: &Archive) -> bool {
    archive.candidates().all(|c| !dominates(&c.y, y))
}

/// Members not strictly dominated by any other member, in input order.
pub fn nondominated_filter<'a, I>(candidates: I) -> Vec<&'a Candidate>
where
    I: IntoIterator<Item = &'a Candidate>,
{
    let all: Vec<&Candidate> = candidates.into_iter().collect();
    if all.is_empty() {
        return all;
    }
    let keep = if all.iter().all(|c| c.y.len() == 2) {
        nondominated_mask_2d(&all)
    } else {
        all.iter()
            .map(|c| !all.iter().any(|o| dominates(&o.y, &c.y)))
            .collect()
    };
    all.into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

// Sort by f1 and sweep: a point is dominated iff some point with strictly
// smaller f1 also has strictly smaller f2.
fn nondominated_mask_2d(all: &[&Candidate]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[a].y[0].total_cmp(&all[b].y[0]));
    let mut keep = vec![true; all.len()];
    let mut best_f2_left = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let f1 = all[order[i]].y[0];
        let mut j = i;
        while j < order.len() && all[order[j]].y[0] == f1 {
            j += 1;
        }
        for &k in &order[i..j] {
            keep[k] = !(best_f2_left < all[k].y[1]);
        }
        for &k in &order[i..j] {
            best_f2_left = best_f2_left.min(all[k].y[1]);
        }
        i = j;
    }
    keep
}

/// Axis-aligned box of the decision space.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidConfig("bounds must be finite with lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.first_violation(x).is_none()
    }

    /// Index and value of the first coordinate outside the box.
    pub fn first_violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        x.iter()
            .enumerate()
            .find(|&(i, &v)| !(self.lower[i] <= v && v <= self.upper[i]))
            .map(|(i, &v)| (i, v))
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l < u { rng.gen_range(l..=u) } else { l })
            .collect()
    }
}

/// One objective evaluation as returned by a [`Problem`].
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub y: ObjectiveVector,
    pub g: Option<f64>,
}

/// A box-constrained multi-objective minimization problem.
pub trait Problem {
    fn name(&self) -> &str;

    fn bounds(&self) -> &Bounds;

    /// Reference point strictly dominated by every attainable objective vector.
    fn nadir(&self) -> &ObjectiveVector;

    fn num_objectives(&self) -> usize {
        self.nadir().len()
    }

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Evaluates the objectives at `x`. Implementations do no accounting; use
    /// an [`Evaluator`] to count calls against a budget.
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;

    /// Jacobian of the objectives, one row per objective, when available in
    /// closed form. Calling it is free with respect to the evaluation budget.
    fn jacobian(&self, _x: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Counts objective evaluations against a fixed budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvaluationCounter {
    count: u64,
    budget: u64,
}

impl EvaluationCounter {
    pub fn new(budget: u64) -> Self {
        Self { count: 0, budget }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.count
    }

    pub fn is_exhausted(&self) -> bool {
        self.count >= self.budget
    }

    /// Reserves one evaluation, failing once the budget is spent.
    pub fn consume(&mut self) -> Result<()> {
        if self.is_exhausted() {
            return Err(Error::BudgetExhausted(self.budget));
        }
        self.count += 1;
        Ok(())
    }
}

/// A problem bound to an evaluation counter. Every call to
/// [`Evaluator::evaluate`] costs exactly one unit of budget.
pub struct Evaluator<'p, P: ?Sized> {
    problem: &'p P,
    counter: EvaluationCounter,
}

impl<'p, P: Problem + ?Sized> Evaluator<'p, P> {
    pub fn new(problem: &'p P, budget: u64) -> Self {
        Self {
            problem,
            counter: EvaluationCounter::new(budget),
        }
    }

    pub fn problem(&self) -> &'p P {
        self.problem
    }

    pub fn counter(&self) -> &EvaluationCounter {
        &self.counter
    }

    pub fn count(&self) -> u64 {
        self.counter.count()
    }

    pub fn is_exhausted(&self) -> bool {
        self.counter.is_exhausted()
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<Candidate> {
        let bounds = self.problem.bounds();
        if x.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                actual: x.len(),
            });
        }
        if let Some((index, value)) = bounds.first_violation(x) {
            return Err(Error::OutOfBounds { index, value });
        }
        self.counter.consume()?;
        let Evaluation { y, g } = self.problem.evaluate(x)?;
        Ok(Candidate { x: x.to_vec(), y, g })
    }

    pub fn jacobian(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.problem.jacobian(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(a: f64, b: f64) -> ObjectiveVector {
        ObjectiveVector::pair(a, b).unwrap()
    }

    fn cand(a: f64, b: f64) -> Candidate {
        Candidate {
            x: vec![a],
            y: ov(a, b),
            g: None,
        }
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(1.0, 2.0), &ov(2.0, 3.0)));
        assert!(!dominates(&ov(1.0, 2.0), &ov(2.0, 1.0)));
        // ties block strict dominance
        assert!(!dominates(&ov(1.0, 2.0), &ov(1.0, 3.0)));
    }

    #[test]
    #[should_panic]
    fn dominance_length_mismatch_panics() {
        let a = ObjectiveVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        dominates(&a, &ov(2.0, 3.0));
    }

    #[test]
    fn objective_vector_rejects_bad_input() {
        assert!(matches!(ObjectiveVector::new(vec![1.0]), Err(Error::TooFewObjectives(1))));
        assert!(matches!(
            ObjectiveVector::pair(1.0, f64::NAN),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(ObjectiveVector::pair(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn nondominated_examples() {
        let mut archive = Archive::new();
        assert!(is_nondominated(&ov(0.5, 0.5), &archive));
        archive.push(cand(0.25, 0.75), Phase::Deterministic);
        assert!(is_nondominated(&ov(0.5, 0.5), &archive));
        archive.push(cand(0.4, 0.4), Phase::Deterministic);
        assert!(!is_nondominated(&ov(0.5, 0.5), &archive));
    }

    #[test]
    fn filter_examples() {
        let both = [cand(0.0, 1.0), cand(1.0, 0.0)];
        assert_eq!(nondominated_filter(&both).len(), 2);
        let one = [cand(0.0, 0.0), cand(1.0, 1.0)];
        let kept = nondominated_filter(&one);
        assert_eq!(kept, vec![&one[0]]);
        let none: [Candidate; 0] = [];
        assert!(nondominated_filter(&none).is_empty());
    }

    #[test]
    fn filter_keeps_ties() {
        // (0,1) and (0,5) share f1, so neither strictly dominates the other
        let pts = [cand(0.0, 5.0), cand(0.0, 1.0), cand(1.0, 6.0)];
        let kept = nondominated_filter(&pts);
        assert_eq!(kept, vec![&pts[0], &pts[1]]);
    }

    #[test]
    fn front_skips_warmup() {
        let mut archive = Archive::new();
        archive.push(cand(0.0, 5.5), Phase::Warmup);
        archive.push(cand(0.5, 0.5), Phase::Deterministic);
        assert_eq!(archive.front().len(), 1);
        assert_eq!(archive.greedy_len(), 1);
        assert_eq!(archive.count_phase(Phase::Warmup), 1);
    }

    #[test]
    fn counter_stops_at_budget() {
        let mut c = EvaluationCounter::new(2);
        assert!(c.consume().is_ok());
        assert!(c.consume().is_ok());
        assert!(matches!(c.consume(), Err(Error::BudgetExhausted(2))));
        assert_eq!(c.count(), 2);
    }

    #[test]
    fn bounds_projection_and_midpoint() {
        let b = Bounds::new(vec![0.0, -5.0], vec![1.0, 5.0]).unwrap();
        assert_eq!(b.midpoint(), vec![0.5, 0.0]);
        assert_eq!(b.project(&[2.0, -7.0]), vec![1.0, -5.0]);
        assert!(b.contains(&[1.0, 5.0]));
        assert_eq!(b.first_violation(&[0.5, 5.5]), Some((1, 5.5)));
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
    }

    fn arb_vec() -> impl Strategy<Value = ObjectiveVector> {
        // a coarse grid makes ties common
        prop::collection::vec(0i32..4, 2..=3)
            .prop_map(|v| ObjectiveVector::new(v.into_iter().map(f64::from).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn dominance_is_irreflexive_and_transitive(
            (a, b, c) in (2usize..=3).prop_flat_map(|m| {
                let v = prop::collection::vec(0i32..4, m)
                    .prop_map(|v| ObjectiveVector::new(v.into_iter().map(f64::from).collect()).unwrap());
                (v.clone(), v.clone(), v)
            })
        ) {
            prop_assert!(!dominates(&a, &a));
            if dominates(&a, &b) && dominates(&b, &c) {
                prop_assert!(dominates(&a, &c));
            }
        }

        #[test]
        fn nondominated_matches_brute_force(
            y in arb_vec(),
            pts in prop::collection::vec(arb_vec(), 0..8),
        ) {
            let mut archive = Archive::new();
            for p in pts.iter().filter(|p| p.len() == y.len()) {
                archive.push(Candidate { x: vec![], y: p.clone(), g: None }, Phase::Deterministic);
            }
            let mut brute = true;
            for c in archive.candidates() {
                if dominates(&c.y, &y) {
                    brute = false;
                }
            }
            prop_assert_eq!(is_nondominated(&y, &archive), brute);
        }

        #[test]
        fn filter_is_ordered_subsequence_matching_brute_force(
            pts in prop::collection::vec((0i32..5, 0i32..5), 0..12),
        ) {
            let cands: Vec<Candidate> = pts
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| Candidate {
                    x: vec![i as f64],
                    y: ObjectiveVector::pair(a.into(), b.into()).unwrap(),
                    g: None,
                })
                .collect();
            let kept = nondominated_filter(&cands);
            let brute: Vec<&Candidate> = cands
                .iter()
                .filter(|c| !cands.iter().any(|o| dominates(&o.y, &c.y)))
                .collect();
            prop_assert_eq!(&kept, &brute);
            let idx: Vec<f64> = kept.iter().map(|c| c.x[0]).collect();
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn evaluator_counts_every_call(k in 0u64..50) {
            struct Line(Bounds, ObjectiveVector);
            impl Problem for Line {
                fn name(&self) -> &str { "line" }
                fn bounds(&self) -> &Bounds { &self.0 }
                fn nadir(&self) -> &ObjectiveVector { &self.1 }
                fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
                    Ok(Evaluation { y: ObjectiveVector::pair(x[0], 1.0 - x[0])?, g: None })
                }
            }
            let p = Line(Bounds::uniform(1, 0.0, 1.0).unwrap(), ObjectiveVector::pair(2.0, 2.0).unwrap());
            let mut ev = Evaluator::new(&p, 1000);
            for _ in 0..k {
                ev.evaluate(&[0.5]).unwrap();
            }
            prop_assert_eq!(ev.count(), k);
        }
    }
}
