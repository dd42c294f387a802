//! The optimizer: warm-up, region-guided exploration, hypervolume
//! exploitation and the evolutionary fallback.
//!
//! A point qualifies for exploitation when its exclusive contribution with
//! respect to every accepted point (warm-up seeds included) is positive. That
//! single test covers non-domination, strict domination of the reference
//! point, and ties that would leave the contribution at zero.

mod region;
mod trace;
pub mod variation;

use std::io::Write;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxmin::{self, GradientMode, MinimizeRequest, Objective, Sample, Settings};
use crate::error::{Error, Result};
use crate::hypervolume::SortedFront;
use crate::moo::{dominates, Archive, Candidate, Evaluator, ObjectiveVector, Phase, Problem};

pub use region::{create_region, create_regions, Region, RegionQueue};
pub use trace::{front_distance, RunTrace, Snapshot};

#[derive(Clone, Debug, PartialEq)]
pub struct H2maConfig {
    /// Maximum number of objective evaluations, warm-up included.
    pub budget: u64,
    /// Stop once this many points have been added after warm-up.
    pub target_point_count: Option<usize>,
    pub gradient_mode: GradientMode,
    /// Smallest population of the evolutionary explorer.
    pub stochastic_population_min: usize,
    pub seed: u64,
    /// Regions with a smaller bounding-box volume are discarded.
    pub minimum_region_volume: f64,
    /// If set, the trace also holds carry-forward snapshots at every multiple
    /// of this many evaluations up to the budget.
    pub trace_interval: Option<u64>,
    pub minimizer: Settings,
}

impl Default for H2maConfig {
    fn default() -> Self {
        Self {
            budget: 20_000,
            target_point_count: None,
            gradient_mode: GradientMode::Numeric,
            stochastic_population_min: 20,
            seed: 0,
            minimum_region_volume: 0.0,
            trace_interval: None,
            minimizer: Settings::default(),
        }
    }
}

impl H2maConfig {
    pub fn validate(&self, num_objectives: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.stochastic_population_min < num_objectives {
            return bad("stochastic population must hold at least one point per objective");
        }
        if !(self.minimum_region_volume >= 0.0 && self.minimum_region_volume.is_finite()) {
            return bad("minimum region volume must be finite and non-negative");
        }
        if self.trace_interval == Some(0) {
            return bad("trace interval must be positive");
        }
        self.minimizer.validate()
    }
}

/// Counters describing how a run spent its time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub evaluations: u64,
    pub regions_created: usize,
    pub deterministic_successes: usize,
    pub deterministic_failures: usize,
    pub stochastic_invocations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub archive: Archive,
    pub trace: RunTrace,
    pub stats: RunStats,
}

impl RunOutcome {
    pub fn final_hypervolume(&self) -> f64 {
        self.trace.last().map_or(0.0, |s| s.hypervolume)
    }
}

/// Runs the optimizer to completion.
pub fn run<P: Problem + ?Sized>(problem: &P, config: &H2maConfig) -> Result<RunOutcome> {
    H2ma::new(problem, config.clone())?.run()
}

/// State of one optimization run.
pub struct H2ma<'p, P: ?Sized> {
    problem: &'p P,
    config: H2maConfig,
    evaluator: Evaluator<'p, P>,
    archive: Archive,
    // every accepted point; drives contributions
    front: SortedFront,
    // greedy points only; drives reporting
    reported: SortedFront,
    queue: RegionQueue,
    next_region_id: u64,
    rng: ChaCha8Rng,
    trace: RunTrace,
    stats: RunStats,
    // first-step length of the last exploitation, to warm-start the next
    exploit_step: Option<f64>,
}

impl<'p, P: Problem + ?Sized> H2ma<'p, P> {
    pub fn new(problem: &'p P, config: H2maConfig) -> Result<Self> {
        let m = problem.num_objectives();
        if m != 2 {
            return Err(Error::UnsupportedDimension(m));
        }
        config.validate(m)?;
        if config.gradient_mode == GradientMode::Analytic
            && problem.jacobian(&problem.bounds().midpoint()).is_none()
        {
            return Err(Error::InvalidConfig(format!(
                "{} has no analytic jacobian",
                problem.name()
            )));
        }
        Ok(Self {
            problem,
            evaluator: Evaluator::new(problem, config.budget),
            archive: Archive::new(),
            front: SortedFront::new(problem.nadir())?,
            reported: SortedFront::new(problem.nadir())?,
            queue: RegionQueue::new(),
            next_region_id: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            trace: RunTrace::new(),
            stats: RunStats::default(),
            exploit_step: None,
            config,
        })
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn queue(&self) -> &RegionQueue {
        &self.queue
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluator.count()
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            evaluations: self.evaluator.count(),
            ..self.stats
        }
    }

    /// Exclusive contribution of `y` with respect to the archive.
    pub fn contribution(&self, y: &ObjectiveVector) -> f64 {
        self.front.contribution(y)
    }

    fn qualifies(front: &SortedFront, y: &ObjectiveVector) -> bool {
        front.contribution(y) > 0.0
    }

    fn request(&self, x0: Vec<f64>) -> MinimizeRequest<'p> {
        MinimizeRequest::new(self.problem.bounds(), x0)
            .gradient_mode(self.config.gradient_mode)
            .settings(self.config.minimizer.clone())
    }

    fn done(&self) -> bool {
        self.evaluator.is_exhausted()
            || self
                .config
                .target_point_count
                .is_some_and(|t| self.archive.greedy_len() >= t)
    }

    /// Minimizes each objective alone from the box midpoint and seeds the
    /// queue with the region they span, if it has volume.
    pub fn create_initial_region(&mut self) -> Result<()> {
        let x0 = self.problem.bounds().midpoint();
        let m = self.problem.num_objectives();
        let mut seeds = Vec::with_capacity(m);
        for index in 0..m {
            let request = self.request(x0.clone());
            let mut objective = SingleObjective {
                evaluator: &mut self.evaluator,
                index,
            };
            let result = boxmin::minimize(&mut objective, &request)?;
            if let Some(best) = result.best {
                seeds.push(best.aux);
            }
        }
        for c in &seeds {
            self.front.insert(&c.y)?;
            self.archive.push(c.clone(), Phase::Warmup);
        }
        if seeds.len() == m {
            let id = self.allocate_region_id();
            if let Some(region) = create_region(seeds, self.config.minimum_region_volume, id) {
                self.queue.push(region);
                self.stats.regions_created += 1;
            }
        }
        Ok(())
    }

    fn allocate_region_id(&mut self) -> u64 {
        let id = self.next_region_id;
        self.next_region_id += 1;
        id
    }

    /// Chases the region's objective-space midpoint from the members'
    /// decision-space mean and returns the first evaluated point that
    /// qualifies, or `None`.
    pub fn explore_deterministic(&mut self, region: &Region) -> Result<Option<Candidate>> {
        let x0 = region.decision_mean();
        let start = match self.evaluator.evaluate(&x0) {
            Ok(c) => c,
            Err(Error::BudgetExhausted(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if Self::qualifies(&self.front, &start.y) {
            return Ok(Some(start));
        }
        let request = self.request(x0);
        let front = &self.front;
        let mut objective = MidpointObjective {
            evaluator: &mut self.evaluator,
            mid: region.mid().as_slice(),
        };
        let analytic = self.config.gradient_mode == GradientMode::Analytic;
        let first = objective.sample_of(start, analytic)?;
        let result = boxmin::minimize_from(&mut objective, &request, Some(first), |p| {
            if Self::qualifies(front, &p.aux.y) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(result.stopped_at.map(|e| e.aux))
    }

    /// Maximizes the exclusive contribution from `start`, which must already
    /// contribute. The result contributes at least as much as `start`.
    pub fn exploit(&mut self, start: Candidate) -> Result<Candidate> {
        let c0 = self.front.contribution(&start.y);
        if !(c0 > 0.0) {
            return Err(Error::ZeroContribution);
        }
        let request = self.request(start.x.clone()).initial_step(self.exploit_step.map(|h| 2.0 * h));
        let mut objective = ContributionObjective {
            evaluator: &mut self.evaluator,
            front: &self.front,
            scale: 1.0 / c0,
        };
        let analytic = self.config.gradient_mode == GradientMode::Analytic;
        let first = objective.sample_of(start.clone(), analytic)?;
        let result = boxmin::minimize_from(&mut objective, &request, Some(first), |_| ControlFlow::Continue(()))?;
        if let Some(h) = result.first_step.filter(|h| *h > 0.0) {
            self.exploit_step = Some(h.min(1.0));
        }
        Ok(match result.best {
            Some(best) if best.value <= -1.0 => best.aux,
            _ => start,
        })
    }

    /// Evolutionary search seeded with the archive. Returns the first
    /// offspring that qualifies, or `None` once the budget is spent.
    pub fn explore_stochastic(&mut self) -> Result<Option<Candidate>> {
        self.stats.stochastic_invocations += 1;
        let bounds = self.problem.bounds();
        let size = self.config.stochastic_population_min.max(self.archive.len());
        let mut population: Vec<Candidate> = self.archive.candidates().cloned().collect();
        while population.len() < size {
            let x = bounds.sample(&mut self.rng);
            match self.evaluate_offspring(&x)? {
                Offspring::Found(c) => return Ok(Some(c)),
                Offspring::Plain(c) => population.push(c),
                Offspring::Exhausted => return Ok(None),
            }
        }
        loop {
            let ranks = dominated_by_counts(&population);
            let mut children = Vec::with_capacity(size);
            while children.len() < size {
                let a = tournament(&ranks, &mut self.rng);
                let b = tournament(&ranks, &mut self.rng);
                let (c1, c2) = variation::sbx(
                    &population[a].x,
                    &population[b].x,
                    bounds,
                    variation::CROSSOVER_DISTRIBUTION_INDEX,
                    &mut self.rng,
                );
                for mut x in [c1, c2] {
                    if children.len() == size {
                        break;
                    }
                    variation::polynomial_mutation(
                        &mut x,
                        bounds,
                        variation::MUTATION_DISTRIBUTION_INDEX,
                        &mut self.rng,
                    );
                    match self.evaluate_offspring(&x)? {
                        Offspring::Found(c) => return Ok(Some(c)),
                        Offspring::Plain(c) => children.push(c),
                        Offspring::Exhausted => return Ok(None),
                    }
                }
            }
            population.append(&mut children);
            let ranks = dominated_by_counts(&population);
            let mut order: Vec<usize> = (0..population.len()).collect();
            order.sort_by_key(|&i| ranks[i]);
            order.truncate(size);
            order.sort_unstable();
            let mut keep = order.into_iter().peekable();
            let mut i = 0;
            population.retain(|_| {
                let hit = keep.peek() == Some(&i);
                if hit {
                    keep.next();
                }
                i += 1;
                hit
            });
        }
    }

    fn evaluate_offspring(&mut self, x: &[f64]) -> Result<Offspring> {
        match self.evaluator.evaluate(x) {
            Ok(c) if Self::qualifies(&self.front, &c.y) => Ok(Offspring::Found(c)),
            Ok(c) => Ok(Offspring::Plain(c)),
            Err(Error::BudgetExhausted(_)) => Ok(Offspring::Exhausted),
            Err(e) => Err(e),
        }
    }

    fn accept(&mut self, candidate: Candidate, phase: Phase) -> Result<()> {
        debug_assert!(self.front.contribution(&candidate.y) > 0.0);
        self.front.insert(&candidate.y)?;
        self.reported.insert(&candidate.y)?;
        self.archive.push(candidate, phase);
        let front = self.archive.front();
        self.trace.record(Snapshot {
            evaluations: self.evaluator.count(),
            hypervolume: self.reported.hypervolume(),
            p_distance: front_distance(&front),
            points: front.len(),
        });
        Ok(())
    }

    /// One iteration of the region phase. Returns `false` when the queue is
    /// empty.
    pub fn step_deterministic(&mut self) -> Result<bool> {
        let Some(region) = self.queue.pop() else {
            return Ok(false);
        };
        match self.explore_deterministic(&region)? {
            Some(found) => {
                let point = self.exploit(found)?;
                self.accept(point.clone(), Phase::Deterministic)?;
                self.stats.deterministic_successes += 1;
                let children = create_regions(
                    &region,
                    &point,
                    self.config.minimum_region_volume,
                    &mut self.next_region_id,
                );
                self.stats.regions_created += children.len();
                for child in children {
                    self.queue.push(child);
                }
            }
            None => self.stats.deterministic_failures += 1,
        }
        Ok(true)
    }

    /// One iteration of the evolutionary phase. Returns `false` when the
    /// budget ran out before a point was found.
    pub fn step_stochastic(&mut self) -> Result<bool> {
        match self.explore_stochastic()? {
            Some(found) => {
                let point = self.exploit(found)?;
                self.accept(point, Phase::Stochastic)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn run(mut self) -> Result<RunOutcome> {
        self.create_initial_region()?;
        while !self.done() && self.step_deterministic()? {}
        while !self.done() && self.step_stochastic()? {}
        if let Some(interval) = self.config.trace_interval {
            self.trace.fill_boundaries(interval, self.config.budget);
        }
        let stats = self.stats();
        Ok(RunOutcome {
            archive: self.archive,
            trace: self.trace,
            stats,
        })
    }
}

enum Offspring {
    Found(Candidate),
    Plain(Candidate),
    Exhausted,
}

fn dominated_by_counts(population: &[Candidate]) -> Vec<usize> {
    population
        .iter()
        .map(|c| population.iter().filter(|o| dominates(&o.y, &c.y)).count())
        .collect()
}

// binary tournament on dominated-by count; the first draw wins ties
fn tournament<R: Rng + ?Sized>(ranks: &[usize], rng: &mut R) -> usize {
    let a = rng.gen_range(0..ranks.len());
    let b = rng.gen_range(0..ranks.len());
    if ranks[b] < ranks[a] {
        b
    } else {
        a
    }
}

fn jacobian_rows<P: Problem + ?Sized>(evaluator: &Evaluator<'_, P>, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    evaluator
        .jacobian(x)
        .ok_or_else(|| Error::InvalidConfig("analytic gradient requested without a jacobian".into()))
}

struct SingleObjective<'e, 'p, P: ?Sized> {
    evaluator: &'e mut Evaluator<'p, P>,
    index: usize,
}

impl<P: Problem + ?Sized> Objective for SingleObjective<'_, '_, P> {
    type Aux = Candidate;

    fn evaluate(&mut self, x: &[f64], with_gradient: bool) -> Result<Sample<Candidate>> {
        let c = self.evaluator.evaluate(x)?;
        let gradient = if with_gradient {
            Some(jacobian_rows(self.evaluator, x)?.swap_remove(self.index))
        } else {
            None
        };
        Ok(Sample {
            value: c.y[self.index],
            gradient,
            aux: c,
        })
    }
}

// ½‖f(x) − mid‖²
struct MidpointObjective<'e, 'p, 'm, P: ?Sized> {
    evaluator: &'e mut Evaluator<'p, P>,
    mid: &'m [f64],
}

impl<P: Problem + ?Sized> MidpointObjective<'_, '_, '_, P> {
    fn sample_of(&self, c: Candidate, with_gradient: bool) -> Result<Sample<Candidate>> {
        let x = c.x.as_slice();
        let r: Vec<f64> = c.y.as_slice().iter().zip(self.mid).map(|(a, b)| a - b).collect();
        let value = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let gradient = if with_gradient {
            let jac = jacobian_rows(self.evaluator, x)?;
            let mut g = vec![0.0; x.len()];
            for (row, ri) in jac.iter().zip(&r) {
                g.iter_mut().zip(row).for_each(|(gj, dj)| *gj += ri * dj);
            }
            Some(g)
        } else {
            None
        };
        Ok(Sample {
            value,
            gradient,
            aux: c,
        })
    }
}

impl<P: Problem + ?Sized> Objective for MidpointObjective<'_, '_, '_, P> {
    type Aux = Candidate;

    fn evaluate(&mut self, x: &[f64], with_gradient: bool) -> Result<Sample<Candidate>> {
        let c = self.evaluator.evaluate(x)?;
        self.sample_of(c, with_gradient)
    }
}

// −C(f(x)) / C(f(x0))
struct ContributionObjective<'e, 'p, 'f, P: ?Sized> {
    evaluator: &'e mut Evaluator<'p, P>,
    front: &'f SortedFront,
    scale: f64,
}

impl<P: Problem + ?Sized> ContributionObjective<'_, '_, '_, P> {
    fn sample_of(&self, c: Candidate, with_gradient: bool) -> Result<Sample<Candidate>> {
        let x = c.x.as_slice();
        let value = -self.front.contribution(&c.y) * self.scale;
        let gradient = if with_gradient {
            let gy = self
                .front
                .gradient(&c.y)
                .unwrap_or_else(|_| self.front.gradient_one_sided(&c.y));
            let jac = jacobian_rows(self.evaluator, x)?;
            let mut g = vec![0.0; x.len()];
            for (row, gyi) in jac.iter().zip(gy) {
                g.iter_mut().zip(row).for_each(|(gj, dj)| *gj -= self.scale * gyi * dj);
            }
            Some(g)
        } else {
            None
        };
        Ok(Sample {
            value,
            gradient,
            aux: c,
        })
    }
}

impl<P: Problem + ?Sized> Objective for ContributionObjective<'_, '_, '_, P> {
    type Aux = Candidate;

    fn evaluate(&mut self, x: &[f64], with_gradient: bool) -> Result<Sample<Candidate>> {
        let c = self.evaluator.evaluate(x)?;
        self.sample_of(c, with_gradient)
    }
}

/// Writes the archive as CSV: `t,x_1..x_n,f_1,f_2,g,phase`, one row per
/// accepted point in acceptance order. `g` is empty when unknown.
pub fn write_archive_csv<W: Write>(archive: &Archive, dim: usize, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.extend(["f_1", "f_2", "g", "phase"].map(String::from));
    w.write_record(&header)?;
    for (t, e) in archive.entries().iter().enumerate() {
        let c = &e.candidate;
        let mut row = vec![t.to_string()];
        row.extend(c.x.iter().map(f64::to_string));
        row.extend(c.y.as_slice().iter().map(f64::to_string));
        row.push(c.g.map_or_else(String::new, |g| g.to_string()));
        row.push(e.phase.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
