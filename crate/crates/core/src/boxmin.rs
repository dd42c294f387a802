//! Box-constrained local minimization: a projected limited-memory BFGS
//! iteration with Armijo backtracking along the projected path.
//!
//! Every objective call goes through [`Objective::evaluate`] and is then shown
//! to an observer, which may stop the search at that point. That hook is how
//! exploration stops at the first useful point, including finite-difference
//! probes and rejected line-search trials.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::moo::Bounds;

/// How gradients are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GradientMode {
    /// Forward differences: `n` extra evaluations per gradient.
    #[default]
    Numeric,
    /// Supplied by the objective alongside each value, at no extra cost.
    Analytic,
}

impl GradientMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientMode::Numeric => "numeric",
            GradientMode::Analytic => "analytic",
        }
    }
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "numeric" => Ok(GradientMode::Numeric),
            "analytic" => Ok(GradientMode::Analytic),
            other => Err(Error::InvalidConfig(format!(
                "unknown gradient mode `{other}` (expected numeric or analytic)"
            ))),
        }
    }
}

/// One objective evaluation. `aux` carries whatever the objective wants the
/// caller to see about the point (e.g. the evaluated candidate).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<A> {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub aux: A,
}

/// A scalar objective over the box.
pub trait Objective {
    type Aux: Clone;

    /// Evaluates at `x`. When `with_gradient` is set the sample must carry a
    /// gradient. Returning [`Error::BudgetExhausted`] ends the search softly.
    fn evaluate(&mut self, x: &[f64], with_gradient: bool) -> Result<Sample<Self::Aux>>;
}

/// Adapter for plain closures.
pub struct FnObjective<F, G = fn(&[f64]) -> Vec<f64>> {
    value: F,
    gradient: Option<G>,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(value: F) -> Self {
        Self {
            value,
            gradient: None,
        }
    }
}

impl<F, G> FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    pub fn with_gradient(value: F, gradient: G) -> Self {
        Self {
            value,
            gradient: Some(gradient),
        }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    type Aux = ();

    fn evaluate(&mut self, x: &[f64], with_gradient: bool) -> Result<Sample<()>> {
        let value = (self.value)(x);
        let gradient = match (&mut self.gradient, with_gradient) {
            (Some(g), true) => Some(g(x)),
            (None, true) => {
                return Err(Error::InvalidConfig("analytic mode needs a gradient".into()))
            }
            _ => None,
        };
        Ok(Sample {
            value,
            gradient,
            aux: (),
        })
    }
}

/// An evaluated point as seen by the observer.
#[derive(Clone, Copy, Debug)]
pub struct Probe<'a, A> {
    pub x: &'a [f64],
    pub value: f64,
    pub aux: &'a A,
    /// Zero-based index of the evaluation within this call.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluated<A> {
    pub x: Vec<f64>,
    pub value: f64,
    pub aux: A,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient or relative improvement below tolerance.
    Converged,
    /// The evaluation budget ran out.
    Budget,
    /// The observer asked to stop.
    ObserverStop,
    /// No decrease could be found along the search direction.
    Stagnated,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult<A> {
    /// Last accepted iterate. `None` only if not even `x0` could be evaluated.
    pub best: Option<Evaluated<A>>,
    /// The probe that made the observer stop, if it did.
    pub stopped_at: Option<Evaluated<A>>,
    pub iterations: usize,
    pub evaluations_used: usize,
    pub termination: Termination,
    /// Infinity norm of the step accepted on the first iteration.
    pub first_step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub max_iterations: usize,
    /// Stop when the infinity norm of the projected gradient drops below this.
    pub gradient_tolerance: f64,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` drops below this.
    pub relative_improvement_tolerance: f64,
    /// Number of correction pairs kept.
    pub memory: usize,
    pub sufficient_decrease: f64,
    /// Each backtrack shrinks the step by a factor in this range, picked by
    /// quadratic interpolation.
    pub backtrack_range: [f64; 2],
    pub max_backtracks: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            relative_improvement_tolerance: 1e-10,
            memory: 10,
            sufficient_decrease: 1e-4,
            backtrack_range: [0.1, 0.5],
            max_backtracks: 50,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gradient_tolerance > 0.0
            && self.relative_improvement_tolerance > 0.0
            && self.memory > 0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0
            && self.backtrack_range[0] > 0.0
            && self.backtrack_range[0] <= self.backtrack_range[1]
            && self.backtrack_range[1] < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("invalid minimizer settings".into()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeRequest<'a> {
    pub bounds: &'a Bounds,
    pub x0: Vec<f64>,
    pub gradient_mode: GradientMode,
    pub settings: Settings,
    /// Caps the infinity norm of the first trial step. Without it the first
    /// trial moves some coordinate by up to one unit.
    pub initial_step: Option<f64>,
}

impl<'a> MinimizeRequest<'a> {
    pub fn new(bounds: &'a Bounds, x0: Vec<f64>) -> Self {
        Self {
            bounds,
            x0,
            gradient_mode: GradientMode::Numeric,
            settings: Settings::default(),
            initial_step: None,
        }
    }

    pub fn initial_step(mut self, step: Option<f64>) -> Self {
        self.initial_step = step;
        self
    }

    pub fn gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    pub fn settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }
}

/// Forward-difference step for coordinate value `v`.
pub fn difference_step(v: f64) -> f64 {
    f64::EPSILON.sqrt() * v.abs().max(1.0)
}

/// Forward-difference gradient at `x`: one base evaluation plus one probe per
/// coordinate. Coordinates too close to their upper bound use a backward
/// probe so every evaluated point stays in the box.
pub fn numeric_gradient<O: Objective>(
    objective: &mut O,
    x: &[f64],
    bounds: &Bounds,
) -> Result<Vec<f64>> {
    let base = objective.evaluate(x, false)?.value;
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        if let Some((xi, h)) = probe_point(x[i], bounds.lower()[i], bounds.upper()[i]) {
            probe[i] = xi;
            let v = objective.evaluate(&probe, false)?.value;
            probe[i] = x[i];
            grad[i] = (v - base) / h;
        }
    }
    Ok(grad)
}

// Probe coordinate and signed step; `None` for a degenerate interval.
fn probe_point(v: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let h = difference_step(v);
    if v + h <= hi {
        Some((v + h, (v + h) - v))
    } else if v - h >= lo {
        Some((v - h, (v - h) - v))
    } else {
        None
    }
}

enum Halt {
    Budget,
    Observer,
}

struct Driver<'o, 'f, O: Objective, F> {
    objective: &'o mut O,
    observer: &'f mut F,
    evaluations: usize,
    stopped_at: Option<Evaluated<O::Aux>>,
}

impl<O, F> Driver<'_, '_, O, F>
where
    O: Objective,
    F: FnMut(&Probe<'_, O::Aux>) -> ControlFlow<()>,
{
    fn eval(&mut self, x: &[f64], with_gradient: bool) -> Result<std::result::Result<Sample<O::Aux>, Halt>> {
        let sample = match self.objective.evaluate(x, with_gradient) {
            Ok(s) => s,
            Err(Error::BudgetExhausted(_)) => return Ok(Err(Halt::Budget)),
            Err(e) => return Err(e),
        };
        if !sample.value.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                value: sample.value,
            });
        }
        if let Some(g) = &sample.gradient {
            if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { index, value });
            }
        }
        let index = self.evaluations;
        self.evaluations += 1;
        let probe = Probe {
            x,
            value: sample.value,
            aux: &sample.aux,
            index,
        };
        if (self.observer)(&probe).is_break() {
            self.stopped_at = Some(Evaluated {
                x: x.to_vec(),
                value: sample.value,
                aux: sample.aux,
            });
            return Ok(Err(Halt::Observer));
        }
        Ok(Ok(sample))
    }

    fn gradient(
        &mut self,
        mode: GradientMode,
        x: &[f64],
        base: &Sample<O::Aux>,
        bounds: &Bounds,
    ) -> Result<std::result::Result<Vec<f64>, Halt>> {
        if mode == GradientMode::Analytic {
            return Ok(Ok(base.gradient.clone().expect("analytic sample without gradient")));
        }
        let mut probe = x.to_vec();
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            if let Some((xi, h)) = probe_point(x[i], bounds.lower()[i], bounds.upper()[i]) {
                probe[i] = xi;
                let v = match self.eval(&probe, false)? {
                    Ok(s) => s.value,
                    Err(h) => return Ok(Err(h)),
                };
                probe[i] = x[i];
                grad[i] = (v - base.value) / h;
            }
        }
        Ok(Ok(grad))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

// Zero out components that would push an active coordinate out of the box.
fn projected_gradient(x: &[f64], g: &[f64], bounds: &Bounds) -> Vec<f64> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let at_lower = xi <= bounds.lower()[i] && gi > 0.0;
            let at_upper = xi >= bounds.upper()[i] && gi < 0.0;
            if at_lower || at_upper {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() || sy <= 0.0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    // two-loop recursion: returns −H·q
    fn direction(&self, q: &[f64]) -> Vec<f64> {
        let mut r = q.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &r);
            for (ri, yi) in r.iter_mut().zip(y) {
                *ri -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            r.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        r.iter_mut().for_each(|v| *v = -*v);
        r
    }
}

/// Minimizes without observing intermediate evaluations.
pub fn minimize<O: Objective>(
    objective: &mut O,
    request: &MinimizeRequest<'_>,
) -> Result<MinimizeResult<O::Aux>> {
    minimize_observed(objective, request, |_| ControlFlow::Continue(()))
}

/// Projected L-BFGS with every evaluation reported to `observer`.
///
/// Soft stops (budget, observer, stagnation, iteration cap) are returned as a
/// [`Termination`]; errors are reserved for contract violations and
/// non-finite objective values.
pub fn minimize_observed<O, F>(
    objective: &mut O,
    request: &MinimizeRequest<'_>,
    observer: F,
) -> Result<MinimizeResult<O::Aux>>
where
    O: Objective,
    F: FnMut(&Probe<'_, O::Aux>) -> ControlFlow<()>,
{
    minimize_from(objective, request, None, observer)
}

/// Like [`minimize_observed`], but may reuse a sample already taken at `x0`.
/// A reused sample is neither counted nor shown to the observer; in analytic
/// mode it must carry a gradient.
pub fn minimize_from<O, F>(
    objective: &mut O,
    request: &MinimizeRequest<'_>,
    start: Option<Sample<O::Aux>>,
    mut observer: F,
) -> Result<MinimizeResult<O::Aux>>
where
    O: Objective,
    F: FnMut(&Probe<'_, O::Aux>) -> ControlFlow<()>,
{
    let settings = &request.settings;
    settings.validate()?;
    let bounds = request.bounds;
    if request.x0.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            actual: request.x0.len(),
        });
    }
    if let Some((index, value)) = bounds.first_violation(&request.x0) {
        return Err(Error::OutOfBounds { index, value });
    }
    let analytic = request.gradient_mode == GradientMode::Analytic;
    let mut driver = Driver {
        objective,
        observer: &mut observer,
        evaluations: 0,
        stopped_at: None,
    };

    let mut iterations = 0;
    let mut first_step = None;
    let mut best: Option<Evaluated<O::Aux>> = None;
    macro_rules! finish {
        ($why:expr) => {
            return Ok(MinimizeResult {
                best,
                stopped_at: driver.stopped_at,
                iterations,
                evaluations_used: driver.evaluations,
                termination: $why,
                first_step,
            })
        };
    }
    macro_rules! soft {
        ($e:expr) => {
            match $e? {
                Ok(v) => v,
                Err(Halt::Budget) => finish!(Termination::Budget),
                Err(Halt::Observer) => finish!(Termination::ObserverStop),
            }
        };
    }

    let mut x = request.x0.clone();
    let mut current = match start {
        Some(s) => {
            if !s.value.is_finite() {
                return Err(Error::NonFinite { index: 0, value: s.value });
            }
            if analytic && s.gradient.as_ref().map(Vec::len) != Some(x.len()) {
                return Err(Error::InvalidConfig("start sample needs a gradient in analytic mode".into()));
            }
            s
        }
        None => soft!(driver.eval(&x, analytic)),
    };
    best = Some(Evaluated {
        x: x.clone(),
        value: current.value,
        aux: current.aux.clone(),
    });
    let mut grad = soft!(driver.gradient(request.gradient_mode, &x, &current, bounds));
    let mut memory = Memory {
        pairs: VecDeque::new(),
        capacity: settings.memory,
    };

    loop {
        let pg = projected_gradient(&x, &grad, bounds);
        if inf_norm(&pg) < settings.gradient_tolerance {
            finish!(Termination::Converged);
        }
        if iterations >= settings.max_iterations {
            finish!(Termination::IterationLimit);
        }
        iterations += 1;

        let mut accepted = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.pairs.is_empty();
            let mut d = if use_memory {
                memory.direction(&pg)
            } else {
                pg.iter().map(|v| -v).collect()
            };
            for (di, pi) in d.iter_mut().zip(&pg) {
                if *pi == 0.0 {
                    *di = 0.0;
                }
            }
            if use_memory && dot(&d, &pg) >= 0.0 {
                memory.pairs.clear();
                continue;
            }
            let reach = match request.initial_step {
                Some(h) if iterations == 1 => h,
                _ => 1.0,
            };
            let mut alpha = if use_memory {
                1.0
            } else {
                (reach / inf_norm(&d)).min(1.0)
            };
            for _ in 0..settings.max_backtracks {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                bounds.project_in_place(&mut trial);
                if trial == x {
                    break;
                }
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let slope = dot(&grad, &step);
                if slope < 0.0 {
                    let sample = soft!(driver.eval(&trial, analytic));
                    if sample.value <= current.value + settings.sufficient_decrease * slope {
                        accepted = Some((trial, step, sample));
                        break;
                    }
                    // minimizer of the quadratic through f, the slope and the trial
                    let curvature = sample.value - current.value - slope;
                    let t = -slope / (2.0 * curvature);
                    let [lo, hi] = settings.backtrack_range;
                    alpha *= if t.is_finite() { t.clamp(lo, hi) } else { lo };
                } else {
                    alpha *= settings.backtrack_range[1];
                }
            }
            if accepted.is_some() {
                break;
            }
            memory.pairs.clear();
        }

        let Some((x_new, step, sample)) = accepted else {
            finish!(Termination::Stagnated);
        };
        if iterations == 1 {
            first_step = Some(inf_norm(&step));
        }
        let previous = current.value;
        x = x_new;
        current = sample;
        best = Some(Evaluated {
            x: x.clone(),
            value: current.value,
            aux: current.aux.clone(),
        });
        let scale = previous.abs().max(current.value.abs()).max(1.0);
        if (previous - current.value) / scale < settings.relative_improvement_tolerance {
            finish!(Termination::Converged);
        }
        let new_grad = soft!(driver.gradient(request.gradient_mode, &x, &current, bounds));
        let dy: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        memory.push(step, dy);
        grad = new_grad;
    }
}
