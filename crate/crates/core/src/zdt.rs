//! The continuous ZDT benchmark problems (ZDT1, ZDT2, ZDT3, ZDT4 and ZDT6)
//! with closed-form Jacobians, fixed reference points and front metadata.
//!
//! Every problem has the form `f1(x)`, `f2(x) = g(x)·h(f1(x), g(x))` with
//! `g ≥ 1` on the box and `g = 1` exactly on the Pareto-optimal shell, which
//! is what [`Zdt::p_distance`] measures.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::moo::{Bounds, Candidate, Evaluation, ObjectiveVector, Problem};

/// Number of decision variables used by default.
pub const DEFAULT_DIM: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ZdtKind {
    Zdt1,
    Zdt2,
    Zdt3,
    Zdt4,
    Zdt6,
}

impl ZdtKind {
    pub const ALL: [ZdtKind; 5] = [
        ZdtKind::Zdt1,
        ZdtKind::Zdt2,
        ZdtKind::Zdt3,
        ZdtKind::Zdt4,
        ZdtKind::Zdt6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ZdtKind::Zdt1 => "zdt1",
            ZdtKind::Zdt2 => "zdt2",
            ZdtKind::Zdt3 => "zdt3",
            ZdtKind::Zdt4 => "zdt4",
            ZdtKind::Zdt6 => "zdt6",
        }
    }
}

impl fmt::Display for ZdtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ZdtKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ZdtKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// A ZDT problem instance of dimension `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Zdt {
    kind: ZdtKind,
    bounds: Bounds,
    nadir: ObjectiveVector,
}

impl Zdt {
    pub fn new(kind: ZdtKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("ZDT needs n >= 2, got {n}")));
        }
        let (bounds, nadir) = match kind {
            ZdtKind::Zdt4 => {
                let mut lower = vec![-5.0; n];
                let mut upper = vec![5.0; n];
                lower[0] = 0.0;
                upper[0] = 1.0;
                (
                    Bounds::new(lower, upper)?,
                    ObjectiveVector::pair(2.0, 2.0 + 50.0 * (n - 1) as f64)?,
                )
            }
            _ => (Bounds::uniform(n, 0.0, 1.0)?, ObjectiveVector::pair(2.0, 11.0)?),
        };
        Ok(Self {
            kind,
            bounds,
            nadir,
        })
    }

    pub fn kind(&self) -> ZdtKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.bounds.dim()
    }

    pub fn f1(&self, x: &[f64]) -> f64 {
        match self.kind {
            ZdtKind::Zdt6 => 1.0 - (-4.0 * x[0]).exp() * (6.0 * PI * x[0]).sin().powi(6),
            _ => x[0],
        }
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        let tail = &x[1..];
        let m = tail.len() as f64;
        match self.kind {
            ZdtKind::Zdt1 | ZdtKind::Zdt2 | ZdtKind::Zdt3 => {
                1.0 + 9.0 / m * tail.iter().sum::<f64>()
            }
            ZdtKind::Zdt4 => {
                1.0 + 10.0 * m
                    + tail
                        .iter()
                        .map(|v| v * v - 10.0 * (4.0 * PI * v).cos())
                        .sum::<f64>()
            }
            ZdtKind::Zdt6 => 1.0 + 9.0 * (tail.iter().sum::<f64>() / m).powf(0.25),
        }
    }

    fn f2(&self, f1: f64, g: f64) -> f64 {
        let r = f1 / g;
        let h = match self.kind {
            ZdtKind::Zdt1 | ZdtKind::Zdt4 => 1.0 - r.sqrt(),
            ZdtKind::Zdt2 | ZdtKind::Zdt6 => 1.0 - r * r,
            ZdtKind::Zdt3 => 1.0 - r.sqrt() - r * (10.0 * PI * f1).sin(),
        };
        g * h
    }

    /// Objectives and `g` at `x`. Out-of-box points are rejected.
    pub fn evaluate_point(&self, x: &[f64]) -> Result<Evaluation> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: x.len(),
            });
        }
        if let Some((index, value)) = self.bounds.first_violation(x) {
            return Err(Error::OutOfBounds { index, value });
        }
        let f1 = self.f1(x);
        let g = self.g(x);
        Ok(Evaluation {
            y: ObjectiveVector::pair(f1, self.f2(f1, g))?,
            g: Some(g),
        })
    }

    /// Closed-form Jacobian, rows `∂f1/∂x` and `∂f2/∂x`.
    ///
    /// Where a partial is unbounded (ZDT1/3/4 at `f1 = 0`, ZDT6 at
    /// `Σx_i = 0`) the one-sided value at a machine-epsilon offset is
    /// returned instead, which keeps the sign and a very large magnitude.
    pub fn analytic_jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let m = (n - 1) as f64;
        let f1 = self.f1(x);
        let g = self.g(x);

        let mut df1 = vec![0.0; n];
        df1[0] = match self.kind {
            ZdtKind::Zdt6 => {
                let s = (6.0 * PI * x[0]).sin();
                let c = (6.0 * PI * x[0]).cos();
                (-4.0 * x[0]).exp() * s.powi(5) * (4.0 * s - 36.0 * PI * c)
            }
            _ => 1.0,
        };

        let mut dg = vec![0.0; n];
        match self.kind {
            ZdtKind::Zdt1 | ZdtKind::Zdt2 | ZdtKind::Zdt3 => {
                dg[1..].fill(9.0 / m);
            }
            ZdtKind::Zdt4 => {
                for (d, v) in dg[1..].iter_mut().zip(&x[1..]) {
                    *d = 2.0 * v + 40.0 * PI * (4.0 * PI * v).sin();
                }
            }
            ZdtKind::Zdt6 => {
                let s = (x[1..].iter().sum::<f64>() / m).max(f64::EPSILON);
                dg[1..].fill(9.0 * 0.25 * s.powf(-0.75) / m);
            }
        }

        // f2 = g·h(f1, g): chain rule through f1 and g
        let (df2_df1, df2_dg) = match self.kind {
            ZdtKind::Zdt1 | ZdtKind::Zdt4 => {
                let f1s = f1.max(f64::EPSILON);
                (-0.5 * (g / f1s).sqrt(), 1.0 - 0.5 * (f1 / g).sqrt())
            }
            ZdtKind::Zdt2 | ZdtKind::Zdt6 => (-2.0 * f1 / g, 1.0 + (f1 / g).powi(2)),
            ZdtKind::Zdt3 => {
                let f1s = f1.max(f64::EPSILON);
                let a = 10.0 * PI * f1;
                (
                    -0.5 * (g / f1s).sqrt() - a.sin() - a * a.cos(),
                    1.0 - 0.5 * (f1 / g).sqrt(),
                )
            }
        };
        let df2 = df1
            .iter()
            .zip(&dg)
            .map(|(a, b)| df2_df1 * a + df2_dg * b)
            .collect();
        vec![df1, df2]
    }

    /// Mean of `max(g − 1, 0)` over the candidates; zero iff every candidate
    /// lies on the Pareto-optimal shell.
    ///
    /// # Panics
    ///
    /// Panics on an empty candidate list.
    pub fn p_distance<'a, I>(&self, candidates: I) -> f64
    where
        I: IntoIterator<Item = &'a Candidate>,
    {
        let mut total = 0.0;
        let mut count = 0usize;
        for c in candidates {
            let g = c.g.unwrap_or_else(|| self.g(&c.x));
            total += (g - 1.0).max(0.0);
            count += 1;
        }
        assert!(count > 0, "p_distance of an empty candidate list");
        total / count as f64
    }

    /// Hypervolume of the continuous Pareto front with respect to the
    /// problem's reference point.
    pub fn max_front_hypervolume(&self) -> f64 {
        let (z1, z2) = (self.nadir[0], self.nadir[1]);
        let tail = (z1 - 1.0) * z2;
        match self.kind {
            // front f2 = 1 − √f1 on [0, 1]
            ZdtKind::Zdt1 | ZdtKind::Zdt4 => (z2 - 1.0) + 2.0 / 3.0 + tail,
            // front f2 = 1 − f1² on [0, 1]
            ZdtKind::Zdt2 => (z2 - 1.0) + 1.0 / 3.0 + tail,
            // front f2 = 1 − f1² on [a, 1]
            ZdtKind::Zdt6 => {
                let a = zdt6_min_f1();
                (z2 - 1.0) * (1.0 - a) + (1.0 - a.powi(3)) / 3.0 + tail
            }
            ZdtKind::Zdt3 => {
                let (integral, last) = zdt3_envelope();
                z2 - integral + (z1 - 1.0) * (z2 - last)
            }
        }
    }
}

impl Problem for Zdt {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn nadir(&self) -> &ObjectiveVector {
        &self.nadir
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.evaluate_point(x)
    }

    fn jacobian(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(self.analytic_jacobian(x))
    }
}

/// Smallest attainable ZDT6 `f1`: the first hump of `e^{−4x} sin⁶(6πx)`
/// peaks where `tan(6πx) = 9π`.
pub fn zdt6_min_f1() -> f64 {
    let theta = (9.0 * PI).atan();
    let x = theta / (6.0 * PI);
    1.0 - (-4.0 * x).exp() * theta.sin().powi(6)
}

fn zdt3_h(t: f64) -> f64 {
    1.0 - t.sqrt() - t * (10.0 * PI * t).sin()
}

fn zdt3_dh(t: f64) -> f64 {
    let a = 10.0 * PI * t;
    -0.5 / t.sqrt() - a.sin() - a * a.cos()
}

// ∫_a^b h(t) dt in closed form
fn zdt3_h_integral(a: f64, b: f64) -> f64 {
    let c = 10.0 * PI;
    let anti = |t: f64| t - 2.0 / 3.0 * t.powf(1.5) - ((c * t).sin() / (c * c) - t * (c * t).cos() / c);
    anti(b) - anti(a)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(∫₀¹ env(u) du, env(1))` where `env(u) = min_{t≤u} h(t)` is the running
/// minimum of the ZDT3 shape function at `g = 1`. Follows `h` on its record
/// descending branches and stays flat across the gaps of the front.
fn zdt3_envelope() -> (f64, f64) {
    const GRID: usize = 20_000;
    // critical points of h from sign changes of h' (h' → −∞ at 0)
    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    let mut prev_t = 1e-9;
    let mut prev_d = zdt3_dh(prev_t);
    for k in 1..=GRID {
        let t = k as f64 / GRID as f64;
        let d = zdt3_dh(t);
        if prev_d < 0.0 && d >= 0.0 {
            minima.push(bisect(prev_t, t, zdt3_dh));
        } else if prev_d > 0.0 && d <= 0.0 {
            maxima.push(bisect(prev_t, t, zdt3_dh));
        }
        prev_t = t;
        prev_d = d;
    }
    if prev_d < 0.0 {
        minima.push(1.0);
    }

    let mut integral = 0.0;
    let mut t = 0.0;
    let mut k = 0;
    let mut level;
    loop {
        // follow h down to the record minimum at minima[k]
        let tk = minima[k];
        integral += zdt3_h_integral(t, tk);
        level = zdt3_h(tk);
        let Some(j) = (k + 1..minima.len()).find(|&j| zdt3_h(minima[j]) < level) else {
            integral += level * (1.0 - tk);
            break;
        };
        // h comes back down through `level` on the branch before minima[j]
        let peak = maxima
            .iter()
            .copied()
            .filter(|&m| m < minima[j])
            .fold(tk, f64::max);
        let cross = bisect(peak, minima[j], |s| zdt3_h(s) - level);
        integral += level * (cross - tk);
        t = cross;
        k = j;
    }
    (integral, level)
}
