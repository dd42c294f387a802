//! Real-coded variation for the evolutionary explorer.

use rand::Rng;

use crate::moo::Bounds;

pub const CROSSOVER_DISTRIBUTION_INDEX: f64 = 10.0;
pub const MUTATION_DISTRIBUTION_INDEX: f64 = 20.0;
pub const CROSSOVER_PROBABILITY: f64 = 0.9;

/// Bounded simulated binary crossover.
pub fn sbx<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    bounds: &Bounds,
    eta: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    if rng.gen::<f64>() > CROSSOVER_PROBABILITY {
        return (c1, c2);
    }
    let expo = 1.0 / (eta + 1.0);
    for i in 0..a.len() {
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        if rng.gen::<f64>() > 0.5 || (a[i] - b[i]).abs() <= 1e-14 || hi <= lo {
            continue;
        }
        let (y1, y2) = if a[i] < b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let u: f64 = rng.gen();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(expo)
            } else {
                (1.0 / (2.0 - u * alpha)).powf(expo)
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        let mut v1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
        let mut v2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
        if rng.gen::<bool>() {
            std::mem::swap(&mut v1, &mut v2);
        }
        c1[i] = v1;
        c2[i] = v2;
    }
    (c1, c2)
}

/// Polynomial mutation, each coordinate with probability `1/n`.
pub fn polynomial_mutation<R: Rng + ?Sized>(x: &mut [f64], bounds: &Bounds, eta: f64, rng: &mut R) {
    let rate = 1.0 / x.len() as f64;
    let expo = 1.0 / (eta + 1.0);
    for (i, v) in x.iter_mut().enumerate() {
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        if rng.gen::<f64>() >= rate || hi <= lo {
            continue;
        }
        let width = hi - lo;
        let d1 = (*v - lo) / width;
        let d2 = (hi - *v) / width;
        let r: f64 = rng.gen();
        let dq = if r < 0.5 {
            let val = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1).powf(eta + 1.0);
            val.powf(expo) - 1.0
        } else {
            let val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(expo)
        };
        *v = (*v + dq * width).clamp(lo, hi);
    }
}
