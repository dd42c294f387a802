// Acceptance gate. One line per criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use h2ma::h2ma::{run, write_archive_csv, H2maConfig, RunOutcome};
use h2ma::harness::{compare_gradient_modes, median_ratio, percentiles, run_experiment, ExperimentConfig};
use h2ma::hypervolume::{contribution, contribution_gradient, hypervolume, mc_hypervolume_oracle};
use h2ma::{ObjectiveVector, Problem, Zdt, ZdtKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const BUDGET: u64 = 20_000;
const N: usize = 30;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

// every H2MA run made by this gate, for the budget law
#[derive(Default)]
struct Ledger {
    runs: Vec<(String, u64, u64)>,
}

impl Ledger {
    fn note(&mut self, label: impl Into<String>, used: u64, budget: u64) {
        self.runs.push((label.into(), used, budget));
    }
}

fn pair(a: f64, b: f64) -> ObjectiveVector {
    ObjectiveVector::pair(a, b).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<ObjectiveVector>, ObjectiveVector) {
    let z = pair(rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2));
    let k = rng.gen_range(1..=10);
    let pts = (0..k).map(|_| pair(rng.gen(), rng.gen())).collect();
    (pts, z)
}

fn hypervolume_engine() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let instances: Vec<_> = (0..100).map(|_| random_instance(&mut rng)).collect();

    let oracle_fail: Vec<String> = instances
        .par_iter()
        .enumerate()
        .filter_map(|(i, (pts, z))| {
            let exact = hypervolume(pts, z).unwrap();
            let mc = mc_hypervolume_oracle(pts, z, 1_000_000, 1000 + i as u64);
            let tol = (4.0 * mc.std_error).max(1e-12);
            ((exact - mc.value).abs() > tol)
                .then(|| format!("#{i}: sweep {exact} mc {} ± {}", mc.value, mc.std_error))
        })
        .collect();

    let mut worst_diff = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut grad_checked = 0;
    let h = 1e-6;
    for (pts, z) in &instances {
        for (i, y) in pts.iter().enumerate() {
            let others: Vec<ObjectiveVector> = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let c = contribution(y, &others, z).unwrap();
            let two_call = hypervolume(pts, z).unwrap() - hypervolume(&others, z).unwrap();
            worst_diff = worst_diff.max((c - two_call).abs());

            let Ok(grad) = contribution_gradient(y, &others, z) else {
                continue;
            };
            // keep away from the kinks of the piecewise-bilinear contribution
            let near_kink = others
                .iter()
                .chain(std::iter::once(z))
                .any(|o| (0..2).any(|d| (0..2).any(|e| (o[e] - y[d]).abs() < 1e3 * h)));
            if near_kink {
                continue;
            }
            for d in 0..2 {
                let mut up = [y[0], y[1]];
                let mut down = up;
                up[d] += h;
                down[d] -= h;
                let cu = contribution(&pair(up[0], up[1]), &others, z).unwrap();
                let cd = contribution(&pair(down[0], down[1]), &others, z).unwrap();
                worst_grad = worst_grad.max((grad[d] - (cu - cd) / (2.0 * h)).abs());
            }
            grad_checked += 1;
        }
    }

    let pass = oracle_fail.is_empty() && worst_diff <= 1e-12 && worst_grad <= 1e-5 && grad_checked > 0;
    let mut detail = format!(
        "oracle misses {}/100, max |C − ΔH| {worst_diff:.1e}, max gradient error {worst_grad:.1e} over {grad_checked} points",
        oracle_fail.len()
    );
    if let Some(first) = oracle_fail.first() {
        detail.push_str(&format!(" (first: {first})"));
    }
    Verdict::new(pass, detail)
}

fn three_point_example() -> Verdict {
    let pts = [pair(0.25, 0.75), pair(0.5, 0.5), pair(0.75, 0.25)];
    let hv = hypervolume(&pts, &pair(1.0, 1.0)).unwrap();
    Verdict::new((hv - 0.375).abs() <= 1e-12, format!("hypervolume {hv}"))
}

struct ZdtRun {
    kind: ZdtKind,
    outcome: RunOutcome,
    elapsed: Duration,
    p_distance: f64,
    hypervolume: f64,
    max_hypervolume: f64,
    csv: Vec<u8>,
}

fn run_zdt(kind: ZdtKind, seed: u64, ledger: &mut Ledger) -> ZdtRun {
    let zdt = Zdt::new(kind, N).unwrap();
    let config = H2maConfig {
        budget: BUDGET,
        seed,
        ..H2maConfig::default()
    };
    let start = Instant::now();
    let outcome = run(&zdt, &config).unwrap();
    let elapsed = start.elapsed();
    ledger.note(format!("{} seed {seed}", kind.as_str()), outcome.stats.evaluations, BUDGET);
    let front = outcome.archive.front();
    let p_distance = zdt.p_distance(front.iter().copied());
    let mut csv = Vec::new();
    write_archive_csv(&outcome.archive, N, &mut csv).unwrap();
    ZdtRun {
        kind,
        hypervolume: outcome.final_hypervolume(),
        max_hypervolume: zdt.max_front_hypervolume(),
        outcome,
        elapsed,
        p_distance,
        csv,
    }
}

fn front_convergence(runs: &[ZdtRun]) -> Verdict {
    let mut pass = true;
    let parts: Vec<String> = runs
        .iter()
        .map(|r| {
            pass &= r.p_distance <= 1e-6 && r.elapsed < Duration::from_secs(30);
            format!("{} P={:.1e} in {:.2}s", r.kind.as_str(), r.p_distance, r.elapsed.as_secs_f64())
        })
        .collect();
    Verdict::new(pass, parts.join(", "))
}

fn hypervolume_quality(runs: &[ZdtRun]) -> Verdict {
    let mut pass = true;
    let parts: Vec<String> = runs
        .iter()
        .map(|r| {
            let floor = if r.kind == ZdtKind::Zdt3 { 0.95 } else { 0.98 };
            let ratio = r.hypervolume / r.max_hypervolume;
            pass &= ratio >= floor;
            format!("{} {:.5} (≥ {floor})", r.kind.as_str(), ratio)
        })
        .collect();
    Verdict::new(pass, parts.join(", "))
}

fn determinism(runs: &[ZdtRun], ledger: &mut Ledger) -> Verdict {
    let mut pass = true;
    let parts: Vec<String> = runs
        .iter()
        .map(|r| {
            let again = run_zdt(r.kind, 0, ledger);
            let same = again.csv == r.csv;
            let stochastic = r.outcome.stats.stochastic_invocations + again.outcome.stats.stochastic_invocations;
            pass &= same && stochastic == 0;
            format!(
                "{} csv {} stochastic {}",
                r.kind.as_str(),
                if same { "identical" } else { "differs" },
                stochastic
            )
        })
        .collect();
    Verdict::new(pass, parts.join(", "))
}

fn zdt6_switch(ledger: &mut Ledger) -> Verdict {
    let single = run_zdt(ZdtKind::Zdt6, 0, ledger);
    let invoked = single.outcome.stats.stochastic_invocations;

    let config = ExperimentConfig {
        problem: ZdtKind::Zdt6,
        n: N,
        budget: BUDGET,
        runs: 20,
        trace_interval: 2000,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&config).unwrap();
    for (i, s) in result.stats.iter().enumerate() {
        ledger.note(format!("zdt6 experiment run {i}"), s.evaluations, BUDGET);
    }
    let finals: Vec<f64> = result
        .traces
        .iter()
        .map(|t| t.last().and_then(|s| s.p_distance).unwrap_or(f64::INFINITY))
        .collect();
    let q = percentiles(&finals);
    let (median, top) = (q[2], q[4]);
    let near = finals.iter().filter(|&&p| p <= 1e-3).count();
    let spread = median < top;
    let pass = invoked >= 1 && spread && near * 4 >= finals.len() * 3;
    Verdict::new(
        pass,
        format!(
            "stochastic invocations {invoked}, final P median {median:.2e} p100 {top:.2e} (spread {}), {near}/20 runs ≤ 1e-3",
            if spread { "yes" } else { "no" }
        ),
    )
}

fn gradient_cost_ratio() -> Verdict {
    let z1 = compare_gradient_modes(ZdtKind::Zdt1, N, BUDGET, 0).unwrap();
    let z3 = compare_gradient_modes(ZdtKind::Zdt3, N, BUDGET, 0).unwrap();
    let med = median_ratio(&z1);
    let min3 = z3.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let pass = med.is_some_and(|m| (15.0..=35.0).contains(&m)) && !z3.is_empty() && min3 >= 10.0;
    Verdict::new(
        pass,
        format!(
            "zdt1 median {:.2} over {} levels, zdt3 min {:.2} over {} levels",
            med.unwrap_or(f64::NAN),
            z1.len(),
            min3,
            z3.len()
        ),
    )
}

// within 1e-6 of a point where the trigonometric factor is stationary
fn near_stationary(kind: ZdtKind, zdt: &Zdt, x: &[f64]) -> bool {
    let near = |v: f64, period: f64| {
        let r = (v / period).rem_euclid(1.0);
        r.min(1.0 - r) * period < 1e-6
    };
    match kind {
        ZdtKind::Zdt3 => near(zdt.f1(x) - 0.05, 0.1),
        ZdtKind::Zdt6 => near(x[0], 1.0 / 12.0),
        _ => false,
    }
}

fn jacobians() -> Verdict {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ZdtKind::ALL {
        let zdt = Zdt::new(kind, N).unwrap();
        let (lo, hi) = (zdt.bounds().lower().to_vec(), zdt.bounds().upper().to_vec());
        let mut worst = 0.0f64;
        let mut checked = 0;
        while checked < 100 {
            // keep the central stencil inside the box and off the x1 = 0 singularity
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&l, &u)| rng.gen_range(l + 1e-3..u - 1e-3))
                .collect();
            if near_stationary(kind, &zdt, &x) {
                continue;
            }
            let jac = zdt.analytic_jacobian(&x);
            for j in 0..N {
                let mut up = x.clone();
                let mut down = x.clone();
                up[j] += h;
                down[j] -= h;
                let yu = zdt.evaluate_point(&up).unwrap().y;
                let yd = zdt.evaluate_point(&down).unwrap().y;
                for i in 0..2 {
                    worst = worst.max((jac[i][j] - (yu[i] - yd[i]) / (2.0 * h)).abs());
                }
            }
            checked += 1;
        }
        pass &= worst <= 1e-4;
        parts.push(format!("{} {worst:.1e}", kind.as_str()));
    }
    Verdict::new(pass, format!("max abs error: {}", parts.join(", ")))
}

fn budget_law(ledger: &Ledger) -> Verdict {
    let over: Vec<&(String, u64, u64)> = ledger.runs.iter().filter(|(_, used, b)| used > b).collect();
    let mut detail = format!("{} runs audited, {} over budget", ledger.runs.len(), over.len());
    if let Some((label, used, b)) = over.first() {
        detail.push_str(&format!(" (first: {label} used {used} of {b})"));
    }
    Verdict::new(over.is_empty() && !ledger.runs.is_empty(), detail)
}

fn gradient_budget_runs(ledger: &mut Ledger) {
    // compare_gradient_modes hides its runs; redo them for the audit
    for kind in [ZdtKind::Zdt1, ZdtKind::Zdt3] {
        let zdt = Zdt::new(kind, N).unwrap();
        let config = H2maConfig {
            budget: BUDGET,
            gradient_mode: h2ma::boxmin::GradientMode::Analytic,
            ..H2maConfig::default()
        };
        let out = run(&zdt, &config).unwrap();
        ledger.note(format!("{} analytic", kind.as_str()), out.stats.evaluations, BUDGET);
    }
}

fn report(n: usize, name: &str, v: &Verdict) -> bool {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("criterion {n} {name} ... {tag} ({})", v.detail);
    v.pass
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut ok = true;

    ok &= report(1, "hypervolume engine", &hypervolume_engine());
    ok &= report(2, "three-point example", &three_point_example());

    let runs: Vec<ZdtRun> = [ZdtKind::Zdt1, ZdtKind::Zdt2, ZdtKind::Zdt3, ZdtKind::Zdt4]
        .into_iter()
        .map(|k| run_zdt(k, 0, &mut ledger))
        .collect();
    ok &= report(3, "front convergence", &front_convergence(&runs));
    ok &= report(4, "hypervolume quality", &hypervolume_quality(&runs));
    ok &= report(5, "determinism", &determinism(&runs, &mut ledger));
    ok &= report(6, "zdt6 stochastic switch", &zdt6_switch(&mut ledger));
    ok &= report(7, "gradient cost ratio", &gradient_cost_ratio());
    gradient_budget_runs(&mut ledger);
    ok &= report(8, "analytic jacobians", &jacobians());
    ok &= report(9, "budget law", &budget_law(&ledger));

    if ok {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: one or more criteria failed");
        ExitCode::FAILURE
    }
}
