//! Repeated runs, percentile tables and the gradient-mode cost comparison.
//!
//! Warm-up evaluations count against the budget like every other call.
//! Per-boundary percentiles use carry-forward: each run contributes its latest
//! snapshot taken at or before the boundary. A boundary is reported only once
//! every run has reported at least one point.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::boxmin::GradientMode;
use crate::error::{Error, Result};
use crate::h2ma::{run, H2maConfig, RunStats, RunTrace};
use crate::hypervolume::hypervolume;
use crate::moo::ObjectiveVector;
use crate::zdt::{Zdt, ZdtKind, DEFAULT_DIM};

pub const PERCENTILES: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ZdtKind,
    pub n: usize,
    pub budget: u64,
    pub runs: usize,
    pub trace_interval: u64,
    pub gradient_mode: GradientMode,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ZdtKind::Zdt1,
            n: DEFAULT_DIM,
            budget: 20_000,
            runs: 100,
            trace_interval: 2_000,
            gradient_mode: GradientMode::Numeric,
            base_seed: 0,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.trace_interval == 0 || !self.budget.is_multiple_of(self.trace_interval) {
            return bad("trace interval must divide the budget");
        }
        if self.workers == Some(0) {
            return bad("worker count must be positive");
        }
        Ok(())
    }

    fn run_config(&self, seed: u64) -> H2maConfig {
        H2maConfig {
            budget: self.budget,
            gradient_mode: self.gradient_mode,
            seed,
            trace_interval: Some(self.trace_interval),
            ..H2maConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Hypervolume,
    PDistance,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Hypervolume => "hypervolume",
            Metric::PDistance => "p_distance",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PercentileRow {
    pub evals: u64,
    pub metric: Metric,
    /// Values at [`PERCENTILES`].
    pub values: [f64; 5],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<PercentileRow>,
    /// One trace per run, in seed order.
    pub traces: Vec<RunTrace>,
    pub stats: Vec<RunStats>,
}

/// Percentile `p` of ascending `sorted`, interpolating linearly at rank
/// `p·(k−1)/100`.
///
/// # Panics
///
/// Panics on an empty slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// The five reported percentiles of `values`, in any order.
///
/// ```
/// let p = h2ma::harness::percentiles(&[5.0, 1.0, 4.0, 2.0, 3.0]);
/// assert_eq!(p, [1.0, 2.0, 3.0, 4.0, 5.0]);
/// ```
pub fn percentiles(values: &[f64]) -> [f64; 5] {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    PERCENTILES.map(|p| percentile(&sorted, p))
}

/// Percentile rows at every multiple of `interval` up to `limit`.
pub fn aggregate(traces: &[RunTrace], interval: u64, limit: u64) -> Vec<PercentileRow> {
    let mut rows = Vec::new();
    if traces.is_empty() {
        return rows;
    }
    let mut boundary = interval;
    while boundary <= limit {
        let snaps: Option<Vec<_>> = traces.iter().map(|t| t.at(boundary)).collect();
        if let Some(snaps) = snaps {
            let hv: Vec<f64> = snaps.iter().map(|s| s.hypervolume).collect();
            rows.push(PercentileRow {
                evals: boundary,
                metric: Metric::Hypervolume,
                values: percentiles(&hv),
            });
            let pd: Option<Vec<f64>> = snaps.iter().map(|s| s.p_distance).collect();
            if let Some(pd) = pd {
                rows.push(PercentileRow {
                    evals: boundary,
                    metric: Metric::PDistance,
                    values: percentiles(&pd),
                });
            }
        }
        boundary += interval;
    }
    rows
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(job))
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}"))),
    }
}

/// Runs `config.runs` independent optimizations with seeds
/// `base_seed + i` and aggregates their traces.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let problem = Zdt::new(config.problem, config.n)?;
    let outcomes = in_pool(config.workers, || {
        (0..config.runs)
            .into_par_iter()
            .map(|i| run(&problem, &config.run_config(config.base_seed + i as u64)))
            .collect::<Result<Vec<_>>>()
    })??;
    let (traces, stats): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.trace, o.stats)).unzip();
    Ok(ExperimentResult {
        rows: aggregate(&traces, config.trace_interval, config.budget),
        config: config.clone(),
        traces,
        stats,
    })
}

fn percentile_csv<'a>(rows: impl Iterator<Item = &'a PercentileRow>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["evals", "metric", "p0", "p25", "p50", "p75", "p100"])?;
    for r in rows {
        let mut rec = vec![r.evals.to_string(), r.metric.as_str().to_string()];
        rec.extend(r.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `<problem>_<metric>.csv` for each metric and a combined
/// `percentiles.csv` into `dir`, returning the paths written. Nothing is
/// written if rendering fails.
pub fn write_percentiles(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let render_err = |e: csv::Error| Error::Parse {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let mut files = Vec::new();
    for metric in [Metric::Hypervolume, Metric::PDistance] {
        let body = percentile_csv(result.rows.iter().filter(|r| r.metric == metric)).map_err(render_err)?;
        files.push((dir.join(format!("{}_{}.csv", result.config.problem, metric)), body));
    }
    files.push((dir.join("percentiles.csv"), percentile_csv(result.rows.iter()).map_err(render_err)?));

    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (path, body) in files {
        fs::write(&path, body).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Evaluation counts each gradient mode needed to first reach `hypervolume`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRow {
    pub hypervolume: f64,
    pub evals_numeric: u64,
    pub evals_analytic: u64,
    pub ratio: f64,
}

/// Pairs the first-crossing evaluation counts of two traces at every
/// hypervolume level both reach. Levels are the snapshot values of either
/// trace.
pub fn pair_levels(numeric: &RunTrace, analytic: &RunTrace) -> Vec<CostRow> {
    let reach = match (numeric.last(), analytic.last()) {
        (Some(a), Some(b)) => a.hypervolume.min(b.hypervolume),
        _ => return Vec::new(),
    };
    let mut levels: Vec<f64> = numeric
        .snapshots()
        .iter()
        .chain(analytic.snapshots())
        .map(|s| s.hypervolume)
        .filter(|&h| h <= reach)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .into_iter()
        .filter_map(|h| {
            let en = numeric.first_reaching(h)?;
            let ea = analytic.first_reaching(h)?;
            Some(CostRow {
                hypervolume: h,
                evals_numeric: en,
                evals_analytic: ea,
                ratio: en as f64 / ea as f64,
            })
        })
        .collect()
}

/// Runs once per gradient mode with the same seed and pairs the traces.
pub fn compare_gradient_modes(problem: ZdtKind, n: usize, budget: u64, seed: u64) -> Result<Vec<CostRow>> {
    if problem == ZdtKind::Zdt6 {
        return Err(Error::InvalidConfig(
            "gradient comparison is defined for zdt1 to zdt4".into(),
        ));
    }
    let zdt = Zdt::new(problem, n)?;
    let traces = [GradientMode::Numeric, GradientMode::Analytic].map(|mode| {
        run(
            &zdt,
            &H2maConfig {
                budget,
                gradient_mode: mode,
                seed,
                ..H2maConfig::default()
            },
        )
        .map(|o| o.trace)
    });
    let [numeric, analytic] = traces;
    Ok(pair_levels(&numeric?, &analytic?))
}

/// Median of the cost ratios, or `None` if there are no rows.
pub fn median_ratio(rows: &[CostRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Some(percentiles(&ratios)[2])
}

pub fn cost_csv(rows: &[CostRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hypervolume", "evals_numeric", "evals_analytic", "ratio"])?;
    for r in rows {
        w.write_record([
            r.hypervolume.to_string(),
            r.evals_numeric.to_string(),
            r.evals_analytic.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads bi-objective points from CSV. A header naming `f_1` and `f_2` selects
/// those columns (so archive dumps work as-is); otherwise every row must hold
/// exactly two numbers.
pub fn read_points(path: &Path) -> Result<Vec<ObjectiveVector>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(format!("{other:?}")),
        })?;
    let mut columns: Option<(usize, usize)> = None;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if columns.is_none() && record.iter().any(|f| f.parse::<f64>().is_err()) {
            let find = |name: &str| record.iter().position(|f| f == name);
            match (find("f_1"), find("f_2")) {
                (Some(a), Some(b)) if line == 0 => {
                    columns = Some((a, b));
                    continue;
                }
                _ => return Err(parse_err(format!("line {}: expected two numbers or an f_1,f_2 header", line + 1))),
            }
        }
        let (a, b) = *columns.get_or_insert((0, 1));
        if columns == Some((0, 1)) && record.len() != 2 && line == 0 {
            return Err(parse_err(format!("line {}: expected two columns", line + 1)));
        }
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| parse_err(format!("line {}: bad value in column {}", line + 1, i + 1)))
        };
        points.push(ObjectiveVector::pair(field(a)?, field(b)?).map_err(|e| parse_err(format!("line {}: {e}", line + 1)))?);
    }
    Ok(points)
}

/// Hypervolume of the points in a CSV file; an empty file gives zero.
pub fn hv_of_file(path: &Path, nadir: &ObjectiveVector) -> Result<f64> {
    let points = read_points(path)?;
    hypervolume(&points, nadir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::h2ma::Snapshot;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn trace(points: &[(u64, f64)]) -> RunTrace {
        let mut t = RunTrace::new();
        for &(e, h) in points {
            t.record(Snapshot {
                evaluations: e,
                hypervolume: h,
                p_distance: Some(h / 10.0),
                points: 1,
            });
        }
        t
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(percentiles(&[7.0]), [7.0; 5]);
        let p = percentiles(&[0.0, 10.0]);
        assert_eq!(p, [0.0, 2.5, 5.0, 7.5, 10.0]);
    }

    proptest! {
        #[test]
        fn aggregation_is_order_invariant(
            hvs in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 1..5), 1..8),
            seed in any::<u64>(),
        ) {
            let traces: Vec<RunTrace> = hvs.iter().map(|run| {
                let mut acc = 0.0;
                let pts: Vec<(u64, f64)> = run.iter().enumerate().map(|(i, h)| {
                    acc += h;
                    (50 + 170 * i as u64, acc)
                }).collect();
                trace(&pts)
            }).collect();
            let mut shuffled = traces.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(aggregate(&traces, 100, 1000), aggregate(&shuffled, 100, 1000));
        }
    }

    #[test]
    fn carry_forward_boundaries() {
        let a = trace(&[(50, 1.0), (250, 2.0)]);
        let b = trace(&[(150, 3.0)]);
        let rows = aggregate(&[a, b], 100, 400);
        let hv: Vec<(u64, [f64; 5])> = rows
            .iter()
            .filter(|r| r.metric == Metric::Hypervolume)
            .map(|r| (r.evals, r.values))
            .collect();
        assert_eq!(hv[0].0, 200);
        assert_eq!(hv[0].1[0], 1.0);
        assert_eq!(hv[0].1[4], 3.0);
        assert_eq!(hv.last().unwrap().0, 400);
        assert_eq!(hv.last().unwrap().1[0], 2.0);
    }

    #[test]
    fn pairing_rule() {
        let numeric = trace(&[(100, 1.0), (300, 2.0), (600, 3.0)]);
        let analytic = trace(&[(10, 1.5), (20, 2.5)]);
        let rows = pair_levels(&numeric, &analytic);
        let levels: Vec<f64> = rows.iter().map(|r| r.hypervolume).collect();
        assert_eq!(levels, vec![1.0, 1.5, 2.0, 2.5]);
        assert_eq!(rows[1].evals_numeric, 300);
        assert_eq!(rows[1].evals_analytic, 10);
        assert_eq!(rows[1].ratio, 30.0);
        assert_eq!(rows[3].evals_analytic, 20);
        assert!(pair_levels(&numeric, &RunTrace::new()).is_empty());
    }

    #[test]
    fn zdt6_comparison_rejected() {
        assert!(compare_gradient_modes(ZdtKind::Zdt6, 30, 1000, 0).is_err());
    }

    #[test]
    fn config_checks() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig { runs: 0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { trace_interval: 3000, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { workers: Some(0), ..ok }.validate().is_err());
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let config = ExperimentConfig {
            problem: ZdtKind::Zdt1,
            budget: 2_000,
            runs: 3,
            trace_interval: 500,
            workers: Some(2),
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&ExperimentConfig { workers: Some(1), ..config }).unwrap();
        assert_eq!(a.rows, b.rows);
        // deterministic phase only: runs coincide
        for r in &a.rows {
            assert!(r.values.iter().all(|v| *v == r.values[0]), "{r:?}");
        }
        let dir = tempfile::tempdir().unwrap();
        let paths = write_percentiles(&a, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let combined = fs::read_to_string(dir.path().join("percentiles.csv")).unwrap();
        assert!(combined.starts_with("evals,metric,p0,p25,p50,p75,p100\n"));
        let hv = fs::read_to_string(dir.path().join("zdt1_hypervolume.csv")).unwrap();
        assert!(hv.lines().skip(1).all(|l| l.contains(",hypervolume,")));
    }

    fn file_with(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn hv_files() {
        let z = ObjectiveVector::pair(1.0, 1.0).unwrap();
        assert_eq!(hv_of_file(file_with("0,0\n").path(), &z).unwrap(), 1.0);
        let staircase = file_with("0.25,0.75\n0.5,0.5\n0.75,0.25\n");
        assert!((hv_of_file(staircase.path(), &z).unwrap() - 0.375).abs() < 1e-12);
        assert_eq!(hv_of_file(file_with("").path(), &z).unwrap(), 0.0);
        let dump = file_with("t,x_1,f_1,f_2,g,phase\n0,0.1,0.5,0.5,1,deterministic\n1,0.2,0.6,0.9,1,deterministic\n");
        assert!((hv_of_file(dump.path(), &z).unwrap() - 0.25).abs() < 1e-12);
        assert!(hv_of_file(file_with("a,b\n1,2\n").path(), &z).is_err());
        assert!(hv_of_file(file_with("1,2,3\n").path(), &z).is_err());
        assert!(matches!(
            hv_of_file(Path::new("/nonexistent/points.csv"), &z),
            Err(Error::Io { .. })
        ));
    }
}
