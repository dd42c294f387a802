use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use h2ma::boxmin::GradientMode;
use h2ma::h2ma::{run, write_archive_csv, H2maConfig};
use h2ma::harness::{compare_gradient_modes, cost_csv, hv_of_file, median_ratio, run_experiment, write_percentiles, ExperimentConfig, Metric};
use h2ma::zdt::DEFAULT_DIM;
use h2ma::{ObjectiveVector, Problem, Zdt, ZdtKind};

#[derive(Parser)]
#[command(name = "h2ma", version, about = "Hypervolume maximization on the ZDT problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated runs with percentile tables every trace interval.
    Bench(BenchArgs),
    /// Evaluations needed per hypervolume level, numeric vs analytic gradients.
    Gradcmp(GradcmpArgs),
    /// A single run; writes the archive as CSV.
    Run(RunArgs),
    /// Hypervolume of the points in a CSV file.
    Hv(HvArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "zdt1")]
    problem: ZdtKind,
    /// Decision-space dimension.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Function evaluations per run.
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    #[arg(long, alias = "seed", default_value_t = 0)]
    base_seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 2_000)]
    trace_interval: u64,
    #[arg(long, default_value = "numeric")]
    gradient_mode: GradientMode,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for the percentile CSVs.
    #[arg(long, default_value = "results")]
    output: PathBuf,
}

#[derive(Args)]
struct GradcmpArgs {
    #[command(flatten)]
    common: Common,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "numeric")]
    gradient_mode: GradientMode,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HvArgs {
    /// CSV with `f_1,f_2` columns or two bare numeric columns.
    file: PathBuf,
    /// Take the nadir point from this problem.
    #[arg(long, conflicts_with = "nadir", required_unless_present = "nadir")]
    problem: Option<ZdtKind>,
    /// Dimension used for the problem's nadir (it depends on `n` for zdt4).
    #[arg(long, default_value_t = DEFAULT_DIM)]
    n: usize,
    /// Explicit nadir point, as `z1,z2`.
    #[arg(long, value_parser = parse_nadir, allow_hyphen_values = true)]
    nadir: Option<ObjectiveVector>,
}

fn parse_nadir(s: &str) -> Result<ObjectiveVector, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    ObjectiveVector::pair(num(a)?, num(b)?).map_err(|e| e.to_string())
}

// stdout unless a path is given
fn sink(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench(args: BenchArgs) -> Result<()> {
    let config = ExperimentConfig {
        problem: args.common.problem,
        n: args.common.n,
        budget: args.common.budget,
        runs: args.runs,
        trace_interval: args.trace_interval,
        gradient_mode: args.gradient_mode,
        base_seed: args.common.base_seed,
        workers: args.workers,
    };
    let result = run_experiment(&config)?;
    for path in write_percentiles(&result, &args.output)? {
        println!("wrote {}", path.display());
    }
    if let Some(row) = result.rows.iter().rev().find(|r| r.metric == Metric::Hypervolume) {
        println!("hypervolume median at {} evaluations: {}", row.evals, row.values[2]);
    }
    Ok(())
}

fn gradcmp(args: GradcmpArgs) -> Result<()> {
    let c = &args.common;
    let rows = compare_gradient_modes(c.problem, c.n, c.budget, c.base_seed)?;
    let mut out = sink(&args.output)?;
    out.write_all(cost_csv(&rows)?.as_bytes())?;
    out.flush()?;
    match median_ratio(&rows) {
        Some(m) => eprintln!("{} levels, median ratio {m:.2}", rows.len()),
        None => eprintln!("no hypervolume level was reached by both modes"),
    }
    Ok(())
}

fn single_run(args: RunArgs) -> Result<()> {
    let c = &args.common;
    let zdt = Zdt::new(c.problem, c.n)?;
    let config = H2maConfig {
        budget: c.budget,
        gradient_mode: args.gradient_mode,
        seed: c.base_seed,
        ..H2maConfig::default()
    };
    let outcome = run(&zdt, &config)?;
    let mut out = sink(&args.output)?;
    write_archive_csv(&outcome.archive, zdt.dim(), &mut out)?;
    out.flush()?;
    let front = outcome.archive.front();
    eprintln!(
        "{} points, hypervolume {}, p-distance {}, {} evaluations",
        front.len(),
        outcome.final_hypervolume(),
        if front.is_empty() { f64::NAN } else { zdt.p_distance(front.iter().copied()) },
        outcome.stats.evaluations
    );
    Ok(())
}

fn hv(args: HvArgs) -> Result<()> {
    let nadir = match (args.nadir, args.problem) {
        (Some(z), _) => z,
        (None, Some(kind)) => Zdt::new(kind, args.n)?.nadir().clone(),
        (None, None) => bail!("either --problem or --nadir is required"),
    };
    println!("{}", hv_of_file(&args.file, &nadir)?);
    Ok(())
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Bench(a) => bench(a),
        Command::Gradcmp(a) => gradcmp(a),
        Command::Run(a) => single_run(a),
        Command::Hv(a) => hv(a),
    };
    let Err(e) = outcome else {
        return ExitCode::SUCCESS;
    };
    let top = e.to_string();
    eprintln!("error: {top}");
    for cause in e.chain().skip(1).map(ToString::to_string) {
        if !top.contains(&cause) {
            eprintln!("  caused by: {cause}");
        }
    }
    ExitCode::FAILURE
}
