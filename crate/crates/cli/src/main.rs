//! `oap-scale`: preprocess assignment problems by diagonal scaling and trace `x_ij(p)`.

mod report;
mod trace;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oap_scaling::instances::{generate, Family, InstanceSpec};
use oap_scaling::Method;

#[derive(Parser)]
#[command(name = "oap-scale", version, about = "Diagonal-scaling preprocessing for optimal assignment problems")]
struct Cli {
    /// Worker threads for the data-parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scale, threshold and solve the reduced problem; prints a JSON report.
    Preprocess(PreprocessArgs),
    /// Emit `x_ij(p)` over a grid of `p` as CSV.
    Trace(TraceArgs),
}

#[derive(Args, Clone)]
pub struct InstanceArgs {
    /// Generator family: cauchy, lotkin, minij, pei, hilbert, random_uniform, euclidean3d.
    #[arg(long, conflicts_with = "mm", required_unless_present = "mm")]
    family: Option<Family>,
    /// Matrix Market input file.
    #[arg(long)]
    mm: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Diagonal shift for `pei`.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Use magnitudes of negative file entries.
    #[arg(long)]
    abs: bool,
}

impl InstanceArgs {
    fn spec(&self) -> InstanceSpec {
        match (&self.mm, self.family) {
            (Some(path), _) => InstanceSpec::file(path).with_abs(self.abs),
            (None, Some(f)) => InstanceSpec::new(f, self.n).with_seed(self.seed).with_alpha(self.alpha),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// sinkhorn, log-sinkhorn, newton or deformed.
    #[arg(long, default_value = "sinkhorn")]
    method: Method,
    #[arg(long, default_value_t = 100.0)]
    p: f64,
    /// Coefficient `a` of the deformed schedule `p_m = a·ln(m+1)` (default 1.9/ln θ).
    #[arg(long)]
    schedule_a: Option<f64>,
    /// Stopping tolerance (default 1/n).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Deletion threshold (default 1/n).
    #[arg(long)]
    threshold: Option<f64>,
    /// Iteration cap (default 10·n + 10000).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print an aligned table to standard error.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
pub struct TraceArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// 1-based entries, e.g. `1,2;3,3`.
    #[arg(long, default_value = "1,2")]
    trace_entries: String,
    /// Comma list and/or ranges `start:stop[:step]`, e.g. `1:30` or `1,2,5,10:100:10`.
    #[arg(long, default_value = "1:30")]
    p_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("thread pool already initialized")?;
    }
    match cli.command {
        Command::Preprocess(args) => {
            let spec = args.instance.spec();
            let a = generate::<f64>(&spec).with_context(|| format!("cannot build {}", spec.describe()))?;
            let rep = report::preprocess(&spec, &a, &args)?;
            let mut w = output(&args.out)?;
            serde_json::to_writer(&mut w, &rep)?;
            writeln!(w)?;
            if args.table {
                eprint!("{}", rep.table());
            }
            Ok(ExitCode::from(rep.exit_code()))
        }
        Command::Trace(args) => {
            let spec = args.instance.spec();
            let a = generate::<f64>(&spec).with_context(|| format!("cannot build {}", spec.describe()))?;
            let entries = trace::parse_entries(&args.trace_entries)?;
            let grid = trace::parse_grid(&args.p_grid)?;
            let rows = trace::trace(&a, &entries, &grid)?;
            let mut w = output(&args.out)?;
            trace::write_csv(&mut w, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
