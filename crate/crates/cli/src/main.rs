use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use primate::chains::{enumerate_star_chains, AdditionChain};
use primate::optimizer::{optimize_plan, sweep, Method, OptimizeConfig, SweepPoint, SCHEMA_VERSION};
use primate::verify::{run_all, CheckResult, VerifyConfig, MAX_ORACLE_N};

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "PRIMATE_THREADS";

const CSV_HEADER: [&str; 7] = ["N", "s_target", "method", "chain", "nu", "single_pass_prob", "plan_json"];

#[derive(Parser, Debug)]
#[command(name = "primate", version, about = "Photon costs of GHZ-like states from primate fusion and bleeding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the closed forms against the exact Fock-space oracle.
    Verify(VerifyArgs),
    /// Find the cheapest generation plan for one target.
    Optimize(OptimizeArgs),
    /// Optimize over a grid of qubit counts and targets, writing CSV.
    Sweep(SweepArgs),
    /// List star addition chains for a target size.
    Chains(ChainsArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest operand primate size (at most 3).
    #[arg(long, default_value_t = 2)]
    max_n: u32,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Pin elementary primates to s = 1/2 (except one solved leaf).
    #[arg(long)]
    fixed_primates: bool,
    #[arg(long, default_value_t = OptimizeConfig::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = OptimizeConfig::default().max_iters)]
    max_iters: u64,
    /// Extra chain length beyond the minimum to search.
    #[arg(long, default_value_t = OptimizeConfig::default().chain_slack)]
    chain_slack: usize,
}

impl SearchArgs {
    fn config(&self) -> OptimizeConfig {
        OptimizeConfig {
            restarts: self.restarts,
            seed: self.seed,
            max_iters: self.max_iters,
            fixed_primates: self.fixed_primates,
            chain_slack: self.chain_slack,
            ..OptimizeConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    qubits: u32,
    #[arg(long)]
    target_s: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// Inclusive qubit range `a..b`.
    #[arg(long, value_parser = parse_qubit_range)]
    qubits: QubitRange,
    /// Target grid `start:stop:step`, stop included.
    #[arg(long = "s", value_parser = parse_s_grid)]
    s_grid: SGrid,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ChainsArgs {
    #[arg(long)]
    n: u32,
    /// Longest chain to list, in terms; defaults to the minimum plus 2.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct QubitRange(Vec<u32>);

#[derive(Clone, Debug)]
struct SGrid(Vec<f64>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_qubit_range(s: &str) -> Result<QubitRange, String> {
    let (a, b) = s.split_once("..").ok_or("expected an inclusive range `a..b`")?;
    let a: u32 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let b: u32 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(QubitRange((a..=b).collect()))
}

fn parse_s_grid(s: &str) -> Result<SGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err("expected `start:stop:step`".into());
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad number `{x}`: {e}"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(format!("invalid grid {start}:{stop}:{step}"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Round away accumulated float error so that 0.1:0.9:0.1 gives 0.3, not
    // 0.30000000000000004.
    let grid = (0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect();
    Ok(SGrid(grid))
}

/// Failure that maps to exit code 1 rather than a usage error.
#[derive(Debug)]
struct CheckFailure(String);

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailure>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={raw} is not a thread count"))?;
    if threads == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Chains(args) => cmd_chains(args),
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> anyhow::Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    schema_version: u32,
    config: VerifyConfig,
    passed: bool,
    checks: Vec<CheckResult>,
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<()> {
    let config = VerifyConfig {
        max_n: args.max_n,
        trials: args.trials,
        tol: args.tol,
        seed: args.seed,
    };
    if args.max_n > MAX_ORACLE_N {
        bail!("--max-n {} exceeds {MAX_ORACLE_N}; the Fock oracle is only run on small states", args.max_n);
    }
    let checks = run_all(&config)?;
    for c in &checks {
        eprintln!(
            "{} {:<28} trials={:<5} max_error={:.3e} tol={:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.trials,
            c.max_error,
            c.tol
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    write_json(
        args.out.as_ref(),
        &VerifyReport {
            schema_version: SCHEMA_VERSION,
            config,
            passed,
            checks,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CheckFailure("verification failed".into()).into())
    }
}

fn cmd_optimize(args: OptimizeArgs) -> anyhow::Result<()> {
    if !(args.target_s > 0.0 && args.target_s < 1.0) {
        bail!(
            "--target-s {} is degenerate: the target must satisfy 0 < s < 1, since s = 0 and s = 1 are product states",
            args.target_s
        );
    }
    let report = optimize_plan(args.qubits, args.target_s, args.search.method, &args.search.config())?;
    write_json(args.out.as_ref(), &report)
}

fn csv_row(point: &SweepPoint) -> anyhow::Result<[String; 7]> {
    let head = [point.qubits.to_string(), point.target_s.to_string(), point.method.to_string()];
    let tail = match &point.result {
        Ok(r) => [
            r.plan.chain.display_terms(),
            r.nu.to_string(),
            r.single_pass_prob.to_string(),
            serde_json::to_string(r)?,
        ],
        Err(e) => [
            String::new(),
            String::new(),
            String::new(),
            serde_json::to_string(&serde_json::json!({ "error": e }))?,
        ],
    };
    let [a, b, c] = head;
    let [d, e, f, g] = tail;
    Ok([a, b, c, d, e, f, g])
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let points = sweep(&args.qubits.0, &args.s_grid.0, args.search.method, &args.search.config())?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output(args.out.as_ref())?);
    w.write_record(CSV_HEADER)?;
    for p in &points {
        w.write_record(csv_row(p)?)?;
    }
    w.flush()?;
    let failed = points.iter().filter(|p| p.result.is_err()).count();
    if failed > 0 {
        return Err(CheckFailure(format!("{failed} of {} sweep points failed", points.len())).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct ChainListing {
    n: u32,
    max_len: Option<usize>,
    count: usize,
    chains: Vec<AdditionChain>,
}

fn cmd_chains(args: ChainsArgs) -> anyhow::Result<()> {
    let chains = enumerate_star_chains(args.n, args.max_len)?;
    write_json(
        args.out.as_ref(),
        &ChainListing {
            n: args.n,
            max_len: args.max_len,
            count: chains.len(),
            chains,
        },
    )
}
