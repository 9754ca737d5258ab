use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dflp_core::bench::{
    compute_metrics, generate_instance, read_csv, read_instance, read_policy, read_records,
    run_benchmark, run_method, write_instance_with_meta, write_policy, CaptureRecord, DemandMode,
    GenConfig, Method, MetricsRow, OracleRecord, RelaxationRecord, RewardMode, RunContext, Suite,
};
use dflp_core::benders::CutMode;
use dflp_core::error::Error;
use dflp_core::model::evaluate_policy;

#[derive(Parser)]
#[command(name = "dflp", version, about = "Dynamic facility location with accumulating demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded benchmark instance.
    Gen {
        #[arg(long = "T")]
        periods: usize,
        #[arg(long = "I")]
        locations: usize,
        #[arg(long = "Jmult", default_value_t = 1.0)]
        customer_multiplier: f64,
        #[arg(long = "h", default_value_t = 1)]
        facilities: usize,
        #[arg(long = "C")]
        consideration: f64,
        #[arg(long, default_value = "identical")]
        rewards: RewardMode,
        #[arg(long, default_value = "constant")]
        demand: DemandMode,
        #[arg(long, default_value_t = 0.0)]
        penalty: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Solve an instance with one method.
    Solve {
        #[arg(long)]
        method: Method,
        #[arg(long = "time-limit")]
        time_limit: Option<f64>,
        #[arg(short = 'i', long = "instance")]
        instance: PathBuf,
        #[arg(long = "cuts", default_value = "lp")]
        cuts: CutMode,
        /// Seed of the random baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the returned policy to this file.
        #[arg(long = "policy-out")]
        policy_out: Option<PathBuf>,
    },
    /// Evaluate a policy file on an instance.
    Eval {
        #[arg(short = 'i', long = "instance")]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Run a benchmark suite.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Compute metrics from run records.
    Compare {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
    },
}

/// Time limit reached before any feasible policy was found.
#[derive(Debug)]
struct NoIncumbent;

impl std::fmt::Display for NoIncumbent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("time limit reached without a feasible policy")
    }
}

impl std::error::Error for NoIncumbent {}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn gen(cfg: GenConfig, out: &Path) -> Result<()> {
    let inst = generate_instance(&cfg)?;
    write_instance_with_meta(&inst, Some(&cfg), out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("{} -> {}", cfg.instance_id(), out.display());
    Ok(())
}

fn solve(
    method: Method,
    ctx: RunContext,
    instance: &Path,
    policy_out: Option<&Path>,
) -> Result<()> {
    let inst = read_instance(instance)?;
    let outcome = run_method(&inst, method, &ctx)?;
    println!("status: {}", outcome.status);
    println!("objective: {}", fmt_opt(outcome.objective));
    println!("bound: {}", fmt_opt(outcome.bound));
    println!("gap: {}", fmt_opt(outcome.gap));
    println!("time_ms: {:.3}", outcome.time_ms);
    if let Some(nodes) = outcome.nodes {
        println!("nodes: {nodes}");
    }
    if let Some(msg) = &outcome.message {
        println!("note: {msg}");
    }
    match &outcome.policy {
        Some(policy) => {
            println!("policy: {policy}");
            if let Some(path) = policy_out {
                write_policy(policy, path)?;
            }
        }
        None if outcome.status == "time_limit" => return Err(NoIncumbent.into()),
        None if outcome.status == "unsupported" => {
            bail!(outcome.message.unwrap_or_default())
        }
        None => bail!("no policy returned (status {})", outcome.status),
    }
    Ok(())
}

fn eval(instance: &Path, policy: &Path) -> Result<()> {
    let inst = read_instance(instance)?;
    let policy = read_policy(policy)?;
    let res = evaluate_policy(&inst, &policy)?;
    println!("profit: {}", res.profit);
    for (k, n) in res.capture_histogram().iter().enumerate() {
        println!("captures {k}: {n}");
    }
    Ok(())
}

fn bench(suite: &Path, out: &Path, parallelism: usize) -> Result<()> {
    let reader = BufReader::new(File::open(suite).with_context(|| format!("opening {}", suite.display()))?);
    let suite: Suite =
        serde_json::from_reader(reader).with_context(|| format!("parsing suite {}", suite.display()))?;
    std::fs::create_dir_all(out)?;
    let summary = run_benchmark(&suite, out, parallelism)?;
    println!(
        "{} instances, {} runs, {} already recorded; reports in {}",
        summary.instances,
        summary.runs,
        summary.skipped,
        out.display()
    );
    Ok(())
}

fn side_file<T: for<'de> serde::Deserialize<'de>>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    if path.exists() {
        Ok(read_csv(&path)?)
    } else {
        Ok(Vec::new())
    }
}

fn compare(records: &Path, oracle: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let runs = read_records(records)?;
    let oracle: Option<BTreeMap<String, f64>> = oracle
        .map(|p| -> Result<_> {
            let rows: Vec<OracleRecord> = read_csv(p)?;
            Ok(rows.into_iter().map(|r| (r.instance_id, r.objective)).collect())
        })
        .transpose()?;
    let dir = records.parent().unwrap_or(Path::new("."));
    let relaxations: Vec<RelaxationRecord> = side_file(dir, "relaxations.csv")?;
    let captures: Vec<CaptureRecord> = side_file(dir, "captures.csv")?;
    let rows: Vec<MetricsRow> = compute_metrics(&runs, oracle.as_ref(), &relaxations, &captures);
    match out {
        Some(path) => dflp_core::bench::write_csv(&rows, path)?,
        None => {
            let mut writer = csv::Writer::from_writer(io::stdout());
            for row in &rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            periods,
            locations,
            customer_multiplier,
            facilities,
            consideration,
            rewards,
            demand,
            penalty,
            seed,
            out,
        } => gen(
            GenConfig {
                num_periods: periods,
                num_locations: locations,
                customer_multiplier,
                facilities_per_period: facilities,
                consideration,
                rewards,
                demand,
                penalty,
                seed,
            },
            &out,
        ),
        Command::Solve {
            method,
            time_limit,
            instance,
            cuts,
            seed,
            policy_out,
        } => {
            if let Some(t) = time_limit {
                if !(t.is_finite() && t > 0.0) {
                    bail!(Error::Config(format!("time limit {t} must be positive")));
                }
            }
            let ctx = RunContext {
                time_limit: time_limit.map(Duration::from_secs_f64),
                seed,
                cut_mode: cuts,
            };
            solve(method, ctx, &instance, policy_out.as_deref())
        }
        Command::Eval { instance, policy } => eval(&instance, &policy),
        Command::Bench {
            suite,
            out,
            parallelism,
        } => bench(&suite, &out, parallelism),
        Command::Compare {
            records,
            oracle,
            out,
        } => compare(&records, oracle.as_deref(), out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NoIncumbent>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Validation(_) | Error::InfeasiblePolicy(_) | Error::Contract(_) | Error::Parse { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
