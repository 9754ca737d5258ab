//! Runs every method of a suite on every generated instance.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use dflp_engine::{MipConfig, MipSolution, Status};
use serde::{Deserialize, Serialize};

use crate::bench::generate::{generate_instance, DemandMode, GenConfig, RewardMode};
use crate::bench::io::{read_csv, write_csv, write_instance_with_meta, RunRecord};
use crate::bench::metrics::{compute_metrics, CaptureRecord, RelaxationRecord};
use crate::benders::{solve_benders, BendersConfig, CutMode};
use crate::error::{Error, Result};
use crate::exact::{brute_force, solve_loyal_assignment, BruteForceLimits};
use crate::formulations::{build_di, build_si_linearized, solve_formulation};
use crate::heuristics::{backward_greedy, dflp_heuristic, forward_greedy, random_policy, Subsolver};
use crate::model::{evaluate_policy, Instance, LocationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dif,
    Sif,
    Sbd,
    Abd,
    Bgh,
    Fgh,
    Dbh,
    Rnd,
    Brute,
    Loyal,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Dif,
        Method::Sif,
        Method::Sbd,
        Method::Abd,
        Method::Bgh,
        Method::Fgh,
        Method::Dbh,
        Method::Rnd,
        Method::Brute,
        Method::Loyal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dif => "dif",
            Method::Sif => "sif",
            Method::Sbd => "sbd",
            Method::Abd => "abd",
            Method::Bgh => "bgh",
            Method::Fgh => "fgh",
            Method::Dbh => "dbh",
            Method::Rnd => "rnd",
            Method::Brute => "brute",
            Method::Loyal => "loyal",
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            Method::Dif | Method::Sif | Method::Sbd | Method::Abd | Method::Brute | Method::Loyal
        )
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    pub time_limit: Option<Duration>,
    /// Seed of the random baseline.
    pub seed: u64,
    /// Cut generator of the `sbd` method.
    pub cut_mode: CutMode,
}

impl Default for RunContext {
    fn default() -> Self {
        RunContext {
            time_limit: None,
            seed: 0,
            cut_mode: CutMode::Lp,
        }
    }
}

/// Result of one method on one instance, with the objective re-evaluated
/// from the returned policy.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub policy: Option<LocationPolicy>,
    pub time_ms: f64,
    /// Root relaxation optimum (formulation methods only).
    pub relaxation: Option<f64>,
    /// Branch-and-bound nodes explored (program-based methods only).
    pub nodes: Option<usize>,
    pub message: Option<String>,
}

impl MethodOutcome {
    fn unsupported(message: String, time_ms: f64) -> Self {
        MethodOutcome {
            status: "unsupported".into(),
            objective: None,
            bound: None,
            gap: None,
            policy: None,
            time_ms,
            relaxation: None,
            nodes: None,
            message: Some(message),
        }
    }
}

fn verified(inst: &Instance, policy: &LocationPolicy, reported: f64) -> Result<f64> {
    let profit = evaluate_policy(inst, policy)?.profit;
    if (profit - reported).abs() > 1e-6 * (1.0 + profit.abs()) {
        return Err(Error::Internal(format!(
            "reported objective {reported} differs from evaluated profit {profit}"
        )));
    }
    Ok(profit)
}

fn from_mip(
    inst: &Instance,
    sol: &MipSolution,
    policy: Option<LocationPolicy>,
    relaxation: Option<f64>,
) -> Result<MethodOutcome> {
    let objective = match &policy {
        Some(p) => Some(verified(inst, p, sol.objective)?),
        None => None,
    };
    Ok(MethodOutcome {
        status: sol.status.as_str().into(),
        objective,
        bound: sol.bound.is_finite().then_some(sol.bound),
        gap: policy.as_ref().map(|_| sol.gap()),
        policy,
        time_ms: 0.0,
        relaxation,
        nodes: Some(sol.nodes),
        message: None,
    })
}

fn heuristic(inst: &Instance, policy: LocationPolicy, profit: f64) -> Result<MethodOutcome> {
    let objective = verified(inst, &policy, profit)?;
    Ok(MethodOutcome {
        status: "feasible".into(),
        objective: Some(objective),
        bound: None,
        gap: None,
        policy: Some(policy),
        time_ms: 0.0,
        relaxation: None,
        nodes: None,
        message: None,
    })
}

fn exact(inst: &Instance, policy: LocationPolicy, profit: f64) -> Result<MethodOutcome> {
    let objective = verified(inst, &policy, profit)?;
    Ok(MethodOutcome {
        status: Status::Optimal.as_str().into(),
        objective: Some(objective),
        bound: Some(objective),
        gap: Some(0.0),
        policy: Some(policy),
        time_ms: 0.0,
        relaxation: None,
        nodes: None,
        message: None,
    })
}

fn dispatch(inst: &Instance, method: Method, ctx: &RunContext) -> Result<MethodOutcome> {
    let mip_config = MipConfig {
        time_limit: ctx.time_limit,
    };
    match method {
        Method::Dif | Method::Sif => {
            let art = if method == Method::Dif {
                build_di(inst)?
            } else {
                build_si_linearized(inst)?
            };
            let (sol, policy) = solve_formulation(&art, inst, &mip_config)?;
            let relaxation = sol.root_bound.is_finite().then_some(sol.root_bound);
            from_mip(inst, &sol, policy, relaxation)
        }
        Method::Sbd | Method::Abd => {
            let cut_mode = if method == Method::Abd {
                CutMode::Analytical
            } else {
                ctx.cut_mode
            };
            let config = BendersConfig {
                cut_mode,
                time_limit: ctx.time_limit,
                ..Default::default()
            };
            let res = solve_benders(inst, &config)?;
            from_mip(inst, &res.solution, res.policy, None)
        }
        Method::Bgh | Method::Fgh => {
            let subsolver = match Subsolver::for_instance(inst) {
                Subsolver::Mip { .. } => Subsolver::Mip {
                    time_limit: ctx.time_limit,
                },
                s => s,
            };
            let res = if method == Method::Bgh {
                backward_greedy(inst, subsolver)?
            } else {
                forward_greedy(inst, subsolver)?
            };
            heuristic(inst, res.policy, res.profit)
        }
        Method::Dbh => {
            let res = dflp_heuristic(inst, &mip_config)?;
            heuristic(inst, res.policy, res.profit)
        }
        Method::Rnd => {
            let res = random_policy(inst, ctx.seed)?;
            heuristic(inst, res.policy, res.profit)
        }
        Method::Brute => {
            let (policy, profit) = brute_force(inst, BruteForceLimits::default())?;
            exact(inst, policy, profit)
        }
        Method::Loyal => {
            let (policy, profit) = solve_loyal_assignment(inst)?;
            exact(inst, policy, profit)
        }
    }
}

/// Runs one method and measures its wall time. Unmet preconditions are
/// reported as status `unsupported` rather than as errors.
pub fn run_method(inst: &Instance, method: Method, ctx: &RunContext) -> Result<MethodOutcome> {
    let start = Instant::now();
    let outcome = dispatch(inst, method, ctx);
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(mut o) => {
            o.time_ms = time_ms;
            Ok(o)
        }
        Err(e @ (Error::Unsupported(_) | Error::Size { .. })) => {
            Ok(MethodOutcome::unsupported(e.to_string(), time_ms))
        }
        Err(e) => Err(e),
    }
}

fn default_rewards() -> Vec<RewardMode> {
    vec![RewardMode::Identical]
}

fn default_demand() -> Vec<DemandMode> {
    vec![DemandMode::Constant]
}

fn default_penalty() -> Vec<f64> {
    vec![0.0]
}

/// Grid of generator settings, seeds and methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub num_periods: Vec<usize>,
    pub num_locations: Vec<usize>,
    pub customer_multiplier: Vec<f64>,
    pub facilities_per_period: Vec<usize>,
    pub consideration: Vec<f64>,
    #[serde(default = "default_rewards")]
    pub rewards: Vec<RewardMode>,
    #[serde(default = "default_demand")]
    pub demand: Vec<DemandMode>,
    #[serde(default = "default_penalty")]
    pub penalty: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    /// Seconds per solve.
    #[serde(default)]
    pub time_limit: Option<f64>,
    #[serde(default)]
    pub cut_mode: Option<CutMode>,
}

impl Suite {
    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    /// Every grid point, in a fixed nested order.
    pub fn configs(&self) -> Vec<GenConfig> {
        let mut out = Vec::new();
        for &num_periods in &self.num_periods {
            for &num_locations in &self.num_locations {
                for &customer_multiplier in &self.customer_multiplier {
                    for &facilities_per_period in &self.facilities_per_period {
                        for &consideration in &self.consideration {
                            for &rewards in &self.rewards {
                                for &demand in &self.demand {
                                    for &penalty in &self.penalty {
                                        for &seed in &self.seeds {
                                            out.push(GenConfig {
                                                num_periods,
                                                num_locations,
                                                customer_multiplier,
                                                facilities_per_period,
                                                consideration,
                                                rewards,
                                                demand,
                                                penalty,
                                                seed,
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn context(&self, seed: u64) -> RunContext {
        RunContext {
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            seed,
            cut_mode: self.cut_mode.unwrap_or(CutMode::Lp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSummary {
    pub instances: usize,
    pub runs: usize,
    pub skipped: usize,
}

struct TaskResult {
    record: RunRecord,
    captures: Vec<CaptureRecord>,
    relaxation: Option<RelaxationRecord>,
}

fn execute(id: &str, cfg: &GenConfig, inst: &Instance, method: Method, ctx: &RunContext) -> TaskResult {
    let outcome = run_method(inst, method, ctx).unwrap_or_else(|e| {
        log::warn!("{id} / {method}: {e}");
        MethodOutcome {
            status: "error".into(),
            objective: None,
            bound: None,
            gap: None,
            policy: None,
            time_ms: 0.0,
            relaxation: None,
            nodes: None,
            message: Some(e.to_string()),
        }
    });
    if let Some(msg) = &outcome.message {
        log::info!("{id} / {method}: {msg}");
    }
    let captures = outcome
        .policy
        .as_ref()
        .and_then(|p| evaluate_policy(inst, p).ok())
        .map(|eval| {
            eval.capture_histogram()
                .into_iter()
                .enumerate()
                .map(|(captures, customers)| CaptureRecord {
                    instance_id: id.to_string(),
                    method: method.to_string(),
                    captures,
                    customers,
                })
                .collect()
        })
        .unwrap_or_default();
    let relaxation = outcome.relaxation.map(|bound| RelaxationRecord {
        instance_id: id.to_string(),
        method: method.to_string(),
        bound,
    });
    TaskResult {
        record: RunRecord {
            instance_id: id.to_string(),
            method: method.to_string(),
            status: outcome.status,
            objective: outcome.objective,
            bound: outcome.bound,
            gap: outcome.gap,
            time_ms: outcome.time_ms,
            seed: cfg.seed,
        },
        captures,
        relaxation,
    }
}

struct Appender {
    writer: csv::Writer<fs::File>,
}

impl Appender {
    fn open(path: &Path) -> Result<Self> {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(Appender { writer })
    }

    fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| Error::Internal(format!("writing report: {e}")))?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Generates the suite's instances under `out/instances`, runs every
/// pending (instance, method) pair and writes `records.csv`, `captures.csv`,
/// `relaxations.csv` and `metrics.csv` under `out`. Pairs already present in
/// `records.csv` are skipped.
pub fn run_benchmark(suite: &Suite, out: &Path, parallelism: usize) -> Result<BenchSummary> {
    let methods = suite.methods()?;
    let configs = suite.configs();
    for cfg in &configs {
        cfg.validate()?;
    }
    let instances: Vec<(String, GenConfig, Instance)> = configs
        .into_iter()
        .map(|cfg| Ok((cfg.instance_id(), cfg.clone(), generate_instance(&cfg)?)))
        .collect::<Result<_>>()?;
    let inst_dir = out.join("instances");
    fs::create_dir_all(&inst_dir)?;
    for (id, cfg, inst) in &instances {
        write_instance_with_meta(inst, Some(cfg), &inst_dir.join(format!("{id}.json")))?;
    }

    let records_path = out.join("records.csv");
    let done: BTreeSet<(String, String)> = if records_path.exists() {
        read_csv::<RunRecord>(&records_path)?
            .into_iter()
            .map(|r| (r.instance_id, r.method))
            .collect()
    } else {
        BTreeSet::new()
    };
    let mut tasks = Vec::new();
    let mut skipped = 0;
    for (k, (id, _, _)) in instances.iter().enumerate() {
        for &m in &methods {
            if done.contains(&(id.clone(), m.to_string())) {
                skipped += 1;
            } else {
                tasks.push((k, m));
            }
        }
    }

    let mut records = Appender::open(&records_path)?;
    let mut captures = Appender::open(&out.join("captures.csv"))?;
    let mut relaxations = Appender::open(&out.join("relaxations.csv"))?;
    let next = AtomicUsize::new(0);
    let workers = parallelism.max(1).min(tasks.len().max(1));
    let (tx, rx) = mpsc::channel::<(usize, TaskResult)>();
    let write_result = std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, tasks, instances) = (&next, &tasks, &instances);
            scope.spawn(move || loop {
                let n = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(k, method)) = tasks.get(n) else { break };
                let (id, cfg, inst) = &instances[k];
                let result = execute(id, cfg, inst, method, &suite.context(cfg.seed));
                if tx.send((n, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Results are written in task order so reruns give identical files.
        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (n, result) in rx {
            pending.insert(n, result);
            while let Some(result) = pending.remove(&expected) {
                records.push(&result.record)?;
                for c in &result.captures {
                    captures.push(c)?;
                }
                if let Some(r) = &result.relaxation {
                    relaxations.push(r)?;
                }
                expected += 1;
            }
        }
        Ok(())
    });
    write_result?;

    let all_records: Vec<RunRecord> = read_csv(&records_path)?;
    let all_captures: Vec<CaptureRecord> = read_csv(&out.join("captures.csv")).unwrap_or_default();
    let all_relax: Vec<RelaxationRecord> = read_csv(&out.join("relaxations.csv")).unwrap_or_default();
    let metrics = compute_metrics(&all_records, None, &all_relax, &all_captures);
    write_csv(&metrics, &out.join("metrics.csv"))?;
    Ok(BenchSummary {
        instances: instances.len(),
        runs: tasks.len(),
        skipped,
    })
}
