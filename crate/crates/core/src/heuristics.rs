//! Greedy, noncumulative and random heuristics.

use std::time::Duration;

use dflp_engine::{solve_mip, MipConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::subsets_up_to;
use crate::formulations::{build_di, build_dflp, extract_policy};
use crate::model::{ensure_valid, evaluate_policy, profit_with_masks, Instance, LocationPolicy};

/// One fixing step of a heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub period: usize,
    pub chosen: Vec<usize>,
    /// Profit of the partial policy once this step is fixed.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicResult {
    pub policy: LocationPolicy,
    pub profit: f64,
    pub trace: Vec<TraceStep>,
}

/// How a greedy iteration picks the locations of its period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subsolver {
    /// Evaluates every admissible location set of the period.
    Inspection,
    /// Solves the double-index program with all other periods fixed.
    Mip { time_limit: Option<Duration> },
}

impl Subsolver {
    /// Inspection with one facility per period, the restricted MIP otherwise.
    pub fn for_instance(inst: &Instance) -> Self {
        if inst.facilities_per_period == 1 {
            Subsolver::Inspection
        } else {
            Subsolver::Mip { time_limit: None }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Backward,
    Forward,
}

/// Fixes periods from `T` down to 1, each time maximizing total profit with
/// every earlier period closed.
pub fn backward_greedy(inst: &Instance, subsolver: Subsolver) -> Result<HeuristicResult> {
    greedy(inst, subsolver, Direction::Backward)
}

/// Fixes periods from 1 up to `T`, each time maximizing total profit with
/// every later period closed.
pub fn forward_greedy(inst: &Instance, subsolver: Subsolver) -> Result<HeuristicResult> {
    greedy(inst, subsolver, Direction::Forward)
}

fn greedy(inst: &Instance, subsolver: Subsolver, direction: Direction) -> Result<HeuristicResult> {
    ensure_valid(inst)?;
    let nt = inst.num_periods;
    let order: Vec<usize> = match direction {
        Direction::Backward => (1..=nt).rev().collect(),
        Direction::Forward => (1..=nt).collect(),
    };
    let mut policy = LocationPolicy::empty(nt);
    let mut trace = Vec::with_capacity(nt);
    for t in order {
        let chosen = match subsolver {
            Subsolver::Inspection => inspect_period(inst, &policy, t),
            Subsolver::Mip { time_limit } => restricted_mip(inst, &policy, t, time_limit)?,
        };
        policy.open[t - 1] = chosen.clone();
        let objective = evaluate_policy(inst, &policy)?.profit;
        trace.push(TraceStep {
            period: t,
            chosen,
            objective,
        });
    }
    finish(inst, policy, trace)
}

fn masks_of(inst: &Instance, policy: &LocationPolicy) -> Vec<Vec<bool>> {
    policy
        .open
        .iter()
        .map(|set| {
            let mut m = vec![false; inst.num_locations];
            set.iter().for_each(|&i| m[i] = true);
            m
        })
        .collect()
}

/// Best location set for period `t` given the rest of `policy`; ties go to
/// the lexicographically smallest set, starting with the empty one.
fn inspect_period(inst: &Instance, policy: &LocationPolicy, t: usize) -> Vec<usize> {
    let mut masks = masks_of(inst, policy);
    let mut unmet = vec![0.0; inst.num_customers()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in subsets_up_to(inst.num_locations, inst.facilities_per_period) {
        masks[t - 1].iter_mut().for_each(|m| *m = false);
        set.iter().for_each(|&i| masks[t - 1][i] = true);
        let profit = profit_with_masks(inst, &masks, &mut unmet);
        if best.as_ref().map_or(true, |(_, b)| profit > b + 1e-9) {
            best = Some((set, profit));
        }
    }
    best.map(|(set, _)| set).unwrap_or_default()
}

fn restricted_mip(
    inst: &Instance,
    policy: &LocationPolicy,
    t: usize,
    time_limit: Option<Duration>,
) -> Result<Vec<usize>> {
    let mut art = build_di(inst)?;
    for s in 1..=inst.num_periods {
        if s == t {
            continue;
        }
        for i in 0..inst.num_locations {
            art.fix_y(i, s, policy.is_open(i, s));
        }
    }
    let sol = solve_mip(&art.mip, &MipConfig { time_limit }, None)?;
    if !sol.has_incumbent() {
        return Err(Error::Internal(format!(
            "restricted program for period {t} ended with status {} and no incumbent",
            sol.status
        )));
    }
    let solved = extract_policy(&art, &sol)?;
    Ok(solved.open[t - 1].clone())
}

fn finish(inst: &Instance, policy: LocationPolicy, trace: Vec<TraceStep>) -> Result<HeuristicResult> {
    policy.check_feasible(inst)?;
    let profit = evaluate_policy(inst, &policy)?.profit;
    Ok(HeuristicResult { policy, profit, trace })
}

/// Trace of a policy built in one shot: profit of each prefix of periods.
fn prefix_trace(inst: &Instance, policy: &LocationPolicy) -> Result<Vec<TraceStep>> {
    let mut partial = LocationPolicy::empty(inst.num_periods);
    let mut trace = Vec::with_capacity(inst.num_periods);
    for t in 1..=inst.num_periods {
        partial.open[t - 1] = policy.open[t - 1].clone();
        trace.push(TraceStep {
            period: t,
            chosen: policy.open[t - 1].clone(),
            objective: evaluate_policy(inst, &partial)?.profit,
        });
    }
    Ok(trace)
}

/// Solves the noncumulative program and evaluates its policy under accumulation.
pub fn dflp_heuristic(inst: &Instance, config: &MipConfig) -> Result<HeuristicResult> {
    let art = build_dflp(inst)?;
    let sol = solve_mip(&art.mip, config, None)?;
    let policy = extract_policy(&art, &sol)?;
    let trace = prefix_trace(inst, &policy)?;
    finish(inst, policy, trace)
}

/// Opens `h` locations per period drawn uniformly without replacement.
pub fn random_policy(inst: &Instance, seed: u64) -> Result<HeuristicResult> {
    ensure_valid(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let open = (0..inst.num_periods)
        .map(|_| rand::seq::index::sample(&mut rng, inst.num_locations, inst.facilities_per_period).into_vec())
        .collect();
    let policy = LocationPolicy::new(open);
    let trace = prefix_trace(inst, &policy)?;
    finish(inst, policy, trace)
}
