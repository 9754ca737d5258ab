//! Instance data, demand accumulation and exact evaluation of location policies.
//!
//! Periods are numbered `1..=T` in every public formula-level API (with `0`
//! the artificial start and `T + 1` the artificial end). Per-period vectors
//! such as [`Instance::spawning`] and [`LocationPolicy::open`] are stored
//! 0-based, so period `t` lives at index `t - 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A DFLP-CCD instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub num_locations: usize,
    pub num_periods: usize,
    /// Facilities that may be open in any single period (`h`).
    pub facilities_per_period: usize,
    /// Reward per captured demand unit, per location.
    pub reward: Vec<f64>,
    /// Spawning demand, `spawning[j][t - 1]`.
    pub spawning: Vec<Vec<f64>>,
    /// Consideration set of each customer, most preferred first.
    pub ranking: Vec<Vec<usize>>,
    /// Penalty per demand unit not served in the period it spawns.
    pub penalty: Vec<f64>,
    /// Fraction of unmet demand carried into the next period.
    pub spread: Vec<f64>,
}

impl Instance {
    /// Builds an instance with zero penalties and unit spread factors.
    pub fn new(
        num_locations: usize,
        num_periods: usize,
        facilities_per_period: usize,
        reward: Vec<f64>,
        spawning: Vec<Vec<f64>>,
        ranking: Vec<Vec<usize>>,
    ) -> Self {
        let customers = spawning.len();
        Instance {
            num_locations,
            num_periods,
            facilities_per_period,
            reward,
            spawning,
            ranking,
            penalty: vec![0.0; customers],
            spread: vec![1.0; customers],
        }
    }

    pub fn with_penalty(mut self, penalty: Vec<f64>) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_spread(mut self, spread: Vec<f64>) -> Self {
        self.spread = spread;
        self
    }

    pub fn num_customers(&self) -> usize {
        self.spawning.len()
    }

    /// Spawning demand of customer `j` in period `t` (1-based).
    pub fn demand(&self, j: usize, t: usize) -> f64 {
        self.spawning[j][t - 1]
    }

    /// Position of location `i` in customer `j`'s ranking (`a_ij = 1` iff `Some`).
    pub fn rank(&self, j: usize, i: usize) -> Option<usize> {
        self.ranking[j].iter().position(|&k| k == i)
    }

    pub fn considers(&self, j: usize, i: usize) -> bool {
        self.rank(j, i).is_some()
    }

    /// Customers whose consideration set contains `i`.
    pub fn customers_of(&self, i: usize) -> Vec<usize> {
        (0..self.num_customers())
            .filter(|&j| self.considers(j, i))
            .collect()
    }

    pub fn has_penalties(&self) -> bool {
        self.penalty.iter().any(|&p| p != 0.0)
    }

    pub fn unit_spread(&self) -> bool {
        self.spread.iter().all(|&e| e == 1.0)
    }

    /// Every consideration set has at most one location.
    pub fn is_loyal(&self) -> bool {
        self.ranking.iter().all(|r| r.len() <= 1)
    }

    pub fn has_identical_rewards(&self) -> bool {
        self.reward.windows(2).all(|w| w[0] == w[1])
    }

    /// Accumulated demand of customer `j` at period `t` when last captured at `l`
    /// (`D^{lt}_j`, with unmet demand discounted geometrically by the spread factor).
    pub fn accumulated_demand(&self, j: usize, l: usize, t: usize) -> f64 {
        let e = self.spread[j];
        let mut total = 0.0;
        for s in (l + 1)..=t {
            total = total * e + self.spawning[j][s - 1];
        }
        total
    }

    /// Coefficient `G^{lt}_{ij}`; assumes `l < t <= T + 1` and valid indices.
    pub(crate) fn reward_coeff(&self, i: usize, j: usize, l: usize, t: usize) -> f64 {
        let p = self.penalty[j];
        let tmax = self.num_periods;
        if t > tmax {
            if p == 0.0 {
                return 0.0;
            }
            let missed: f64 = ((l + 1)..=tmax).map(|s| self.spawning[j][s - 1]).sum();
            return -p * missed;
        }
        let mut value = self.reward[i] * self.accumulated_demand(j, l, t);
        if p != 0.0 {
            let missed: f64 = ((l + 1)..t).map(|s| self.spawning[j][s - 1]).sum();
            value -= p * missed;
        }
        value
    }

    /// Largest value customer `j` can contribute under any policy.
    pub(crate) fn customer_reward_bound(&self, j: usize) -> f64 {
        let best = self.ranking[j]
            .iter()
            .map(|&i| self.reward[i])
            .fold(0.0_f64, f64::max);
        if best == 0.0 {
            return 0.0;
        }
        let growth = self.spread[j].max(1.0);
        let t_max = self.num_periods;
        let mass: f64 = (1..=t_max)
            .map(|s| self.spawning[j][s - 1] * growth.powi((t_max - s) as i32))
            .sum();
        best * mass
    }

    /// Lowest value customer `j` can contribute under any policy.
    pub(crate) fn customer_value_floor(&self, j: usize) -> f64 {
        -self.penalty[j] * self.spawning[j].iter().sum::<f64>()
    }
}

/// One violated instance invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every instance invariant and reports all violations.
pub fn validate_instance(inst: &Instance) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let (ni, nj, nt) = (inst.num_locations, inst.num_customers(), inst.num_periods);
    if nt == 0 {
        out.push(Violation::new("num_periods", "must be at least 1"));
    }
    if inst.facilities_per_period == 0 || inst.facilities_per_period > ni {
        out.push(Violation::new(
            "facilities_per_period",
            format!(
                "facilities_per_period out of range: {} not in 1..={}",
                inst.facilities_per_period, ni
            ),
        ));
    }
    if inst.reward.len() != ni {
        out.push(Violation::new(
            "reward",
            format!("expected {ni} entries, found {}", inst.reward.len()),
        ));
    }
    for (i, &r) in inst.reward.iter().enumerate() {
        if !(r.is_finite() && r >= 0.0) {
            out.push(Violation::new("reward", format!("location {i}: {r} is not a finite nonnegative value")));
        }
    }
    for (j, row) in inst.spawning.iter().enumerate() {
        if row.len() != nt {
            out.push(Violation::new(
                "spawning",
                format!("customer {j}: expected {nt} periods, found {}", row.len()),
            ));
        }
        if let Some((t, d)) = row.iter().enumerate().find(|(_, d)| !(d.is_finite() && **d >= 0.0)) {
            out.push(Violation::new(
                "spawning",
                format!("customer {j}, period {}: {d} is not a finite nonnegative value", t + 1),
            ));
        }
    }
    if inst.ranking.len() != nj {
        out.push(Violation::new(
            "ranking",
            format!("expected {nj} customers, found {}", inst.ranking.len()),
        ));
    }
    for (j, rank) in inst.ranking.iter().enumerate() {
        let mut seen = vec![false; ni];
        for &i in rank {
            if i >= ni {
                out.push(Violation::new(
                    "ranking",
                    format!("customer {j}: location {i} out of range"),
                ));
            } else if seen[i] {
                out.push(Violation::new(
                    "ranking",
                    format!("customer {j}: duplicate location {i} in ranking"),
                ));
            } else {
                seen[i] = true;
            }
        }
    }
    for (name, values) in [("penalty", &inst.penalty), ("spread", &inst.spread)] {
        if values.len() != nj {
            out.push(Violation::new(
                name,
                format!("expected {nj} entries, found {}", values.len()),
            ));
        }
        for (j, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(name, format!("customer {j}: {v} is not a finite nonnegative value")));
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub(crate) fn ensure_valid(inst: &Instance) -> Result<()> {
    validate_instance(inst).map_err(Error::Validation)
}

/// Opened locations per period; `open[t - 1]` is sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocationPolicy {
    pub open: Vec<Vec<usize>>,
}

impl LocationPolicy {
    pub fn new(mut open: Vec<Vec<usize>>) -> Self {
        for period in open.iter_mut() {
            period.sort_unstable();
            period.dedup();
        }
        LocationPolicy { open }
    }

    pub fn empty(num_periods: usize) -> Self {
        LocationPolicy {
            open: vec![Vec::new(); num_periods],
        }
    }

    /// Opens a single location per period (`None` leaves the period empty).
    pub fn single(choices: &[Option<usize>]) -> Self {
        LocationPolicy::new(choices.iter().map(|c| c.iter().copied().collect()).collect())
    }

    pub fn num_periods(&self) -> usize {
        self.open.len()
    }

    pub fn is_open(&self, i: usize, t: usize) -> bool {
        self.open[t - 1].binary_search(&i).is_ok()
    }

    /// Checks horizon length, location indices and the cardinality limit.
    pub fn check_feasible(&self, inst: &Instance) -> Result<()> {
        if self.open.len() != inst.num_periods {
            return Err(Error::InfeasiblePolicy(format!(
                "policy covers {} periods, instance has {}",
                self.open.len(),
                inst.num_periods
            )));
        }
        for (t, set) in self.open.iter().enumerate() {
            if set.len() > inst.facilities_per_period {
                return Err(Error::InfeasiblePolicy(format!(
                    "period {} opens {} facilities, limit is {}",
                    t + 1,
                    set.len(),
                    inst.facilities_per_period
                )));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= inst.num_locations) {
                return Err(Error::InfeasiblePolicy(format!(
                    "period {} opens unknown location {i}",
                    t + 1
                )));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InfeasiblePolicy(format!(
                    "period {} lists locations out of order or repeated",
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for LocationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .open
            .iter()
            .enumerate()
            .map(|(t, set)| {
                let locs: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                format!("t{}:{{{}}}", t + 1, locs.join(","))
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Outcome of running a policy through the accumulation dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub profit: f64,
    /// `captures[t - 1][j]`: location patronized by `j` in period `t`.
    pub captures: Vec<Vec<Option<usize>>>,
    /// `accumulated[j][t]` for `t` in `0..=T` (index 0 is always 0).
    pub accumulated: Vec<Vec<f64>>,
    /// `unmet[j][t]` for `t` in `0..=T`.
    pub unmet: Vec<Vec<f64>>,
    pub capture_counts: Vec<usize>,
    /// Reward minus penalties attributable to each customer.
    pub customer_profit: Vec<f64>,
}

impl EvaluationResult {
    /// Number of customers captured exactly `k` times, for `k` in `0..=T`.
    pub fn capture_histogram(&self) -> Vec<usize> {
        let periods = self.captures.len();
        let mut hist = vec![0; periods + 1];
        for &c in &self.capture_counts {
            hist[c] += 1;
        }
        hist
    }
}

/// First entry of customer `j`'s ranking that is in `open_set`.
pub fn simulate_choice(inst: &Instance, open_set: &[usize], customer: usize) -> Result<Option<usize>> {
    let ranking = inst.ranking.get(customer).ok_or_else(|| {
        Error::Contract(format!(
            "customer {customer} out of range ({} customers)",
            inst.num_customers()
        ))
    })?;
    if let Some(&i) = open_set.iter().find(|&&i| i >= inst.num_locations) {
        return Err(Error::Contract(format!("location {i} out of range")));
    }
    Ok(ranking.iter().copied().find(|i| open_set.contains(i)))
}

fn choose(ranking: &[usize], open: &[bool]) -> Option<usize> {
    ranking.iter().copied().find(|&i| open[i])
}

/// Profit of `policy` together with the full demand trajectories.
pub fn evaluate_policy(inst: &Instance, policy: &LocationPolicy) -> Result<EvaluationResult> {
    policy.check_feasible(inst)?;
    let (nj, nt) = (inst.num_customers(), inst.num_periods);
    let mut captures = vec![vec![None; nj]; nt];
    let mut accumulated = vec![vec![0.0; nt + 1]; nj];
    let mut unmet = vec![vec![0.0; nt + 1]; nj];
    let mut capture_counts = vec![0; nj];
    let mut customer_profit = vec![0.0; nj];
    let mut open = vec![false; inst.num_locations];
    for t in 1..=nt {
        open.iter_mut().for_each(|o| *o = false);
        for &i in &policy.open[t - 1] {
            open[i] = true;
        }
        for j in 0..nj {
            let d = inst.spawning[j][t - 1];
            let c = inst.spread[j] * unmet[j][t - 1] + d;
            accumulated[j][t] = c;
            match choose(&inst.ranking[j], &open) {
                Some(i) => {
                    captures[t - 1][j] = Some(i);
                    capture_counts[j] += 1;
                    customer_profit[j] += inst.reward[i] * c;
                    unmet[j][t] = 0.0;
                }
                None => {
                    customer_profit[j] -= inst.penalty[j] * d;
                    unmet[j][t] = c;
                }
            }
        }
    }
    let profit = customer_profit.iter().sum();
    Ok(EvaluationResult {
        profit,
        captures,
        accumulated,
        unmet,
        capture_counts,
        customer_profit,
    })
}

/// Allocation-light profit computation over per-period open masks.
/// `unmet` must hold at least `J` entries; it is overwritten.
pub(crate) fn profit_with_masks(inst: &Instance, masks: &[Vec<bool>], unmet: &mut [f64]) -> f64 {
    let nj = inst.num_customers();
    unmet[..nj].iter_mut().for_each(|u| *u = 0.0);
    let mut profit = 0.0;
    for (t, open) in masks.iter().enumerate() {
        for j in 0..nj {
            let d = inst.spawning[j][t];
            let c = inst.spread[j] * unmet[j] + d;
            match choose(&inst.ranking[j], open) {
                Some(i) => {
                    profit += inst.reward[i] * c;
                    unmet[j] = 0.0;
                }
                None => {
                    profit -= inst.penalty[j] * d;
                    unmet[j] = c;
                }
            }
        }
    }
    profit
}

/// `G^{lt}_{ij}`: reward of capturing customer `j` through location `i` at
/// period `t` after its previous capture at `l`, net of penalties for the
/// demand that waited. `t = T + 1` is the artificial end period.
pub fn accumulated_reward_coeff(inst: &Instance, i: usize, j: usize, l: usize, t: usize) -> Result<f64> {
    if l >= t {
        return Err(Error::Contract(format!("period pair ({l}, {t}) requires l < t")));
    }
    if t > inst.num_periods + 1 {
        return Err(Error::Contract(format!(
            "period {t} beyond the end period {}",
            inst.num_periods + 1
        )));
    }
    if i >= inst.num_locations || j >= inst.num_customers() {
        return Err(Error::Contract(format!("location {i} or customer {j} out of range")));
    }
    Ok(inst.reward_coeff(i, j, l, t))
}

/// Returns a copy of `inst` with every spawning demand multiplied by `factor`.
pub fn scale_spawning(inst: &Instance, factor: f64) -> Instance {
    let mut out = inst.clone();
    for row in out.spawning.iter_mut() {
        for d in row.iter_mut() {
            *d *= factor;
        }
    }
    out
}

/// One ranking realisation of a customer in a rank-based choice model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub probability: f64,
    pub ranking: Vec<usize>,
}

/// Instance whose customers are mixtures of ranking profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBasedInstance {
    pub num_locations: usize,
    pub num_periods: usize,
    pub facilities_per_period: usize,
    pub reward: Vec<f64>,
    pub spawning: Vec<Vec<f64>>,
    pub penalty: Vec<f64>,
    pub spread: Vec<f64>,
    pub profiles: Vec<Vec<Profile>>,
}

/// Turns each (customer, profile) pair into its own customer with demand
/// scaled by the profile probability.
pub fn expand_rank_based(rb: &RankBasedInstance) -> Result<Instance> {
    let mut violations = Vec::new();
    if rb.profiles.len() != rb.spawning.len() {
        violations.push(Violation::new(
            "profiles",
            format!("expected {} customers, found {}", rb.spawning.len(), rb.profiles.len()),
        ));
    }
    for (j, profiles) in rb.profiles.iter().enumerate() {
        let total: f64 = profiles.iter().map(|p| p.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            violations.push(Violation::new(
                "profiles",
                format!("customer {j}: probabilities sum to {total}, expected 1"),
            ));
        }
        if let Some(p) = profiles.iter().find(|p| !(0.0..=1.0).contains(&p.probability)) {
            violations.push(Violation::new(
                "profiles",
                format!("customer {j}: probability {} outside [0, 1]", p.probability),
            ));
        }
    }
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let mut spawning = Vec::new();
    let mut ranking = Vec::new();
    let mut penalty = Vec::new();
    let mut spread = Vec::new();
    for (j, profiles) in rb.profiles.iter().enumerate() {
        for profile in profiles {
            spawning.push(rb.spawning[j].iter().map(|d| profile.probability * d).collect());
            ranking.push(profile.ranking.clone());
            penalty.push(rb.penalty[j]);
            spread.push(rb.spread[j]);
        }
    }
    let inst = Instance {
        num_locations: rb.num_locations,
        num_periods: rb.num_periods,
        facilities_per_period: rb.facilities_per_period,
        reward: rb.reward.clone(),
        spawning,
        ranking,
        penalty,
        spread,
    };
    ensure_valid(&inst)?;
    Ok(inst)
}
