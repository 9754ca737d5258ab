//! Branch-and-Benders-cut over the location variables.
//!
//! The master keeps `y` and one value estimate `w_j` per customer. Whenever
//! branch-and-bound reaches an integer `y`, every customer whose estimate
//! exceeds its true value receives an optimality cut, either from the dual
//! subproblem LP or, with one facility per period, from a closed-form dual.

use std::time::Duration;

use dflp_engine::{
    solve_lp, solve_mip, CutCallback, EngineError, LinearProgram, MipConfig, MipSolution, Row, Sense, Status,
    VarKind, VarMeta,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{policy_from_values, FormulationArtifacts, FormulationKind, Rounding};
use crate::model::{ensure_valid, evaluate_policy, Instance, LocationPolicy};

const CUT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutSource {
    Lp,
    Analytical,
}

/// `w_j <= sum coeff * y_i^t + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCut {
    pub customer: usize,
    /// `(location, period, coefficient)` for locations the customer considers.
    pub coeffs: Vec<(usize, usize, f64)>,
    pub constant: f64,
    pub source: CutSource,
}

impl OptimalityCut {
    /// Right-hand side of the cut evaluated at `policy`.
    pub fn value(&self, policy: &LocationPolicy) -> f64 {
        self.constant
            + self
                .coeffs
                .iter()
                .filter(|&&(i, t, _)| policy.is_open(i, t))
                .map(|&(_, _, c)| c)
                .sum::<f64>()
    }

    fn to_row(&self, master: &FormulationArtifacts) -> Row {
        let mut coeffs = vec![(master.w_customer[self.customer], 1.0)];
        coeffs.extend(
            self.coeffs
                .iter()
                .filter(|&&(_, _, c)| c != 0.0)
                .map(|&(i, t, c)| (master.y_var(i, t), -c)),
        );
        Row::le(coeffs, self.constant)
    }
}

/// Master program with one bounding row per customer.
pub fn build_master(inst: &Instance) -> Result<FormulationArtifacts> {
    ensure_valid(inst)?;
    let mut mip = dflp_engine::MixedIntegerProgram::new(Sense::Maximize);
    let y: Vec<Vec<usize>> = (1..=inst.num_periods)
        .map(|t| {
            (0..inst.num_locations)
                .map(|i| mip.add_binary(0.0, VarMeta::new(VarKind::Y).location(i).period(t)))
                .collect()
        })
        .collect();
    for vars in &y {
        let coeffs = vars.iter().map(|&v| (v, 1.0)).collect();
        mip.add_row(Row::le(coeffs, inst.facilities_per_period as f64));
    }
    let mut w_customer = Vec::with_capacity(inst.num_customers());
    for j in 0..inst.num_customers() {
        let floor = inst.customer_value_floor(j);
        let w = mip.add_var(1.0, floor, f64::INFINITY, VarMeta::new(VarKind::W).customer(j));
        mip.add_row(Row::le(vec![(w, 1.0)], inst.customer_reward_bound(j)));
        w_customer.push(w);
    }
    Ok(FormulationArtifacts {
        kind: FormulationKind::Master,
        mip,
        num_locations: inst.num_locations,
        num_periods: inst.num_periods,
        y,
        x_arc: Default::default(),
        x: Default::default(),
        w: Default::default(),
        u: Default::default(),
        c: Default::default(),
        w_customer,
    })
}

fn check_cut_inputs(inst: &Instance, customer: usize, policy: &LocationPolicy) -> Result<()> {
    ensure_valid(inst)?;
    if customer >= inst.num_customers() {
        return Err(Error::Contract(format!("customer {customer} out of range")));
    }
    policy.check_feasible(inst)
}

/// Optimality cut from an optimal solution of the customer's dual subproblem.
pub fn solve_dual_subproblem_lp(inst: &Instance, customer: usize, policy: &LocationPolicy) -> Result<OptimalityCut> {
    check_cut_inputs(inst, customer, policy)?;
    let j = customer;
    let ranking = &inst.ranking[j];
    let (n, nt) = (ranking.len(), inst.num_periods);
    let mut lp = LinearProgram::new(Sense::Minimize);
    // Variable blocks indexed by [position in ranking][t - 1].
    let mut open_var = vec![vec![0; nt]; n];
    let mut force_var = vec![vec![0; nt]; n];
    let mut pref_var = vec![vec![0; nt]; n];
    for (p, &i) in ranking.iter().enumerate() {
        for t in 1..=nt {
            let y = if policy.is_open(i, t) { 1.0 } else { 0.0 };
            open_var[p][t - 1] = lp.add_var(y, 0.0, f64::INFINITY);
            force_var[p][t - 1] = lp.add_var(-y, 0.0, f64::INFINITY);
            pref_var[p][t - 1] = lp.add_var(1.0 - y, 0.0, f64::INFINITY);
        }
    }
    let flow_var: Vec<usize> = (0..=nt)
        .map(|l| lp.add_var(if l == 0 { 1.0 } else { 0.0 }, f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    for (p, &i) in ranking.iter().enumerate() {
        for t in 1..=nt {
            for l in 0..t {
                let mut coeffs = vec![(open_var[p][t - 1], 1.0)];
                coeffs.extend((0..n).map(|k| (force_var[k][t - 1], -1.0)));
                coeffs.extend((0..p).map(|k| (pref_var[k][t - 1], 1.0)));
                coeffs.push((flow_var[l], 1.0));
                coeffs.push((flow_var[t], -1.0));
                lp.add_row(Row::ge(coeffs, inst.reward_coeff(i, j, l, t)));
            }
        }
    }
    for (l, &var) in flow_var.iter().enumerate() {
        lp.add_row(Row::ge(vec![(var, 1.0)], inst.reward_coeff(0, j, l, nt + 1)));
    }
    let sol = solve_lp(&lp)?;
    if sol.status != Status::Optimal {
        return Err(Error::Internal(format!(
            "dual subproblem of customer {j} ended with status {}",
            sol.status
        )));
    }
    let x = &sol.x;
    let mut coeffs = Vec::with_capacity(n * nt);
    let mut constant = x[flow_var[0]];
    for (p, &i) in ranking.iter().enumerate() {
        for t in 1..=nt {
            let (b, d, z) = (x[open_var[p][t - 1]], x[force_var[p][t - 1]], x[pref_var[p][t - 1]]);
            coeffs.push((i, t, b - z - d));
            constant += z;
        }
    }
    Ok(OptimalityCut {
        customer: j,
        coeffs,
        constant,
        source: CutSource::Lp,
    })
}

/// Options for the closed-form cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticalOptions {
    /// Accept instances with unmet-demand penalties.
    pub allow_penalties: bool,
}

impl Default for AnalyticalOptions {
    fn default() -> Self {
        AnalyticalOptions { allow_penalties: true }
    }
}

/// Closed-form optimal dual solution for one facility per period.
pub fn analytical_cut(inst: &Instance, customer: usize, policy: &LocationPolicy) -> Result<OptimalityCut> {
    analytical_cut_with(inst, customer, policy, AnalyticalOptions::default())
}

pub fn analytical_cut_with(
    inst: &Instance,
    customer: usize,
    policy: &LocationPolicy,
    options: AnalyticalOptions,
) -> Result<OptimalityCut> {
    check_cut_inputs(inst, customer, policy)?;
    if inst.facilities_per_period != 1 {
        return Err(Error::Unsupported("analytical cuts require one facility per period".into()));
    }
    let j = customer;
    if inst.spread[j] != 1.0 {
        return Err(Error::Unsupported("analytical cuts require a unit spread factor".into()));
    }
    if inst.penalty[j] != 0.0 && !options.allow_penalties {
        return Err(Error::Unsupported("analytical cuts with penalties are disabled".into()));
    }
    let nt = inst.num_periods;
    let sink = nt + 1;
    let ranking = &inst.ranking[j];
    let g = |i: usize, l: usize, t: usize| inst.reward_coeff(i, j, l, t);

    // Capture chain 0 = s_0 < s_1 < ... of the induced primal solution.
    let mut captured: Vec<Option<usize>> = vec![None; sink];
    let mut chain = vec![0];
    for t in 1..=nt {
        captured[t] = ranking.iter().copied().find(|&i| policy.is_open(i, t));
        if captured[t].is_some() {
            chain.push(t);
        }
    }
    // Arcs (s, t, location) with t <= T.
    let arcs: Vec<(usize, usize, usize)> = chain
        .windows(2)
        .map(|w| (w[0], w[1], captured[w[1]].expect("chain period is captured")))
        .collect();

    let mut theta: Vec<Option<f64>> = vec![None; sink];
    let compute = |l: usize, theta: &mut Vec<Option<f64>>| -> Result<()> {
        let mut value = g(0, l, sink);
        for &(s, t, i) in &arcs {
            if l < t && l != s {
                let from = theta[s].ok_or_else(|| {
                    Error::Internal(format!("dual value of period {s} read before it was set"))
                })?;
                value = value.max(g(i, l, t) - g(i, s, t) + from);
            }
        }
        theta[l] = Some(value);
        Ok(())
    };
    for &l in chain.iter().rev() {
        compute(l, &mut theta)?;
    }
    for l in (1..=nt).rev().filter(|&l| captured[l].is_none()) {
        compute(l, &mut theta)?;
    }
    let theta: Vec<f64> = theta
        .into_iter()
        .map(|v| v.expect("every period is assigned"))
        .collect();

    let mut coeffs = Vec::with_capacity(ranking.len() * nt);
    for &i in ranking {
        for t in 1..=nt {
            let lambda = (0..t)
                .map(|l| g(i, l, t) - theta[l] + theta[t])
                .fold(f64::NEG_INFINITY, f64::max);
            coeffs.push((i, t, lambda));
        }
    }
    Ok(OptimalityCut {
        customer: j,
        coeffs,
        constant: theta[0],
        source: CutSource::Analytical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    Lp,
    Analytical,
    Auto,
}

impl std::str::FromStr for CutMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(CutMode::Lp),
            "analytical" => Ok(CutMode::Analytical),
            "auto" => Ok(CutMode::Auto),
            other => Err(Error::Config(format!("unknown cut mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BendersConfig {
    pub cut_mode: CutMode,
    pub time_limit: Option<Duration>,
    pub analytical: AnalyticalOptions,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            cut_mode: CutMode::Auto,
            time_limit: None,
            analytical: AnalyticalOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BendersResult {
    /// Master solution; `objective` is the evaluated profit of `policy`.
    pub solution: MipSolution,
    pub policy: Option<LocationPolicy>,
    pub cut_source: CutSource,
    pub cuts: usize,
}

fn analytical_applies(inst: &Instance, options: AnalyticalOptions) -> bool {
    inst.facilities_per_period == 1
        && inst.unit_spread()
        && (options.allow_penalties || !inst.has_penalties())
}

/// Solves the instance by branch-and-Benders-cut.
pub fn solve_benders(inst: &Instance, config: &BendersConfig) -> Result<BendersResult> {
    let master = build_master(inst)?;
    let source = match config.cut_mode {
        CutMode::Lp => CutSource::Lp,
        CutMode::Analytical => {
            if !analytical_applies(inst, config.analytical) {
                return Err(Error::Unsupported(
                    "analytical cuts need one facility per period and unit spread factors".into(),
                ));
            }
            CutSource::Analytical
        }
        CutMode::Auto => {
            if analytical_applies(inst, config.analytical) {
                CutSource::Analytical
            } else {
                CutSource::Lp
            }
        }
    };
    let mut callback = Separator {
        inst,
        master: &master,
        source,
        options: config.analytical,
        last_profit: Vec::new(),
        failure: None,
        rounding: Rounding::new(inst, &master),
    };
    let mip_config = MipConfig {
        time_limit: config.time_limit,
    };
    let outcome = solve_mip(&master.mip, &mip_config, Some(&mut callback));
    let mut solution = match outcome {
        Ok(sol) => sol,
        Err(e) => return Err(callback.failure.unwrap_or(Error::Engine(e))),
    };
    let policy = if solution.has_incumbent() {
        let policy = policy_from_values(&master, &solution.x)?;
        let profit = evaluate_policy(inst, &policy)?.profit;
        if (profit - solution.objective).abs() > 1e-6 * (1.0 + profit.abs()) {
            return Err(Error::Internal(format!(
                "master value {} differs from policy profit {profit}",
                solution.objective
            )));
        }
        solution.objective = profit;
        Some(policy)
    } else {
        None
    };
    let cuts = solution.cuts_added;
    Ok(BendersResult {
        solution,
        policy,
        cut_source: source,
        cuts,
    })
}

/// Lazy cut generator of the master program.
struct Separator<'a> {
    inst: &'a Instance,
    master: &'a FormulationArtifacts,
    source: CutSource,
    options: AnalyticalOptions,
    /// Per-customer profit of the last separated candidate.
    last_profit: Vec<f64>,
    failure: Option<Error>,
    rounding: Rounding<'a>,
}

impl CutCallback for Separator<'_> {
    fn separate(&mut self, x: &[f64]) -> std::result::Result<Vec<Row>, EngineError> {
        match separate(self.inst, self.master, self.source, self.options, x, &mut self.last_profit) {
            Ok(rows) => Ok(rows),
            Err(e) => {
                let msg = e.to_string();
                self.failure = Some(e);
                Err(EngineError::Callback(msg))
            }
        }
    }

    /// The rejected candidate's locations with every customer valued at its
    /// true profit.
    fn feasible_point(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let mut point = x.to_vec();
        for (&w, &profit) in self.master.w_customer.iter().zip(&self.last_profit) {
            point[w] = profit;
        }
        Some(point)
    }

    fn heuristic_point(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        self.rounding.propose(x)
    }
}

fn separate(
    inst: &Instance,
    master: &FormulationArtifacts,
    source: CutSource,
    options: AnalyticalOptions,
    x: &[f64],
    profit_out: &mut Vec<f64>,
) -> Result<Vec<Row>> {
    let policy = policy_from_values(master, x)?;
    let eval = evaluate_policy(inst, &policy)?;
    profit_out.clone_from(&eval.customer_profit);
    let mut rows = Vec::new();
    for j in 0..inst.num_customers() {
        let actual = eval.customer_profit[j];
        if x[master.w_customer[j]] <= actual + CUT_TOL {
            continue;
        }
        let mut cut = match source {
            CutSource::Lp => solve_dual_subproblem_lp(inst, j, &policy)?,
            CutSource::Analytical => analytical_cut_with(inst, j, &policy, options)?,
        };
        let at_policy = cut.value(&policy);
        let slack = at_policy - actual;
        if slack.abs() > CUT_TOL * (1.0 + actual.abs()) {
            return Err(Error::Internal(format!(
                "cut for customer {j} is not tight: value {at_policy}, subproblem {actual}"
            )));
        }
        cut.constant -= slack;
        rows.push(cut.to_row(master));
    }
    Ok(rows)
}
