//! MIP formulations of the problem and the mapping of solutions back to policies.

use std::collections::{BTreeMap, HashSet};

use dflp_engine::{
    solve_mip, solve_relaxation, CutCallback, EngineError, MipConfig, MipSolution, MixedIntegerProgram, Row,
    Sense, Status, VarKind, VarMeta, INTEGRALITY_TOL,
};

use crate::error::{Error, Result};
use crate::model::{ensure_valid, evaluate_policy, Instance, LocationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    DoubleIndex,
    SingleIndex,
    Noncumulative,
    Master,
}

/// A built program together with the maps from model indices to variables.
#[derive(Debug, Clone)]
pub struct FormulationArtifacts {
    pub kind: FormulationKind,
    pub mip: MixedIntegerProgram,
    pub num_locations: usize,
    pub num_periods: usize,
    /// `y[t - 1][i]`.
    pub y: Vec<Vec<usize>>,
    /// Capture arcs keyed by `(i, j, l, t)` (double-index only).
    pub x_arc: BTreeMap<(usize, usize, usize, usize), usize>,
    /// Capture indicators keyed by `(i, j, t)`.
    pub x: BTreeMap<(usize, usize, usize), usize>,
    /// Captured demand keyed by `(i, j, t)` (single-index only).
    pub w: BTreeMap<(usize, usize, usize), usize>,
    /// Unmet demand keyed by `(j, t)` for `t` in `0..=T`.
    pub u: BTreeMap<(usize, usize), usize>,
    /// Accumulated demand keyed by `(j, t)`.
    pub c: BTreeMap<(usize, usize), usize>,
    /// Per-customer value estimates (master only).
    pub w_customer: Vec<usize>,
}

impl FormulationArtifacts {
    fn new(kind: FormulationKind, inst: &Instance) -> Self {
        let mut mip = MixedIntegerProgram::new(Sense::Maximize);
        let y = (1..=inst.num_periods)
            .map(|t| {
                (0..inst.num_locations)
                    .map(|i| mip.add_binary(0.0, VarMeta::new(VarKind::Y).location(i).period(t)))
                    .collect()
            })
            .collect();
        let mut art = FormulationArtifacts {
            kind,
            mip,
            num_locations: inst.num_locations,
            num_periods: inst.num_periods,
            y,
            x_arc: BTreeMap::new(),
            x: BTreeMap::new(),
            w: BTreeMap::new(),
            u: BTreeMap::new(),
            c: BTreeMap::new(),
            w_customer: Vec::new(),
        };
        art.add_cardinality_rows(inst.facilities_per_period);
        art
    }

    fn add_cardinality_rows(&mut self, limit: usize) {
        for t in 0..self.num_periods {
            let coeffs = self.y[t].iter().map(|&v| (v, 1.0)).collect();
            self.mip.add_row(Row::le(coeffs, limit as f64));
        }
    }

    pub fn y_var(&self, i: usize, t: usize) -> usize {
        self.y[t - 1][i]
    }

    /// Fixes `y_i^t` to `open` through its bounds. Closing a location also
    /// closes every capture arc into it.
    pub fn fix_y(&mut self, i: usize, t: usize, open: bool) {
        let v = self.y_var(i, t);
        let value = if open { 1.0 } else { 0.0 };
        self.mip.lp.lower[v] = value;
        self.mip.lp.upper[v] = value;
        if open {
            return;
        }
        let arcs: Vec<usize> = self
            .x_arc
            .iter()
            .filter(|(&(ai, _, _, at), _)| ai == i && at == t)
            .map(|(_, &var)| var)
            .collect();
        let indicators: Vec<usize> = self
            .x
            .iter()
            .filter(|(&(xi, _, xt), _)| xi == i && xt == t)
            .map(|(_, &var)| var)
            .collect();
        for var in arcs.into_iter().chain(indicators) {
            self.mip.lp.upper[var] = 0.0;
        }
    }

    /// Fixes every `y` to the given policy.
    pub fn fix_policy(&mut self, policy: &LocationPolicy) {
        for t in 1..=self.num_periods {
            for i in 0..self.num_locations {
                self.fix_y(i, t, policy.is_open(i, t));
            }
        }
    }
}

fn arc_count(num_periods: usize) -> usize {
    (num_periods + 1) * (num_periods + 2) / 2
}

/// Double-index formulation with arcs `(l, t)`, `0 <= l < t <= T + 1`.
///
/// Capture arcs are continuous in `[0, 1]`. Arcs of locations outside a
/// customer's consideration set are fixed at zero, and the end-period arcs
/// keep a single free copy per origin (they are interchangeable).
pub fn build_di(inst: &Instance) -> Result<FormulationArtifacts> {
    ensure_valid(inst)?;
    let mut art = FormulationArtifacts::new(FormulationKind::DoubleIndex, inst);
    let (ni, nj, nt) = (inst.num_locations, inst.num_customers(), inst.num_periods);
    let sink = nt + 1;
    art.x_arc = BTreeMap::new();
    for j in 0..nj {
        let sink_copy = inst.ranking[j].first().copied().unwrap_or(0);
        for l in 0..=nt {
            for t in (l + 1)..=sink {
                for i in 0..ni {
                    let (cost, upper) = if t == sink {
                        let free = i == sink_copy;
                        (inst.reward_coeff(i, j, l, t), if free { 1.0 } else { 0.0 })
                    } else if inst.considers(j, i) {
                        (inst.reward_coeff(i, j, l, t), 1.0)
                    } else {
                        (0.0, 0.0)
                    };
                    let meta = VarMeta::new(VarKind::X)
                        .location(i)
                        .customer(j)
                        .from_period(l)
                        .period(t);
                    let var = art.mip.add_var(cost, 0.0, upper, meta);
                    art.x_arc.insert((i, j, l, t), var);
                }
            }
        }
    }
    debug_assert_eq!(art.x_arc.len(), ni * nj * arc_count(nt));

    let arc = |art: &FormulationArtifacts, i, j, l, t| art.x_arc[&(i, j, l, t)];
    for j in 0..nj {
        let ranking = &inst.ranking[j];
        for t in 1..=nt {
            for (pos, &i) in ranking.iter().enumerate() {
                let y = art.y_var(i, t);
                // Capture only through open locations.
                let mut coeffs: Vec<(usize, f64)> = (0..t).map(|l| (arc(&art, i, j, l, t), 1.0)).collect();
                coeffs.push((y, -1.0));
                art.mip.add_row(Row::le(coeffs, 0.0));
                // Capture is forced when an acceptable location is open.
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                for l in 0..t {
                    for &k in ranking {
                        coeffs.push((arc(&art, k, j, l, t), 1.0));
                    }
                }
                coeffs.push((y, -1.0));
                art.mip.add_row(Row::ge(coeffs, 0.0));
                // No capture by a less preferred location when `i` is open.
                let mut coeffs = vec![(y, 1.0)];
                for l in 0..t {
                    for &k in &ranking[pos + 1..] {
                        coeffs.push((arc(&art, k, j, l, t), 1.0));
                    }
                }
                art.mip.add_row(Row::le(coeffs, 1.0));
            }
            // Flow conservation through period t.
            let mut coeffs = Vec::new();
            for i in 0..ni {
                for s in (t + 1)..=sink {
                    coeffs.push((arc(&art, i, j, t, s), 1.0));
                }
                for s in 0..t {
                    coeffs.push((arc(&art, i, j, s, t), -1.0));
                }
            }
            art.mip.add_row(Row::eq(coeffs, 0.0));
        }
        let coeffs = (0..ni)
            .flat_map(|i| (1..=sink).map(move |s| (i, s)))
            .map(|(i, s)| (arc(&art, i, j, 0, s), 1.0))
            .collect();
        art.mip.add_row(Row::eq(coeffs, 1.0));
    }
    Ok(art)
}

/// Adds the capture indicator rows shared by the single-index and
/// noncumulative formulations.
fn add_indicator_rows(art: &mut FormulationArtifacts, inst: &Instance) {
    for j in 0..inst.num_customers() {
        let ranking = &inst.ranking[j];
        for t in 1..=inst.num_periods {
            for (pos, &i) in ranking.iter().enumerate() {
                let y = art.y_var(i, t);
                let x = art.x[&(i, j, t)];
                art.mip.add_row(Row::le(vec![(x, 1.0), (y, -1.0)], 0.0));
                let mut coeffs: Vec<(usize, f64)> = ranking.iter().map(|&k| (art.x[&(k, j, t)], 1.0)).collect();
                coeffs.push((y, -1.0));
                art.mip.add_row(Row::ge(coeffs, 0.0));
                let mut coeffs = vec![(y, 1.0)];
                coeffs.extend(ranking[pos + 1..].iter().map(|&k| (art.x[&(k, j, t)], 1.0)));
                art.mip.add_row(Row::le(coeffs, 1.0));
            }
        }
    }
}

fn add_indicators(art: &mut FormulationArtifacts, inst: &Instance, cost: impl Fn(usize, usize, usize) -> f64) {
    for j in 0..inst.num_customers() {
        for t in 1..=inst.num_periods {
            for i in 0..inst.num_locations {
                let meta = VarMeta::new(VarKind::X).location(i).customer(j).period(t);
                let var = if inst.considers(j, i) {
                    art.mip.add_binary(cost(i, j, t), meta)
                } else {
                    art.mip.add_var(0.0, 0.0, 0.0, meta)
                };
                art.x.insert((i, j, t), var);
            }
        }
    }
}

/// Linearized single-index formulation with big-M values `M_j^t = D^{0t}_j`.
pub fn build_si_linearized(inst: &Instance) -> Result<FormulationArtifacts> {
    ensure_valid(inst)?;
    if inst.has_penalties() && !inst.unit_spread() {
        return Err(Error::Unsupported(
            "single-index formulation with penalties requires unit spread factors".into(),
        ));
    }
    let mut art = FormulationArtifacts::new(FormulationKind::SingleIndex, inst);
    let (ni, nj, nt) = (inst.num_locations, inst.num_customers(), inst.num_periods);
    for j in 0..nj {
        for t in 0..=nt {
            let hi = if t == 0 { 0.0 } else { f64::INFINITY };
            let meta = VarMeta::new(VarKind::U).customer(j).period(t);
            art.u.insert((j, t), art.mip.add_var(0.0, 0.0, hi, meta));
        }
    }
    for j in 0..nj {
        for t in 1..=nt {
            let meta = VarMeta::new(VarKind::C).customer(j).period(t);
            art.c.insert((j, t), art.mip.add_var(0.0, 0.0, f64::INFINITY, meta));
        }
    }
    for j in 0..nj {
        for t in 1..=nt {
            for i in 0..ni {
                let hi = if inst.considers(j, i) { f64::INFINITY } else { 0.0 };
                let meta = VarMeta::new(VarKind::W).location(i).customer(j).period(t);
                art.w.insert((i, j, t), art.mip.add_var(inst.reward[i], 0.0, hi, meta));
            }
        }
    }
    add_indicators(&mut art, inst, |_, j, t| inst.penalty[j] * inst.demand(j, t));
    if inst.has_penalties() {
        let constant: f64 = (0..nj)
            .map(|j| inst.penalty[j] * inst.spawning[j].iter().sum::<f64>())
            .sum();
        art.mip.add_var(-constant, 1.0, 1.0, VarMeta::new(VarKind::Aux));
    }

    add_indicator_rows(&mut art, inst);
    for j in 0..nj {
        for t in 1..=nt {
            let (c, u_prev, u) = (art.c[&(j, t)], art.u[&(j, t - 1)], art.u[&(j, t)]);
            art.mip.add_row(Row::eq(
                vec![(c, 1.0), (u_prev, -inst.spread[j])],
                inst.demand(j, t),
            ));
            let mut coeffs = vec![(u, 1.0), (c, -1.0)];
            coeffs.extend((0..ni).map(|i| (art.w[&(i, j, t)], 1.0)));
            art.mip.add_row(Row::eq(coeffs, 0.0));
            let big_m = inst.accumulated_demand(j, 0, t);
            for &i in &inst.ranking[j] {
                let (w, x) = (art.w[&(i, j, t)], art.x[&(i, j, t)]);
                art.mip.add_row(Row::le(vec![(w, 1.0), (x, -big_m)], 0.0));
                art.mip.add_row(Row::le(vec![(w, 1.0), (c, -1.0), (x, big_m)], big_m));
                art.mip.add_row(Row::ge(vec![(w, 1.0), (x, big_m)], 0.0));
                art.mip.add_row(Row::ge(vec![(w, 1.0), (c, -1.0), (x, -big_m)], -big_m));
            }
        }
    }
    Ok(art)
}

/// Noncumulative formulation: every period earns only its spawning demand.
pub fn build_dflp(inst: &Instance) -> Result<FormulationArtifacts> {
    ensure_valid(inst)?;
    let mut art = FormulationArtifacts::new(FormulationKind::Noncumulative, inst);
    add_indicators(&mut art, inst, |i, j, t| inst.reward[i] * inst.demand(j, t));
    add_indicator_rows(&mut art, inst);
    Ok(art)
}

/// Reads the opened locations off an integer solution.
pub fn extract_policy(art: &FormulationArtifacts, solution: &MipSolution) -> Result<LocationPolicy> {
    if !solution.has_incumbent() {
        return Err(Error::Contract(format!(
            "solution with status {} has no incumbent",
            solution.status
        )));
    }
    policy_from_values(art, &solution.x)
}

pub(crate) fn policy_from_values(art: &FormulationArtifacts, x: &[f64]) -> Result<LocationPolicy> {
    let mut open = vec![Vec::new(); art.num_periods];
    for (t, vars) in art.y.iter().enumerate() {
        for (i, &v) in vars.iter().enumerate() {
            let value = x[v];
            if (value - value.round()).abs() > INTEGRALITY_TOL {
                return Err(Error::Contract(format!(
                    "y for location {i}, period {} is fractional ({value})",
                    t + 1
                )));
            }
            if value >= 0.5 {
                open[t].push(i);
            }
        }
    }
    Ok(LocationPolicy::new(open))
}

/// Optimum of the continuous relaxation.
pub fn relaxation_bound(art: &FormulationArtifacts) -> Result<f64> {
    let sol = solve_relaxation(&art.mip)?;
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        other => Err(Error::Internal(format!("relaxation ended with status {other}"))),
    }
}

/// Opens, in each period, the locations with the largest positive relaxation
/// values, at most `facilities_per_period` of them (ties to the lower index).
pub(crate) fn round_policy(art: &FormulationArtifacts, limit: usize, x: &[f64]) -> LocationPolicy {
    let open = art
        .y
        .iter()
        .map(|vars| {
            let mut order: Vec<usize> = (0..vars.len()).filter(|&i| x[vars[i]] > INTEGRALITY_TOL).collect();
            order.sort_by(|&a, &b| x[vars[b]].total_cmp(&x[vars[a]]).then(a.cmp(&b)));
            order.truncate(limit);
            order
        })
        .collect();
    LocationPolicy::new(open)
}

/// Full variable vector of the formulation that realizes `policy`.
pub(crate) fn point_for_policy(
    art: &FormulationArtifacts,
    inst: &Instance,
    policy: &LocationPolicy,
) -> Result<Option<Vec<f64>>> {
    let eval = evaluate_policy(inst, policy)?;
    let mut point = vec![0.0; art.mip.lp.num_vars()];
    for (t, vars) in art.y.iter().enumerate() {
        for (i, &v) in vars.iter().enumerate() {
            if policy.is_open(i, t + 1) {
                point[v] = 1.0;
            }
        }
    }
    match art.kind {
        FormulationKind::DoubleIndex => {
            let sink = inst.num_periods + 1;
            for j in 0..inst.num_customers() {
                let mut from = 0;
                for t in 1..=inst.num_periods {
                    if let Some(i) = eval.captures[t - 1][j] {
                        point[art.x_arc[&(i, j, from, t)]] = 1.0;
                        from = t;
                    }
                }
                let sink_copy = inst.ranking[j].first().copied().unwrap_or(0);
                point[art.x_arc[&(sink_copy, j, from, sink)]] = 1.0;
            }
            Ok(Some(point))
        }
        FormulationKind::Master => {
            for (&w, &profit) in art.w_customer.iter().zip(&eval.customer_profit) {
                point[w] = profit;
            }
            Ok(Some(point))
        }
        FormulationKind::SingleIndex | FormulationKind::Noncumulative => {
            let mut fixed = art.clone();
            fixed.fix_policy(policy);
            let sol = solve_relaxation(&fixed.mip)?;
            Ok((sol.status == Status::Optimal).then_some(sol.x))
        }
    }
}

/// Rounds fractional relaxation points to policies and offers their
/// completions as incumbents; each policy is tried once.
pub(crate) struct Rounding<'a> {
    pub inst: &'a Instance,
    pub art: &'a FormulationArtifacts,
    tried: HashSet<LocationPolicy>,
}

impl<'a> Rounding<'a> {
    pub fn new(inst: &'a Instance, art: &'a FormulationArtifacts) -> Self {
        Rounding {
            inst,
            art,
            tried: HashSet::new(),
        }
    }

    pub fn propose(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let policy = round_policy(self.art, self.inst.facilities_per_period, x);
        if !self.tried.insert(policy.clone()) {
            return None;
        }
        point_for_policy(self.art, self.inst, &policy).ok().flatten()
    }
}

impl CutCallback for Rounding<'_> {
    fn separate(&mut self, _x: &[f64]) -> std::result::Result<Vec<Row>, EngineError> {
        Ok(Vec::new())
    }

    fn heuristic_point(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        self.propose(x)
    }
}

/// Solves a formulation of `inst` and extracts the incumbent policy, if any.
pub fn solve_formulation(
    art: &FormulationArtifacts,
    inst: &Instance,
    config: &MipConfig,
) -> Result<(MipSolution, Option<LocationPolicy>)> {
    let mut rounding = Rounding::new(inst, art);
    let sol = solve_mip(&art.mip, config, Some(&mut rounding))?;
    let policy = if sol.has_incumbent() {
        Some(extract_policy(art, &sol)?)
    } else {
        None
    };
    Ok((sol, policy))
}
