//! Reference two-phase primal simplex on a dense tableau, used as a test oracle.
//!
//! Variables are brought to the form `0 <= x <= u` (shifting, mirroring or
//! splitting as needed), rows are scaled so every right-hand side is
//! nonnegative, and each row receives a slack or an artificial so that the
//! starting basis is the identity. Nonbasic variables sit at either bound.
//! Dantzig pricing is used until a run of degenerate pivots exceeds
//! `STALL_THRESHOLD`, after which Bland's rule takes over until the
//! objective moves again.

#![allow(dead_code)]

use std::time::Instant;

use dflp_engine::{EngineError, LinearProgram, LpSolution, Relation, Sense, Status};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-13;
const STALL_THRESHOLD: usize = 50;
/// Iterations between deadline checks.
const CLOCK_INTERVAL: usize = 32;

fn without_point(status: Status, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: Vec::new(),
        duals: Vec::new(),
        objective: f64::NAN,
        iterations,
    }
}

/// Solves `lp` with its own bounds.
pub fn solve_dense(lp: &LinearProgram) -> Result<LpSolution, EngineError> {
    lp.validate()?;
    solve_with_bounds(lp, &lp.lower, &lp.upper, None)
}

/// Solves `lp` with the given variable bounds in place of `lp.lower`/`lp.upper`,
/// giving up with `Status::TimeLimit` once `deadline` passes.
fn solve_with_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    deadline: Option<Instant>,
) -> Result<LpSolution, EngineError> {
    if lower.iter().zip(upper).any(|(lo, hi)| lo > hi) {
        return Ok(without_point(Status::Infeasible, 0));
    }
    let form = match StandardForm::build(lp, lower, upper) {
        Some(f) => f,
        None => return Ok(without_point(Status::Infeasible, 0)),
    };
    let mut tab = Tableau::new(&form);
    let mut iterations = 0;

    if form.num_artificial > 0 {
        let phase1_cost: Vec<f64> = (0..tab.ncols)
            .map(|c| if c >= form.first_artificial { -1.0 } else { 0.0 })
            .collect();
        tab.set_cost(&phase1_cost);
        match tab.run(&mut iterations, usize::MAX, deadline)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(EngineError::Numerical(
                    "phase one reported an unbounded ray".into(),
                ))
            }
            Outcome::TimeLimit => {
                return Ok(without_point(Status::TimeLimit, iterations))
            }
        }
        let infeasibility: f64 = tab
            .basis
            .iter()
            .zip(&tab.xb)
            .filter(|(&c, _)| c >= form.first_artificial)
            .map(|(_, &v)| v)
            .sum();
        if infeasibility > 1e-7 * (1.0 + form.rhs_scale) {
            return Ok(without_point(Status::Infeasible, iterations));
        }
        for c in form.first_artificial..tab.ncols {
            tab.upper[c] = 0.0;
            tab.at_upper[c] = false;
        }
        for (r, &c) in tab.basis.iter().enumerate() {
            if c >= form.first_artificial {
                tab.xb[r] = 0.0;
            }
        }
    }

    tab.set_cost(&form.cost);
    match tab.run(&mut iterations, form.first_artificial, deadline)? {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Ok(without_point(Status::Unbounded, iterations))
        }
        Outcome::TimeLimit => {
            return Ok(without_point(Status::TimeLimit, iterations))
        }
    }

    let values = tab.column_values();
    let x = form.recover_primal(&values);
    let duals = form.recover_duals(&tab);
    let objective = lp.objective_value(&x);
    Ok(LpSolution {
        status: Status::Optimal,
        x,
        duals,
        objective,
        iterations,
    })
}

#[derive(Debug, Clone, Copy)]
enum ColMap {
    Fixed(f64),
    /// x = offset + col
    Shift(usize, f64),
    /// x = offset - col
    Mirror(usize, f64),
    /// x = plus - minus
    Split(usize, usize),
}

struct StandardForm {
    /// Sparse structural+slack columns, indexed by tableau row.
    columns: Vec<Vec<(usize, f64)>>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// Column forming the initial identity basis for each tableau row.
    initial_basis: Vec<usize>,
    first_artificial: usize,
    num_artificial: usize,
    /// For each original row: tableau row and the sign applied to it.
    row_map: Vec<Option<(usize, f64)>>,
    var_map: Vec<ColMap>,
    sense_sign: f64,
    rhs_scale: f64,
}

impl StandardForm {
    fn build(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Option<Self> {
        let sense_sign = match lp.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut var_map = Vec::with_capacity(lp.num_vars());
        let mut col_upper = Vec::new();
        let mut cost = Vec::new();
        for j in 0..lp.num_vars() {
            let (lo, hi) = (lower[j], upper[j]);
            let c = sense_sign * lp.objective[j];
            let map = if lo == hi {
                ColMap::Fixed(lo)
            } else if lo.is_finite() {
                col_upper.push(hi - lo);
                cost.push(c);
                ColMap::Shift(col_upper.len() - 1, lo)
            } else if hi.is_finite() {
                col_upper.push(f64::INFINITY);
                cost.push(-c);
                ColMap::Mirror(col_upper.len() - 1, hi)
            } else {
                col_upper.push(f64::INFINITY);
                cost.push(c);
                col_upper.push(f64::INFINITY);
                cost.push(-c);
                ColMap::Split(col_upper.len() - 2, col_upper.len() - 1)
            };
            var_map.push(map);
        }
        let num_struct = col_upper.len();

        // Translate rows into structural columns.
        let mut kept: Vec<(Vec<(usize, f64)>, Relation, f64, usize, f64)> = Vec::new();
        let mut row_map = vec![None; lp.num_rows()];
        let mut rhs_scale: f64 = 0.0;
        for (i, row) in lp.rows.iter().enumerate() {
            let mut rhs = row.rhs;
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                match var_map[j] {
                    ColMap::Fixed(v) => rhs -= a * v,
                    ColMap::Shift(c, off) => {
                        rhs -= a * off;
                        coeffs.push((c, a));
                    }
                    ColMap::Mirror(c, off) => {
                        rhs -= a * off;
                        coeffs.push((c, -a));
                    }
                    ColMap::Split(p, m) => {
                        coeffs.push((p, a));
                        coeffs.push((m, -a));
                    }
                }
            }
            coeffs.sort_by_key(|&(c, _)| c);
            coeffs.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            coeffs.retain(|&(_, a)| a != 0.0);
            if coeffs.is_empty() {
                let tol = 1e-9 * (1.0 + row.rhs.abs());
                let ok = match row.relation {
                    Relation::Le => rhs >= -tol,
                    Relation::Ge => rhs <= tol,
                    Relation::Eq => rhs.abs() <= tol,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let (mut relation, mut sign) = (row.relation, 1.0);
            if rhs < 0.0 {
                sign = -1.0;
                rhs = -rhs;
                for c in coeffs.iter_mut() {
                    c.1 = -c.1;
                }
                relation = match relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rhs_scale = rhs_scale.max(rhs);
            row_map[i] = Some((kept.len(), sign));
            kept.push((coeffs, relation, rhs, i, sign));
        }

        let m = kept.len();
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_struct];
        for (r, (coeffs, _, _, _, _)) in kept.iter().enumerate() {
            for &(c, a) in coeffs {
                columns[c].push((r, a));
            }
        }
        let mut initial_basis = vec![usize::MAX; m];
        for (r, (_, relation, _, _, _)) in kept.iter().enumerate() {
            match relation {
                Relation::Le => {
                    columns.push(vec![(r, 1.0)]);
                    col_upper.push(f64::INFINITY);
                    cost.push(0.0);
                    initial_basis[r] = columns.len() - 1;
                }
                Relation::Ge => {
                    columns.push(vec![(r, -1.0)]);
                    col_upper.push(f64::INFINITY);
                    cost.push(0.0);
                }
                Relation::Eq => {}
            }
        }
        let first_artificial = columns.len();
        for (r, (_, relation, _, _, _)) in kept.iter().enumerate() {
            if *relation != Relation::Le {
                columns.push(vec![(r, 1.0)]);
                col_upper.push(f64::INFINITY);
                cost.push(0.0);
                initial_basis[r] = columns.len() - 1;
            }
        }
        let num_artificial = columns.len() - first_artificial;
        let rhs = kept.iter().map(|k| k.2).collect();
        Some(StandardForm {
            columns,
            upper: col_upper,
            cost,
            rhs,
            initial_basis,
            first_artificial,
            num_artificial,
            row_map,
            var_map,
            sense_sign,
            rhs_scale,
        })
    }

    fn recover_primal(&self, values: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|m| match *m {
                ColMap::Fixed(v) => v,
                ColMap::Shift(c, off) => off + values[c],
                ColMap::Mirror(c, off) => off - values[c],
                ColMap::Split(p, q) => values[p] - values[q],
            })
            .collect()
    }

    fn recover_duals(&self, tab: &Tableau) -> Vec<f64> {
        self.row_map
            .iter()
            .map(|entry| match *entry {
                None => 0.0,
                Some((r, sign)) => {
                    let y = -tab.reduced[self.initial_basis[r]];
                    let y = if y.abs() < ZERO_TOL { 0.0 } else { y };
                    self.sense_sign * sign * y
                }
            })
            .collect()
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    TimeLimit,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m x ncols` matrix B^-1 A.
    data: Vec<f64>,
    /// Reduced costs c_j - c_B B^-1 A_j.
    reduced: Vec<f64>,
    cost: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    /// Values of the basic variables.
    xb: Vec<f64>,
    scratch: Vec<usize>,
}

impl Tableau {
    fn new(form: &StandardForm) -> Self {
        let m = form.rhs.len();
        let ncols = form.columns.len();
        let mut data = vec![0.0; m * ncols];
        for (c, col) in form.columns.iter().enumerate() {
            for &(r, a) in col {
                data[r * ncols + c] = a;
            }
        }
        let mut is_basic = vec![false; ncols];
        for &c in &form.initial_basis {
            is_basic[c] = true;
        }
        Tableau {
            m,
            ncols,
            data,
            reduced: vec![0.0; ncols],
            cost: vec![0.0; ncols],
            upper: form.upper.clone(),
            basis: form.initial_basis.clone(),
            is_basic,
            at_upper: vec![false; ncols],
            xb: form.rhs.clone(),
            scratch: Vec::with_capacity(ncols),
        }
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.reduced.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.data[r * self.ncols..(r + 1) * self.ncols];
            for (d, &a) in self.reduced.iter_mut().zip(row) {
                *d -= cb * a;
            }
        }
        for &c in &self.basis {
            self.reduced[c] = 0.0;
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut values: Vec<f64> = (0..self.ncols)
            .map(|c| if self.at_upper[c] { self.upper[c] } else { 0.0 })
            .collect();
        for (r, &c) in self.basis.iter().enumerate() {
            values[c] = self.xb[r].clamp(0.0, self.upper[c]);
        }
        values
    }

    /// Runs primal simplex iterations; columns at or beyond `enter_limit`
    /// are never chosen to enter.
    fn run(
        &mut self,
        iterations: &mut usize,
        enter_limit: usize,
        deadline: Option<Instant>,
    ) -> Result<Outcome, EngineError> {
        let max_iterations = 50_000 + 200 * (self.m + self.ncols);
        let mut degenerate_run = 0usize;
        let limit = enter_limit.min(self.ncols);
        loop {
            if *iterations >= max_iterations {
                return Err(EngineError::Numerical(format!(
                    "simplex exceeded {max_iterations} iterations"
                )));
            }
            if let Some(d) = deadline {
                if *iterations % CLOCK_INTERVAL == 0 && Instant::now() >= d {
                    return Ok(Outcome::TimeLimit);
                }
            }
            let bland = degenerate_run > STALL_THRESHOLD;
            let entering = self.choose_entering(limit, bland);
            let Some(j) = entering else {
                return Ok(Outcome::Optimal);
            };
            *iterations += 1;
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // Ratio test.
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0;
            for r in 0..self.m {
                let a = dir * self.data[r * self.ncols + j];
                let (limit_r, to_upper) = if a > PIVOT_TOL {
                    (self.xb[r] / a, false)
                } else if a < -PIVOT_TOL && self.upper[self.basis[r]].is_finite() {
                    ((self.upper[self.basis[r]] - self.xb[r]) / -a, true)
                } else {
                    continue;
                };
                let limit_r = limit_r.max(0.0);
                let better = match leave {
                    None => limit_r <= theta + 1e-12,
                    Some((lr, _)) => {
                        if limit_r < theta - 1e-12 {
                            true
                        } else if limit_r <= theta + 1e-12 {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                a.abs() > best_pivot
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit_r;
                    leave = Some((r, to_upper));
                    best_pivot = a.abs();
                }
            }
            if theta == f64::INFINITY {
                return Ok(Outcome::Unbounded);
            }
            if theta > 1e-12 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            // Move basic variables along the edge.
            if theta != 0.0 {
                for r in 0..self.m {
                    let a = self.data[r * self.ncols + j];
                    if a != 0.0 {
                        self.xb[r] -= dir * theta * a;
                    }
                }
            }
            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let start = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                    let entering_value = start + dir * theta;
                    let old = self.basis[r];
                    self.is_basic[old] = false;
                    self.at_upper[old] = to_upper;
                    self.pivot(r, j);
                    self.basis[r] = j;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.xb[r] = entering_value;
                }
            }
        }
    }

    fn choose_entering(&self, limit: usize, bland: bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut best_score = 0.0;
        for c in 0..limit {
            if self.is_basic[c] {
                continue;
            }
            let d = self.reduced[c];
            let score = if self.at_upper[c] {
                -d
            } else if self.upper[c] > 0.0 {
                d
            } else {
                continue;
            };
            if score > DUAL_TOL {
                if bland {
                    return Some(c);
                }
                if score > best_score {
                    best_score = score;
                    best = Some(c);
                }
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncols;
        let piv = self.data[r * n + j];
        self.scratch.clear();
        {
            let row = &mut self.data[r * n..(r + 1) * n];
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    if v.abs() < ZERO_TOL {
                        *v = 0.0;
                    } else {
                        self.scratch.push(c);
                    }
                }
            }
            row[j] = 1.0;
        }
        let (before, rest) = self.data.split_at_mut(r * n);
        let (pivot_row, after) = rest.split_at_mut(n);
        for other in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = other[j];
            if f == 0.0 {
                continue;
            }
            for &c in &self.scratch {
                let v = other[c] - f * pivot_row[c];
                other[c] = if v.abs() < ZERO_TOL { 0.0 } else { v };
            }
            other[j] = 0.0;
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for &c in &self.scratch {
                self.reduced[c] -= f * pivot_row[c];
            }
        }
        self.reduced[j] = 0.0;
    }
}
