//! Bounded-variable revised simplex.
//!
//! Every row `a x (rel) b` gets a logical variable `r = a x` bounded by the
//! row relation, so the constraint matrix is `[A  -I]` and the all-logical
//! basis is always available. The basis inverse is kept in product form: a
//! file of eta columns rebuilt from scratch every [`REFACTOR_INTERVAL`]
//! updates. Phase one minimizes the sum of bound violations of the basic
//! variables and works from any starting basis, which lets branch-and-bound
//! reuse the parent basis. Pricing is Dantzig's rule with a Harris two-pass
//! ratio test; after [`STALL_THRESHOLD`] consecutive degenerate pivots,
//! Bland's rule takes over until the objective moves again.
//!
//! When every nonbasic variable can sit at the bound its reduced cost
//! favours, a dual simplex pass runs first. This covers boxed programs from
//! the all-logical basis and re-solves after bound changes or added rows.
//! The primal method then confirms optimality or finishes the solve.

use std::time::Instant;

use crate::error::EngineError;
use crate::model::{LinearProgram, Relation, Sense};
use crate::Status;

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const STALL_THRESHOLD: usize = 50;
const REFACTOR_INTERVAL: usize = 100;
/// Iterations between deadline checks.
const CLOCK_INTERVAL: usize = 32;
/// Accepted pivots in a factorization are at least this fraction of the
/// largest candidate in their column.
const FACTOR_THRESHOLD: f64 = 0.1;
/// Re-verifications allowed before an optimal or infeasible verdict is final.
const MAX_RECHECKS: usize = 8;

/// Result of a linear program solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    /// Primal values in the caller's variable space (empty unless optimal).
    pub x: Vec<f64>,
    /// Dual value per row, as the derivative of the optimal objective with
    /// respect to that row's right-hand side (empty unless optimal).
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: Status, iterations: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            duals: Vec::new(),
            objective: f64::NAN,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Final basis of a solve: one state per structural variable followed by one
/// per row logical.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    states: Vec<VarState>,
}

/// Solves `lp` with its own bounds.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, EngineError> {
    lp.validate()?;
    solve_with_bounds(lp, &lp.lower, &lp.upper, None, None).map(|(sol, _)| sol)
}

/// Solves `lp` with the given variable bounds in place of `lp.lower`/`lp.upper`,
/// starting from `warm` when given and giving up with [`Status::TimeLimit`]
/// once `deadline` passes. Also returns the final basis when one exists.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    deadline: Option<Instant>,
    warm: Option<&Basis>,
) -> Result<(LpSolution, Option<Basis>), EngineError> {
    if lower.iter().zip(upper).any(|(lo, hi)| lo > hi) {
        return Ok((LpSolution::without_point(Status::Infeasible, 0), None));
    }
    let mut solver = Solver::new(lp, lower, upper, deadline);
    let warm_ok = warm.is_some_and(|b| solver.load_basis(b));
    if !warm_ok {
        solver.slack_basis();
    }
    let outcome = match solver.dual_run()? {
        DualOutcome::Optimal | DualOutcome::NotDualFeasible => solver.run()?,
        DualOutcome::Infeasible => Outcome::Infeasible,
        DualOutcome::TimeLimit => Outcome::TimeLimit,
    };
    let basis = Basis {
        states: solver.state.clone(),
    };
    let sol = match outcome {
        Outcome::Optimal => solver.solution(lp),
        Outcome::Infeasible => LpSolution::without_point(Status::Infeasible, solver.iterations),
        Outcome::Unbounded => LpSolution::without_point(Status::Unbounded, solver.iterations),
        Outcome::TimeLimit => return Ok((LpSolution::without_point(Status::TimeLimit, solver.iterations), None)),
    };
    Ok((sol, Some(basis)))
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

enum DualOutcome {
    Optimal,
    Infeasible,
    /// The basis cannot be made dual feasible; the primal method takes over.
    NotDualFeasible,
    TimeLimit,
}

/// Product-form basis inverse: `B^-1 = E_k ... E_1`, each `E` an eta column.
#[derive(Default)]
struct EtaFile {
    pivot_row: Vec<usize>,
    pivot_value: Vec<f64>,
    start: Vec<usize>,
    index: Vec<usize>,
    value: Vec<f64>,
}

impl EtaFile {
    fn clear(&mut self) {
        self.pivot_row.clear();
        self.pivot_value.clear();
        self.start.clear();
        self.index.clear();
        self.value.clear();
    }

    fn len(&self) -> usize {
        self.pivot_row.len()
    }

    /// Appends the eta that maps the column `alpha` to the unit vector at `row`.
    fn push(&mut self, alpha: &[f64], row: usize) {
        self.pivot_row.push(row);
        self.pivot_value.push(alpha[row]);
        self.start.push(self.index.len());
        for (i, &a) in alpha.iter().enumerate() {
            if i != row && a.abs() > DROP_TOL {
                self.index.push(i);
                self.value.push(a);
            }
        }
    }

    fn push_sparse(&mut self, entries: &[(usize, f64)], row: usize, pivot: f64) {
        self.pivot_row.push(row);
        self.pivot_value.push(pivot);
        self.start.push(self.index.len());
        for &(i, a) in entries {
            if i != row && a.abs() > DROP_TOL {
                self.index.push(i);
                self.value.push(a);
            }
        }
    }

    fn range(&self, k: usize) -> std::ops::Range<usize> {
        let end = if k + 1 < self.len() {
            self.start[k + 1]
        } else {
            self.index.len()
        };
        self.start[k]..end
    }

    /// `v <- B^-1 v`.
    fn ftran(&self, v: &mut [f64]) {
        for k in 0..self.len() {
            let p = self.pivot_row[k];
            if v[p] == 0.0 {
                continue;
            }
            let vp = v[p] / self.pivot_value[k];
            v[p] = vp;
            for e in self.range(k) {
                v[self.index[e]] -= self.value[e] * vp;
            }
        }
    }

    /// `v <- B^-T v`.
    fn btran(&self, v: &mut [f64]) {
        for k in (0..self.len()).rev() {
            let p = self.pivot_row[k];
            let mut s = v[p];
            for e in self.range(k) {
                s -= self.value[e] * v[self.index[e]];
            }
            v[p] = s / self.pivot_value[k];
        }
    }
}

struct Solver {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    /// Bounds, costs (minimization form), states and values of the `n`
    /// structural and `m` logical variables.
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    /// Basic variable whose eta pivots in each row.
    head: Vec<usize>,
    etas: EtaFile,
    updates: usize,
    deadline: Option<Instant>,
    iterations: usize,
    user_sign: f64,
    cost_scale: f64,
    rhs_scale: f64,
}

impl Solver {
    fn new(lp: &LinearProgram, lower: &[f64], upper: &[f64], deadline: Option<Instant>) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    per_col[j].push((i, a));
                }
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        for col in per_col.iter_mut() {
            col.sort_by_key(|&(i, _)| i);
            col_start.push(col_row.len());
            let mut k = 0;
            while k < col.len() {
                let (i, mut a) = col[k];
                k += 1;
                while k < col.len() && col[k].0 == i {
                    a += col[k].1;
                    k += 1;
                }
                if a != 0.0 {
                    col_row.push(i);
                    col_val.push(a);
                }
            }
        }
        col_start.push(col_row.len());

        let user_sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut cost: Vec<f64> = lp.objective.iter().map(|c| user_sign * c).collect();
        let mut rhs_scale: f64 = 0.0;
        for row in &lp.rows {
            rhs_scale = rhs_scale.max(row.rhs.abs());
            let (l, u) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(u);
            cost.push(0.0);
        }
        let cost_scale = cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        Solver {
            n,
            m,
            col_start,
            col_row,
            col_val,
            lower: lo,
            upper: hi,
            cost,
            state: vec![VarState::AtLower; n + m],
            x: vec![0.0; n + m],
            head: vec![usize::MAX; m],
            etas: EtaFile::default(),
            updates: 0,
            deadline,
            iterations: 0,
            user_sign,
            cost_scale,
            rhs_scale,
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.col_row[range.clone()]
            .iter()
            .copied()
            .zip(self.col_val[range].iter().copied())
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    /// Nonbasic state closest to `preferred` that is valid for the bounds of `j`.
    fn nonbasic_state(&self, j: usize, preferred: VarState) -> VarState {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        match preferred {
            VarState::AtUpper if hi.is_finite() && !self.is_fixed(j) => VarState::AtUpper,
            _ if lo.is_finite() => VarState::AtLower,
            _ if hi.is_finite() => VarState::AtUpper,
            _ => VarState::Zero,
        }
    }

    fn set_nonbasic_value(&mut self, j: usize) {
        self.x[j] = match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Zero => 0.0,
            VarState::Basic => self.x[j],
        };
    }

    fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = self.nonbasic_state(j, VarState::AtLower);
            self.set_nonbasic_value(j);
        }
        for i in 0..self.m {
            self.state[self.n + i] = VarState::Basic;
        }
        self.refactor();
    }

    /// Installs a previous basis, extended with basic logicals for rows added
    /// since. Returns false when it does not fit.
    fn load_basis(&mut self, basis: &Basis) -> bool {
        let old = &basis.states;
        if old.len() < self.n || old.len() > self.n + self.m {
            return false;
        }
        let old_rows = old.len() - self.n;
        for j in 0..self.n + self.m {
            let s = if j < self.n {
                old[j]
            } else if j - self.n < old_rows {
                old[j]
            } else {
                VarState::Basic
            };
            self.state[j] = match s {
                VarState::Basic => VarState::Basic,
                other => self.nonbasic_state(j, other),
            };
            self.set_nonbasic_value(j);
        }
        if self.state.iter().filter(|&&s| s == VarState::Basic).count() != self.m {
            return false;
        }
        self.refactor();
        true
    }

    /// Rebuilds the eta file for the current basic set, replacing dependent
    /// columns by logicals, and recomputes the basic values. Returns false
    /// when the basis had to be repaired.
    fn refactor(&mut self) -> bool {
        let mut intact = true;
        self.etas.clear();
        self.updates = 0;
        let (n, m) = (self.n, self.m);
        let mut row_taken = vec![false; m];
        self.head.iter_mut().for_each(|h| *h = usize::MAX);
        for i in 0..m {
            if self.state[n + i] == VarState::Basic {
                row_taken[i] = true;
                self.head[i] = n + i;
                self.etas.push_sparse(&[], i, -1.0);
            }
        }
        let mut cols: Vec<usize> = (0..n).filter(|&j| self.state[j] == VarState::Basic).collect();
        cols.sort_by_key(|&j| (self.col_start[j + 1] - self.col_start[j], j));
        // Remaining basic columns touching each free row, for sparse pivot choice.
        let mut row_count = vec![0usize; m];
        for &j in &cols {
            for (i, _) in self.column(j) {
                row_count[i] += 1;
            }
        }
        let mut work = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        for &j in &cols {
            for (i, a) in self.column(j) {
                work[i] = a;
                row_count[i] -= 1;
            }
            self.etas.ftran(&mut work);
            let mut max_abs: f64 = 0.0;
            touched.clear();
            for (i, &v) in work.iter().enumerate() {
                if v != 0.0 {
                    touched.push(i);
                    if !row_taken[i] {
                        max_abs = max_abs.max(v.abs());
                    }
                }
            }
            let mut pick: Option<usize> = None;
            if max_abs > PIVOT_TOL {
                for &i in &touched {
                    if row_taken[i] || work[i].abs() < FACTOR_THRESHOLD * max_abs {
                        continue;
                    }
                    let better = match pick {
                        None => true,
                        Some(p) => {
                            row_count[i] < row_count[p]
                                || (row_count[i] == row_count[p] && work[i].abs() > work[p].abs())
                        }
                    };
                    if better {
                        pick = Some(i);
                    }
                }
            }
            match pick {
                Some(p) => {
                    let entries: Vec<(usize, f64)> = touched.iter().map(|&i| (i, work[i])).collect();
                    self.etas.push_sparse(&entries, p, work[p]);
                    row_taken[p] = true;
                    self.head[p] = j;
                }
                None => {
                    // Dependent column: drop it from the basis.
                    intact = false;
                    self.state[j] = self.nonbasic_state(j, VarState::AtLower);
                    self.set_nonbasic_value(j);
                }
            }
            for &i in &touched {
                work[i] = 0.0;
            }
        }
        for i in 0..m {
            if !row_taken[i] {
                self.state[n + i] = VarState::Basic;
                self.head[i] = n + i;
                self.etas.push_sparse(&[], i, -1.0);
            }
        }
        self.recompute_basic_values();
        intact
    }

    fn recompute_basic_values(&mut self) {
        let n = self.n;
        let mut v = vec![0.0; self.m];
        for j in 0..n {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.column(j) {
                    v[i] -= a * xj;
                }
            }
        }
        for i in 0..self.m {
            if self.state[n + i] != VarState::Basic {
                v[i] += self.x[n + i];
            }
        }
        self.etas.ftran(&mut v);
        for (p, &val) in v.iter().enumerate() {
            self.x[self.head[p]] = val;
        }
    }

    fn tol(bound: f64) -> f64 {
        PRIMAL_TOL * bound.abs().max(1.0)
    }

    fn below(&self, j: usize) -> bool {
        self.x[j] < self.lower[j] - Self::tol(self.lower[j])
    }

    fn above(&self, j: usize) -> bool {
        self.x[j] > self.upper[j] + Self::tol(self.upper[j])
    }

    fn infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0))
            .sum()
    }

    /// Basic costs of the current phase; `None` in phase two.
    fn phase_costs(&self) -> (Vec<f64>, bool) {
        let mut c = vec![0.0; self.m];
        let mut phase_one = false;
        for (p, &j) in self.head.iter().enumerate() {
            if self.below(j) {
                c[p] = -1.0;
                phase_one = true;
            } else if self.above(j) {
                c[p] = 1.0;
                phase_one = true;
            }
        }
        if !phase_one {
            for (p, &j) in self.head.iter().enumerate() {
                c[p] = self.cost[j];
            }
        }
        (c, phase_one)
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase_one: bool) -> f64 {
        let c = if phase_one { 0.0 } else { self.cost[j] };
        if j < self.n {
            c - self.column(j).map(|(i, a)| a * y[i]).sum::<f64>()
        } else {
            c + y[j - self.n]
        }
    }

    /// Entering variable and its direction of motion.
    fn price(&self, y: &[f64], phase_one: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = if phase_one { DUAL_TOL } else { DUAL_TOL * self.cost_scale };
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.reduced_cost(j, y, phase_one);
            let (score, dir) = match st {
                VarState::AtLower => (-d, 1.0),
                VarState::AtUpper => (d, -1.0),
                _ => (d.abs(), -d.signum()),
            };
            if score > tol {
                if bland {
                    return Some((j, dir));
                }
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    /// Moves nonbasic variables to the bound favoured by their reduced cost.
    /// Returns false when some variable lacks that bound.
    fn make_dual_feasible(&mut self, y: &[f64]) -> bool {
        let tol = DUAL_TOL * self.cost_scale;
        let mut moved = false;
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.reduced_cost(j, y, false);
            let wanted = if d > tol {
                VarState::AtLower
            } else if d < -tol {
                VarState::AtUpper
            } else {
                continue;
            };
            if self.state[j] == wanted {
                continue;
            }
            let bound = if wanted == VarState::AtLower { self.lower[j] } else { self.upper[j] };
            if !bound.is_finite() {
                if moved {
                    self.recompute_basic_values();
                }
                return false;
            }
            self.state[j] = wanted;
            self.set_nonbasic_value(j);
            moved = true;
        }
        if moved {
            self.recompute_basic_values();
        }
        true
    }

    /// Dual simplex from a dual feasible basis until the basic values are
    /// within bounds.
    fn dual_run(&mut self) -> Result<DualOutcome, EngineError> {
        // Past this budget the primal method finishes the solve.
        let budget = self.iterations + 1_000 + 10 * (self.n + self.m);
        let mut y = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut rechecks = 0usize;
        let mut stalled = 0usize;
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        let basic_costs = |s: &Self, y: &mut [f64]| {
            for (p, &j) in s.head.iter().enumerate() {
                y[p] = s.cost[j];
            }
            s.etas.btran(y);
        };
        basic_costs(self, &mut y);
        if !self.make_dual_feasible(&y) {
            return Ok(DualOutcome::NotDualFeasible);
        }
        let tol = DUAL_TOL * self.cost_scale;
        loop {
            if self.iterations >= budget {
                return Ok(DualOutcome::NotDualFeasible);
            }
            let bland = stalled >= STALL_THRESHOLD;
            if let Some(d) = self.deadline {
                if self.iterations % CLOCK_INTERVAL == 0 && Instant::now() >= d {
                    return Ok(DualOutcome::TimeLimit);
                }
            }
            if self.updates >= REFACTOR_INTERVAL && !self.refactor() {
                return Ok(DualOutcome::NotDualFeasible);
            }
            basic_costs(self, &mut y);

            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.head.iter().enumerate() {
                let v = if self.below(j) {
                    self.lower[j] - self.x[j]
                } else if self.above(j) {
                    self.x[j] - self.upper[j]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((q, _)) if bland => j < self.head[q],
                    Some((_, best)) => v > best,
                };
                if better {
                    leave = Some((p, v));
                }
            }
            let Some((p, _)) = leave else {
                return Ok(DualOutcome::Optimal);
            };
            let out = self.head[p];
            let increase = self.below(out);
            let target = if increase { self.lower[out] } else { self.upper[out] };

            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[p] = 1.0;
            self.etas.btran(&mut rho);

            // Entering candidates keep every reduced cost sign-correct.
            candidates.clear();
            let mut theta_max = f64::INFINITY;
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = if j < self.n {
                    self.column(j).map(|(i, v)| v * rho[i]).sum::<f64>()
                } else {
                    -rho[j - self.n]
                };
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // Moving x_j by +1 changes the leaving value by -a.
                let up = (a < 0.0) == increase;
                let allowed = match st {
                    VarState::AtLower => up,
                    VarState::AtUpper => !up,
                    _ => true,
                };
                if !allowed {
                    continue;
                }
                let d = self.reduced_cost(j, &y, false);
                let slack = if up { d.max(0.0) } else { (-d).max(0.0) };
                theta_max = theta_max.min((slack + tol) / a.abs());
                candidates.push((j, a, slack / a.abs()));
            }
            let mut entering: Option<(usize, f64, f64)> = None;
            if bland {
                let exact = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                entering = candidates
                    .iter()
                    .find(|c| c.2 <= exact + tol / c.1.abs())
                    .map(|&(j, a, r)| (j, a, r));
            } else {
                let mut best_abs = 0.0;
                for &(j, a, ratio) in &candidates {
                    if ratio <= theta_max && a.abs() > best_abs {
                        best_abs = a.abs();
                        entering = Some((j, a, ratio));
                    }
                }
            }
            let Some((q, a_q, dual_step)) = entering else {
                if self.updates > 0 && rechecks < MAX_RECHECKS {
                    rechecks += 1;
                    if !self.refactor() {
                        return Ok(DualOutcome::NotDualFeasible);
                    }
                    continue;
                }
                return Ok(DualOutcome::Infeasible);
            };
            self.iterations += 1;
            let alpha = self.entering_column(q);
            let pivot = alpha[p];
            if pivot.abs() <= PIVOT_TOL || (pivot - a_q).abs() > 1e-6 * (1.0 + a_q.abs()) {
                // Row and column disagree: the factorization has drifted.
                if !self.refactor() {
                    return Ok(DualOutcome::NotDualFeasible);
                }
                continue;
            }
            if dual_step * a_q.abs() <= tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
            let step = (self.x[out] - target) / pivot;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= a * step;
                }
            }
            self.x[q] += step;
            self.state[out] = if increase { VarState::AtLower } else { VarState::AtUpper };
            if self.is_fixed(out) {
                self.state[out] = VarState::AtLower;
            }
            self.set_nonbasic_value(out);
            self.state[q] = VarState::Basic;
            self.head[p] = q;
            self.etas.push(&alpha, p);
            self.updates += 1;
        }
    }

    fn entering_column(&self, q: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.m];
        if q < self.n {
            for (i, a) in self.column(q) {
                alpha[i] = a;
            }
        } else {
            alpha[q - self.n] = -1.0;
        }
        self.etas.ftran(&mut alpha);
        alpha
    }

    /// Step limit imposed by basic variable `j` moving at `rate` per unit of
    /// the entering step: `(limit with tolerance, exact limit, leaves at upper)`.
    fn blocking(&self, j: usize, rate: f64, phase_one: bool) -> Option<(f64, f64, bool)> {
        let (lo, hi, xj) = (self.lower[j], self.upper[j], self.x[j]);
        if rate < 0.0 {
            let target = if phase_one && self.above(j) {
                (hi, true)
            } else if phase_one && self.below(j) {
                return None;
            } else {
                (lo, false)
            };
            if !target.0.is_finite() {
                return None;
            }
            let gap = xj - target.0;
            Some(((gap + Self::tol(target.0)) / -rate, gap.max(0.0) / -rate, target.1))
        } else {
            let target = if phase_one && self.below(j) {
                (lo, false)
            } else if phase_one && self.above(j) {
                return None;
            } else {
                (hi, true)
            };
            if !target.0.is_finite() {
                return None;
            }
            let gap = target.0 - xj;
            Some(((gap + Self::tol(target.0)) / rate, gap.max(0.0) / rate, target.1))
        }
    }

    fn run(&mut self) -> Result<Outcome, EngineError> {
        let max_iterations = 100_000 + 50 * (self.n + self.m);
        let mut degenerate_run = 0usize;
        let mut rechecks = 0usize;
        let mut y = vec![0.0; self.m];
        loop {
            if self.iterations >= max_iterations {
                return Err(EngineError::Numerical(format!(
                    "simplex exceeded {max_iterations} iterations"
                )));
            }
            if let Some(d) = self.deadline {
                if self.iterations % CLOCK_INTERVAL == 0 && Instant::now() >= d {
                    return Ok(Outcome::TimeLimit);
                }
            }
            if self.updates >= REFACTOR_INTERVAL {
                self.refactor();
            }
            let (c, phase_one) = self.phase_costs();
            y.copy_from_slice(&c);
            self.etas.btran(&mut y);
            let bland = degenerate_run > STALL_THRESHOLD;
            let Some((q, dir)) = self.price(&y, phase_one, bland) else {
                // Confirm the verdict on a fresh factorization.
                if self.updates > 0 && rechecks < MAX_RECHECKS {
                    rechecks += 1;
                    self.refactor();
                    continue;
                }
                if phase_one {
                    if self.infeasibility() > 1e-7 * (1.0 + self.rhs_scale) {
                        return Ok(Outcome::Infeasible);
                    }
                    // Residual violations within tolerance: snap and continue.
                    for p in 0..self.m {
                        let j = self.head[p];
                        self.x[j] = self.x[j].clamp(self.lower[j], self.upper[j]);
                    }
                    if self.phase_costs().1 {
                        return Ok(Outcome::Infeasible);
                    }
                    continue;
                }
                return Ok(Outcome::Optimal);
            };
            self.iterations += 1;
            let alpha = self.entering_column(q);

            // Harris pass one: largest step keeping every basic within tolerance.
            let mut theta_max = f64::INFINITY;
            for (p, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some((relaxed, _, _)) = self.blocking(self.head[p], -dir * a, phase_one) {
                    theta_max = theta_max.min(relaxed);
                }
            }
            let range = self.upper[q] - self.lower[q];
            let flip = range.is_finite() && range <= theta_max;
            let mut leave: Option<(usize, f64, bool)> = None;
            if !flip {
                if theta_max == f64::INFINITY {
                    if phase_one {
                        // A phase-one ray means the factorization drifted.
                        self.refactor();
                        degenerate_run = 0;
                        continue;
                    }
                    return Ok(Outcome::Unbounded);
                }
                // Pass two: largest pivot among rows blocking within the limit.
                let mut best_abs = 0.0;
                for (p, &a) in alpha.iter().enumerate() {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let j = self.head[p];
                    let Some((_, exact, to_upper)) = self.blocking(j, -dir * a, phase_one) else {
                        continue;
                    };
                    if exact > theta_max {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((lp, le, _)) => {
                            if bland {
                                exact < le - 1e-12 || (exact <= le + 1e-12 && j < self.head[lp])
                            } else {
                                a.abs() > best_abs
                            }
                        }
                    };
                    if better {
                        leave = Some((p, exact, to_upper));
                        best_abs = a.abs();
                    }
                }
            }
            let theta = if flip {
                range
            } else {
                leave.map_or(0.0, |(_, t, _)| t)
            };
            if theta > 1e-12 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            if theta != 0.0 {
                for (p, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.head[p];
                        self.x[j] -= dir * theta * a;
                    }
                }
                self.x[q] += dir * theta;
            }
            if flip {
                self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                self.set_nonbasic_value(q);
                continue;
            }
            let (p, _, to_upper) = leave.expect("a blocking row exists when no flip happens");
            let out = self.head[p];
            self.state[out] = if self.is_fixed(out) || !to_upper {
                if self.lower[out].is_finite() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                }
            } else {
                VarState::AtUpper
            };
            self.set_nonbasic_value(out);
            self.state[q] = VarState::Basic;
            self.head[p] = q;
            self.etas.push(&alpha, p);
            self.updates += 1;
        }
    }

    fn solution(&mut self, lp: &LinearProgram) -> LpSolution {
        let mut y = vec![0.0; self.m];
        for (p, &j) in self.head.iter().enumerate() {
            y[p] = self.cost[j];
        }
        self.etas.btran(&mut y);
        let x: Vec<f64> = (0..self.n)
            .map(|j| self.x[j].clamp(self.lower[j], self.upper[j]))
            .collect();
        let duals = y
            .iter()
            .map(|&v| {
                let d = self.user_sign * v;
                if d.abs() < DROP_TOL {
                    0.0
                } else {
                    d
                }
            })
            .collect();
        let objective = lp.objective_value(&x);
        LpSolution {
            status: Status::Optimal,
            x,
            duals,
            objective,
            iterations: self.iterations,
        }
    }
}
