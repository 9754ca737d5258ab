//! Best-bound branch-and-bound with lazy cuts.
//!
//! Each node re-solves the continuous relaxation with its own bound
//! overrides and the current cut pool. Until a first incumbent exists
//! the search dives depth-first along the nearest rounding. Children start
//! from the final basis of their parent. Whenever a node
//! relaxation is integer feasible, the cut callback (if any) may return
//! violated rows; these are appended globally and the node is solved again.
//! The candidate becomes the incumbent only once the callback returns no
//! cut, but the callback may offer a repaired feasible point instead.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::EngineError;
use crate::model::{check_row, LinearProgram, MixedIntegerProgram, Row, Sense};
use crate::simplex::{solve_with_bounds, Basis, LpSolution};
use crate::Status;

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Lazy constraint generator invoked at integer-feasible relaxation points.
pub trait CutCallback {
    /// Returns rows violated by `x`, or an empty vector to accept it.
    fn separate(&mut self, x: &[f64]) -> Result<Vec<Row>, EngineError>;

    /// Feasible point derived from a candidate that [`separate`] just
    /// rejected. The engine checks it against bounds, integrality and every
    /// row before using it as an incumbent.
    ///
    /// [`separate`]: CutCallback::separate
    fn feasible_point(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Feasible point guessed from a fractional relaxation point, checked
    /// like [`feasible_point`].
    ///
    /// [`feasible_point`]: CutCallback::feasible_point
    fn heuristic_point(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<F> CutCallback for F
where
    F: FnMut(&[f64]) -> Result<Vec<Row>, EngineError>,
{
    fn separate(&mut self, x: &[f64]) -> Result<Vec<Row>, EngineError> {
        self(x)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MipConfig {
    pub time_limit: Option<Duration>,
}

impl MipConfig {
    pub fn with_time_limit(limit: Duration) -> Self {
        MipConfig {
            time_limit: Some(limit),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: Status,
    /// Incumbent point (empty when none was found).
    pub x: Vec<f64>,
    /// Incumbent objective (NaN when none was found).
    pub objective: f64,
    /// Best proven bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
    /// Root relaxation objective.
    pub root_bound: f64,
    pub cuts_added: usize,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }

    /// Relative gap `|bound - objective| / max(|bound|, eps)`, 0 when proven optimal.
    pub fn gap(&self) -> f64 {
        if self.status == Status::Optimal {
            return 0.0;
        }
        if !self.has_incumbent() {
            return f64::INFINITY;
        }
        (self.bound - self.objective).abs() / self.bound.abs().max(1e-10)
    }
}

struct Node {
    id: usize,
    bound: f64,
    /// (variable, lower, upper) overrides relative to the root.
    fixings: Vec<(usize, f64, f64)>,
    /// Final basis of the parent relaxation.
    basis: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on bound; ties go to the older node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `mip` to optimality (or until the time limit).
pub fn solve_mip(
    mip: &MixedIntegerProgram,
    config: &MipConfig,
    mut callback: Option<&mut dyn CutCallback>,
) -> Result<MipSolution, EngineError> {
    mip.validate()?;
    let start = Instant::now();
    let sign = match mip.lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut lp = mip.lp.clone();
    let mut is_integer = vec![false; lp.num_vars()];
    for &j in &mip.integers {
        is_integer[j] = true;
    }
    // Integer variables get integral bounds up front.
    let root_lower: Vec<f64> = lp
        .lower
        .iter()
        .enumerate()
        .map(|(j, &v)| if is_integer[j] { (v - INTEGRALITY_TOL).ceil() } else { v })
        .collect();
    let root_upper: Vec<f64> = lp
        .upper
        .iter()
        .enumerate()
        .map(|(j, &v)| if is_integer[j] { (v + INTEGRALITY_TOL).floor() } else { v })
        .collect();

    let deadline = config.time_limit.map(|limit| start + limit);
    let mut heap = BinaryHeap::new();
    let mut dive = Some(Node {
        id: 0,
        bound: f64::INFINITY,
        fixings: Vec::new(),
        basis: None,
    });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut cuts_added = 0;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut root_bound = f64::NAN;
    let mut timed_out = false;

    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();

    'search: while let Some(node) = dive.take().or_else(|| heap.pop()) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            heap.push(node);
            timed_out = true;
            break;
        }
        if let Some((_, inc)) = &incumbent {
            if node.bound <= prune_threshold(*inc) {
                continue;
            }
        }
        nodes += 1;
        lower.copy_from_slice(&root_lower);
        upper.copy_from_slice(&root_upper);
        for &(j, lo, hi) in &node.fixings {
            lower[j] = lo;
            upper[j] = hi;
        }

        // Solve the node, re-solving after every round of lazy cuts.
        let mut warm = node.basis.clone();
        let (relaxation, branch_var) = loop {
            let (sol, basis) = solve_with_bounds(&lp, &lower, &upper, deadline, warm.as_deref())?;
            if basis.is_some() {
                warm = basis.map(Rc::new);
            }
            match sol.status {
                Status::Optimal => {}
                Status::TimeLimit => {
                    heap.push(node);
                    timed_out = true;
                    break 'search;
                }
                Status::Unbounded if node.id == 0 => {
                    return Ok(MipSolution {
                        status: Status::Unbounded,
                        x: Vec::new(),
                        objective: f64::NAN,
                        bound: sign * f64::INFINITY,
                        nodes,
                        root_bound: sign * f64::INFINITY,
                        cuts_added,
                    });
                }
                _ => break (None, None),
            }
            let value = sign * sol.objective;
            if node.id == 0 && root_bound.is_nan() {
                root_bound = value;
            }
            if let Some((_, inc)) = &incumbent {
                if value <= prune_threshold(*inc) {
                    break (None, None);
                }
            }
            let branch = most_fractional(&sol.x, &mip.integers);
            if branch.is_some() {
                let offered = callback.as_deref_mut().and_then(|cb| cb.heuristic_point(&sol.x));
                offer(&lp, &root_lower, &root_upper, &mip.integers, sign, offered, &mut incumbent);
                break (Some(sol), branch);
            }
            let cuts = match callback.as_deref_mut() {
                Some(cb) => cb.separate(&sol.x)?,
                None => Vec::new(),
            };
            if cuts.is_empty() {
                break (Some(sol), None);
            }
            for cut in cuts {
                check_row(&cut, lp.num_vars()).map_err(EngineError::MalformedCut)?;
                lp.add_row(cut);
                cuts_added += 1;
            }
            let offered = callback.as_deref_mut().and_then(|cb| cb.feasible_point(&sol.x));
            offer(&lp, &root_lower, &root_upper, &mip.integers, sign, offered, &mut incumbent);
        };
        let Some(sol) = relaxation else { continue };
        let value = sign * sol.objective;
        match branch_var {
            None => {
                let better = incumbent.as_ref().map_or(true, |(_, inc)| value > *inc);
                if better {
                    let x = round_integers(sol.x, &mip.integers);
                    incumbent = Some((x, value));
                }
            }
            Some(j) => {
                let v = sol.x[j];
                let (down, up) = (v.floor(), v.ceil());
                let mut down_fix = node.fixings.clone();
                down_fix.push((j, lower[j], down));
                let mut up_fix = node.fixings;
                up_fix.push((j, up, upper[j]));
                let mut children = [down_fix, up_fix].map(|fixings| {
                    next_id += 1;
                    Node {
                        id: next_id - 1,
                        bound: value,
                        fixings,
                        basis: warm.clone(),
                    }
                });
                if v - down >= 0.5 {
                    children.reverse();
                }
                let [near, far] = children;
                heap.push(far);
                if incumbent.is_none() {
                    dive = Some(near);
                } else {
                    heap.push(near);
                }
            }
        }
    }

    heap.extend(dive);
    let open_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let (status, x, objective, bound) = match (incumbent, timed_out) {
        (Some((x, obj)), false) => (Status::Optimal, x, obj, obj),
        (Some((x, obj)), true) => {
            let bound = open_bound.max(obj);
            let bound = if bound.is_finite() { bound } else { root_bound.max(obj) };
            (Status::TimeLimit, x, obj, bound)
        }
        (None, false) => {
            return Ok(MipSolution {
                status: Status::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                bound: f64::NAN,
                nodes,
                root_bound: sign * root_bound,
                cuts_added,
            })
        }
        (None, true) => {
            // Without a solved root the bound stays infinite.
            let bound = if open_bound.is_finite() || root_bound.is_nan() {
                open_bound
            } else {
                root_bound
            };
            (Status::TimeLimit, Vec::new(), f64::NAN, bound)
        }
    };
    debug_assert!(
        root_bound.is_nan() || x.is_empty() || objective <= root_bound + 1e-6 * (1.0 + root_bound.abs()),
        "incumbent {objective} exceeds root relaxation {root_bound}"
    );
    Ok(MipSolution {
        status,
        objective: sign * objective,
        bound: sign * bound,
        x,
        nodes,
        root_bound: sign * root_bound,
        cuts_added,
    })
}

/// Replaces the incumbent by `point` when it is feasible and better.
fn offer(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    integers: &[usize],
    sign: f64,
    point: Option<Vec<f64>>,
    incumbent: &mut Option<(Vec<f64>, f64)>,
) {
    let Some(x) = point.and_then(|p| accept_point(lp, lower, upper, integers, p)) else {
        return;
    };
    let value = sign * lp.objective_value(&x);
    if incumbent.as_ref().map_or(true, |(_, inc)| value > *inc) {
        *incumbent = Some((x, value));
    }
}

/// Returns `point` with integer entries rounded if it satisfies every bound
/// and row of `lp` within tolerance.
fn accept_point(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    integers: &[usize],
    point: Vec<f64>,
) -> Option<Vec<f64>> {
    if point.len() != lp.num_vars() || point.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if integers.iter().any(|&j| (point[j] - point[j].round()).abs() > INTEGRALITY_TOL) {
        return None;
    }
    let x = round_integers(point, integers);
    let in_bounds = x
        .iter()
        .zip(lower.iter().zip(upper))
        .all(|(&v, (&lo, &hi))| v >= lo - FEASIBILITY_TOL && v <= hi + FEASIBILITY_TOL);
    let rows_hold = lp
        .rows
        .iter()
        .all(|r| r.violation(&x) <= 1e-6 * (1.0 + r.rhs.abs()));
    (in_bounds && rows_hold).then_some(x)
}

fn prune_threshold(incumbent: f64) -> f64 {
    incumbent + 1e-6 * incumbent.abs().max(1.0)
}

fn most_fractional(x: &[f64], integers: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in integers {
        let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
        if frac > INTEGRALITY_TOL {
            let take = match best {
                None => true,
                Some((bj, bf)) => frac > bf + 1e-12 || ((frac - bf).abs() <= 1e-12 && j < bj),
            };
            if take {
                best = Some((j, frac));
            }
        }
    }
    best.map(|(j, _)| j)
}

fn round_integers(mut x: Vec<f64>, integers: &[usize]) -> Vec<f64> {
    for &j in integers {
        x[j] = x[j].round();
    }
    x
}

/// Solves the continuous relaxation of `mip`.
pub fn solve_relaxation(mip: &MixedIntegerProgram) -> Result<LpSolution, EngineError> {
    crate::simplex::solve_lp(&mip.lp)
}
