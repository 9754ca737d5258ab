//! Exhaustive enumeration and the assignment-based solver for loyal customers.

use crate::error::{Error, Result};
use crate::model::{ensure_valid, evaluate_policy, profit_with_masks, Instance, LocationPolicy};

#[derive(Debug, Clone, Copy)]
pub struct BruteForceLimits {
    pub max_policies: u128,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits {
            max_policies: 20_000_000,
        }
    }
}

/// All subsets of `0..n` with at most `k` elements, in lexicographic order.
pub(crate) fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(current.clone());
        if current.len() == k {
            return;
        }
        for i in start..n {
            current.push(i);
            extend(n, k, i + 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(n, k, 0, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of policies enumerated by [`brute_force`], saturating at `u128::MAX`.
pub fn enumeration_size(inst: &Instance) -> u128 {
    let per_period: u128 = (0..=inst.facilities_per_period.min(inst.num_locations))
        .map(|k| binomial(inst.num_locations as u128, k as u128))
        .sum();
    (0..inst.num_periods).fold(1u128, |acc, _| acc.saturating_mul(per_period))
}

/// Enumerates every feasible policy and returns the lexicographically
/// smallest maximizer.
pub fn brute_force(inst: &Instance, limits: BruteForceLimits) -> Result<(LocationPolicy, f64)> {
    ensure_valid(inst)?;
    let needed = enumeration_size(inst);
    if needed > limits.max_policies {
        return Err(Error::Size {
            needed,
            limit: limits.max_policies,
        });
    }
    let subsets = subsets_up_to(inst.num_locations, inst.facilities_per_period);
    let masks: Vec<Vec<bool>> = subsets
        .iter()
        .map(|s| {
            let mut m = vec![false; inst.num_locations];
            s.iter().for_each(|&i| m[i] = true);
            m
        })
        .collect();
    let nt = inst.num_periods;
    let mut digits = vec![0usize; nt];
    let mut current: Vec<Vec<bool>> = vec![masks[0].clone(); nt];
    let mut unmet = vec![0.0; inst.num_customers()];
    let mut best_digits = digits.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        let profit = profit_with_masks(inst, &current, &mut unmet);
        if profit > best + 1e-9 {
            best = profit;
            best_digits.copy_from_slice(&digits);
        }
        // Advance the last period fastest so the order is lexicographic.
        let mut pos = nt;
        loop {
            if pos == 0 {
                let policy = LocationPolicy::new(best_digits.iter().map(|&d| subsets[d].clone()).collect());
                let profit = evaluate_policy(inst, &policy)?.profit;
                return Ok((policy, profit));
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < subsets.len() {
                current[pos].clone_from(&masks[digits[pos]]);
                break;
            }
            digits[pos] = 0;
            current[pos].clone_from(&masks[0]);
        }
    }
}

fn check_loyal_preconditions(inst: &Instance) -> Result<()> {
    ensure_valid(inst)?;
    if !inst.is_loyal() {
        return Err(Error::Unsupported("customers are not loyal".into()));
    }
    if !inst.unit_spread() {
        return Err(Error::Unsupported("loyal solver requires unit spread factors".into()));
    }
    if inst.has_penalties() {
        return Err(Error::Unsupported("loyal solver does not support penalties".into()));
    }
    Ok(())
}

/// Reward of opening `i` at period `t` for the first time: every loyal
/// customer of `i` pays for all demand spawned up to `t`.
pub fn marginal_reward(inst: &Instance, i: usize, t: usize) -> Result<f64> {
    check_loyal_preconditions(inst)?;
    if i >= inst.num_locations || t == 0 || t > inst.num_periods {
        return Err(Error::Contract(format!("location {i} or period {t} out of range")));
    }
    Ok(loyal_reward(inst, i, t))
}

fn loyal_reward(inst: &Instance, i: usize, t: usize) -> f64 {
    let demand: f64 = (0..inst.num_customers())
        .filter(|&j| inst.ranking[j].first() == Some(&i))
        .map(|j| inst.spawning[j][..t].iter().sum::<f64>())
        .sum();
    inst.reward[i] * demand
}

/// Optimal policy for loyal customers with one facility per period, via a
/// maximum-weight assignment of locations to periods.
pub fn solve_loyal_assignment(inst: &Instance) -> Result<(LocationPolicy, f64)> {
    check_loyal_preconditions(inst)?;
    if inst.facilities_per_period != 1 {
        return Err(Error::Unsupported("loyal solver requires one facility per period".into()));
    }
    let (ni, nt) = (inst.num_locations, inst.num_periods);
    let n = ni.max(nt);
    let mut weight = vec![vec![0.0; n]; n];
    for (i, row) in weight.iter_mut().enumerate().take(ni) {
        for (t, w) in row.iter_mut().enumerate().take(nt) {
            *w = loyal_reward(inst, i, t + 1);
        }
    }
    let assignment = max_weight_assignment(&weight);
    let mut open = vec![Vec::new(); nt];
    let mut value = 0.0;
    for (i, &t) in assignment.iter().enumerate() {
        if i < ni && t < nt {
            open[t].push(i);
            value += weight[i][t];
        }
    }
    let policy = LocationPolicy::new(open);
    let profit = evaluate_policy(inst, &policy)?.profit;
    if (profit - value).abs() > 1e-6 * (1.0 + value.abs()) {
        return Err(Error::Internal(format!(
            "assignment value {value} differs from policy profit {profit}"
        )));
    }
    Ok((policy, profit))
}

/// Hungarian method on a square matrix; returns the column assigned to each row.
pub fn max_weight_assignment(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    if n == 0 {
        return Vec::new();
    }
    let top = weight
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = |r: usize, c: usize| top - weight[r][c];
    // Potentials and matching use 1-based indices with 0 as the sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        row_of[0] = r;
        let mut col = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col] = true;
            let r0 = row_of[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if reduced < min_to[c] {
                    min_to[c] = reduced;
                    way[c] = col;
                }
                if min_to[c] < delta {
                    delta = min_to[c];
                    next = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[row_of[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            col = next;
            if row_of[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            row_of[col] = row_of[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=n {
        assignment[row_of[c] - 1] = c - 1;
    }
    assignment
}
