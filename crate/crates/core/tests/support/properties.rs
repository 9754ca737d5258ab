//! Dynamics properties checked against independent recomputations.

use dflp_core::{evaluate_policy, scale_spawning, Instance};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{random_instance, random_policy, Shape};

/// Instance with real-valued demands, penalties and spread factors.
pub fn arb_instance() -> impl Strategy<Value = Instance> {
    (any::<u64>(), 0u8..3, any::<bool>()).prop_flat_map(|(seed, demand, penalized)| {
        let shape = Shape {
            max_locations: 6,
            max_customers: 6,
            max_periods: 5,
            max_facilities: 3,
            rewards: 1,
            demand,
            ranking: 0,
            penalty: 0.0,
        };
        let base = random_instance(seed, shape);
        let nj = base.num_customers();
        (
            Just(base),
            prop::collection::vec(0.0f64..2.0, nj),
            prop::collection::vec(0.0f64..20.0, nj),
        )
            .prop_map(move |(base, spread, penalty)| {
                let penalty = if penalized { penalty } else { vec![0.0; penalty.len()] };
                base.with_spread(spread).with_penalty(penalty)
            })
    })
}

/// First location of `ranking` open in `open`.
fn first_open(ranking: &[usize], open: &[usize]) -> Option<usize> {
    ranking.iter().copied().find(|i| open.contains(i))
}

/// With unit spread, captured plus finally unmet demand equals spawned demand.
pub fn conservation(inst: &Instance, seed: u64) -> Result<(), TestCaseError> {
    let mut inst = inst.clone();
    inst.spread = vec![1.0; inst.num_customers()];
    let policy = random_policy(&inst, seed);
    let eval = evaluate_policy(&inst, &policy).unwrap();
    let nt = inst.num_periods;
    for j in 0..inst.num_customers() {
        let captured: f64 = (1..=nt)
            .filter(|&t| eval.captures[t - 1][j].is_some())
            .map(|t| eval.accumulated[j][t])
            .sum();
        let spawned: f64 = inst.spawning[j].iter().sum();
        prop_assert!((captured + eval.unmet[j][nt] - spawned).abs() <= 1e-9 * (1.0 + spawned));
    }
    Ok(())
}

/// Scaling every demand scales the profit and keeps the captures.
pub fn linearity(inst: &Instance, seed: u64, factor: f64) -> Result<(), TestCaseError> {
    let policy = random_policy(inst, seed);
    let base = evaluate_policy(inst, &policy).unwrap();
    let scaled = evaluate_policy(&scale_spawning(inst, factor), &policy).unwrap();
    let expected = factor * base.profit;
    prop_assert!(
        (scaled.profit - expected).abs() <= 1e-9 * (1.0 + expected.abs()),
        "{} vs {}",
        scaled.profit,
        expected
    );
    prop_assert_eq!(scaled.captures, base.captures);
    Ok(())
}

/// With zero spread and no penalties, profit is the noncumulative objective.
pub fn zero_spread(inst: &Instance, seed: u64) -> Result<(), TestCaseError> {
    let mut inst = inst.clone();
    inst.spread = vec![0.0; inst.num_customers()];
    inst.penalty = vec![0.0; inst.num_customers()];
    let policy = random_policy(&inst, seed);
    let eval = evaluate_policy(&inst, &policy).unwrap();
    let mut expected = 0.0;
    for t in 1..=inst.num_periods {
        for j in 0..inst.num_customers() {
            if let Some(i) = first_open(&inst.ranking[j], &policy.open[t - 1]) {
                expected += inst.reward[i] * inst.spawning[j][t - 1];
            }
        }
    }
    prop_assert!((eval.profit - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    Ok(())
}

/// Trajectories follow the accumulation recursion and the choice rule.
pub fn recursion(inst: &Instance, seed: u64) -> Result<(), TestCaseError> {
    let policy = random_policy(inst, seed);
    let eval = evaluate_policy(inst, &policy).unwrap();
    for j in 0..inst.num_customers() {
        prop_assert_eq!(eval.unmet[j][0], 0.0);
        let mut count = 0;
        for t in 1..=inst.num_periods {
            let c = inst.spread[j] * eval.unmet[j][t - 1] + inst.spawning[j][t - 1];
            prop_assert!((eval.accumulated[j][t] - c).abs() <= 1e-12 * (1.0 + c));
            let choice = first_open(&inst.ranking[j], &policy.open[t - 1]);
            prop_assert_eq!(eval.captures[t - 1][j], choice);
            let unmet = if choice.is_some() {
                count += 1;
                0.0
            } else {
                c
            };
            prop_assert!((eval.unmet[j][t] - unmet).abs() <= 1e-12 * (1.0 + c));
        }
        prop_assert_eq!(eval.capture_counts[j], count);
    }
    Ok(())
}
