#![allow(dead_code)]

pub mod properties;

use dflp_core::{Instance, LocationPolicy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape and modes of a random small instance.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_locations: usize,
    pub max_customers: usize,
    pub max_periods: usize,
    pub max_facilities: usize,
    /// Reward mode: 0 identical, 1 different integers.
    pub rewards: u8,
    /// Demand mode: 0 constant, 1 sparse {0, 1}, 2 integers in 0..5.
    pub demand: u8,
    /// Ranking mode: 0 random subsets, 1 loyal (at most one location).
    pub ranking: u8,
    pub penalty: f64,
}

impl Shape {
    /// Oracle-scale shape whose modes cycle with `seed`.
    pub fn oracle(seed: u64) -> Self {
        Shape {
            max_locations: 6,
            max_customers: 6,
            max_periods: 4,
            max_facilities: 2,
            rewards: (seed % 2) as u8,
            demand: ((seed / 2) % 3) as u8,
            ranking: ((seed / 6) % 2) as u8,
            penalty: if (seed / 12) % 2 == 0 { 0.0 } else { 50.0 },
        }
    }
}

/// Random instance with unit spread factors.
pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Sizes lean towards the upper limits; empty customer sets stay possible.
    let ni = rng.gen_range((shape.max_locations / 2).max(1)..=shape.max_locations);
    let nj = rng.gen_range(0..=shape.max_customers);
    let nt = rng.gen_range((shape.max_periods / 2).max(1)..=shape.max_periods);
    let h = rng.gen_range(1..=shape.max_facilities.min(ni));
    let reward = match shape.rewards {
        0 => vec![ni as f64; ni],
        _ => (0..ni).map(|_| rng.gen_range(1..=10) as f64).collect(),
    };
    let spawning = (0..nj)
        .map(|_| {
            (0..nt)
                .map(|_| match shape.demand {
                    0 => 1.0,
                    1 => rng.gen_range(0..=1) as f64,
                    _ => rng.gen_range(0..5) as f64,
                })
                .collect()
        })
        .collect();
    let ranking = (0..nj)
        .map(|_| {
            let mut all: Vec<usize> = (0..ni).collect();
            all.shuffle(&mut rng);
            let len = match shape.ranking {
                0 => rng.gen_range(0..=ni),
                _ => rng.gen_range(0..=1),
            };
            all.truncate(len);
            all
        })
        .collect();
    Instance::new(ni, nt, h, reward, spawning, ranking).with_penalty(vec![shape.penalty; nj])
}

/// Random feasible policy for `inst`.
pub fn random_policy(inst: &Instance, seed: u64) -> LocationPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let open = (0..inst.num_periods)
        .map(|_| {
            let mut all: Vec<usize> = (0..inst.num_locations).collect();
            all.shuffle(&mut rng);
            all.truncate(rng.gen_range(0..=inst.facilities_per_period));
            all
        })
        .collect();
    LocationPolicy::new(open)
}

/// Every feasible policy of `inst`.
pub fn all_policies(inst: &Instance) -> Vec<LocationPolicy> {
    let sets: Vec<Vec<usize>> = (0u32..1 << inst.num_locations)
        .filter(|m| m.count_ones() as usize <= inst.facilities_per_period)
        .map(|m| (0..inst.num_locations).filter(|&i| m >> i & 1 == 1).collect())
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..inst.num_periods {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<usize>>| {
                sets.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s.clone());
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(LocationPolicy::new).collect()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}
