//! Seeded benchmark instance generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Every location pays `I` per demand unit.
    Identical,
    /// Location `i` pays `ceil(I / customers considering i)`.
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    /// One unit per customer and period.
    Constant,
    /// Zero or one unit with equal probability.
    Sparse,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identical" => Ok(RewardMode::Identical),
            "different" => Ok(RewardMode::Different),
            other => Err(Error::Config(format!("unknown reward mode '{other}'"))),
        }
    }
}

impl std::str::FromStr for DemandMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(DemandMode::Constant),
            "sparse" => Ok(DemandMode::Sparse),
            other => Err(Error::Config(format!("unknown demand mode '{other}'"))),
        }
    }
}

impl RewardMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardMode::Identical => "identical",
            RewardMode::Different => "different",
        }
    }
}

impl DemandMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DemandMode::Constant => "constant",
            DemandMode::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_periods: usize,
    pub num_locations: usize,
    /// Customers per location (`J = round(multiplier * I)`).
    pub customer_multiplier: f64,
    pub facilities_per_period: usize,
    /// Fraction of locations in every consideration set.
    pub consideration: f64,
    pub rewards: RewardMode,
    pub demand: DemandMode,
    #[serde(default)]
    pub penalty: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn num_customers(&self) -> usize {
        (self.customer_multiplier * self.num_locations as f64).round() as usize
    }

    /// Size of every consideration set, `ceil(C * I)`.
    pub fn consideration_size(&self) -> usize {
        // Guard against products such as 0.1 * 30 landing just above an integer.
        let raw = self.consideration * self.num_locations as f64;
        (raw - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.consideration > 0.0 && self.consideration <= 1.0) {
            return Err(Error::Config(format!(
                "consideration fraction {} outside (0, 1]",
                self.consideration
            )));
        }
        if !(self.customer_multiplier >= 1.0 && self.customer_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "customer multiplier {} must be at least 1",
                self.customer_multiplier
            )));
        }
        if self.consideration_size() > self.num_locations {
            return Err(Error::Config(format!(
                "consideration sets of size {} exceed {} locations",
                self.consideration_size(),
                self.num_locations
            )));
        }
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(Error::Config(format!("penalty {} must be nonnegative", self.penalty)));
        }
        Ok(())
    }

    /// Stable identifier built from every field.
    pub fn instance_id(&self) -> String {
        format!(
            "T{}_I{}_J{}_h{}_C{}_{}_{}_p{}_s{}",
            self.num_periods,
            self.num_locations,
            self.num_customers(),
            self.facilities_per_period,
            self.consideration,
            self.rewards.as_str(),
            self.demand.as_str(),
            self.penalty,
            self.seed
        )
    }
}

/// Draws an instance; identical configurations give identical instances.
pub fn generate_instance(cfg: &GenConfig) -> Result<Instance> {
    cfg.validate()?;
    let (ni, nj, nt) = (cfg.num_locations, cfg.num_customers(), cfg.num_periods);
    let size = cfg.consideration_size();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool: Vec<usize> = (0..ni).collect();
    let ranking: Vec<Vec<usize>> = (0..nj)
        .map(|_| {
            let (sample, _) = pool.partial_shuffle(&mut rng, size);
            sample.to_vec()
        })
        .collect();
    let spawning: Vec<Vec<f64>> = (0..nj)
        .map(|_| {
            (0..nt)
                .map(|_| match cfg.demand {
                    DemandMode::Constant => 1.0,
                    DemandMode::Sparse => {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                })
                .collect()
        })
        .collect();
    let reward = match cfg.rewards {
        RewardMode::Identical => vec![ni as f64; ni],
        RewardMode::Different => {
            let mut count = vec![0usize; ni];
            ranking.iter().flatten().for_each(|&i| count[i] += 1);
            count
                .iter()
                .map(|&c| if c == 0 { ni as f64 } else { ni.div_ceil(c) as f64 })
                .collect()
        }
    };
    let inst = Instance::new(ni, nt, cfg.facilities_per_period, reward, spawning, ranking)
        .with_penalty(vec![cfg.penalty; nj]);
    crate::model::ensure_valid(&inst)?;
    Ok(inst)
}
