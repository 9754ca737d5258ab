//! JSON instance and policy files, CSV run records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::generate::GenConfig;
use crate::error::{Error, Result};
use crate::model::{ensure_valid, Instance, LocationPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: Option<u64>,
    pub generator_config: Option<GenConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(rename = "I")]
    num_locations: usize,
    #[serde(rename = "J")]
    num_customers: usize,
    #[serde(rename = "T")]
    num_periods: usize,
    h: usize,
    rewards: Vec<f64>,
    spawning: Vec<Vec<f64>>,
    rankings: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalties: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spread: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<InstanceMeta>,
}

fn parse_error(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        context: path.display().to_string(),
        message: message.to_string(),
    }
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    write_instance_with_meta(inst, None, path)
}

pub fn write_instance_with_meta(inst: &Instance, meta: Option<&GenConfig>, path: &Path) -> Result<()> {
    ensure_valid(inst)?;
    let file = InstanceFile {
        num_locations: inst.num_locations,
        num_customers: inst.num_customers(),
        num_periods: inst.num_periods,
        h: inst.facilities_per_period,
        rewards: inst.reward.clone(),
        spawning: inst.spawning.clone(),
        rankings: inst.ranking.clone(),
        penalties: inst.has_penalties().then(|| inst.penalty.clone()),
        spread: (!inst.unit_spread()).then(|| inst.spread.clone()),
        meta: meta.map(|cfg| InstanceMeta {
            seed: Some(cfg.seed),
            generator_config: Some(cfg.clone()),
        }),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &file).map_err(|e| parse_error(path, e))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let reader = BufReader::new(File::open(path)?);
    let file: InstanceFile = serde_json::from_reader(reader).map_err(|e| parse_error(path, e))?;
    if file.spawning.len() != file.num_customers {
        return Err(parse_error(
            path,
            format!(
                "field `spawning` lists {} customers, `J` is {}",
                file.spawning.len(),
                file.num_customers
            ),
        ));
    }
    let nj = file.num_customers;
    let inst = Instance {
        num_locations: file.num_locations,
        num_periods: file.num_periods,
        facilities_per_period: file.h,
        reward: file.rewards,
        spawning: file.spawning,
        ranking: file.rankings,
        penalty: file.penalties.unwrap_or_else(|| vec![0.0; nj]),
        spread: file.spread.unwrap_or_else(|| vec![1.0; nj]),
    };
    ensure_valid(&inst)?;
    Ok(inst)
}

pub fn write_policy(policy: &LocationPolicy, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, policy).map_err(|e| parse_error(path, e))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_policy(path: &Path) -> Result<LocationPolicy> {
    let reader = BufReader::new(File::open(path)?);
    let policy: LocationPolicy = serde_json::from_reader(reader).map_err(|e| parse_error(path, e))?;
    Ok(LocationPolicy::new(policy.open))
}

/// One (instance, method) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub method: String,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub time_ms: f64,
    pub seed: u64,
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    read_csv(path)
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    write_csv(records, path)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row.map_err(|e| parse_error(path, e))?);
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| parse_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| parse_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}
