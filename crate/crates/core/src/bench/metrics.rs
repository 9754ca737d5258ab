//! Comparison metrics over run records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bench::io::RunRecord;

/// Root relaxation optimum of a formulation on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRecord {
    pub instance_id: String,
    pub method: String,
    pub bound: f64,
}

/// Number of customers captured exactly `captures` times by a method's policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub instance_id: String,
    pub method: String,
    pub captures: usize,
    pub customers: usize,
}

/// Known optimum of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub instance_id: String,
    pub objective: f64,
}

/// One metric value; `None` when the metric is undefined (division by zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub instance_id: String,
    pub method: String,
    pub metric: String,
    pub value: Option<f64>,
}

pub const EXACT_METHODS: [&str; 6] = ["dif", "sif", "sbd", "abd", "brute", "loyal"];

pub fn is_exact(method: &str) -> bool {
    EXACT_METHODS.contains(&method)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Relative loss `(optimum - value) / optimum`.
pub fn opportunity_gap(optimum: f64, value: f64) -> Option<f64> {
    ratio(optimum - value, optimum)
}

/// Relaxation excess `(relaxation - optimum) / relaxation`.
pub fn integrality_gap(relaxation: f64, optimum: f64) -> Option<f64> {
    ratio(relaxation - optimum, relaxation)
}

/// Objective ratios, runtime ratios, opportunity and integrality gaps and
/// capture histograms, grouped by instance.
///
/// The optimum of an instance comes from `oracle` when present, otherwise
/// from the best exact run that finished with status `optimal`.
pub fn compute_metrics(
    records: &[RunRecord],
    oracle: Option<&BTreeMap<String, f64>>,
    relaxations: &[RelaxationRecord],
    captures: &[CaptureRecord],
) -> Vec<MetricsRow> {
    let mut by_instance: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_instance.entry(r.instance_id.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (id, runs) in by_instance {
        let exact: Vec<(&RunRecord, f64)> = runs
            .iter()
            .filter(|r| is_exact(&r.method))
            .filter_map(|r| r.objective.map(|o| (*r, o)))
            .collect();
        let best_exact = exact.iter().map(|&(_, o)| o).fold(None, |a: Option<f64>, o| Some(a.map_or(o, |a| a.max(o))));
        let fastest = exact.iter().map(|(r, _)| r.time_ms).fold(None, |a: Option<f64>, t| Some(a.map_or(t, |a| a.min(t))));
        let optimum = oracle.and_then(|o| o.get(id).copied()).or_else(|| {
            runs.iter()
                .filter(|r| is_exact(&r.method) && r.status == "optimal")
                .filter_map(|r| r.objective)
                .fold(None, |a: Option<f64>, o| Some(a.map_or(o, |a| a.max(o))))
        });
        for run in runs {
            let mut push = |metric: &str, value: Option<f64>| {
                out.push(MetricsRow {
                    instance_id: id.to_string(),
                    method: run.method.clone(),
                    metric: metric.to_string(),
                    value,
                })
            };
            let Some(value) = run.objective else { continue };
            if is_exact(&run.method) {
                push("objective_ratio", best_exact.and_then(|b| ratio(b, value)));
                push("runtime_ratio", fastest.and_then(|f| ratio(run.time_ms, f)));
            }
            if let Some(opt) = optimum {
                push("opportunity_gap", opportunity_gap(opt, value));
                if let Some(rel) = relaxations.iter().find(|r| r.instance_id == id && r.method == run.method) {
                    push("integrality_gap", integrality_gap(rel.bound, opt));
                }
            }
            for c in captures.iter().filter(|c| c.instance_id == id && c.method == run.method) {
                push(&format!("captures_{}", c.captures), Some(c.customers as f64));
            }
        }
    }
    out
}
