//! On-disk layout of a results directory.
//!
//! Each (case, seed) run owns three files under `<out>/<case>/`:
//! `seed-N.aggregate.json`, `seed-N.trace.csv` and `seed-N.manifest.json`.
//! The manifest ties a run back to its configuration digest so `report`
//! can group runs without re-reading configs. A `comparison.json` at the
//! directory root summarizes the whole grid.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use protoreplay::eval::{ClearProtocol, ForgettingProtocol};
use protoreplay::EngineConfig64;

use crate::runspec::{ProtocolKind, RunSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub case: String,
    pub strategy: String,
    pub rho: Option<f64>,
    pub seed: u64,
    pub protocol: ProtocolKind,
    pub data: String,
    pub config_sha256: String,
    pub aggregate: String,
    pub trace: String,
}

/// Per-run summary numbers, tagged by the protocol that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum Aggregate {
    Forgetting {
        data: String,
        case: String,
        seed: u64,
        mse_before: f64,
        mse_during: f64,
        degradation_index: f64,
        mse_final: f64,
        r2_final: f64,
    },
    Clear {
        data: String,
        case: String,
        seed: u64,
        warmup_passes: usize,
        warmup_error_before: f64,
        warmup_error_after: f64,
        forgetting_ratio_raw: f64,
        forgetting_ratio: f64,
        prediction_error: f64,
    },
    PlainStream {
        data: String,
        case: String,
        seed: u64,
        batches: u64,
        samples: u64,
        retrained_batches: u64,
        skipped_batches: u64,
        prototype_count: usize,
        pd_ratio_percent: f64,
        mean_train_loss: Option<f64>,
        final_mse: f64,
        final_r2: f64,
    },
}

impl Aggregate {
    /// Flat metric view used by the comparison table.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        match self {
            Aggregate::Forgetting {
                mse_before,
                mse_during,
                degradation_index,
                mse_final,
                r2_final,
                ..
            } => vec![
                ("mse_before", *mse_before),
                ("mse_during", *mse_during),
                ("degradation_index", *degradation_index),
                ("mse_final", *mse_final),
                ("r2_final", *r2_final),
            ],
            Aggregate::Clear {
                warmup_error_before,
                warmup_error_after,
                forgetting_ratio_raw,
                forgetting_ratio,
                prediction_error,
                ..
            } => vec![
                ("warmup_error_before", *warmup_error_before),
                ("warmup_error_after", *warmup_error_after),
                ("forgetting_ratio_raw", *forgetting_ratio_raw),
                ("forgetting_ratio", *forgetting_ratio),
                ("prediction_error", *prediction_error),
            ],
            Aggregate::PlainStream {
                prototype_count,
                pd_ratio_percent,
                final_mse,
                final_r2,
                ..
            } => vec![
                ("prototype_count", *prototype_count as f64),
                ("pd_ratio_percent", *pd_ratio_percent),
                ("final_mse", *final_mse),
                ("final_r2", *final_r2),
            ],
        }
    }

    /// The headline metric shown in the report table.
    pub fn primary_metric(protocol: ProtocolKind) -> &'static str {
        match protocol {
            ProtocolKind::Forgetting => "degradation_index",
            ProtocolKind::Clear => "forgetting_ratio",
            ProtocolKind::PlainStream => "pd_ratio_percent",
        }
    }
}

/// The configuration facts that make two runs comparable. The seed is kept
/// out on purpose; it lives in the manifest next to the digest.
#[derive(Serialize)]
struct DigestInput<'a> {
    data: &'a str,
    protocol: ProtocolKind,
    target: &'a str,
    samples: usize,
    features: usize,
    noise: f64,
    data_seed: u64,
    engine: &'a EngineConfig64,
    forgetting: &'a ForgettingProtocol,
    clear: &'a ClearProtocol,
}

pub fn config_digest(spec: &RunSpec, config: &EngineConfig64) -> String {
    let input = DigestInput {
        data: &spec.data,
        protocol: spec.protocol,
        target: &spec.target,
        samples: spec.samples,
        features: spec.features,
        noise: spec.noise,
        data_seed: spec.data_seed,
        engine: config,
        forgetting: &spec.forgetting,
        clear: &spec.clear,
    };
    let canonical = serde_json::to_string(&input).expect("config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub spread: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: String,
    pub strategy: String,
    pub rho: Option<f64>,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub protocol: ProtocolKind,
    pub data: String,
    pub primary_metric: String,
    pub cases: Vec<CaseSummary>,
}

pub fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn summarize_case(
    case: &str,
    strategy: &str,
    rho: Option<f64>,
    runs: &[(u64, Aggregate)],
) -> CaseSummary {
    let mut metrics: BTreeMap<String, MetricSummary> = BTreeMap::new();
    for (name, _) in runs[0].1.metrics() {
        let values: Vec<f64> = runs
            .iter()
            .filter_map(|(_, agg)| {
                agg.metrics()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| v)
            })
            .collect();
        let (mean, spread) = mean_and_spread(&values);
        metrics.insert(name.to_string(), MetricSummary { mean, spread, values });
    }
    CaseSummary {
        case: case.to_string(),
        strategy: strategy.to_string(),
        rho,
        seeds: runs.iter().map(|(seed, _)| *seed).collect(),
        metrics,
    }
}

pub fn write_json_pretty(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
