//! What a `run` invocation does: defaults, config-file loading, flag
//! overrides, and validation.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use protoreplay::engine::Strategy;
use protoreplay::eval::{ClearProtocol, ForgettingProtocol};
use protoreplay::synth::SyntheticKind;
use protoreplay::EngineConfig64;

use crate::RunArgs;

/// Fallback output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "PROTOREPLAY_OUT";

/// Marker for failures that should exit with the usage code (2) instead of 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Which experiment is wrapped around the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Forgetting,
    Clear,
    PlainStream,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Forgetting => "forgetting",
            ProtocolKind::Clear => "clear",
            ProtocolKind::PlainStream => "plain-stream",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forgetting" => Ok(ProtocolKind::Forgetting),
            "clear" => Ok(ProtocolKind::Clear),
            "plain-stream" => Ok(ProtocolKind::PlainStream),
            other => Err(usage(format!(
                "unknown protocol '{other}' (expected forgetting, clear or plain-stream)"
            ))),
        }
    }
}

/// Everything a reproducible run needs. A JSON file with this shape can be
/// passed via `--config`; individual flags then override single fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    /// CSV path or `synthetic:<kind>`.
    pub data: String,
    pub protocol: ProtocolKind,
    /// Synthetic share grid for the prototype-replay strategy.
    pub rho: Vec<f64>,
    pub strategy: Vec<String>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    /// Target column name for CSV sources.
    pub target: String,
    /// Synthetic generator controls.
    pub samples: usize,
    pub features: usize,
    pub noise: f64,
    pub data_seed: u64,
    pub engine: EngineConfig64,
    pub forgetting: ForgettingProtocol,
    pub clear: ClearProtocol,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            data: String::new(),
            protocol: ProtocolKind::Forgetting,
            rho: vec![0.5],
            strategy: vec!["prototype-replay".to_string()],
            seeds: vec![0],
            out: None,
            target: "target".to_string(),
            samples: 4000,
            features: 4,
            noise: 0.1,
            data_seed: 0,
            engine: EngineConfig64::default(),
            forgetting: ForgettingProtocol::default(),
            clear: ClearProtocol::default(),
        }
    }
}

impl RunSpec {
    /// Load the optional config file, then let explicit flags win.
    pub fn resolve(args: RunArgs) -> anyhow::Result<RunSpec> {
        let mut spec = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| usage(format!("malformed config {}: {e}", path.display())))?
            }
            None => RunSpec::default(),
        };
        if let Some(v) = args.data {
            spec.data = v;
        }
        if let Some(v) = args.protocol {
            spec.protocol = v.parse()?;
        }
        if let Some(v) = args.rho {
            spec.rho = v;
        }
        if let Some(v) = args.strategy {
            spec.strategy = v;
        }
        if let Some(v) = args.seeds {
            spec.seeds = v;
        }
        if let Some(v) = args.out {
            spec.out = Some(v);
        }
        if let Some(v) = args.target {
            spec.target = v;
        }
        if let Some(v) = args.samples {
            spec.samples = v;
        }
        if let Some(v) = args.features {
            spec.features = v;
        }
        if let Some(v) = args.noise {
            spec.noise = v;
        }
        if let Some(v) = args.data_seed {
            spec.data_seed = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.data.is_empty() {
            return Err(usage("no data source: pass --data <csv-path|synthetic:kind>"));
        }
        self.source()?;
        if self.strategy.is_empty() {
            return Err(usage("no strategy selected"));
        }
        for name in &self.strategy {
            let strategy: Strategy = name
                .parse()
                .map_err(|e: protoreplay::Error| usage(e.to_string()))?;
            if strategy == Strategy::PrototypeReplay && self.rho.is_empty() {
                return Err(usage("prototype-replay needs at least one --rho value"));
            }
        }
        for &rho in &self.rho {
            if !(0.0..1.0).contains(&rho) {
                return Err(usage(format!("rho {rho} outside [0, 1)")));
            }
        }
        if self.seeds.is_empty() {
            return Err(usage("no seeds given"));
        }
        if self.samples == 0 || self.features == 0 {
            return Err(usage("samples and features must be positive"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(usage(format!("noise {} must be finite and non-negative", self.noise)));
        }
        self.engine
            .validate()
            .map_err(|e| usage(format!("engine config: {e}")))?;
        self.forgetting
            .validate()
            .map_err(|e| usage(format!("forgetting protocol: {e}")))?;
        self.clear
            .validate()
            .map_err(|e| usage(format!("clear protocol: {e}")))?;
        Ok(())
    }

    pub fn source(&self) -> anyhow::Result<DataSource> {
        if let Some(kind) = self.data.strip_prefix("synthetic:") {
            let kind: SyntheticKind = kind
                .parse()
                .map_err(|e: protoreplay::Error| usage(e.to_string()))?;
            return Ok(DataSource::Synthetic(kind));
        }
        Ok(DataSource::Csv(PathBuf::from(&self.data)))
    }

    pub fn out_dir(&self) -> anyhow::Result<PathBuf> {
        if let Some(out) = &self.out {
            return Ok(out.clone());
        }
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            return Ok(PathBuf::from(dir));
        }
        Err(usage(format!(
            "no output directory: pass --out or set {OUT_DIR_ENV}"
        )))
    }

    /// Materialize the dataset this spec points at.
    pub fn load_dataset(&self) -> anyhow::Result<Vec<protoreplay::Sample64>> {
        match self.source()? {
            DataSource::Synthetic(kind) => protoreplay::synth::generate_synthetic_dataset(
                kind,
                self.samples,
                self.features,
                self.noise,
                self.data_seed,
            )
            .map_err(|e| usage(format!("synthetic data: {e}"))),
            DataSource::Csv(path) => {
                if !path.is_file() {
                    return Err(usage(format!("data file not found: {}", path.display())));
                }
                let batches = protoreplay::stream::ingest_csv(&path, &self.target, 1024)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let mut samples = Vec::new();
                for batch in batches {
                    let batch =
                        batch.map_err(|e| usage(format!("{}: {e}", path.display())))?;
                    samples.extend(batch.samples);
                }
                if samples.is_empty() {
                    return Err(usage(format!("{}: no data rows", path.display())));
                }
                Ok(samples)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticKind),
}

/// One engine configuration to run, expanded from the strategy and rho grids.
#[derive(Debug, Clone)]
pub struct RunCase {
    pub label: String,
    pub strategy_name: String,
    pub rho: Option<f64>,
    pub config: EngineConfig64,
}

/// Expand the strategy list into concrete cases. Prototype replay fans out
/// over the rho grid (descending); the other strategies give one case each.
pub fn build_cases(spec: &RunSpec) -> anyhow::Result<Vec<RunCase>> {
    let mut cases: Vec<RunCase> = Vec::new();
    let mut strategies = spec.strategy.clone();
    strategies.dedup();
    for name in &strategies {
        let strategy: Strategy = name
            .parse()
            .map_err(|e: protoreplay::Error| usage(e.to_string()))?;
        match strategy {
            Strategy::PrototypeReplay => {
                let mut rhos = spec.rho.clone();
                rhos.sort_by(|a, b| b.partial_cmp(a).expect("rho values are finite"));
                rhos.dedup();
                for rho in rhos {
                    let mut config = spec.engine.clone();
                    config.strategy = Strategy::PrototypeReplay;
                    config.rehearsal.synthetic_ratio = rho;
                    cases.push(RunCase {
                        label: format!("prototype-replay-rho{rho:.3}"),
                        strategy_name: name.clone(),
                        rho: Some(rho),
                        config,
                    });
                }
            }
            other => {
                let mut config = spec.engine.clone();
                config.strategy = other;
                cases.push(RunCase {
                    label: name.clone(),
                    strategy_name: name.clone(),
                    rho: None,
                    config,
                });
            }
        }
    }
    if cases.iter().map(|c| &c.label).collect::<std::collections::HashSet<_>>().len()
        != cases.len()
    {
        return Err(usage("duplicate cases in the strategy/rho grid"));
    }
    Ok(cases)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
