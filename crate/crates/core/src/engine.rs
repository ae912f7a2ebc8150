//! The streaming engine: feature statistics, the virtual-label tree, the
//! prototype memory, and the density network, wired together under one of
//! three update strategies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdn::{self, MdnConfig, MdnParams, OptimizerState};
use crate::proto::{IlvqParams, LearnOutcome, PrototypeMemory};
use crate::real::{real, Real};
use crate::rehearsal::{build_batch, RehearsalConfig};
use crate::reservoir::Reservoir;
use crate::stream::{LabeledBatch, RunningStats, Sample};
use crate::tree::{update_tree, DecisionTree, TreeParams, TREE_RESERVOIR_CAPACITY};

/// Capacity of the experience-replay baseline's sample buffer.
pub const REPLAY_BUFFER_CAPACITY: usize = 1000;

/// Learning rate of the experience-replay baseline.
pub const REPLAY_LEARNING_RATE: f64 = 0.001;

/// How the network is updated as batches arrive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// The full pipeline: refit the label tree, learn prototypes, and train
    /// on rehearsal batches, but only on batches that inserted prototypes.
    PrototypeReplay,
    /// Train on every incoming batch as-is; no tree, no memory.
    NaiveIncremental,
    /// Keep a uniform reservoir of past raw samples and train every batch
    /// on the batch plus a buffer draw.
    ExperienceReplay {
        buffer_capacity: usize,
        learning_rate: f64,
    },
}

impl Strategy {
    /// The replay baseline with its stock buffer size and learning rate.
    pub fn experience_replay() -> Self {
        Strategy::ExperienceReplay {
            buffer_capacity: REPLAY_BUFFER_CAPACITY,
            learning_rate: REPLAY_LEARNING_RATE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PrototypeReplay => "prototype-replay",
            Strategy::NaiveIncremental => "naive-incremental",
            Strategy::ExperienceReplay { .. } => "experience-replay",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Strategy::ExperienceReplay {
            buffer_capacity,
            learning_rate,
        } = self
        {
            if *buffer_capacity == 0 {
                return Err(Error::InvalidConfig(
                    "replay buffer_capacity must be positive".into(),
                ));
            }
            if !(learning_rate.is_finite() && *learning_rate >= 0.0) {
                return Err(Error::InvalidConfig(
                    "replay learning_rate must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prototype-replay" => Ok(Strategy::PrototypeReplay),
            "naive-incremental" => Ok(Strategy::NaiveIncremental),
            "experience-replay" => Ok(Strategy::experience_replay()),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected prototype-replay, \
                 naive-incremental, or experience-replay)"
            ))),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct EngineConfig<R: Real> {
    pub tree: TreeParams<R>,
    pub ilvq: IlvqParams<R>,
    pub mdn: MdnConfig<R>,
    pub rehearsal: RehearsalConfig<R>,
    /// Capacity of the reservoir that feeds tree refits.
    pub tree_reservoir_capacity: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl<R: Real> Default for EngineConfig<R> {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            ilvq: IlvqParams::default(),
            mdn: MdnConfig::default(),
            rehearsal: RehearsalConfig::default(),
            tree_reservoir_capacity: TREE_RESERVOIR_CAPACITY,
            seed: 0,
            strategy: Strategy::PrototypeReplay,
        }
    }
}

impl<R: Real> EngineConfig<R> {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.ilvq.validate()?;
        self.mdn.validate()?;
        self.rehearsal.validate()?;
        self.strategy.validate()?;
        if self.tree_reservoir_capacity == 0 {
            return Err(Error::InvalidConfig(
                "tree_reservoir_capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// What one processed batch did to the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepReport<R: Real> {
    pub batch_index: u64,
    /// New prototypes created by this batch (always 0 off the full pipeline).
    pub inserted_prototypes: usize,
    /// Whether a gradient step was applied.
    pub retrained: bool,
    /// Mean training loss before the step, when one was applied.
    pub train_loss: Option<R>,
    pub prototype_count: usize,
    /// A training step that failed numerically is skipped, not fatal; the
    /// message lands here.
    pub skipped_error: Option<String>,
}

/// A full engine instance. One instance per stream; processing mutates it,
/// prediction does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Engine<R: Real> {
    config: EngineConfig<R>,
    input_dim: usize,
    stats: RunningStats<R>,
    tree_reservoir: Reservoir<Sample<R>>,
    tree: Option<DecisionTree<R>>,
    memory: PrototypeMemory<R>,
    mdn: MdnParams<R>,
    opt: OptimizerState<R>,
    replay_buffer: Option<Reservoir<Sample<R>>>,
    rng: ChaCha8Rng,
    batches_seen: u64,
    samples_seen: u64,
}

impl<R: Real> Engine<R> {
    pub fn new(config: EngineConfig<R>, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (mdn_params, opt) = mdn::init(&config.mdn, input_dim, &mut rng)?;
        let replay_buffer = match config.strategy {
            Strategy::ExperienceReplay {
                buffer_capacity, ..
            } => Some(Reservoir::new(buffer_capacity)),
            _ => None,
        };
        Ok(Self {
            input_dim,
            stats: RunningStats::new(),
            tree_reservoir: Reservoir::new(config.tree_reservoir_capacity),
            tree: None,
            memory: PrototypeMemory::new(config.ilvq.clone())?,
            mdn: mdn_params,
            opt,
            replay_buffer,
            rng,
            batches_seen: 0,
            samples_seen: 0,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig<R> {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn stats(&self) -> &RunningStats<R> {
        &self.stats
    }

    pub fn tree(&self) -> Option<&DecisionTree<R>> {
        self.tree.as_ref()
    }

    pub fn memory(&self) -> &PrototypeMemory<R> {
        &self.memory
    }

    pub fn mdn(&self) -> &MdnParams<R> {
        &self.mdn
    }

    pub fn prototype_count(&self) -> usize {
        self.memory.len()
    }

    pub fn replay_buffer(&self) -> Option<&Reservoir<Sample<R>>> {
        self.replay_buffer.as_ref()
    }

    pub fn batches_seen(&self) -> u64 {
        self.batches_seen
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Runs one labeled batch through the configured strategy.
    pub fn process_labeled_batch(&mut self, batch: &LabeledBatch<R>) -> Result<StepReport<R>> {
        if batch.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: batch.dim(),
            });
        }
        let index = self.batches_seen;
        self.batches_seen += 1;
        self.samples_seen += batch.len() as u64;
        for s in &batch.samples {
            self.stats.update(&s.features)?;
        }
        let standardized: Vec<Sample<R>> = batch
            .samples
            .iter()
            .map(|s| {
                Ok(Sample::new(
                    self.stats.standardize(&s.features)?,
                    s.target,
                ))
            })
            .collect::<Result<_>>()?;

        let mut report = StepReport {
            batch_index: index,
            inserted_prototypes: 0,
            retrained: false,
            train_loss: None,
            prototype_count: self.memory.len(),
            skipped_error: None,
        };

        match self.config.strategy {
            Strategy::PrototypeReplay => {
                let std_batch = LabeledBatch::new(standardized, index)?;
                let tree = update_tree(
                    &mut self.tree_reservoir,
                    &std_batch,
                    &self.config.tree,
                    &mut self.rng,
                )?;
                let mut inserted = 0;
                for s in &std_batch.samples {
                    let vlabel = tree.assign_vlabel(&s.features)?;
                    if self.memory.learn_one(&s.features, vlabel, s.target)?
                        == LearnOutcome::Inserted
                    {
                        inserted += 1;
                    }
                }
                self.tree = Some(tree);
                report.inserted_prototypes = inserted;
                if inserted > 0 {
                    let training = build_batch(
                        &std_batch,
                        &self.memory,
                        self.config.rehearsal.synthetic_ratio,
                        &mut self.rng,
                    )?;
                    self.apply_grad_step(
                        &training.samples,
                        self.config.mdn.learning_rate,
                        &mut report,
                    )?;
                }
            }
            Strategy::NaiveIncremental => {
                self.apply_grad_step(&standardized, self.config.mdn.learning_rate, &mut report)?;
            }
            Strategy::ExperienceReplay { learning_rate, .. } => {
                let buffer = self
                    .replay_buffer
                    .as_mut()
                    .expect("replay strategy always constructs its buffer");
                // The buffer keeps raw samples; standardization happens at
                // draw time so old samples use current statistics.
                for s in &batch.samples {
                    buffer.insert(s.clone(), &mut self.rng);
                }
                let draw = self.config.mdn.batch_size.min(buffer.len());
                let picks = rand::seq::index::sample(&mut self.rng, buffer.len(), draw);
                let mut training = standardized;
                for i in picks.iter() {
                    let s = &self.replay_buffer.as_ref().unwrap().items()[i];
                    training.push(Sample::new(self.stats.standardize(&s.features)?, s.target));
                }
                self.apply_grad_step(&training, real(learning_rate), &mut report)?;
            }
        }
        report.prototype_count = self.memory.len();
        Ok(report)
    }

    /// One gradient step; a numerical failure is recorded in the report and
    /// leaves the network untouched.
    fn apply_grad_step(
        &mut self,
        samples: &[Sample<R>],
        learning_rate: R,
        report: &mut StepReport<R>,
    ) -> Result<()> {
        match self.mdn.grad_step(&mut self.opt, samples, learning_rate) {
            Ok(loss) => {
                report.retrained = true;
                report.train_loss = Some(loss);
                Ok(())
            }
            Err(Error::Numerical(message)) => {
                report.skipped_error = Some(message);
                Ok(())
            }
            Err(other) => Err(other),
        }
    }

    /// Point predictions for raw feature vectors. Requires at least one
    /// processed sample (the standardization statistics must exist).
    pub fn predict(&self, inputs: &[Vec<R>]) -> Result<Vec<R>> {
        if self.stats.count() == 0 {
            return Err(Error::EmptyInput("prediction before any processed data"));
        }
        inputs
            .iter()
            .map(|x| self.mdn.predict_mean(&self.stats.standardize(x)?))
            .collect()
    }

    pub fn predict_one(&self, x: &[R]) -> Result<R> {
        Ok(self.predict(std::slice::from_ref(&x.to_vec()))?[0])
    }

    /// Full-state checkpoint. Restoring and continuing is bit-identical to
    /// never having stopped.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let engine: Self = serde_json::from_str(text)?;
        engine.config.validate()?;
        Ok(engine)
    }
}

/// Appends step reports to a CSV writer with the columns
/// `batch,insertions,retrained,loss,prototype_count`.
pub fn write_step_reports<R: Real, W: std::io::Write>(
    writer: W,
    reports: &[StepReport<R>],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["batch", "insertions", "retrained", "loss", "prototype_count"])?;
    for r in reports {
        out.write_record([
            r.batch_index.to_string(),
            r.inserted_prototypes.to_string(),
            r.retrained.to_string(),
            r.train_loss.map(|l| l.to_string()).unwrap_or_default(),
            r.prototype_count.to_string(),
        ])?;
    }
    out.flush().map_err(Error::Io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::batches_from_samples;
    use crate::synth::{generate_synthetic_dataset, SyntheticKind};

    fn small_config(strategy: Strategy) -> EngineConfig<f64> {
        let mut config = EngineConfig::default();
        config.mdn.hidden_dim = 32;
        config.seed = 42;
        config.strategy = strategy;
        config
    }

    fn cluster_batches(n: usize, seed: u64) -> Vec<LabeledBatch<f64>> {
        let data =
            generate_synthetic_dataset(SyntheticKind::Clusters, n, 2, 0.1, seed).unwrap();
        batches_from_samples(&data, 16).unwrap()
    }

    #[test]
    fn strategy_names_parse_and_roundtrip() {
        assert_eq!(
            "prototype-replay".parse::<Strategy>().unwrap(),
            Strategy::PrototypeReplay
        );
        assert_eq!(
            "naive-incremental".parse::<Strategy>().unwrap(),
            Strategy::NaiveIncremental
        );
        assert_eq!(
            "experience-replay".parse::<Strategy>().unwrap(),
            Strategy::ExperienceReplay {
                buffer_capacity: 1000,
                learning_rate: 0.001
            }
        );
        assert!("ewc".parse::<Strategy>().is_err());
        let json = serde_json::to_string(&Strategy::experience_replay()).unwrap();
        assert_eq!(
            serde_json::from_str::<Strategy>(&json).unwrap(),
            Strategy::experience_replay()
        );
    }

    #[test]
    fn fresh_engine_is_empty_and_seed_deterministic() {
        let a = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        let b = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        let mut other = small_config(Strategy::PrototypeReplay);
        other.seed = 43;
        let c = Engine::<f64>::new(other, 2).unwrap();
        assert_eq!(a.prototype_count(), 0);
        assert!(a.tree().is_none());
        assert_eq!(a.stats().count(), 0);
        assert_eq!(a.mdn().to_json().unwrap(), b.mdn().to_json().unwrap());
        assert_ne!(a.mdn().to_json().unwrap(), c.mdn().to_json().unwrap());
    }

    #[test]
    fn invalid_dimension_is_rejected() {
        assert!(Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 0).is_err());
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 3).unwrap();
        let batch = cluster_batches(16, 0).remove(0);
        match engine.process_labeled_batch(&batch) {
            Err(Error::DimensionMismatch { expected: 3, got: 2 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn first_batch_bootstraps_and_trains() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        let report = engine
            .process_labeled_batch(&cluster_batches(16, 1).remove(0))
            .unwrap();
        assert!(report.inserted_prototypes >= 5);
        assert!(report.retrained);
        assert!(report.train_loss.is_some());
        assert_eq!(report.prototype_count, engine.prototype_count());
        assert!(engine.tree().is_some());
    }

    #[test]
    fn duplicate_batch_without_insertions_leaves_network_untouched() {
        // A constant feature standardizes to the origin no matter how the
        // running statistics evolve, so the duplicate batch lands exactly on
        // the bootstrapped prototypes and is fully absorbed. With no
        // insertions the network must not move.
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 1).unwrap();
        let samples: Vec<Sample<f64>> =
            (0..16).map(|_| Sample::new(vec![5.0], 3.0)).collect();
        let batch = LabeledBatch::new(samples, 0).unwrap();
        let first = engine.process_labeled_batch(&batch).unwrap();
        assert_eq!(first.inserted_prototypes, 5);
        assert!(first.retrained);

        let before = engine.mdn().to_json().unwrap();
        let second = engine.process_labeled_batch(&batch).unwrap();
        assert_eq!(second.inserted_prototypes, 0);
        assert!(!second.retrained);
        assert_eq!(second.train_loss, None);
        assert_eq!(engine.mdn().to_json().unwrap(), before);
    }

    #[test]
    fn gating_matches_insertions_over_a_stream() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        for batch in cluster_batches(480, 3) {
            let report = engine.process_labeled_batch(&batch).unwrap();
            assert!(report.skipped_error.is_none());
            assert_eq!(report.retrained, report.inserted_prototypes > 0);
        }
    }

    #[test]
    fn naive_strategy_trains_every_batch_and_keeps_no_memory() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::NaiveIncremental), 2).unwrap();
        for batch in cluster_batches(160, 4) {
            let report = engine.process_labeled_batch(&batch).unwrap();
            assert!(report.retrained);
            assert_eq!(report.inserted_prototypes, 0);
            assert_eq!(report.prototype_count, 0);
        }
        assert!(engine.tree().is_none());
    }

    #[test]
    fn replay_buffer_respects_capacity_and_trains_every_batch() {
        let strategy = Strategy::ExperienceReplay {
            buffer_capacity: 64,
            learning_rate: 0.001,
        };
        let mut engine = Engine::<f64>::new(small_config(strategy), 2).unwrap();
        for batch in cluster_batches(800, 5) {
            let report = engine.process_labeled_batch(&batch).unwrap();
            assert!(report.retrained);
            assert!(engine.replay_buffer().unwrap().len() <= 64);
        }
        let buffer = engine.replay_buffer().unwrap();
        assert_eq!(buffer.len(), 64);
        assert_eq!(buffer.seen(), 800);
    }

    #[test]
    fn prediction_is_pure_and_composes_standardize_with_mixture_mean() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        for batch in cluster_batches(160, 6) {
            engine.process_labeled_batch(&batch).unwrap();
        }
        let before = engine.to_json().unwrap();
        let points = vec![vec![0.0, 0.0], vec![6.0, 6.0]];
        let preds = engine.predict(&points).unwrap();
        for (x, &p) in points.iter().zip(&preds) {
            let z = engine.stats().standardize(x).unwrap();
            assert_eq!(p, engine.mdn().predict_mean(&z).unwrap());
        }
        assert_eq!(engine.predict(&points).unwrap(), preds);
        assert_eq!(engine.to_json().unwrap(), before);
    }

    #[test]
    fn prediction_before_any_data_is_rejected() {
        let engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        assert!(engine.predict(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn learns_a_linear_map_end_to_end() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 1).unwrap();
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(7);
        let samples: Vec<Sample<f64>> = (0..16000)
            .map(|_| {
                let x = rand::Rng::random_range(&mut rng, -3.0..3.0);
                Sample::new(vec![x], 2.0 * x)
            })
            .collect();
        let mut trained = 0;
        for batch in batches_from_samples(&samples, 16).unwrap() {
            let report = engine.process_labeled_batch(&batch).unwrap();
            if report.retrained {
                trained += 1;
            }
        }
        println!(
            "trained {trained} batches, {} prototypes",
            engine.prototype_count()
        );
        let grid: Vec<Vec<f64>> = (0..61).map(|i| vec![-3.0 + 0.1 * i as f64]).collect();
        let preds = engine.predict(&grid).unwrap();
        let mse = grid
            .iter()
            .zip(&preds)
            .map(|(x, &p)| (p - 2.0 * x[0]).powi(2))
            .sum::<f64>()
            / grid.len() as f64;
        // Var(y) = 4 * Var(U(-3,3)) = 12.
        assert!(mse < 0.05 * 12.0, "mse {mse}");
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut engine =
                Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
            for batch in cluster_batches(320, 8) {
                engine.process_labeled_batch(&batch).unwrap();
            }
            (
                engine.predict(&[vec![1.0, 2.0]]).unwrap(),
                engine.to_json().unwrap(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_restores_and_continues_identically() {
        let batches = cluster_batches(480, 9);
        let mut engine = Engine::<f64>::new(small_config(Strategy::PrototypeReplay), 2).unwrap();
        for batch in &batches[..10] {
            engine.process_labeled_batch(batch).unwrap();
        }
        let checkpoint = engine.to_json().unwrap();
        let mut restored = Engine::<f64>::from_json(&checkpoint).unwrap();
        assert_eq!(restored.to_json().unwrap(), checkpoint);
        for batch in &batches[10..] {
            let a = engine.process_labeled_batch(batch).unwrap();
            let b = restored.process_labeled_batch(batch).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(engine.to_json().unwrap(), restored.to_json().unwrap());
    }

    #[test]
    fn numerical_failure_skips_the_step_and_the_stream_survives() {
        let mut engine = Engine::<f64>::new(small_config(Strategy::NaiveIncremental), 1).unwrap();
        let poison = LabeledBatch::new(
            (0..16)
                .map(|i| Sample::new(vec![i as f64], 1e200))
                .collect(),
            0,
        )
        .unwrap();
        let before = engine.mdn().to_json().unwrap();
        let report = engine.process_labeled_batch(&poison).unwrap();
        assert!(!report.retrained);
        assert!(report.skipped_error.is_some());
        assert_eq!(engine.mdn().to_json().unwrap(), before);

        let good = LabeledBatch::new(
            (0..16).map(|i| Sample::new(vec![i as f64], 1.0)).collect(),
            1,
        )
        .unwrap();
        let report = engine.process_labeled_batch(&good).unwrap();
        assert!(report.retrained);
    }

    #[test]
    fn step_report_csv_has_the_documented_columns() {
        let reports = vec![
            StepReport::<f64> {
                batch_index: 0,
                inserted_prototypes: 5,
                retrained: true,
                train_loss: Some(1.25),
                prototype_count: 5,
                skipped_error: None,
            },
            StepReport::<f64> {
                batch_index: 1,
                inserted_prototypes: 0,
                retrained: false,
                train_loss: None,
                prototype_count: 5,
                skipped_error: None,
            },
        ];
        let mut buf = Vec::new();
        write_step_reports(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "batch,insertions,retrained,loss,prototype_count"
        );
        assert_eq!(lines.next().unwrap(), "0,5,true,1.25,5");
        assert_eq!(lines.next().unwrap(), "1,0,false,,5");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = small_config(Strategy::PrototypeReplay);
        config.tree_reservoir_capacity = 0;
        assert!(Engine::<f64>::new(config, 2).is_err());
        let bad = Strategy::ExperienceReplay {
            buffer_capacity: 0,
            learning_rate: 0.001,
        };
        assert!(Engine::<f64>::new(small_config(bad), 2).is_err());
        let mut config = small_config(Strategy::PrototypeReplay);
        config.rehearsal.synthetic_ratio = 1.0;
        assert!(Engine::<f64>::new(config, 2).is_err());
    }
}
