//! Experiment protocols and metrics for quantifying forgetting on
//! non-stationary streams.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::real::{real, Real};
use crate::rehearsal::target_quantile;
use crate::stream::{batches_from_samples, LabeledBatch, Sample, DEFAULT_BATCH_SIZE};

/// Shape of the censored-stream experiment: learn on everything, then see a
/// a stream with the high-target region removed, then see everything again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgettingProtocol {
    /// Fraction of training batches before censoring starts.
    pub learn_end: f64,
    /// Fraction of training batches at which censoring stops.
    pub forget_end: f64,
    /// Targets above this quantile of the test set's targets are censored.
    pub censor_quantile: f64,
    /// Held-out fraction of the dataset.
    pub test_fraction: f64,
    /// Batches averaged into the pre-censoring error baseline.
    pub window: usize,
    pub batch_size: usize,
}

impl Default for ForgettingProtocol {
    fn default() -> Self {
        Self {
            learn_end: 0.40,
            forget_end: 0.70,
            censor_quantile: 0.70,
            test_fraction: 0.20,
            window: 20,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

impl ForgettingProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.learn_end && self.learn_end < self.forget_end && self.forget_end < 1.0) {
            return Err(Error::InvalidConfig(
                "phase boundaries must satisfy 0 < learn_end < forget_end < 1".into(),
            ));
        }
        if !(0.0 < self.censor_quantile && self.censor_quantile < 1.0) {
            return Err(Error::InvalidConfig(
                "censor_quantile must lie in (0, 1)".into(),
            ));
        }
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "test_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.window == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "window and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A prepared censored stream plus its held-out test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForgettingStream<R: Real> {
    pub batches: Vec<LabeledBatch<R>>,
    /// Held out; contains censored-region samples so evaluation sees them.
    pub test: Vec<Sample<R>>,
    /// Index of the first censored batch.
    pub forget_start: usize,
    /// One past the last censored batch.
    pub forget_end: usize,
    /// Targets strictly above this were removed from the censored phase.
    pub censor_threshold: R,
}

/// Shuffles the dataset, splits off the test set, and censors the middle
/// phase of the training stream: batches in `[learn_end, forget_end)` drop
/// every sample whose target exceeds the test-target quantile. The
/// threshold deliberately comes from the test set. Censored batches that
/// end up empty are dropped and the phase boundaries follow.
pub fn make_forgetting_stream<R: Real>(
    dataset: &[Sample<R>],
    protocol: &ForgettingProtocol,
    seed: u64,
) -> Result<ForgettingStream<R>> {
    protocol.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("empty dataset"));
    }
    let n = dataset.len();
    let n_test = ((n as f64) * protocol.test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidConfig(format!(
            "test split of {n_test} out of {n} samples is degenerate"
        )));
    }
    let mut shuffled: Vec<&Sample<R>> = dataset.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let test: Vec<Sample<R>> = shuffled[..n_test].iter().map(|s| (*s).clone()).collect();
    let train: Vec<Sample<R>> = shuffled[n_test..].iter().map(|s| (*s).clone()).collect();

    let test_targets: Vec<R> = test.iter().map(|s| s.target).collect();
    let threshold = target_quantile(&test_targets, protocol.censor_quantile)?;

    let raw_batches = batches_from_samples(&train, protocol.batch_size)?;
    let total = raw_batches.len();
    let forget_start = ((total as f64) * protocol.learn_end).floor() as usize;
    let forget_end = ((total as f64) * protocol.forget_end).floor() as usize;
    if forget_start == 0 || forget_end <= forget_start || forget_end >= total {
        return Err(Error::InvalidConfig(format!(
            "{total} training batches cannot host three nonempty phases"
        )));
    }

    let mut batches = Vec::with_capacity(total);
    for (i, batch) in raw_batches.into_iter().enumerate() {
        if i >= forget_start && i < forget_end {
            let kept: Vec<Sample<R>> = batch
                .samples
                .into_iter()
                .filter(|s| s.target <= threshold)
                .collect();
            if !kept.is_empty() {
                batches.push(kept);
            }
        } else {
            batches.push(batch.samples);
        }
    }
    let dropped = total - batches.len();
    let forget_end = forget_end - dropped;
    let batches = batches
        .into_iter()
        .enumerate()
        .map(|(i, samples)| LabeledBatch::new(samples, i as u64))
        .collect::<Result<Vec<_>>>()?;
    if forget_end <= forget_start {
        return Err(Error::InvalidConfig(
            "censoring emptied the middle phase entirely".into(),
        ));
    }
    Ok(ForgettingStream {
        batches,
        test,
        forget_start,
        forget_end,
        censor_threshold: threshold,
    })
}

/// Mean squared error.
pub fn mse<R: Real>(preds: &[R], targets: &[R]) -> Result<R> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("mse of empty vectors"));
    }
    let sum: R = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / real(preds.len() as f64))
}

/// Coefficient of determination, `1 - SSE/SST`. A constant target vector
/// has no variance to explain: perfect predictions score 0, anything else
/// scores negative infinity, which callers should treat as an error flag
/// rather than a value.
pub fn r2<R: Real>(preds: &[R], targets: &[R]) -> Result<R> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("r2 of empty vectors"));
    }
    let n = real::<R>(targets.len() as f64);
    let mean: R = targets.iter().copied().sum::<R>() / n;
    let sst: R = targets.iter().map(|&t| (t - mean) * (t - mean)).sum();
    let sse: R = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    if sst == R::zero() {
        return Ok(if sse == R::zero() {
            R::zero()
        } else {
            R::neg_infinity()
        });
    }
    Ok(R::one() - sse / sst)
}

/// Relative error increase during the censored phase,
/// `(mse_during - mse_before) / mse_before`. Negative means the error
/// improved while the region was hidden.
pub fn degradation_index<R: Real>(mse_before: R, mse_during: R) -> Result<R> {
    if !(mse_before > R::zero()) {
        return Err(Error::Numerical(
            "degradation index needs a positive baseline mse".into(),
        ));
    }
    Ok((mse_during - mse_before) / mse_before)
}

/// One seed's walk through the censored stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseReport<R: Real> {
    pub seed: u64,
    /// Test-set MSE after each training batch.
    pub mse_trace: Vec<R>,
    /// Mean of the `window` trace entries right before censoring begins.
    pub mse_before: R,
    /// Mean over the censored-phase trace entries.
    pub mse_during: R,
    pub degradation_index: R,
    pub mse_final: R,
    pub r2_final: R,
}

/// Per-seed reports plus their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForgettingSummary<R: Real> {
    pub per_seed: Vec<PhaseReport<R>>,
    pub mean_mse_before: R,
    pub mean_mse_during: R,
    pub mean_degradation_index: R,
    pub mean_mse_final: R,
    pub mean_r2_final: R,
}

/// Runs the censored-stream protocol once per seed. Each seed shuffles the
/// split and seeds its own engine; the test set (which still contains
/// high-target samples) is scored after every training batch and never
/// trains the engine.
pub fn run_forgetting_experiment<R: Real>(
    config: &EngineConfig<R>,
    dataset: &[Sample<R>],
    protocol: &ForgettingProtocol,
    seeds: &[u64],
) -> Result<ForgettingSummary<R>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed required".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let stream = make_forgetting_stream(dataset, protocol, seed)?;
        let mut cfg = config.clone();
        cfg.seed = seed;
        let mut engine = Engine::new(cfg, stream.batches[0].dim())?;
        let test_x: Vec<Vec<R>> = stream.test.iter().map(|s| s.features.clone()).collect();
        let test_y: Vec<R> = stream.test.iter().map(|s| s.target).collect();

        let mut trace = Vec::with_capacity(stream.batches.len());
        for batch in &stream.batches {
            engine.process_labeled_batch(batch)?;
            trace.push(mse(&engine.predict(&test_x)?, &test_y)?);
        }
        let window = protocol.window.min(stream.forget_start);
        let before_slice = &trace[stream.forget_start - window..stream.forget_start];
        let mse_before = mean(before_slice);
        let mse_during = mean(&trace[stream.forget_start..stream.forget_end]);
        let degradation = degradation_index(mse_before, mse_during)?;
        let final_preds = engine.predict(&test_x)?;
        per_seed.push(PhaseReport {
            seed,
            mse_before,
            mse_during,
            degradation_index: degradation,
            mse_final: mse(&final_preds, &test_y)?,
            r2_final: r2(&final_preds, &test_y)?,
            mse_trace: trace,
        });
    }
    Ok(ForgettingSummary {
        mean_mse_before: mean_by(&per_seed, |r| r.mse_before),
        mean_mse_during: mean_by(&per_seed, |r| r.mse_during),
        mean_degradation_index: mean_by(&per_seed, |r| r.degradation_index),
        mean_mse_final: mean_by(&per_seed, |r| r.mse_final),
        mean_r2_final: mean_by(&per_seed, |r| r.r2_final),
        per_seed,
    })
}

fn mean<R: Real>(xs: &[R]) -> R {
    xs.iter().copied().sum::<R>() / real(xs.len() as f64)
}

fn mean_by<R: Real, T>(items: &[T], f: impl Fn(&T) -> R) -> R {
    items.iter().map(f).sum::<R>() / real(items.len() as f64)
}

/// Shape of the warm-up/update/evaluation experiment on a temporally
/// ordered stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClearProtocol {
    pub warmup_fraction: f64,
    pub update_fraction: f64,
    pub batch_size: usize,
    /// Warm-up repeats until this many passes or until converged.
    pub max_warmup_passes: usize,
    /// Warm-up stops early once the relative error improvement between
    /// passes falls below this.
    pub convergence_tolerance: f64,
}

impl Default for ClearProtocol {
    fn default() -> Self {
        Self {
            warmup_fraction: 0.40,
            update_fraction: 0.40,
            batch_size: DEFAULT_BATCH_SIZE,
            max_warmup_passes: 50,
            convergence_tolerance: 1e-4,
        }
    }
}

impl ClearProtocol {
    pub fn validate(&self) -> Result<()> {
        let ok = self.warmup_fraction > 0.0
            && self.update_fraction > 0.0
            && self.warmup_fraction + self.update_fraction < 1.0;
        if !ok {
            return Err(Error::InvalidConfig(
                "segment fractions must be positive and leave room for evaluation".into(),
            ));
        }
        if self.batch_size == 0 || self.max_warmup_passes == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and max_warmup_passes must be positive".into(),
            ));
        }
        if !(self.convergence_tolerance > 0.0 && self.convergence_tolerance.is_finite()) {
            return Err(Error::InvalidConfig(
                "convergence_tolerance must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sequential split of a stream into the three experiment segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClearStream<R: Real> {
    pub warmup: Vec<LabeledBatch<R>>,
    pub update: Vec<LabeledBatch<R>>,
    pub eval: Vec<Sample<R>>,
}

/// Cuts the dataset in order (no shuffle; the stream's drift is the point)
/// into warm-up, update, and evaluation segments.
pub fn make_clear_stream<R: Real>(
    dataset: &[Sample<R>],
    protocol: &ClearProtocol,
) -> Result<ClearStream<R>> {
    protocol.validate()?;
    let n = dataset.len();
    let n_warm = ((n as f64) * protocol.warmup_fraction).floor() as usize;
    let n_update = ((n as f64) * protocol.update_fraction).floor() as usize;
    if n_warm == 0 || n_update == 0 || n_warm + n_update >= n {
        return Err(Error::InvalidConfig(format!(
            "{n} samples cannot fill three nonempty segments"
        )));
    }
    Ok(ClearStream {
        warmup: batches_from_samples(&dataset[..n_warm], protocol.batch_size)?,
        update: batches_from_samples(&dataset[n_warm..n_warm + n_update], protocol.batch_size)?,
        eval: dataset[n_warm + n_update..].to_vec(),
    })
}

/// Relative error increase on old data, `(after - before) / before`,
/// returned raw and clamped at zero.
pub fn forgetting_ratio<R: Real>(before: R, after: R) -> Result<(R, R)> {
    if !(before > R::zero()) {
        return Err(Error::Numerical(
            "forgetting ratio needs a positive baseline error".into(),
        ));
    }
    let raw = (after - before) / before;
    Ok((raw, raw.max(R::zero())))
}

/// Outcome of the warm-up/update/evaluation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClearReport<R: Real> {
    pub warmup_passes: usize,
    /// Warm-up-set error after each warm-up pass.
    pub warmup_error_trace: Vec<R>,
    /// Warm-up-set error right after warm-up converged.
    pub warmup_error_before: R,
    /// Warm-up-set error again after the one-pass update segment.
    pub warmup_error_after: R,
    pub forgetting_ratio_raw: R,
    /// The raw ratio clamped at zero, the headline number.
    pub forgetting_ratio: R,
    /// Error on the held-out evaluation segment at the end.
    pub prediction_error: R,
}

/// Trains to convergence on the warm-up segment (bounded passes), streams
/// the update segment exactly once, and measures how much warm-up-set error
/// grew plus the final held-out error.
pub fn run_clear_protocol<R: Real>(
    config: &EngineConfig<R>,
    stream: &ClearStream<R>,
    protocol: &ClearProtocol,
) -> Result<ClearReport<R>> {
    protocol.validate()?;
    if stream.warmup.is_empty() || stream.update.is_empty() || stream.eval.is_empty() {
        return Err(Error::EmptyInput("every experiment segment must be nonempty"));
    }
    let mut engine = Engine::new(config.clone(), stream.warmup[0].dim())?;
    let warm_x: Vec<Vec<R>> = stream
        .warmup
        .iter()
        .flat_map(|b| b.samples.iter().map(|s| s.features.clone()))
        .collect();
    let warm_y: Vec<R> = stream
        .warmup
        .iter()
        .flat_map(|b| b.samples.iter().map(|s| s.target))
        .collect();

    let tolerance = real::<R>(protocol.convergence_tolerance);
    let mut passes = 0;
    let mut trace: Vec<R> = Vec::new();
    for _ in 0..protocol.max_warmup_passes {
        for batch in &stream.warmup {
            engine.process_labeled_batch(batch)?;
        }
        passes += 1;
        let e = mse(&engine.predict(&warm_x)?, &warm_y)?;
        let converged = trace
            .last()
            .map(|&prev| prev <= R::zero() || (prev - e) / prev < tolerance)
            .unwrap_or(false);
        trace.push(e);
        if converged {
            break;
        }
    }
    let warmup_error_before = *trace.last().expect("at least one warm-up pass ran");

    for batch in &stream.update {
        engine.process_labeled_batch(batch)?;
    }
    let warmup_error_after = mse(&engine.predict(&warm_x)?, &warm_y)?;
    let (raw, clamped) = forgetting_ratio(warmup_error_before, warmup_error_after)?;

    let eval_x: Vec<Vec<R>> = stream.eval.iter().map(|s| s.features.clone()).collect();
    let eval_y: Vec<R> = stream.eval.iter().map(|s| s.target).collect();
    let prediction_error = mse(&engine.predict(&eval_x)?, &eval_y)?;
    Ok(ClearReport {
        warmup_passes: passes,
        warmup_error_trace: trace,
        warmup_error_before,
        warmup_error_after,
        forgetting_ratio_raw: raw,
        forgetting_ratio: clamped,
        prediction_error,
    })
}

/// How much memory the prototype set uses relative to the stream length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub samples_processed: u64,
    pub prototype_count: usize,
    /// `100 * prototype_count / samples_processed`.
    pub pd_ratio_percent: f64,
}

pub fn memory_report(prototype_count: usize, samples_processed: u64) -> Result<MemoryReport> {
    if samples_processed == 0 {
        return Err(Error::EmptyInput("memory report before any processed data"));
    }
    Ok(MemoryReport {
        samples_processed,
        prototype_count,
        pd_ratio_percent: 100.0 * prototype_count as f64 / samples_processed as f64,
    })
}
