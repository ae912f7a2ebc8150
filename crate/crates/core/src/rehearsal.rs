//! Assembles the mixed real-plus-synthetic batches the network trains on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::quantile_sorted;
use crate::proto::PrototypeMemory;
use crate::real::{real, Real};
use crate::stream::{LabeledBatch, Sample};

/// Synthetic fractions evaluated in the replay experiments, largest first.
pub const RHO_GRID: [f64; 6] = [0.625, 0.5, 0.375, 0.25, 0.125, 0.0];

/// How much of each training batch should be synthetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct RehearsalConfig<R: Real> {
    /// Fraction of the combined batch drawn from memory, in [0, 1).
    pub synthetic_ratio: R,
}

impl<R: Real> Default for RehearsalConfig<R> {
    fn default() -> Self {
        Self {
            synthetic_ratio: real(0.5),
        }
    }
}

impl<R: Real> RehearsalConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.synthetic_ratio >= R::zero() && self.synthetic_ratio < R::one()) {
            return Err(Error::InvalidConfig(
                "synthetic_ratio must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// A training batch: the real samples followed by the synthetic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainingBatch<R: Real> {
    pub samples: Vec<Sample<R>>,
    pub real_count: usize,
    pub synthetic_count: usize,
    /// True when a positive ratio was requested but the memory was empty,
    /// so the batch degraded to real samples only.
    pub memory_fallback: bool,
}

/// Number of synthetic samples needed so they make up fraction `rho` of the
/// combined batch: `round(n_real * rho / (1 - rho))`.
pub fn synthetic_count<R: Real>(n_real: usize, rho: R) -> Result<usize> {
    if !(rho >= R::zero() && rho < R::one()) {
        return Err(Error::InvalidConfig(
            "synthetic ratio must lie in [0, 1)".into(),
        ));
    }
    let n = real::<R>(n_real as f64);
    let s = (n * rho / (R::one() - rho)).round();
    Ok(s.to_usize().expect("rounded count fits in usize"))
}

/// Splits `total` synthetic slots across the four quartile bins so that the
/// combined per-bin counts (real plus synthetic) come out as even as the
/// slot budget allows: each slot goes to the currently lowest-count bin,
/// ties to the lower index.
fn allocate_slots(real_counts: [usize; 4], total: usize) -> [usize; 4] {
    let mut combined = real_counts;
    let mut quotas = [0usize; 4];
    for _ in 0..total {
        let mut best = 0;
        for b in 1..4 {
            if combined[b] < combined[best] {
                best = b;
            }
        }
        combined[best] += 1;
        quotas[best] += 1;
    }
    quotas
}

/// Builds the training batch for one incoming real batch.
///
/// With `rho` zero (or a rounded synthetic count of zero) the result is the
/// real batch unchanged. Otherwise the real targets are binned by the
/// memory's target quartiles, synthetic slots are dealt to the emptiest
/// bins first, and the memory draws that many synthetic samples. An empty
/// memory falls back to the real batch and flags it.
pub fn build_batch<R: Real>(
    batch: &LabeledBatch<R>,
    memory: &PrototypeMemory<R>,
    rho: R,
    rng: &mut impl Rng,
) -> Result<TrainingBatch<R>> {
    let n_real = batch.len();
    let wanted = synthetic_count(n_real, rho)?;
    if wanted == 0 {
        return Ok(TrainingBatch {
            samples: batch.samples.clone(),
            real_count: n_real,
            synthetic_count: 0,
            memory_fallback: false,
        });
    }
    if memory.is_empty() {
        return Ok(TrainingBatch {
            samples: batch.samples.clone(),
            real_count: n_real,
            synthetic_count: 0,
            memory_fallback: true,
        });
    }
    let (q25, q50, q75) = memory.target_quartiles()?;
    let mut real_counts = [0usize; 4];
    for s in &batch.samples {
        let t = s.target;
        let bin = if t <= q25 {
            0
        } else if t <= q50 {
            1
        } else if t <= q75 {
            2
        } else {
            3
        };
        real_counts[bin] += 1;
    }
    let quotas = allocate_slots(real_counts, wanted);
    let synthetic = memory.sample_synthetic(quotas, rng)?;
    let mut samples = batch.samples.clone();
    let drawn = synthetic.len();
    samples.extend(synthetic);
    Ok(TrainingBatch {
        samples,
        real_count: n_real,
        synthetic_count: drawn,
        memory_fallback: false,
    })
}

/// Quartiles of a slice of targets, linearly interpolated. Exposed for the
/// evaluation protocols, which censor streams by target quantiles.
pub fn target_quantile<R: Real>(targets: &[R], q: f64) -> Result<R> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty target slice"));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
    Ok(quantile_sorted(&sorted, q))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::proto::IlvqParams;

    use super::*;

    fn batch_of(targets: &[f64]) -> LabeledBatch<f64> {
        let samples = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| Sample::new(vec![i as f64], t))
            .collect();
        LabeledBatch::new(samples, 0).unwrap()
    }

    fn seeded_memory(targets: &[f64]) -> PrototypeMemory<f64> {
        let mut m = PrototypeMemory::new(IlvqParams::default()).unwrap();
        // Insert spread-out prototypes through the learning path; distant
        // positions force an insert each time once bootstrapped.
        for (i, &t) in targets.iter().enumerate() {
            m.learn_one(&[i as f64 * 1000.0], 0, t).unwrap();
        }
        m
    }

    #[test]
    fn synthetic_count_reproduces_the_reference_grid() {
        assert_eq!(synthetic_count(16, 0.0f64).unwrap(), 0);
        assert_eq!(synthetic_count(16, 0.125f64).unwrap(), 2);
        assert_eq!(synthetic_count(16, 0.25f64).unwrap(), 5);
        assert_eq!(synthetic_count(16, 0.375f64).unwrap(), 10);
        assert_eq!(synthetic_count(16, 0.5f64).unwrap(), 16);
        assert_eq!(synthetic_count(16, 0.625f64).unwrap(), 27);
    }

    #[test]
    fn combined_batch_sizes_follow_from_the_counts() {
        let sizes: Vec<usize> = RHO_GRID
            .iter()
            .map(|&rho| 16 + synthetic_count(16, rho).unwrap())
            .collect();
        assert_eq!(sizes, vec![43, 32, 26, 21, 18, 16]);
    }

    #[test]
    fn ratios_outside_the_unit_interval_are_rejected() {
        assert!(synthetic_count(16, 1.0f64).is_err());
        assert!(synthetic_count(16, -0.1f64).is_err());
        assert!(synthetic_count(16, 1.5f64).is_err());
    }

    #[test]
    fn zero_ratio_returns_the_real_batch_unchanged() {
        let batch = batch_of(&[1.0, 2.0, 3.0, 4.0]);
        let memory = seeded_memory(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tb = build_batch(&batch, &memory, 0.0, &mut rng).unwrap();
        assert_eq!(tb.samples, batch.samples);
        assert_eq!(tb.real_count, 4);
        assert_eq!(tb.synthetic_count, 0);
        assert!(!tb.memory_fallback);
    }

    #[test]
    fn empty_memory_falls_back_to_real_samples() {
        let batch = batch_of(&[1.0, 2.0]);
        let memory = PrototypeMemory::<f64>::new(IlvqParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tb = build_batch(&batch, &memory, 0.5, &mut rng).unwrap();
        assert_eq!(tb.samples, batch.samples);
        assert!(tb.memory_fallback);
    }

    #[test]
    fn slots_go_to_the_emptiest_bins_first() {
        // All real targets in bin 0; three synthetic slots must land in
        // bins 1, 2, 3.
        assert_eq!(allocate_slots([5, 0, 0, 0], 3), [0, 1, 1, 1]);
        // Ties break toward the lower bin index.
        assert_eq!(allocate_slots([0, 0, 0, 0], 2), [1, 1, 0, 0]);
        assert_eq!(allocate_slots([2, 1, 1, 3], 4), [1, 2, 1, 0]);
    }

    #[test]
    fn allocation_matches_exhaustive_water_filling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let counts = [
                rng.random_range(0..6usize),
                rng.random_range(0..6usize),
                rng.random_range(0..6usize),
                rng.random_range(0..6usize),
            ];
            let total = rng.random_range(0..12usize);
            let quotas = allocate_slots(counts, total);
            assert_eq!(quotas.iter().sum::<usize>(), total);
            let combined: Vec<usize> = (0..4).map(|b| counts[b] + quotas[b]).collect();
            // Optimality of greedy lowest-first: moving any placed slot to
            // another bin cannot improve the balance, which means a bin
            // that received a slot ends at most one above every other bin.
            for b in 0..4 {
                if quotas[b] == 0 {
                    continue;
                }
                for c in 0..4 {
                    assert!(
                        combined[b] <= combined[c] + 1,
                        "unbalanced: counts {counts:?} quotas {quotas:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn half_ratio_doubles_the_batch() {
        let batch = batch_of(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let memory = seeded_memory(&[1.0, 2.5, 4.0, 5.5, 7.0, 8.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tb = build_batch(&batch, &memory, 0.5, &mut rng).unwrap();
        assert_eq!(tb.real_count, 8);
        assert_eq!(tb.synthetic_count, 8);
        assert_eq!(tb.samples.len(), 16);
        // Real samples come first and are untouched.
        assert_eq!(&tb.samples[..8], batch.samples.as_slice());
        // Every synthetic sample replicates some prototype exactly.
        for s in &tb.samples[8..] {
            assert!(
                memory
                    .prototypes()
                    .any(|p| p.centroid == s.features && p.target == s.target),
                "synthetic sample is not a prototype replica"
            );
        }
    }

    #[test]
    fn build_batch_is_deterministic_for_a_fixed_seed() {
        let batch = batch_of(&[3.0, 1.0, 4.0, 1.5, 9.0, 2.6, 5.3, 5.8]);
        let memory = seeded_memory(&[1.0, 2.0, 4.0, 6.0, 8.0, 9.0, 3.0]);
        let a = build_batch(&batch, &memory, 0.375, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = build_batch(&batch, &memory, 0.375, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn build_batch_leaves_the_memory_untouched() {
        let batch = batch_of(&[1.0, 2.0, 3.0]);
        let memory = seeded_memory(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let before = memory.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        build_batch(&batch, &memory, 0.5, &mut rng).unwrap();
        assert_eq!(memory, before);
    }

    #[test]
    fn target_quantile_matches_the_sorted_definition() {
        let targets = [4.0f64, 1.0, 3.0, 2.0];
        assert!((target_quantile(&targets, 0.7).unwrap() - 3.1).abs() < 1e-12);
        assert!(target_quantile::<f64>(&[], 0.7).is_err());
    }
}
