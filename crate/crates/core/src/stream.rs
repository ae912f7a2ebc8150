//! Data ingestion, batching, and online feature standardization.

use std::fs::File;
use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{real, Real};

/// Batch size used by the streaming protocols when none is configured.
pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Standard deviations below this are treated as a constant feature, whose
/// standardized value is defined as zero.
pub const STD_FLOOR: f64 = 1e-12;

/// One observation: a feature vector plus a scalar target.
///
/// Whether the features are raw or standardized depends on where the sample
/// lives; targets always stay in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Sample<R: Real> {
    pub features: Vec<R>,
    pub target: R,
}

impl<R: Real> Sample<R> {
    pub fn new(features: Vec<R>, target: R) -> Self {
        Self { features, target }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// A nonempty run of samples sharing one feature dimension, tagged with its
/// position in the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LabeledBatch<R: Real> {
    pub samples: Vec<Sample<R>>,
    pub index: u64,
}

impl<R: Real> LabeledBatch<R> {
    pub fn new(samples: Vec<Sample<R>>, index: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("batch has no samples"));
        }
        let dim = samples[0].dim();
        for s in &samples[1..] {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        Ok(Self { samples, index })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }
}

/// Per-feature running mean and variance accumulator.
///
/// Uses Welford's update so the stream is never stored; variance is the
/// sample variance with an `n - 1` denominator (`max(n - 1, 1)` so a single
/// observation yields zero variance instead of a division by zero).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunningStats<R: Real> {
    count: u64,
    mean: Vec<R>,
    m2: Vec<R>,
}

impl<R: Real> RunningStats<R> {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: Vec::new(),
            m2: Vec::new(),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Feature dimension, or `None` before the first observation.
    pub fn dim(&self) -> Option<usize> {
        if self.count == 0 {
            None
        } else {
            Some(self.mean.len())
        }
    }

    pub fn mean(&self) -> &[R] {
        &self.mean
    }

    /// Absorbs one feature vector. The first observation fixes the dimension.
    pub fn update(&mut self, x: &[R]) -> Result<()> {
        if self.count == 0 {
            self.mean = vec![R::zero(); x.len()];
            self.m2 = vec![R::zero(); x.len()];
        } else if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        self.count += 1;
        let n = real::<R>(self.count as f64);
        for j in 0..x.len() {
            let delta = x[j] - self.mean[j];
            self.mean[j] += delta / n;
            self.m2[j] += delta * (x[j] - self.mean[j]);
        }
        Ok(())
    }

    /// Per-feature sample variance.
    pub fn variance(&self) -> Vec<R> {
        let denom = real::<R>(self.count.saturating_sub(1).max(1) as f64);
        self.m2.iter().map(|&m2| m2 / denom).collect()
    }

    /// Per-feature sample standard deviation.
    pub fn std(&self) -> Vec<R> {
        self.variance().into_iter().map(|v| v.sqrt()).collect()
    }

    /// Standardizes a feature vector with the current statistics. Features
    /// whose standard deviation is below [`STD_FLOOR`] map to zero.
    pub fn standardize(&self, x: &[R]) -> Result<Vec<R>> {
        if self.count == 0 {
            return Err(Error::EmptyInput("no observations to standardize with"));
        }
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        let std = self.std();
        let floor = real::<R>(STD_FLOOR);
        Ok(x.iter()
            .zip(std.iter())
            .zip(self.mean.iter())
            .map(|((&xi, &si), &mi)| {
                if si < floor {
                    R::zero()
                } else {
                    (xi - mi) / si
                }
            })
            .collect())
    }
}

/// Streaming CSV reader yielding [`LabeledBatch`]es of at most `batch_size`
/// samples; the final batch may be smaller.
pub struct CsvBatches<R: Real> {
    reader: csv::Reader<File>,
    headers: Vec<String>,
    target_idx: usize,
    batch_size: usize,
    next_index: u64,
    row: usize,
    yielded_any: bool,
    done: bool,
    _scalar: PhantomData<fn() -> R>,
}

/// Opens a CSV file with a header row and streams it as labeled batches.
///
/// The named target column supplies the target; every other column is a
/// feature, in file order. All cells must parse as finite numbers.
pub fn ingest_csv<R: Real>(
    path: impl AsRef<Path>,
    target_column: &str,
    batch_size: usize,
) -> Result<CsvBatches<R>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyInput("csv file has no header row"));
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_string()))?;
    Ok(CsvBatches {
        reader,
        headers,
        target_idx,
        batch_size,
        next_index: 0,
        row: 0,
        yielded_any: false,
        done: false,
        _scalar: PhantomData,
    })
}

impl<R: Real> CsvBatches<R> {
    /// Header names in file order, including the target column.
    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    fn parse_record(&mut self, record: &csv::StringRecord) -> Result<Sample<R>> {
        if record.len() != self.headers.len() {
            return Err(Error::CsvParse {
                row: self.row,
                column: String::new(),
                message: format!(
                    "expected {} fields, found {}",
                    self.headers.len(),
                    record.len()
                ),
            });
        }
        let mut features = Vec::with_capacity(self.headers.len() - 1);
        let mut target = R::zero();
        for (idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                row: self.row,
                column: self.headers[idx].clone(),
                message: format!("cannot parse '{}' as a number", cell.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvParse {
                    row: self.row,
                    column: self.headers[idx].clone(),
                    message: format!("non-finite value '{}'", cell.trim()),
                });
            }
            if idx == self.target_idx {
                target = real(value);
            } else {
                features.push(real(value));
            }
        }
        Ok(Sample::new(features, target))
    }
}

impl<R: Real> Iterator for CsvBatches<R> {
    type Item = Result<LabeledBatch<R>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut samples = Vec::with_capacity(self.batch_size);
        let mut record = csv::StringRecord::new();
        while samples.len() < self.batch_size {
            match self.reader.read_record(&mut record) {
                Ok(true) => {
                    self.row += 1;
                    match self.parse_record(&record) {
                        Ok(sample) => samples.push(sample),
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
                Ok(false) => {
                    self.done = true;
                    break;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        if samples.is_empty() {
            if !self.yielded_any {
                return Some(Err(Error::EmptyInput("csv file has no data rows")));
            }
            return None;
        }
        self.yielded_any = true;
        let index = self.next_index;
        self.next_index += 1;
        Some(LabeledBatch::new(samples, index))
    }
}

/// Splits an in-memory dataset into consecutive batches of `batch_size`
/// (final batch possibly smaller), indexed from zero.
pub fn batches_from_samples<R: Real>(
    samples: &[Sample<R>],
    batch_size: usize,
) -> Result<Vec<LabeledBatch<R>>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to batch"));
    }
    samples
        .chunks(batch_size)
        .enumerate()
        .map(|(i, chunk)| LabeledBatch::new(chunk.to_vec(), i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::io::Write as _;

    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn two_pass_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len();
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for row in rows {
            for j in 0..d {
                mean[j] += row[j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in rows {
            for j in 0..d {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        for v in &mut var {
            *v /= (n - 1).max(1) as f64;
        }
        (mean, var)
    }

    #[test]
    fn first_observation_sets_mean_and_zero_variance() {
        let mut stats = RunningStats::<f64>::new();
        stats.update(&[2.0]).unwrap();
        assert_eq!(stats.count(), 1);
        assert_eq!(stats.mean(), &[2.0]);
        assert_eq!(stats.variance(), vec![0.0]);
    }

    #[test]
    fn two_observations_give_sample_variance() {
        let mut stats = RunningStats::<f64>::new();
        stats.update(&[1.0]).unwrap();
        stats.update(&[3.0]).unwrap();
        assert!((stats.mean()[0] - 2.0).abs() < 1e-15);
        assert!((stats.variance()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn welford_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                (0..3)
                    .map(|j| rng.random::<f64>() * 10.0f64.powi(j as i32) - 3.0)
                    .collect()
            })
            .collect();
        let mut stats = RunningStats::<f64>::new();
        for row in &rows {
            stats.update(row).unwrap();
        }
        let (mean, var) = two_pass_stats(&rows);
        for j in 0..3 {
            let rel_m = (stats.mean()[j] - mean[j]).abs() / mean[j].abs().max(1e-12);
            let rel_v = (stats.variance()[j] - var[j]).abs() / var[j].abs().max(1e-12);
            assert!(rel_m < 1e-9, "mean[{j}] off by {rel_m}");
            assert!(rel_v < 1e-9, "var[{j}] off by {rel_v}");
        }
    }

    #[test]
    fn welford_is_order_insensitive_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows: Vec<Vec<f64>> =
            (0..500).map(|_| vec![rng.random::<f64>() * 100.0 - 50.0]).collect();
        let mut forward = RunningStats::<f64>::new();
        for row in &rows {
            forward.update(row).unwrap();
        }
        rows.reverse();
        let mut backward = RunningStats::<f64>::new();
        for row in &rows {
            backward.update(row).unwrap();
        }
        let rel_m = (forward.mean()[0] - backward.mean()[0]).abs()
            / forward.mean()[0].abs().max(1e-12);
        let rel_v = (forward.variance()[0] - backward.variance()[0]).abs()
            / forward.variance()[0].abs().max(1e-12);
        assert!(rel_m < 1e-9);
        assert!(rel_v < 1e-7);
    }

    #[test]
    fn standardize_centers_and_scales() {
        let mut stats = RunningStats::<f64>::new();
        stats.update(&[2.0]).unwrap();
        stats.update(&[4.0]).unwrap();
        // mean 3, sample std sqrt(2)
        let z = stats.standardize(&[4.0]).unwrap();
        assert!((z[0] - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        let centered = stats.standardize(&[3.0]).unwrap();
        assert_eq!(centered[0], 0.0);
    }

    #[test]
    fn constant_feature_standardizes_to_zero() {
        let mut stats = RunningStats::<f64>::new();
        for _ in 0..10 {
            stats.update(&[5.0, 1.0]).unwrap();
        }
        stats.update(&[5.0, 2.0]).unwrap();
        let z = stats.standardize(&[5.0, 1.5]).unwrap();
        assert_eq!(z[0], 0.0);
        assert!(z[1].is_finite());
    }

    #[test]
    fn standardize_before_any_observation_is_an_error() {
        let stats = RunningStats::<f64>::new();
        assert!(matches!(
            stats.standardize(&[1.0]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut stats = RunningStats::<f64>::new();
        stats.update(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            stats.update(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            stats.standardize(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    fn write_csv(rows: usize) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "a,b,price").unwrap();
        for i in 0..rows {
            writeln!(file, "{},{},{}", i, i as f64 * 0.5, i as f64 + 100.0).unwrap();
        }
        file.flush().unwrap();
        file
    }

    #[test]
    fn csv_batches_split_as_sixteen_sixteen_three() {
        let file = write_csv(35);
        let batches: Vec<_> = ingest_csv::<f64>(file.path(), "price", 16)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![16, 16, 3]);
        assert_eq!(batches[2].index, 2);
    }

    #[test]
    fn csv_roundtrip_is_lossless_and_ordered() {
        let file = write_csv(35);
        let batches: Vec<_> = ingest_csv::<f64>(file.path(), "price", 16)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        let all: Vec<&Sample<f64>> = batches.iter().flat_map(|b| b.samples.iter()).collect();
        assert_eq!(all.len(), 35);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.features, vec![i as f64, i as f64 * 0.5]);
            assert_eq!(s.target, i as f64 + 100.0);
        }
    }

    #[test]
    fn csv_target_column_can_sit_anywhere() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "y,a").unwrap();
        writeln!(file, "7.5,1.0").unwrap();
        file.flush().unwrap();
        let batches: Vec<_> = ingest_csv::<f64>(file.path(), "y", 16)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(batches[0].samples[0].features, vec![1.0]);
        assert_eq!(batches[0].samples[0].target, 7.5);
    }

    #[test]
    fn csv_missing_target_column_is_an_error() {
        let file = write_csv(3);
        match ingest_csv::<f64>(file.path(), "label", 16) {
            Err(Error::MissingTargetColumn(col)) => assert_eq!(col, "label"),
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(_) => panic!("expected a missing target column error"),
        }
    }

    #[test]
    fn csv_non_numeric_cell_names_row_and_column() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "a,price").unwrap();
        writeln!(file, "1.0,2.0").unwrap();
        writeln!(file, "oops,3.0").unwrap();
        file.flush().unwrap();
        let result: Result<Vec<_>> = ingest_csv::<f64>(file.path(), "price", 16)
            .unwrap()
            .collect();
        match result {
            Err(Error::CsvParse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_without_data_rows_is_an_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "a,price").unwrap();
        file.flush().unwrap();
        let result: Result<Vec<_>> = ingest_csv::<f64>(file.path(), "price", 16)
            .unwrap()
            .collect();
        assert!(matches!(result, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn batch_rejects_mixed_dimensions() {
        let samples = vec![
            Sample::new(vec![1.0f64, 2.0], 0.0),
            Sample::new(vec![1.0f64], 0.0),
        ];
        assert!(matches!(
            LabeledBatch::new(samples, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reservoir_batching_helper_matches_chunks() {
        let samples: Vec<Sample<f64>> = (0..35)
            .map(|i| Sample::new(vec![i as f64], i as f64))
            .collect();
        let batches = batches_from_samples(&samples, 16).unwrap();
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[0].len(), 16);
        assert_eq!(batches[2].len(), 3);
        assert_eq!(batches[1].index, 1);
    }

    #[test]
    fn f32_pipeline_matches_f64_loosely() {
        let mut s64 = RunningStats::<f64>::new();
        let mut s32 = RunningStats::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = rng.random::<f64>() * 4.0 - 2.0;
            s64.update(&[x]).unwrap();
            s32.update(&[x as f32]).unwrap();
        }
        assert!((s64.mean()[0] - s32.mean()[0] as f64).abs() < 1e-4);
        assert!((s64.variance()[0] - s32.variance()[0] as f64).abs() < 1e-3);
    }
}
