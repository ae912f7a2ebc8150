//! Bounded uniform memory of a stream via reservoir sampling (algorithm R).

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Keeps a uniform random subset of everything inserted, never holding more
/// than `capacity` items. While under capacity every item is kept; once full,
/// the i-th insertion replaces a random slot with probability `capacity / i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir<T> {
    capacity: usize,
    items: Vec<T>,
    seen: u64,
}

impl<T> Reservoir<T> {
    /// Creates an empty reservoir. `capacity` must be at least one.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "reservoir capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            seen: 0,
        }
    }

    pub fn insert(&mut self, item: T, rng: &mut impl Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of insertions offered, kept or not.
    pub fn seen(&self) -> u64 {
        self.seen
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    use super::*;

    #[test]
    fn keeps_everything_until_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut res = Reservoir::new(10);
        for i in 0..7 {
            res.insert(i, &mut rng);
        }
        assert_eq!(res.items(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(res.seen(), 7);
    }

    #[test]
    fn never_exceeds_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut res = Reservoir::new(50);
        for i in 0..5000u64 {
            res.insert(i, &mut rng);
            assert!(res.len() <= 50);
        }
        assert_eq!(res.len(), 50);
        assert_eq!(res.seen(), 5000);
    }

    // Fill a 2000-slot reservoir, stream 10000 more items, and check the
    // retained stream positions are uniform: counts over 40 equal-width
    // position bins should pass a chi-squared test.
    #[test]
    fn retention_is_uniform_over_stream_positions() {
        let total = 12_000usize;
        let bins = 40usize;
        let bin_width = total / bins;
        let mut counts = vec![0.0f64; bins];
        let runs = 20;
        for seed in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut res = Reservoir::new(2000);
            for i in 0..total {
                res.insert(i, &mut rng);
            }
            for &i in res.items() {
                counts[i / bin_width] += 1.0;
            }
        }
        let expected = (2000 * runs) as f64 / bins as f64;
        let statistic: f64 = counts
            .iter()
            .map(|&c| (c - expected).powi(2) / expected)
            .sum();
        let chi = ChiSquared::new((bins - 1) as f64).unwrap();
        let p_value = 1.0 - chi.cdf(statistic);
        assert!(
            p_value > 0.01,
            "retention positions not uniform: chi2 {statistic:.1}, p {p_value:.4}"
        );
    }

    #[test]
    fn identical_seeds_reproduce_identical_contents() {
        let fill = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut res = Reservoir::new(100);
            for i in 0..3000u32 {
                res.insert(i, &mut rng);
            }
            res.items().to_vec()
        };
        assert_eq!(fill(42), fill(42));
        assert_ne!(fill(42), fill(43));
    }
}
