//! Deterministic synthetic dataset generators used by the experiment
//! protocols and tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{real, Real};
use crate::stream::Sample;

/// Families of generated datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Uniform features; the target jumps between three regimes of `x0`
    /// with a slope on `x1`, so high targets concentrate in one region:
    /// `y = 5 x1` for `x0 < 0.4`, `y = 10 + 5 x1` for `0.4 <= x0 < 0.7`,
    /// and `y = 25 + 10 x1` for `x0 >= 0.7`, plus `noise * eps`.
    PiecewiseDrift,
    /// The classic four-term regression benchmark surface
    /// `y = 10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 10 x3 + 5 x4 + noise * eps`
    /// on uniform features; terms referring to absent features are dropped.
    FriedmanLike,
    /// Four Gaussian blobs centered at (0,0), (6,0), (0,6), (6,6) in the
    /// first two feature dimensions (spread 0.4), visited round-robin, with
    /// well-separated target levels 0/15/30/45 plus a slope on `x0`:
    /// `y = level + 0.5 (x0 - c0) + noise * eps`.
    Clusters,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SyntheticKind::PiecewiseDrift => "piecewise-drift",
            SyntheticKind::FriedmanLike => "friedman-like",
            SyntheticKind::Clusters => "clusters",
        };
        f.write_str(name)
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise-drift" => Ok(SyntheticKind::PiecewiseDrift),
            "friedman-like" => Ok(SyntheticKind::FriedmanLike),
            "clusters" => Ok(SyntheticKind::Clusters),
            other => Err(Error::InvalidConfig(format!(
                "unknown synthetic dataset kind '{other}' \
                 (expected piecewise-drift, friedman-like, or clusters)"
            ))),
        }
    }
}

/// Cluster centers and target levels of [`SyntheticKind::Clusters`].
pub const CLUSTER_CENTERS: [(f64, f64); 4] = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0), (6.0, 6.0)];
pub const CLUSTER_LEVELS: [f64; 4] = [0.0, 15.0, 30.0, 45.0];
const CLUSTER_SPREAD: f64 = 0.4;

/// Generates `n` samples with `d` features. The same `(kind, n, d, seed)`
/// always produces the same features regardless of `noise`: the per-sample
/// noise draw happens either way and is scaled by `noise`, which may be 0.
pub fn generate_synthetic_dataset<R: Real>(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<Sample<R>>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig(
            "sample count and dimension must be positive".into(),
        ));
    }
    if kind == SyntheticKind::PiecewiseDrift && d < 2 {
        return Err(Error::InvalidConfig(
            "piecewise-drift needs at least two features".into(),
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(
            "noise must be finite and non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (features, clean) = match kind {
            SyntheticKind::PiecewiseDrift => {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let y = piecewise_target(x[0], x[1]);
                (x, y)
            }
            SyntheticKind::FriedmanLike => {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                (x.clone(), friedman_target(&x))
            }
            SyntheticKind::Clusters => {
                let c = i % 4;
                let (cx, cy) = CLUSTER_CENTERS[c];
                let x: Vec<f64> = (0..d)
                    .map(|j| {
                        let center = match j {
                            0 => cx,
                            1 => cy,
                            _ => 0.0,
                        };
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        center + CLUSTER_SPREAD * eps
                    })
                    .collect();
                let y = CLUSTER_LEVELS[c] + 0.5 * (x[0] - cx);
                (x, y)
            }
        };
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = clean + noise * eps;
        out.push(Sample::new(
            features.into_iter().map(real::<R>).collect(),
            real(y),
        ));
    }
    Ok(out)
}

/// The documented regime function of [`SyntheticKind::PiecewiseDrift`].
pub fn piecewise_target(x0: f64, x1: f64) -> f64 {
    if x0 < 0.4 {
        5.0 * x1
    } else if x0 < 0.7 {
        10.0 + 5.0 * x1
    } else {
        25.0 + 10.0 * x1
    }
}

/// The documented surface of [`SyntheticKind::FriedmanLike`]; terms whose
/// features are absent contribute zero.
pub fn friedman_target(x: &[f64]) -> f64 {
    let get = |i: usize| x.get(i).copied().unwrap_or(0.0);
    let mut y = 0.0;
    if x.len() >= 2 {
        y += 10.0 * (std::f64::consts::PI * get(0) * get(1)).sin();
    }
    if x.len() >= 3 {
        y += 20.0 * (get(2) - 0.5).powi(2);
    }
    if x.len() >= 4 {
        y += 10.0 * get(3);
    }
    if x.len() >= 5 {
        y += 5.0 * get(4);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for kind in [
            SyntheticKind::PiecewiseDrift,
            SyntheticKind::FriedmanLike,
            SyntheticKind::Clusters,
        ] {
            assert_eq!(kind.to_string().parse::<SyntheticKind>().unwrap(), kind);
        }
        assert!("spiral".parse::<SyntheticKind>().is_err());
    }

    #[test]
    fn same_seed_gives_identical_datasets() {
        let a = generate_synthetic_dataset::<f64>(SyntheticKind::FriedmanLike, 200, 6, 0.5, 9)
            .unwrap();
        let b = generate_synthetic_dataset::<f64>(SyntheticKind::FriedmanLike, 200, 6, 0.5, 9)
            .unwrap();
        let c = generate_synthetic_dataset::<f64>(SyntheticKind::FriedmanLike, 200, 6, 0.5, 10)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_targets_reproduce_the_documented_formulas() {
        let piecewise =
            generate_synthetic_dataset::<f64>(SyntheticKind::PiecewiseDrift, 300, 3, 0.0, 4)
                .unwrap();
        for s in &piecewise {
            assert_eq!(s.target, piecewise_target(s.features[0], s.features[1]));
        }
        let friedman =
            generate_synthetic_dataset::<f64>(SyntheticKind::FriedmanLike, 300, 5, 0.0, 4)
                .unwrap();
        for s in &friedman {
            assert_eq!(s.target, friedman_target(&s.features));
        }
    }

    #[test]
    fn noise_changes_targets_but_not_features() {
        let clean = generate_synthetic_dataset::<f64>(SyntheticKind::PiecewiseDrift, 50, 2, 0.0, 7)
            .unwrap();
        let noisy = generate_synthetic_dataset::<f64>(SyntheticKind::PiecewiseDrift, 50, 2, 0.5, 7)
            .unwrap();
        for (a, b) in clean.iter().zip(&noisy) {
            assert_eq!(a.features, b.features);
            assert_ne!(a.target, b.target);
        }
    }

    #[test]
    fn cluster_samples_stay_near_their_centers() {
        let data =
            generate_synthetic_dataset::<f64>(SyntheticKind::Clusters, 400, 2, 0.0, 11).unwrap();
        for (i, s) in data.iter().enumerate() {
            let (cx, cy) = CLUSTER_CENTERS[i % 4];
            // 0.4 spread means 5 sigma = 2.0; centers are 6 apart.
            assert!((s.features[0] - cx).abs() < 2.0);
            assert!((s.features[1] - cy).abs() < 2.0);
            assert_eq!(s.target, CLUSTER_LEVELS[i % 4] + 0.5 * (s.features[0] - cx));
        }
    }

    #[test]
    fn piecewise_upper_region_dominates_the_high_targets() {
        let data =
            generate_synthetic_dataset::<f64>(SyntheticKind::PiecewiseDrift, 2000, 2, 0.0, 13)
                .unwrap();
        let mut targets: Vec<f64> = data.iter().map(|s| s.target).collect();
        targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p70 = targets[(targets.len() as f64 * 0.7) as usize];
        // Everything produced by the upper regime exceeds the 70th
        // percentile of the mix.
        for s in &data {
            if s.features[0] >= 0.7 {
                assert!(s.target > p70);
            }
        }
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(generate_synthetic_dataset::<f64>(SyntheticKind::Clusters, 0, 2, 0.0, 0).is_err());
        assert!(generate_synthetic_dataset::<f64>(SyntheticKind::Clusters, 10, 0, 0.0, 0).is_err());
        assert!(
            generate_synthetic_dataset::<f64>(SyntheticKind::PiecewiseDrift, 10, 1, 0.0, 0)
                .is_err()
        );
        assert!(
            generate_synthetic_dataset::<f64>(SyntheticKind::Clusters, 10, 2, -1.0, 0).is_err()
        );
    }
}
