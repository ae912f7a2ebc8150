//! Incremental LVQ-style prototype memory: a compact, edge-connected set of
//! centroids that doubles as a generative source of synthetic samples.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{euclidean, quantile_sorted};
use crate::real::{real, Real};
use crate::stream::Sample;

/// Learning rates, aging limits, and bootstrap size of the memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct IlvqParams<R: Real> {
    /// Pull applied to the winning prototype.
    pub alpha_winner: R,
    /// Pull applied to every neighbor of the winner.
    pub alpha_runner: R,
    /// Edges older than this are dropped.
    pub age_old: u32,
    /// A cleanup pass runs every this many absorbed samples.
    pub cleanup_interval: u64,
    /// The first samples become prototypes directly; cleanup never shrinks
    /// the memory below this count.
    pub initial_prototypes: usize,
    /// Standard deviation of Gaussian noise added to synthetic features.
    /// Zero (the default) reproduces prototype centroids exactly.
    pub jitter_std: R,
}

impl<R: Real> Default for IlvqParams<R> {
    fn default() -> Self {
        Self {
            alpha_winner: real(0.9),
            alpha_runner: real(0.1),
            age_old: 400,
            cleanup_interval: 150,
            initial_prototypes: 5,
            jitter_std: R::zero(),
        }
    }
}

impl<R: Real> IlvqParams<R> {
    pub fn validate(&self) -> Result<()> {
        let unit = R::zero() < self.alpha_runner
            && self.alpha_runner <= self.alpha_winner
            && self.alpha_winner <= R::one();
        if !unit {
            return Err(Error::InvalidConfig(
                "learning rates must satisfy 0 < alpha_runner <= alpha_winner <= 1".into(),
            ));
        }
        if self.age_old == 0 {
            return Err(Error::InvalidConfig("age_old must be positive".into()));
        }
        if self.cleanup_interval == 0 {
            return Err(Error::InvalidConfig(
                "cleanup_interval must be positive".into(),
            ));
        }
        if self.initial_prototypes < 2 {
            return Err(Error::InvalidConfig(
                "initial_prototypes must be at least 2".into(),
            ));
        }
        if !(self.jitter_std >= R::zero() && self.jitter_std.is_finite()) {
            return Err(Error::InvalidConfig(
                "jitter_std must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One memory entry: a centroid in feature space with its running target,
/// the virtual label it was inserted under, and a win counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Prototype<R: Real> {
    pub id: u64,
    pub centroid: Vec<R>,
    pub target: R,
    pub vlabel: usize,
    pub wins: u64,
}

/// What [`PrototypeMemory::learn_one`] did with a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnOutcome {
    Inserted,
    Updated,
}

fn edge_key(a: u64, b: u64) -> (u64, u64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

mod edge_serde {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        edges: &BTreeMap<(u64, u64), u32>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let flat: Vec<(u64, u64, u32)> =
            edges.iter().map(|(&(a, b), &age)| (a, b, age)).collect();
        flat.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(u64, u64), u32>, D::Error> {
        let flat: Vec<(u64, u64, u32)> = Vec::deserialize(d)?;
        Ok(flat.into_iter().map(|(a, b, age)| ((a, b), age)).collect())
    }
}

/// The prototype memory.
///
/// Holds prototypes keyed by insertion id and an undirected edge set with
/// integer ages. All iteration is in id order, so identical input streams
/// produce identical memories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PrototypeMemory<R: Real> {
    params: IlvqParams<R>,
    prototypes: BTreeMap<u64, Prototype<R>>,
    #[serde(with = "edge_serde")]
    edges: BTreeMap<(u64, u64), u32>,
    samples_seen: u64,
    next_id: u64,
}

impl<R: Real> PrototypeMemory<R> {
    pub fn new(params: IlvqParams<R>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            prototypes: BTreeMap::new(),
            edges: BTreeMap::new(),
            samples_seen: 0,
            next_id: 0,
        })
    }

    pub fn params(&self) -> &IlvqParams<R> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    /// Samples absorbed so far (both inserted and merged).
    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn get(&self, id: u64) -> Option<&Prototype<R>> {
        self.prototypes.get(&id)
    }

    /// Prototypes in ascending id order.
    pub fn prototypes(&self) -> impl Iterator<Item = &Prototype<R>> {
        self.prototypes.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_age(&self, a: u64, b: u64) -> Option<u32> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn max_edge_age(&self) -> Option<u32> {
        self.edges.values().max().copied()
    }

    /// Ids connected to `id` by an edge, ascending.
    pub fn neighbors(&self, id: u64) -> Vec<u64> {
        let mut out: Vec<u64> = self
            .edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Winner and runner-up by Euclidean distance to `x`. Ties go to the
    /// lower id because the scan runs in id order with strict comparisons.
    pub fn nearest_two(&self, x: &[R]) -> Result<(&Prototype<R>, Option<&Prototype<R>>)> {
        if self.prototypes.is_empty() {
            return Err(Error::EmptyInput("prototype memory is empty"));
        }
        self.check_dim(x)?;
        let mut winner: Option<(R, u64)> = None;
        let mut runner: Option<(R, u64)> = None;
        for p in self.prototypes.values() {
            let d = euclidean(x, &p.centroid);
            if winner.map_or(true, |(wd, _)| d < wd) {
                runner = winner;
                winner = Some((d, p.id));
            } else if runner.map_or(true, |(rd, _)| d < rd) {
                runner = Some((d, p.id));
            }
        }
        let (_, w_id) = winner.expect("memory is nonempty");
        Ok((
            &self.prototypes[&w_id],
            runner.map(|(_, id)| &self.prototypes[&id]),
        ))
    }

    /// Adaptive insertion radius of a prototype: the distance to its
    /// farthest neighbor, or to the nearest other prototype when it has no
    /// neighbors. Infinite while the memory holds fewer than two prototypes,
    /// so early samples are always absorbed rather than spawning inserts.
    pub fn similarity_threshold(&self, p: &Prototype<R>) -> R {
        if self.prototypes.len() < 2 {
            return R::infinity();
        }
        let neighbors = self.neighbors(p.id);
        if neighbors.is_empty() {
            self.prototypes
                .values()
                .filter(|q| q.id != p.id)
                .map(|q| euclidean(&p.centroid, &q.centroid))
                .fold(R::infinity(), R::min)
        } else {
            neighbors
                .iter()
                .map(|id| euclidean(&p.centroid, &self.prototypes[id].centroid))
                .fold(R::neg_infinity(), R::max)
        }
    }

    fn check_dim(&self, x: &[R]) -> Result<()> {
        if let Some(p) = self.prototypes.values().next() {
            if p.centroid.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.centroid.len(),
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    fn insert_prototype(&mut self, x: &[R], vlabel: usize, target: R) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.prototypes.insert(
            id,
            Prototype {
                id,
                centroid: x.to_vec(),
                target,
                vlabel,
                wins: 1,
            },
        );
        id
    }

    /// Absorbs one sample carrying its virtual label.
    ///
    /// While the memory is bootstrapping (fewer than `initial_prototypes`
    /// entries) every sample becomes a prototype. Afterwards a sample is
    /// inserted when its label disagrees with the winner's or it falls
    /// outside the similarity threshold of winner or runner-up; otherwise
    /// the winner absorbs it and its neighborhood is pulled along.
    pub fn learn_one(&mut self, x: &[R], vlabel: usize, target: R) -> Result<LearnOutcome> {
        self.check_dim(x)?;
        self.samples_seen += 1;
        let outcome = if self.prototypes.len() < self.params.initial_prototypes {
            self.insert_prototype(x, vlabel, target);
            LearnOutcome::Inserted
        } else {
            let (winner, runner) = {
                let (w, r) = self.nearest_two(x)?;
                (w.id, r.expect("memory holds at least two prototypes").id)
            };
            let w_dist = euclidean(x, &self.prototypes[&winner].centroid);
            let r_dist = euclidean(x, &self.prototypes[&runner].centroid);
            let novel = vlabel != self.prototypes[&winner].vlabel
                || w_dist > self.similarity_threshold(&self.prototypes[&winner])
                || r_dist > self.similarity_threshold(&self.prototypes[&runner]);
            if novel {
                self.insert_prototype(x, vlabel, target);
                LearnOutcome::Inserted
            } else {
                self.absorb(winner, runner, x, target);
                LearnOutcome::Updated
            }
        };
        if self.samples_seen % self.params.cleanup_interval == 0 {
            self.cleanup();
        }
        Ok(outcome)
    }

    fn absorb(&mut self, winner: u64, runner: u64, x: &[R], target: R) {
        let key = edge_key(winner, runner);
        self.edges.insert(key, 0);
        for (&k, age) in self.edges.iter_mut() {
            if k != key && (k.0 == winner || k.1 == winner) {
                *age += 1;
            }
        }
        let aw = self.params.alpha_winner;
        let ar = self.params.alpha_runner;
        {
            let w = self.prototypes.get_mut(&winner).expect("winner exists");
            for (c, &xi) in w.centroid.iter_mut().zip(x) {
                *c += aw * (xi - *c);
            }
            w.target += aw * (target - w.target);
            w.wins += 1;
        }
        for id in self.neighbors(winner) {
            let n = self.prototypes.get_mut(&id).expect("neighbor exists");
            for (c, &xi) in n.centroid.iter_mut().zip(x) {
                *c += ar * (xi - *c);
            }
        }
        let age_old = self.params.age_old;
        self.edges.retain(|_, age| *age <= age_old);
    }

    /// Removes isolated, rarely winning prototypes: candidates have no edges
    /// and strictly below-mean win counts, and are dropped lowest wins first
    /// (ties by id) while the memory stays at or above `initial_prototypes`.
    /// Returns how many were removed.
    pub fn cleanup(&mut self) -> usize {
        let n = self.prototypes.len();
        let floor = self.params.initial_prototypes;
        if n <= floor {
            return 0;
        }
        let mean_wins =
            self.prototypes.values().map(|p| p.wins as f64).sum::<f64>() / n as f64;
        let mut candidates: Vec<(u64, u64)> = self
            .prototypes
            .values()
            .filter(|p| (p.wins as f64) < mean_wins && self.neighbors(p.id).is_empty())
            .map(|p| (p.wins, p.id))
            .collect();
        candidates.sort_unstable();
        candidates.truncate(n - floor);
        for &(_, id) in &candidates {
            self.prototypes.remove(&id);
        }
        candidates.len()
    }

    /// Quartiles of the stored prototype targets, linearly interpolated.
    pub fn target_quartiles(&self) -> Result<(R, R, R)> {
        if self.prototypes.is_empty() {
            return Err(Error::EmptyInput("prototype memory is empty"));
        }
        let mut targets: Vec<R> = self.prototypes.values().map(|p| p.target).collect();
        targets.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
        Ok((
            quantile_sorted(&targets, 0.25),
            quantile_sorted(&targets, 0.50),
            quantile_sorted(&targets, 0.75),
        ))
    }

    /// Bin index of a target under this memory's quartiles.
    fn quartile_bin(t: R, q25: R, q50: R, q75: R) -> usize {
        if t <= q25 {
            0
        } else if t <= q50 {
            1
        } else if t <= q75 {
            2
        } else {
            3
        }
    }

    /// Draws synthetic samples per quartile bin, uniformly with replacement
    /// within each bin. Quotas aimed at empty bins are redistributed to the
    /// nonempty ones in proportion to their prototype counts (largest
    /// remainder, ties to the lower bin). With `jitter_std` zero the drawn
    /// features are exact centroid copies.
    pub fn sample_synthetic(
        &self,
        quotas: [usize; 4],
        rng: &mut impl Rng,
    ) -> Result<Vec<Sample<R>>> {
        if self.prototypes.is_empty() {
            return Err(Error::EmptyInput("prototype memory is empty"));
        }
        let (q25, q50, q75) = self.target_quartiles()?;
        let mut bins: [Vec<&Prototype<R>>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for p in self.prototypes.values() {
            bins[Self::quartile_bin(p.target, q25, q50, q75)].push(p);
        }
        let sizes = [bins[0].len(), bins[1].len(), bins[2].len(), bins[3].len()];
        let quotas = redistribute_quotas(quotas, sizes);
        let mut out = Vec::with_capacity(quotas.iter().sum());
        for (bin, &quota) in bins.iter().zip(quotas.iter()) {
            for _ in 0..quota {
                let p = bin[rng.random_range(0..bin.len())];
                let mut features = p.centroid.clone();
                if self.params.jitter_std > R::zero() {
                    for f in features.iter_mut() {
                        let noise: f64 = StandardNormal.sample(rng);
                        *f += self.params.jitter_std * real(noise);
                    }
                }
                out.push(Sample::new(features, p.target));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let memory: Self = serde_json::from_str(text)?;
        memory.params.validate()?;
        Ok(memory)
    }
}

/// Moves quota mass away from empty bins, proportionally to the populated
/// bins' sizes, assigning leftovers by largest fractional remainder with
/// ties broken toward the lower bin index.
fn redistribute_quotas(quotas: [usize; 4], sizes: [usize; 4]) -> [usize; 4] {
    let mut out = [0usize; 4];
    let mut orphan = 0usize;
    for b in 0..4 {
        if sizes[b] == 0 {
            orphan += quotas[b];
        } else {
            out[b] = quotas[b];
        }
    }
    if orphan == 0 {
        return out;
    }
    let total: usize = sizes.iter().sum();
    debug_assert!(total > 0, "redistribution requires a populated bin");
    let mut assigned = 0usize;
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for b in 0..4 {
        if sizes[b] == 0 {
            continue;
        }
        let share = orphan as f64 * sizes[b] as f64 / total as f64;
        let floor = share.floor() as usize;
        out[b] += floor;
        assigned += floor;
        remainders.push((share - floor as f64, b));
    }
    remainders.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite remainders")
            .then(a.1.cmp(&b.1))
    });
    for (_, b) in remainders.into_iter().take(orphan - assigned) {
        out[b] += 1;
    }
    out
}
