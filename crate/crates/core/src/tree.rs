//! Decision-tree regressor whose leaves serve as virtual labels, turning the
//! continuous target space into a discrete vocabulary for the prototype
//! memory.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{real, Real};
use crate::reservoir::Reservoir;
use crate::stream::{LabeledBatch, Sample};

/// Default capacity of the sample reservoir the tree is refit from.
pub const TREE_RESERVOIR_CAPACITY: usize = 2000;

/// Growth limits for tree fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct TreeParams<R: Real> {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Minimum variance reduction for a split, measured as a fraction of the
    /// parent node's variance so the gate is scale-free.
    pub min_impurity_decrease: R,
}

impl<R: Real> Default for TreeParams<R> {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_samples_split: 30,
            min_samples_leaf: 10,
            min_impurity_decrease: real(0.005),
        }
    }
}

impl<R: Real> TreeParams<R> {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be at least 2".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be positive".into(),
            ));
        }
        if !(self.min_impurity_decrease >= R::zero()
            && self.min_impurity_decrease.is_finite())
        {
            return Err(Error::InvalidConfig(
                "min_impurity_decrease must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum TreeNode<R: Real> {
    Split {
        feature: usize,
        threshold: R,
        left: usize,
        right: usize,
    },
    Leaf {
        id: usize,
        mean: R,
        support: usize,
    },
}

/// A fitted regression tree. Leaf ids are contiguous `0..leaf_count` in
/// left-to-right depth-first order, so they double as virtual labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<R: Real> {
    nodes: Vec<TreeNode<R>>,
    leaf_count: usize,
    dim: usize,
}

impl<R: Real> DecisionTree<R> {
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[TreeNode<R>] {
        &self.nodes
    }

    /// Routes a feature vector to its leaf and returns the leaf id.
    pub fn assign_vlabel(&self, x: &[R]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { id, .. } => return Ok(*id),
            }
        }
    }

    /// Longest root-to-leaf path counted in splits.
    pub fn depth(&self) -> usize {
        fn walk<R: Real>(nodes: &[TreeNode<R>], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Smallest number of training samples held by any leaf.
    pub fn min_leaf_support(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { support, .. } => Some(*support),
                _ => None,
            })
            .min()
            .unwrap_or(0)
    }

    /// Indented text rendering for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, at: usize, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        match &self.nodes[at] {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push_str(&format!("{indent}x{feature} <= {threshold}\n"));
                self.dump_node(*left, depth + 1, out);
                out.push_str(&format!("{indent}x{feature} >  {threshold}\n"));
                self.dump_node(*right, depth + 1, out);
            }
            TreeNode::Leaf { id, mean, support } => {
                out.push_str(&format!("{indent}leaf {id} (mean {mean}, n={support})\n"));
            }
        }
    }
}

fn target_sse<R: Real>(samples: &[Sample<R>], idx: &[usize]) -> R {
    let n = real::<R>(idx.len() as f64);
    let sum: R = idx.iter().map(|&i| samples[i].target).sum();
    let sumsq: R = idx
        .iter()
        .map(|&i| samples[i].target * samples[i].target)
        .sum();
    (sumsq - sum * sum / n).max(R::zero())
}

/// Scans one feature for the best threshold. `pairs` is (value, target) and
/// will be sorted in place; candidate thresholds sit midway between adjacent
/// distinct values. Returns `(threshold, normalized_reduction)` for the best
/// candidate that clears the impurity gate and both leaf-size floors.
fn scan_feature<R: Real>(
    pairs: &mut [(R, R)],
    sse_parent: R,
    params: &TreeParams<R>,
) -> Option<(R, R)> {
    let n = pairs.len();
    if sse_parent <= R::zero() || n < 2 {
        return None;
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
    let total_sum: R = pairs.iter().map(|p| p.1).sum();
    let total_sumsq: R = pairs.iter().map(|p| p.1 * p.1).sum();
    let mut sum_l = R::zero();
    let mut sumsq_l = R::zero();
    let mut best: Option<(R, R)> = None;
    for i in 1..n {
        let y = pairs[i - 1].1;
        sum_l += y;
        sumsq_l += y * y;
        if pairs[i].0 <= pairs[i - 1].0 {
            continue;
        }
        let n_l = i;
        let n_r = n - i;
        if n_l < params.min_samples_leaf || n_r < params.min_samples_leaf {
            continue;
        }
        let sse_l = (sumsq_l - sum_l * sum_l / real::<R>(n_l as f64)).max(R::zero());
        let sum_r = total_sum - sum_l;
        let sumsq_r = total_sumsq - sumsq_l;
        let sse_r = (sumsq_r - sum_r * sum_r / real::<R>(n_r as f64)).max(R::zero());
        let reduction = (sse_parent - sse_l - sse_r) / sse_parent;
        // Strict comparison keeps the first (lowest) threshold on ties.
        if best.map_or(true, |(_, d)| reduction > d) {
            let threshold = (pairs[i - 1].0 + pairs[i].0) / real::<R>(2.0);
            best = Some((threshold, reduction));
        }
    }
    best.filter(|&(_, d)| d >= params.min_impurity_decrease)
}

/// Best admissible split of `samples` on one feature, or `None` when the
/// node is too small, the feature is constant, or no candidate clears the
/// impurity gate.
pub fn best_split<R: Real>(
    samples: &[Sample<R>],
    feature: usize,
    params: &TreeParams<R>,
) -> Option<(R, R)> {
    let n = samples.len();
    if n < params.min_samples_split || samples.is_empty() || feature >= samples[0].dim() {
        return None;
    }
    let idx: Vec<usize> = (0..n).collect();
    let sse_parent = target_sse(samples, &idx);
    let mut pairs: Vec<(R, R)> = samples
        .iter()
        .map(|s| (s.features[feature], s.target))
        .collect();
    scan_feature(&mut pairs, sse_parent, params)
}

struct Builder<'a, R: Real> {
    samples: &'a [Sample<R>],
    params: &'a TreeParams<R>,
    nodes: Vec<TreeNode<R>>,
    leaf_count: usize,
}

impl<R: Real> Builder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let sum: R = idx.iter().map(|&i| self.samples[i].target).sum();
        let mean = sum / real::<R>(idx.len() as f64);
        let id = self.leaf_count;
        self.leaf_count += 1;
        self.nodes.push(TreeNode::Leaf {
            id,
            mean,
            support: idx.len(),
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        if depth >= self.params.max_depth || n < self.params.min_samples_split {
            return self.leaf(&idx);
        }
        let sse_parent = target_sse(self.samples, &idx);
        let dim = self.samples[idx[0]].dim();
        let mut best: Option<(usize, R, R)> = None;
        let mut pairs: Vec<(R, R)> = Vec::with_capacity(n);
        for f in 0..dim {
            pairs.clear();
            pairs.extend(
                idx.iter()
                    .map(|&i| (self.samples[i].features[f], self.samples[i].target)),
            );
            if let Some((thr, d)) = scan_feature(&mut pairs, sse_parent, self.params) {
                // Strict comparison keeps the lowest feature index on ties.
                if best.map_or(true, |(_, _, bd)| d > bd) {
                    best = Some((f, thr, d));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return self.leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.samples[i].features[feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        if let TreeNode::Split { left: l, right: r, .. } = &mut self.nodes[at] {
            *l = left;
            *r = right;
        }
        at
    }
}

/// Fits a tree on the given samples. A node is split only when it holds at
/// least `min_samples_split` samples, sits above `max_depth`, and some
/// feature offers a threshold keeping `min_samples_leaf` on each side while
/// clearing the normalized impurity gate; otherwise it becomes a leaf.
pub fn fit_tree<R: Real>(samples: &[Sample<R>], params: &TreeParams<R>) -> Result<DecisionTree<R>> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("cannot fit a tree on zero samples"));
    }
    let dim = samples[0].dim();
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.dim(),
            });
        }
    }
    let mut builder = Builder {
        samples,
        params,
        nodes: Vec::new(),
        leaf_count: 0,
    };
    let root = builder.grow((0..samples.len()).collect(), 0);
    debug_assert_eq!(root, 0);
    Ok(DecisionTree {
        nodes: builder.nodes,
        leaf_count: builder.leaf_count,
        dim,
    })
}

/// Folds a batch into the tree's sample reservoir and refits. The refit tree
/// may have a different number of leaves than its predecessor, so virtual
/// labels are only comparable between consecutive refits, not across them.
pub fn update_tree<R: Real>(
    reservoir: &mut Reservoir<Sample<R>>,
    batch: &LabeledBatch<R>,
    params: &TreeParams<R>,
    rng: &mut impl Rng,
) -> Result<DecisionTree<R>> {
    for s in &batch.samples {
        reservoir.insert(s.clone(), rng);
    }
    fit_tree(reservoir.items(), params)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn step_samples(n: usize) -> Vec<Sample<f64>> {
        // First half target 0, second half target 10, feature is the index.
        (0..n)
            .map(|i| {
                let y = if i < n / 2 { 0.0 } else { 10.0 };
                Sample::new(vec![i as f64], y)
            })
            .collect()
    }

    #[test]
    fn constant_targets_give_a_single_leaf() {
        let samples: Vec<Sample<f64>> = (0..100)
            .map(|i| Sample::new(vec![i as f64], 3.5))
            .collect();
        let tree = fit_tree(&samples, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.assign_vlabel(&[55.0]).unwrap(), 0);
    }

    #[test]
    fn step_function_splits_at_the_midpoint() {
        let samples = step_samples(40);
        let params = TreeParams::default();
        let (threshold, reduction) = best_split(&samples, 0, &params).unwrap();
        assert_eq!(threshold, 19.5);
        assert!((reduction - 1.0).abs() < 1e-12);
        let tree = fit_tree(&samples, &params).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.min_leaf_support(), 20);
        assert_eq!(tree.assign_vlabel(&[10.0]).unwrap(), 0);
        assert_eq!(tree.assign_vlabel(&[19.5]).unwrap(), 0);
        assert_eq!(tree.assign_vlabel(&[30.0]).unwrap(), 1);
    }

    #[test]
    fn nodes_below_min_samples_split_are_not_split() {
        let samples = step_samples(25);
        assert!(best_split(&samples, 0, &TreeParams::default()).is_none());
        let tree = fit_tree(&samples, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
    }

    #[test]
    fn tiny_group_difference_fails_the_impurity_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Both groups share the same base targets so the group shift is the
        // only between-group difference.
        let base: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let build = |shift: f64| -> Vec<Sample<f64>> {
            (0..40)
                .map(|i| {
                    let group = (i >= 20) as usize;
                    Sample::new(vec![group as f64], base[i % 20] + shift * group as f64)
                })
                .collect()
        };
        let params = TreeParams::default();
        assert!(best_split(&build(0.01), 0, &params).is_none());
        assert!(best_split(&build(3.0), 0, &params).is_some());
    }

    #[test]
    fn depth_and_leaf_count_respect_the_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Sample<f64>> = (0..800)
            .map(|_| {
                let x = rng.random::<f64>();
                Sample::new(vec![x], (8.0 * x).floor())
            })
            .collect();
        let tree = fit_tree(&samples, &TreeParams::default()).unwrap();
        assert!(tree.depth() <= 4);
        assert!(tree.leaf_count() <= 16);
        assert!(tree.leaf_count() > 2);
        assert!(tree.min_leaf_support() >= 10);

        let shallow = TreeParams {
            max_depth: 1,
            ..TreeParams::default()
        };
        let tree = fit_tree(&samples, &shallow).unwrap();
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn single_sample_fits_a_single_leaf() {
        let samples = vec![Sample::new(vec![1.0f64, 2.0], 5.0)];
        let tree = fit_tree(&samples, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.assign_vlabel(&[0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn observed_vlabels_are_contiguous_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<Sample<f64>> = (0..600)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let y = (4.0 * x[0]).floor() + (2.0 * x[1]).floor();
                Sample::new(x, y)
            })
            .collect();
        let tree = fit_tree(&samples, &TreeParams::default()).unwrap();
        let mut seen = vec![false; tree.leaf_count()];
        for s in &samples {
            seen[tree.assign_vlabel(&s.features).unwrap()] = true;
        }
        assert!(seen.iter().all(|&s| s), "some leaf holds no training sample");
    }

    #[test]
    fn identical_inputs_fit_identical_trees() {
        let samples = step_samples(60);
        let a = fit_tree(&samples, &TreeParams::default()).unwrap();
        let b = fit_tree(&samples, &TreeParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitting_zero_samples_is_an_error() {
        let samples: Vec<Sample<f64>> = Vec::new();
        assert!(matches!(
            fit_tree(&samples, &TreeParams::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn assign_rejects_wrong_dimension() {
        let tree = fit_tree(&step_samples(40), &TreeParams::default()).unwrap();
        assert!(matches!(
            tree.assign_vlabel(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn update_tree_bootstraps_from_the_first_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut reservoir = Reservoir::new(TREE_RESERVOIR_CAPACITY);
        let batch = LabeledBatch::new(step_samples(16), 0).unwrap();
        let tree = update_tree(&mut reservoir, &batch, &TreeParams::default(), &mut rng).unwrap();
        assert_eq!(reservoir.len(), 16);
        assert_eq!(reservoir.items(), batch.samples.as_slice());
        assert_eq!(tree.leaf_count(), 1); // 16 < min_samples_split
    }

    #[test]
    fn refitting_can_change_the_leaf_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut reservoir = Reservoir::new(TREE_RESERVOIR_CAPACITY);
        let params = TreeParams::default();
        let flat: Vec<Sample<f64>> = (0..40).map(|i| Sample::new(vec![i as f64], 1.0)).collect();
        let first = update_tree(
            &mut reservoir,
            &LabeledBatch::new(flat, 0).unwrap(),
            &params,
            &mut rng,
        )
        .unwrap();
        assert_eq!(first.leaf_count(), 1);
        let stepped: Vec<Sample<f64>> = (40..80)
            .map(|i| Sample::new(vec![i as f64], 50.0))
            .collect();
        let second = update_tree(
            &mut reservoir,
            &LabeledBatch::new(stepped, 1).unwrap(),
            &params,
            &mut rng,
        )
        .unwrap();
        assert!(second.leaf_count() > first.leaf_count());
    }

    #[test]
    fn dump_renders_splits_and_leaves() {
        let tree = fit_tree(&step_samples(40), &TreeParams::default()).unwrap();
        let text = tree.dump();
        assert!(text.contains("x0 <= 19.5"));
        assert!(text.contains("leaf 0"));
        assert!(text.contains("leaf 1"));
    }
}
