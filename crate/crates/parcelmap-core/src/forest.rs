//! From-scratch random forest classifier: CART trees with Gini splits,
//! bootstrap aggregation, majority voting, and mean-decrease-impurity feature
//! importance.
//!
//! Everything is deterministic. Training samples are sorted by their stable
//! ids before any draw, each tree consumes its own SplitMix64 stream derived
//! from (seed, tree index), split ties break toward the lower feature index
//! and lower threshold, and vote ties toward the smaller class id. Training
//! the same data twice, in any input order, on any worker count, yields
//! bit-identical models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector};
use crate::rng::{derive, SplitMix64};
use crate::scheme::ClassId;

/// Forest hyperparameters. `mtry` defaults to floor(sqrt(F)) when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { n_trees: 100, mtry: None, min_leaf: 1, max_depth: None, seed: 0 }
    }
}

/// One labeled training sample. Ids must be unique; they define the canonical
/// sample order, making training invariant to input shuffling.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: ClassId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// MDI contribution: (node weight) x (parent Gini - weighted child Gini).
        decrease: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Counts aligned to the model's sorted class list.
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// A trained forest plus everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub classes: Vec<ClassId>,
    pub schema: FeatureSchema,
    pub config: TrainConfig,
    pub trees: Vec<Tree>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Gini impurity 1 - sum((n_c / N)^2) of a class-count vector.
pub fn gini_impurity(counts: &[u32]) -> Result<f64> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(Error::Training("gini of an empty node".into()));
    }
    let t = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

fn gini_from_sq(sum_sq: u64, n: u64) -> f64 {
    1.0 - sum_sq as f64 / (n as f64 * n as f64)
}

struct TreeBuilder<'a> {
    values: &'a [Vec<f64>], // column-major: values[feature][sample]
    labels: &'a [usize],    // class index per sample
    n_classes: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    root_n: f64,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    /// Grow one node over the bootstrap rows in `rows`; returns its index.
    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut SplitMix64) -> usize {
        let mut counts = vec![0u32; self.n_classes];
        for &r in rows.iter() {
            counts[self.labels[r as usize]] += 1;
        }
        let n = rows.len() as u64;
        let sum_sq: u64 = counts.iter().map(|&c| c as u64 * c as u64).sum();
        let node_gini = gini_from_sq(sum_sq, n);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 * self.min_leaf {
            return self.push_leaf(counts);
        }

        // candidate features: mtry sampled without replacement, then visited
        // in ascending index order so ties resolve to the lower feature
        let mut feats = rng.sample_indices(self.values.len(), self.mtry);
        feats.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
        let mut order: Vec<u32> = rows.to_vec();
        for &f in &feats {
            let col = &self.values[f];
            order.sort_by(|&a, &b| {
                col[a as usize].partial_cmp(&col[b as usize]).expect("finite features")
            });
            // walk group boundaries between distinct values
            let mut left_counts = vec![0u32; self.n_classes];
            let mut left_sq = 0u64;
            let mut right_sq = sum_sq;
            let mut left_n = 0u64;
            let mut i = 0usize;
            while i < order.len() {
                let v = col[order[i] as usize];
                let mut j = i;
                while j < order.len() && col[order[j] as usize] == v {
                    let cls = self.labels[order[j] as usize];
                    let c = left_counts[cls] as u64;
                    left_sq += 2 * c + 1;
                    let rc = (counts[cls] as u64) - c; // right count before move
                    right_sq -= 2 * rc - 1;
                    left_counts[cls] += 1;
                    left_n += 1;
                    j += 1;
                }
                i = j;
                if i == order.len() {
                    break;
                }
                let right_n = n - left_n;
                if (left_n as usize) < self.min_leaf || (right_n as usize) < self.min_leaf {
                    continue;
                }
                let score = (left_n as f64 * gini_from_sq(left_sq, left_n)
                    + right_n as f64 * gini_from_sq(right_sq, right_n))
                    / n as f64;
                if best.is_none_or(|(s, _, _)| score < s) {
                    let next = col[order[i] as usize];
                    // midpoint of adjacent floats can round down onto v,
                    // which would empty the left child under strict `<`
                    let mid = (v + next) / 2.0;
                    let threshold = if mid > v { mid } else { next };
                    best = Some((score, f, threshold));
                }
            }
        }

        let Some((score, feature, threshold)) = best else {
            return self.push_leaf(counts); // all candidate features constant
        };
        let decrease = (n as f64 / self.root_n) * (node_gini - score);

        let split_at = partition(rows, |r| self.values[feature][r as usize] < threshold);
        let (left_rows, right_rows) = rows.split_at_mut(split_at);
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let idx = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, decrease, left: 0, right: 0 });
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        match &mut self.nodes[idx] {
            Node::Split { left: l, right: r, .. } => {
                *l = left;
                *r = right;
            }
            Node::Leaf { .. } => unreachable!(),
        }
        idx
    }

    fn push_leaf(&mut self, counts: Vec<u32>) -> usize {
        self.nodes.push(Node::Leaf { counts });
        self.nodes.len() - 1
    }
}

/// Stable in-place partition: order within each side is preserved.
fn partition(rows: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut left: Vec<u32> = Vec::with_capacity(rows.len());
    let mut right: Vec<u32> = Vec::with_capacity(rows.len());
    for &r in rows.iter() {
        if pred(r) {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    let split = left.len();
    rows[..split].copy_from_slice(&left);
    rows[split..].copy_from_slice(&right);
    split
}

/// Train a forest. Bootstrap draws and feature subsets for tree `t` come from
/// the SplitMix64 stream derived from (config.seed, t), so trees may be built
/// in parallel with no effect on the result.
pub fn train(
    samples: &[TrainingSample],
    schema: &FeatureSchema,
    config: &TrainConfig,
) -> Result<ForestModel> {
    if samples.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let n_features = schema.len();
    for s in samples {
        if s.features.len() != n_features {
            return Err(Error::SchemaMismatch {
                expected: format!("{n_features} features"),
                got: format!("{} features in sample {}", s.features.len(), s.id),
            });
        }
    }
    let mut ordered: Vec<&TrainingSample> = samples.iter().collect();
    ordered.sort_by_key(|s| s.id);

    let mut classes: Vec<ClassId> = ordered.iter().map(|s| s.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training("training set has a single class".into()));
    }
    let class_index = |c: ClassId| classes.binary_search(&c).expect("label in class set");

    let mtry = config.mtry.unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize);
    if mtry == 0 || mtry > n_features {
        return Err(Error::Training(format!(
            "mtry {mtry} outside 1..={n_features}"
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::Training("n_trees must be >= 1".into()));
    }
    if config.min_leaf == 0 {
        return Err(Error::Training("min_leaf must be >= 1".into()));
    }

    // column-major feature matrix over the ordered samples
    let n = ordered.len();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(n); n_features];
    for s in &ordered {
        for (f, &v) in s.features.iter().enumerate() {
            values[f].push(v);
        }
    }
    let labels: Vec<usize> = ordered.iter().map(|s| class_index(s.label)).collect();

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::new(derive(config.seed, t as u64));
            let mut rows: Vec<u32> =
                (0..n).map(|_| rng.next_below(n as u64) as u32).collect();
            let mut builder = TreeBuilder {
                values: &values,
                labels: &labels,
                n_classes: classes.len(),
                mtry,
                min_leaf: config.min_leaf,
                max_depth: config.max_depth,
                root_n: n as f64,
                nodes: Vec::new(),
            };
            let root = builder.grow(&mut rows, 0, &mut rng);
            debug_assert_eq!(root, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        classes,
        schema: schema.clone(),
        config: config.clone(),
        trees,
    })
}

impl ForestModel {
    /// Majority-vote prediction with per-class vote fractions. Leaf ties and
    /// forest ties both resolve to the smallest class id.
    pub fn predict(&self, features: &FeatureVector) -> Result<(ClassId, Vec<(ClassId, f64)>)> {
        if *features.schema != self.schema {
            return Err(Error::SchemaMismatch {
                expected: format!("{:?}", self.schema.names()),
                got: format!("{:?}", features.schema.names()),
            });
        }
        self.predict_values(&features.values)
    }

    /// Prediction from a bare value slice (caller has verified the schema).
    pub fn predict_values(&self, values: &[f64]) -> Result<(ClassId, Vec<(ClassId, f64)>)> {
        if values.len() != self.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features", self.schema.len()),
                got: format!("{} values", values.len()),
            });
        }
        let mut votes = vec![0u32; self.classes.len()];
        for tree in &self.trees {
            votes[self.tree_vote(tree, values)] += 1;
        }
        let mut best = 0usize;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        let total = self.trees.len() as f64;
        let fractions = self
            .classes
            .iter()
            .zip(&votes)
            .map(|(&c, &v)| (c, v as f64 / total))
            .collect();
        Ok((self.classes[best], fractions))
    }

    fn tree_vote(&self, tree: &Tree, values: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &tree.nodes[at] {
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if values[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => {
                    let mut best = 0usize;
                    for (i, &c) in counts.iter().enumerate() {
                        if c > counts[best] {
                            best = i;
                        }
                    }
                    return best;
                }
            }
        }
    }

    /// Mean decrease in impurity per feature, averaged over trees and
    /// normalized to sum to one (all-zero forests stay all-zero).
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut acc = vec![0.0; self.schema.len()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, decrease, .. } = node {
                    acc[*feature] += decrease;
                }
            }
        }
        let n = self.trees.len() as f64;
        for v in &mut acc {
            *v /= n;
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            for v in &mut acc {
                *v /= total;
            }
        }
        self.schema
            .names()
            .iter()
            .cloned()
            .zip(acc)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse {
                path: "<model json>".into(),
                message: format!("unsupported model format version {}", model.format_version),
            });
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn schema(n: usize) -> FeatureSchema {
        FeatureSchema((0..n).map(|i| format!("f{i}")).collect())
    }

    fn sample(id: u64, features: &[f64], label: u16) -> TrainingSample {
        TrainingSample { id, features: features.to_vec(), label: ClassId(label) }
    }

    fn separable_set() -> Vec<TrainingSample> {
        // class 1 below 0 on feature 0, class 2 above 1; feature 1 is noise
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(sample(i, &[-1.0 - i as f64 * 0.1, (i % 3) as f64], 1));
            v.push(sample(100 + i, &[2.0 + i as f64 * 0.1, (i % 2) as f64], 2));
        }
        v
    }

    #[test]
    fn gini_cases() {
        assert_eq!(gini_impurity(&[4]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[1, 1]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[2, 1, 1]).unwrap(), 0.625);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn separable_data_reaches_full_training_accuracy() {
        let samples = separable_set();
        let sch = schema(2);
        let model = train(&samples, &sch, &TrainConfig::default()).unwrap();
        for s in &samples {
            let (pred, _) = model.predict_values(&s.features).unwrap();
            assert_eq!(pred, s.label);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let samples = separable_set();
        let sch = schema(2);
        let cfg = TrainConfig { seed: 42, ..Default::default() };
        let a = train(&samples, &sch, &cfg).unwrap();
        let b = train(&samples, &sch, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut shuffled = separable_set();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let sch = schema(2);
        let cfg = TrainConfig { seed: 7, ..Default::default() };
        let a = train(&separable_set(), &sch, &cfg).unwrap();
        let b = train(&shuffled, &sch, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let sch = schema(2);
        assert!(train(&[], &sch, &TrainConfig::default()).is_err());
        let single = vec![sample(0, &[1.0, 2.0], 1), sample(1, &[2.0, 1.0], 1)];
        assert!(train(&single, &sch, &TrainConfig::default()).is_err());
        let bad_width = vec![sample(0, &[1.0], 1), sample(1, &[2.0, 1.0], 2)];
        assert!(train(&bad_width, &sch, &TrainConfig::default()).is_err());
    }

    /// Exhaustive split search over all (feature, midpoint) candidates, with
    /// the same tie rule as training: first strictly-better candidate wins,
    /// visiting features then thresholds in ascending order.
    fn brute_force_stump(
        rows: &[(Vec<f64>, usize)],
        n_classes: usize,
    ) -> (usize, f64) {
        let n = rows.len() as f64;
        let gini = |counts: &[u32]| {
            let total: u64 = counts.iter().map(|&c| c as u64).sum();
            let sq: u64 = counts.iter().map(|&c| c as u64 * c as u64).sum();
            1.0 - sq as f64 / (total as f64 * total as f64)
        };
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].0.len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.0[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let mut lc = vec![0u32; n_classes];
                let mut rc = vec![0u32; n_classes];
                for (feat, cls) in rows {
                    if feat[f] < thr {
                        lc[*cls] += 1;
                    } else {
                        rc[*cls] += 1;
                    }
                }
                let ln: u32 = lc.iter().sum();
                let rn: u32 = rc.iter().sum();
                let score = (ln as f64 * gini(&lc) + rn as f64 * gini(&rc)) / n;
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, thr));
                }
            }
        }
        let (_, f, t) = best.unwrap();
        (f, t)
    }

    #[test]
    fn single_tree_reproduces_brute_force_stump() {
        // 4 points, linearly separable on feature 0; feature 1 uninformative
        let samples = vec![
            sample(0, &[0.0, 5.0], 1),
            sample(1, &[1.0, 5.0], 1),
            sample(2, &[2.0, 5.0], 2),
            sample(3, &[3.0, 5.0], 2),
        ];
        let sch = schema(2);
        // find a seed whose bootstrap of 4 is a permutation, so the tree sees
        // exactly the original dataset
        let mut chosen = None;
        for seed in 0..200u64 {
            let mut rng = SplitMix64::new(derive(seed, 0));
            let mut draws: Vec<u32> = (0..4).map(|_| rng.next_below(4) as u32).collect();
            draws.sort_unstable();
            if draws == [0, 1, 2, 3] {
                chosen = Some(seed);
                break;
            }
        }
        let seed = chosen.expect("a permutation bootstrap seed exists below 200");

        let cfg = TrainConfig {
            n_trees: 1,
            mtry: Some(2),
            seed,
            ..Default::default()
        };
        let model = train(&samples, &sch, &cfg).unwrap();
        let rows: Vec<(Vec<f64>, usize)> = samples
            .iter()
            .map(|s| (s.features.clone(), (s.label.0 - 1) as usize))
            .collect();
        let (bf_feature, bf_threshold) = brute_force_stump(&rows, 2);
        match &model.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, bf_feature);
                assert!((threshold - bf_threshold).abs() < 1e-12);
            }
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
        // separable: the stump suffices, tree stops at depth 1
        assert_eq!(model.trees[0].nodes.len(), 3);
    }

    #[test]
    fn stump_matches_oracle_on_bootstrap_multiset() {
        // for arbitrary seeds, enumerate the brute-force optimum over the
        // exact bootstrap multiset the tree trained on
        let samples = vec![
            sample(0, &[0.0, 3.0], 1),
            sample(1, &[1.0, 1.0], 1),
            sample(2, &[2.0, 4.0], 2),
            sample(3, &[3.0, 2.0], 2),
        ];
        let sch = schema(2);
        for seed in [5u64, 17, 91] {
            let cfg = TrainConfig { n_trees: 1, mtry: Some(2), seed, ..Default::default() };
            let model = train(&samples, &sch, &cfg).unwrap();

            let mut rng = SplitMix64::new(derive(seed, 0));
            let draws: Vec<usize> = (0..4).map(|_| rng.next_below(4) as usize).collect();
            let rows: Vec<(Vec<f64>, usize)> = draws
                .iter()
                .map(|&i| (samples[i].features.clone(), (samples[i].label.0 - 1) as usize))
                .collect();
            let distinct: std::collections::BTreeSet<usize> =
                rows.iter().map(|r| r.1).collect();
            if distinct.len() < 2 {
                // single-class bootstrap: root must be a leaf
                assert!(matches!(model.trees[0].nodes[0], Node::Leaf { .. }));
                continue;
            }
            let (bf_feature, bf_threshold) = brute_force_stump(&rows, 2);
            match &model.trees[0].nodes[0] {
                Node::Split { feature, threshold, .. } => {
                    assert_eq!(*feature, bf_feature, "seed {seed}");
                    assert!((threshold - bf_threshold).abs() < 1e-12, "seed {seed}");
                }
                Node::Leaf { .. } => panic!("seed {seed}: expected a split"),
            }
        }
    }

    #[test]
    fn predict_tie_goes_to_smaller_class_id() {
        // two trees, hand-built, voting for different classes
        let sch = schema(1);
        let model = ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            classes: vec![ClassId(3), ClassId(9)],
            schema: sch,
            config: TrainConfig { n_trees: 2, ..Default::default() },
            trees: vec![
                Tree { nodes: vec![Node::Leaf { counts: vec![5, 0] }] },
                Tree { nodes: vec![Node::Leaf { counts: vec![0, 5] }] },
            ],
        };
        let (pred, votes) = model.predict_values(&[0.0]).unwrap();
        assert_eq!(pred, ClassId(3));
        assert_eq!(votes, vec![(ClassId(3), 0.5), (ClassId(9), 0.5)]);
    }

    #[test]
    fn vote_fractions_form_a_distribution() {
        let samples = separable_set();
        let model = train(&samples, &schema(2), &TrainConfig::default()).unwrap();
        let (pred, votes) = model.predict_values(&[-0.5, 0.0]).unwrap();
        let sum: f64 = votes.iter().map(|(_, v)| v).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let max = votes
            .iter()
            .cloned()
            .fold(None, |acc: Option<(ClassId, f64)>, (c, v)| match acc {
                Some((_, bv)) if v > bv => Some((c, v)),
                None => Some((c, v)),
                other => other,
            })
            .unwrap();
        assert_eq!(max.0, pred);
    }

    #[test]
    fn predict_rejects_schema_mismatch() {
        let model = train(&separable_set(), &schema(2), &TrainConfig::default()).unwrap();
        assert!(model.predict_values(&[1.0]).is_err());
        let other = Arc::new(FeatureSchema(vec!["x".into(), "y".into()]));
        let fv = FeatureVector::new(other, vec![0.0, 0.0]).unwrap();
        assert!(model.predict(&fv).is_err());
    }

    #[test]
    fn duplicating_a_class_never_hurts_it() {
        let base = separable_set();
        let mut more = base.clone();
        for i in 0..4 {
            more.push(sample(500 + i, &[-1.5 - i as f64 * 0.05, 0.0], 1));
        }
        let cfg = TrainConfig { seed: 3, ..Default::default() };
        let a = train(&base, &schema(2), &cfg).unwrap();
        let b = train(&more, &schema(2), &cfg).unwrap();
        let frac = |m: &ForestModel| {
            let (_, votes) = m.predict_values(&[-2.0, 0.5]).unwrap();
            votes.iter().find(|(c, _)| *c == ClassId(1)).unwrap().1
        };
        assert!(frac(&b) >= frac(&a));
    }

    #[test]
    fn importance_concentrates_on_the_split_feature() {
        let samples = separable_set();
        let cfg = TrainConfig { n_trees: 25, mtry: Some(2), seed: 1, ..Default::default() };
        let model = train(&samples, &schema(2), &cfg).unwrap();
        let imp = model.feature_importance();
        assert!((imp[0].1 - 1.0).abs() < 1e-12, "f0 importance {}", imp[0].1);
        assert_eq!(imp[1].1, 0.0, "unused feature must have zero importance");
    }

    #[test]
    fn importance_two_feature_staircase() {
        // one tree, mtry = F: needs both features to separate the staircase
        let samples = vec![
            sample(0, &[0.0, 0.0], 1),
            sample(1, &[0.0, 1.0], 2),
            sample(2, &[1.0, 0.0], 2),
            sample(3, &[1.0, 1.0], 2),
        ];
        // permutation bootstrap seed from the stump test family
        let mut chosen = None;
        for seed in 0..200u64 {
            let mut rng = SplitMix64::new(derive(seed, 0));
            let mut draws: Vec<u32> = (0..4).map(|_| rng.next_below(4) as u32).collect();
            draws.sort_unstable();
            if draws == [0, 1, 2, 3] {
                chosen = Some(seed);
                break;
            }
        }
        let cfg = TrainConfig {
            n_trees: 1,
            mtry: Some(2),
            seed: chosen.unwrap(),
            ..Default::default()
        };
        let model = train(&samples, &schema(2), &cfg).unwrap();
        let imp = model.feature_importance();
        assert!(imp[0].1 > 0.0 && imp[1].1 > 0.0);
        assert!((imp[0].1 + imp[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let samples = separable_set();
        let cfg = TrainConfig { seed: 9, ..Default::default() };
        let model = train(&samples, &schema(2), &cfg).unwrap();
        let text = model.to_json().unwrap();
        let back = ForestModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        for s in &samples {
            assert_eq!(
                model.predict_values(&s.features).unwrap(),
                back.predict_values(&s.features).unwrap()
            );
        }
    }

    #[test]
    fn min_leaf_respected() {
        let samples = separable_set();
        let cfg = TrainConfig { min_leaf: 4, seed: 2, ..Default::default() };
        let model = train(&samples, &schema(2), &cfg).unwrap();
        for tree in &model.trees {
            for node in &tree.nodes {
                if let Node::Leaf { counts } = node {
                    let total: u32 = counts.iter().sum();
                    assert!(total >= 4, "leaf with {total} samples");
                }
            }
        }
    }

    #[test]
    fn max_depth_zero_gives_single_leaves() {
        let samples = separable_set();
        let cfg = TrainConfig { max_depth: Some(0), ..Default::default() };
        let model = train(&samples, &schema(2), &cfg).unwrap();
        for tree in &model.trees {
            assert_eq!(tree.nodes.len(), 1);
            assert!(matches!(tree.nodes[0], Node::Leaf { .. }));
        }
    }
}
