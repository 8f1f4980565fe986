//! Greedy binary decision tree grown by information gain.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature at the node; `x <= threshold` goes left. Growth is best-first:
//! among the open leaves, the one whose best split removes the most weighted
//! entropy (`size * gain`) is split next, until no leaf can be split or the
//! split budget is spent. An impure node whose best split has zero gain is
//! still split, so pairwise distinct points can always be separated.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    rank_by, require_non_empty, ClassifierFactory, ClassifierKind, Hyper, Model, ModelFile, Trainer, TrainingMeta,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Split budget; `None` means one fewer than the number of classes.
    pub max_splits: Option<usize>,
    pub min_leaf: usize,
    pub min_parent: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_splits: None,
            min_leaf: 1,
            min_parent: 10,
        }
    }
}

impl TreeParams {
    fn to_json(self) -> Value {
        json!({
            "max_splits": self.max_splits,
            "min_leaf": self.min_leaf,
            "min_parent": self.min_parent,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Class proportions at the leaf, indexed like the model's classes.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Entropy in nats of a class histogram with `n` members.
pub fn entropy(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    nf.ln() - counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64).ln()).sum::<f64>() / nf
}

fn c_ln_c(c: usize) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * (c as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

/// Best split of the points `idx` by information gain, ties by lower
/// feature index and then lower threshold.
fn best_split(
    data: &[f64],
    dim: usize,
    targets: &[usize],
    n_classes: usize,
    idx: &[usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let n = idx.len();
    let mut total = vec![0usize; n_classes];
    for &i in idx {
        total[targets[i]] += 1;
    }
    let parent = entropy(&total, n);
    let nf = n as f64;
    let mut best: Option<Candidate> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    for f in 0..dim {
        order.clear();
        order.extend(idx.iter().map(|&i| (data[i * dim + f], targets[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        let mut left_sum = 0.0;
        let mut right_sum: f64 = total.iter().map(|&c| c_ln_c(c)).sum();
        for j in 0..n - 1 {
            let t = order[j].1;
            let right_c = total[t] - left[t];
            left_sum += c_ln_c(left[t] + 1) - c_ln_c(left[t]);
            right_sum += c_ln_c(right_c - 1) - c_ln_c(right_c);
            left[t] += 1;
            let (lo, hi) = (order[j].0, order[j + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = j + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let (nl, nr) = (n_left as f64, n_right as f64);
            let h_left = nl.ln() - left_sum / nl;
            let h_right = nr.ln() - right_sum / nr;
            let gain = parent - (nl / nf) * h_left - (nr / nf) * h_right;
            let threshold = lo + (hi - lo) / 2.0;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                    n_left,
                });
            }
        }
    }
    best
}

/// Information gain of splitting `idx` at (`feature`, `threshold`).
pub fn split_gain(d: &Dataset, idx: &[usize], feature: usize, threshold: f64) -> f64 {
    let targets = d.targets();
    let k = d.n_classes();
    let mut all = vec![0usize; k];
    let mut left = vec![0usize; k];
    let mut right = vec![0usize; k];
    for &i in idx {
        let t = targets[i];
        all[t] += 1;
        if d.measurements()[i].features[feature] <= threshold {
            left[t] += 1;
        } else {
            right[t] += 1;
        }
    }
    let (nl, nr) = (left.iter().sum::<usize>(), right.iter().sum::<usize>());
    let n = (nl + nr) as f64;
    entropy(&all, nl + nr) - nl as f64 / n * entropy(&left, nl) - nr as f64 / n * entropy(&right, nr)
}

#[derive(Debug, Clone)]
pub struct TreeTrainer {
    pub params: TreeParams,
}

impl Trainer for TreeTrainer {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::DecisionTree
    }

    fn hyperparameters(&self) -> Value {
        self.params.to_json()
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>> {
        dt_train(train, self.params).map(|m| Box::new(m) as Box<dyn Model>)
    }
}

struct Open {
    node: usize,
    members: Vec<usize>,
    split: Candidate,
}

pub fn dt_train(train: &Dataset, params: TreeParams) -> Result<TreeModel> {
    let start = Instant::now();
    require_non_empty(train)?;
    if params.min_leaf < 1 {
        return Err(Error::config("decision tree min_leaf must be at least 1"));
    }
    let n_classes = train.n_classes();
    let max_splits = params.max_splits.unwrap_or(n_classes.saturating_sub(1));
    let dim = train.feature_len();
    let data = super::feature_matrix(train);
    let targets = train.targets();

    let distribution = |members: &[usize]| {
        let mut p = vec![0.0; n_classes];
        for &i in members {
            p[targets[i]] += 1.0;
        }
        let n = members.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    };
    let splittable = |members: &[usize]| -> Option<Candidate> {
        let first = targets[members[0]];
        let pure = members.iter().all(|&i| targets[i] == first);
        if pure || members.len() < params.min_parent {
            return None;
        }
        best_split(&data, dim, &targets, n_classes, members, params.min_leaf)
    };

    let root: Vec<usize> = (0..train.len()).collect();
    let mut nodes = vec![TreeNode::Leaf {
        distribution: distribution(&root),
    }];
    let mut open = Vec::new();
    if let Some(split) = splittable(&root) {
        open.push(Open {
            node: 0,
            members: root,
            split,
        });
    }
    let mut splits = 0;
    while splits < max_splits && !open.is_empty() {
        let mut pick = 0;
        for (i, o) in open.iter().enumerate() {
            let weight = |o: &Open| o.members.len() as f64 * o.split.gain;
            if weight(o) > weight(&open[pick]) {
                pick = i;
            }
        }
        let Open { node, members, split } = open.remove(pick);
        let (left_members, right_members): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| data[i * dim + split.feature] <= split.threshold);
        debug_assert_eq!(left_members.len(), split.n_left);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(TreeNode::Leaf {
            distribution: distribution(&left_members),
        });
        nodes.push(TreeNode::Leaf {
            distribution: distribution(&right_members),
        });
        nodes[node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        splits += 1;
        for (child, m) in [(left, left_members), (right, right_members)] {
            if let Some(split) = splittable(&m) {
                open.push(Open {
                    node: child,
                    members: m,
                    split,
                });
            }
        }
    }

    let counts = train.class_counts();
    let n = train.len() as f64;
    Ok(TreeModel {
        classes: train.classes().to_vec(),
        input_len: dim,
        nodes,
        prior: counts.iter().map(|&c| c as f64 / n).collect(),
        meta: TrainingMeta {
            seed: 0,
            hyperparameters: params.to_json(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    classes: Vec<String>,
    input_len: usize,
    nodes: Vec<TreeNode>,
    /// Training class frequencies, used to order classes absent from a leaf.
    prior: Vec<f64>,
    meta: TrainingMeta,
}

impl TreeModel {
    /// Builds a model from explicit nodes; node 0 is the root.
    pub fn from_nodes(classes: Vec<String>, input_len: usize, nodes: Vec<TreeNode>, prior: Vec<f64>) -> Result<Self> {
        let m = TreeModel {
            classes,
            input_len,
            nodes,
            prior,
            meta: TrainingMeta {
                seed: 0,
                hyperparameters: Value::Null,
                wall_time_s: 0.0,
            },
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let k = self.classes.len();
        if self.nodes.is_empty() {
            return Err(Error::data("decision tree has no nodes"));
        }
        if self.prior.len() != k {
            return Err(Error::data("decision tree prior length differs from the class count"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { distribution } if distribution.len() != k => {
                    return Err(Error::data(format!("leaf {i} has {} proportions for {k} classes", distribution.len())));
                }
                TreeNode::Split { feature, left, right, .. }
                    if *feature >= self.input_len
                        || *left <= i
                        || *right <= i
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len() =>
                {
                    return Err(Error::data(format!("split node {i} is malformed")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Split { .. })).count()
    }

    /// Index of the leaf that `x` is routed to.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { distribution } => distribution,
            TreeNode::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }
}

impl Model for TreeModel {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::DecisionTree
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn rank(&self, x: &[f64]) -> Vec<usize> {
        assert_eq!(x.len(), self.input_len, "decision tree input length");
        let p = self.leaf_distribution(x);
        rank_by(self.classes.len(), |c| {
            if p[c] > 0.0 {
                (0u8, -p[c], 0.0)
            } else {
                (1u8, 0.0, -self.prior[c])
            }
        })
    }

    fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    fn params_json(&self) -> Value {
        json!({ "nodes": self.nodes, "prior": self.prior })
    }
}

#[derive(Deserialize)]
struct StoredTree {
    nodes: Vec<TreeNode>,
    prior: Vec<f64>,
}

pub struct TreeFactory;

impl ClassifierFactory for TreeFactory {
    fn name(&self) -> &'static str {
        "dt"
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::DecisionTree
    }

    fn description(&self) -> &'static str {
        "entropy decision tree (max_splits = classes - 1, min_leaf = 1, min_parent = 10)"
    }

    fn trainer(&self, hyperparameters: &Value) -> Result<Box<dyn Trainer>> {
        let h = Hyper(hyperparameters);
        h.check_keys(&["max_splits", "min_leaf", "min_parent"])?;
        let d = TreeParams::default();
        Ok(Box::new(TreeTrainer {
            params: TreeParams {
                max_splits: h.opt_usize("max_splits")?,
                min_leaf: h.usize_or("min_leaf", d.min_leaf)?,
                min_parent: h.usize_or("min_parent", d.min_parent)?,
            },
        }))
    }

    fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>> {
        let stored: StoredTree = file.params()?;
        let m = TreeModel {
            classes: file.classes.clone(),
            input_len: file.input_len,
            nodes: stored.nodes,
            prior: stored.prior,
            meta: file.meta(),
        };
        m.check()?;
        Ok(Box::new(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ModelExt;
    use crate::dataset::test_util::dataset;
    use proptest::prelude::*;

    fn params(max_splits: Option<usize>, min_parent: usize) -> TreeParams {
        TreeParams {
            max_splits,
            min_leaf: 1,
            min_parent,
        }
    }

    fn accuracy(m: &TreeModel, d: &Dataset) -> f64 {
        let ok = d.measurements().iter().filter(|x| m.predict(&x.features) == x.label).count();
        ok as f64 / d.len() as f64
    }

    #[test]
    fn separable_1d_single_split() {
        let d = dataset(&[("A", vec![0.0]), ("A", vec![1.0]), ("B", vec![10.0]), ("B", vec![11.0])]);
        let m = dt_train(&d, params(None, 2)).unwrap();
        assert_eq!(m.split_count(), 1);
        match &m.nodes()[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 1.0 && *threshold < 10.0);
                assert_eq!(*threshold, 5.5);
            }
            other => panic!("root is {other:?}"),
        }
        assert_eq!(accuracy(&m, &d), 1.0);
    }

    #[test]
    fn pure_input_is_one_leaf() {
        let rows: Vec<_> = (0..20).map(|i| ("A", vec![i as f64, -(i as f64)])).collect();
        let m = dt_train(&dataset(&rows), params(Some(100), 2)).unwrap();
        assert_eq!(m.nodes().len(), 1);
        assert_eq!(m.split_count(), 0);
    }

    #[test]
    fn small_nodes_are_not_split() {
        let d = dataset(&[("A", vec![0.0]), ("A", vec![1.0]), ("B", vec![10.0]), ("B", vec![11.0])]);
        let m = dt_train(&d, TreeParams::default()).unwrap();
        assert_eq!(m.split_count(), 0);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[4, 0], 4), 0.0);
        assert!((entropy(&[2, 2], 4) - 2f64.ln()).abs() < 1e-15);
        assert!((entropy(&[1, 1, 1], 3) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn root_gain_beats_exhaustive_scan() {
        let d = dataset(&[
            ("a", vec![0.1, 5.0]),
            ("a", vec![0.4, 4.0]),
            ("a", vec![0.2, 1.0]),
            ("a", vec![0.9, 2.5]),
            ("b", vec![1.5, 3.0]),
            ("b", vec![1.7, 0.5]),
            ("b", vec![2.0, 2.2]),
            ("b", vec![0.8, 4.4]),
            ("c", vec![3.0, 0.2]),
            ("c", vec![2.9, 0.9]),
            ("c", vec![3.5, 4.9]),
            ("c", vec![0.3, 0.1]),
        ]);
        let m = dt_train(&d, TreeParams::default()).unwrap();
        let TreeNode::Split { feature, threshold, .. } = m.nodes()[0] else {
            panic!("root not split");
        };
        let all: Vec<usize> = (0..d.len()).collect();
        let chosen = split_gain(&d, &all, feature, threshold);
        for f in 0..2 {
            let mut vals: Vec<f64> = d.measurements().iter().map(|x| x.features[f]).collect();
            vals.sort_by(f64::total_cmp);
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                assert!(chosen >= split_gain(&d, &all, f, t) - 1e-12, "feature {f} threshold {t}");
            }
        }
    }

    fn hand_tree() -> TreeModel {
        // root: x0 <= 2 ? node1 : leaf C
        // node1: x1 <= 0.5 ? leaf A : leaf {A: 0.3, B: 0.7}
        let classes = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let nodes = vec![
            TreeNode::Split {
                feature: 0,
                threshold: 2.0,
                left: 1,
                right: 2,
            },
            TreeNode::Split {
                feature: 1,
                threshold: 0.5,
                left: 3,
                right: 4,
            },
            TreeNode::Leaf {
                distribution: vec![0.0, 0.0, 1.0],
            },
            TreeNode::Leaf {
                distribution: vec![1.0, 0.0, 0.0],
            },
            TreeNode::Leaf {
                distribution: vec![0.3, 0.7, 0.0],
            },
        ];
        TreeModel::from_nodes(classes, 2, nodes, vec![0.2, 0.3, 0.5]).unwrap()
    }

    #[test]
    fn hand_built_routing() {
        let m = hand_tree();
        assert_eq!(m.leaf_index(&[3.0, 0.0]), 2);
        assert_eq!(m.leaf_index(&[2.0, 0.5]), 3);
        assert_eq!(m.leaf_index(&[1.0, 0.6]), 4);
        assert_eq!(m.predict(&[1.0, 0.6]), "B");
        assert_eq!(m.predict_topk(&[1.0, 0.6], 2), vec!["B", "A"]);
        // C is absent from that leaf and comes last.
        assert_eq!(m.predict_topk(&[1.0, 0.6], 3), vec!["B", "A", "C"]);
        // Absent classes follow training frequency: B (0.3) before A (0.2).
        assert_eq!(m.predict_topk(&[9.0, 0.0], 3), vec!["C", "B", "A"]);
    }

    #[test]
    fn leaf_proportion_ranking() {
        let classes = vec!["A".to_string(), "B".to_string()];
        let m = TreeModel::from_nodes(classes, 1, vec![TreeNode::Leaf { distribution: vec![0.7, 0.3] }], vec![0.5, 0.5])
            .unwrap();
        assert_eq!(m.predict(&[0.0]), "A");
        assert_eq!(m.predict_topk(&[0.0], 2), vec!["A", "B"]);
    }

    #[test]
    fn xor_needs_zero_gain_split() {
        let d = dataset(&[
            ("a", vec![0.0, 0.0]),
            ("a", vec![1.0, 1.0]),
            ("b", vec![0.0, 1.0]),
            ("b", vec![1.0, 0.0]),
        ]);
        let m = dt_train(&d, params(Some(usize::MAX), 2)).unwrap();
        assert_eq!(accuracy(&m, &d), 1.0);
    }

    #[test]
    fn split_budget_is_respected() {
        let rows: Vec<_> = (0..60).map(|i| (["a", "b", "c", "d"][i % 4], vec![i as f64])).collect();
        let d = dataset(&rows);
        let m = dt_train(&d, TreeParams::default()).unwrap();
        assert!(m.split_count() <= 3);
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let classes = vec!["A".to_string()];
        let bad = vec![TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
        }];
        assert!(TreeModel::from_nodes(classes, 1, bad, vec![1.0]).is_err());
    }

    fn distinct_rows(raw: Vec<(u8, Vec<i16>)>) -> Vec<(String, Vec<f64>)> {
        let mut seen = std::collections::HashSet::new();
        raw.into_iter()
            .filter(|(_, x)| seen.insert(x.clone()))
            .map(|(c, x)| (format!("c{}", c % 3), x.into_iter().map(f64::from).collect()))
            .collect()
    }

    proptest! {
        #[test]
        fn distinct_points_are_fit_exactly(raw in prop::collection::vec((0u8..3, prop::collection::vec(-5i16..5, 3)), 1..40)) {
            let rows = distinct_rows(raw);
            let rows: Vec<(&str, Vec<f64>)> = rows.iter().map(|(l, x)| (l.as_str(), x.clone())).collect();
            let d = dataset(&rows);
            let m = dt_train(&d, params(Some(usize::MAX), 2)).unwrap();
            prop_assert_eq!(accuracy(&m, &d), 1.0);
        }

        #[test]
        fn capped_tree_beats_majority(raw in prop::collection::vec((0u8..3, prop::collection::vec(-5i16..5, 3)), 1..60)) {
            let rows = distinct_rows(raw);
            let rows: Vec<(&str, Vec<f64>)> = rows.iter().map(|(l, x)| (l.as_str(), x.clone())).collect();
            let d = dataset(&rows);
            let m = dt_train(&d, TreeParams::default()).unwrap();
            let majority = *d.class_counts().iter().max().unwrap() as f64 / d.len() as f64;
            prop_assert!(accuracy(&m, &d) >= majority - 1e-12);
        }
    }
}
