use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ClassicError, Dataset};
use crate::rng;

/// Depth limit; `None` grows until leaves are pure or too small to split.
/// Written as an integer or `"none"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MaxDepth(pub Option<usize>);

impl fmt::Display for MaxDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("none"),
        }
    }
}

impl Serialize for MaxDepth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for MaxDepth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(usize),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(n) => Ok(MaxDepth(Some(n))),
            Repr::S(s) if s == "none" => Ok(MaxDepth(None)),
            Repr::S(s) => Err(serde::de::Error::custom(format!("max_depth must be an integer or \"none\", got `{s}`"))),
        }
    }
}

/// Number of features drawn as split candidates at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl FeatureSubsample {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            FeatureSubsample::Sqrt => (n_features as f64).sqrt().floor() as usize,
            FeatureSubsample::All => n_features,
            FeatureSubsample::Count(c) => c,
        };
        m.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for FeatureSubsample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSubsample::Sqrt => f.write_str("sqrt"),
            FeatureSubsample::All => f.write_str("all"),
            FeatureSubsample::Count(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: MaxDepth,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    /// Grow each tree on a bootstrap resample of the training rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: MaxDepth(None),
            min_leaf: 1,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Training rows per class that reached this leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub bootstrap_seed: u64,
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let c = self.leaf(x);
        let n: u32 = c.iter().sum();
        c.iter().map(|&v| v as f64 / n as f64).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Rows of the tree's own training sample, in drawing order.
    pub fn sample(&self, n_rows: usize, bootstrap: bool) -> Vec<usize> {
        if !bootstrap {
            return (0..n_rows).collect();
        }
        let mut r = rng::stream(self.bootstrap_seed, &[]);
        (0..n_rows).map(|_| r.gen_range(0..n_rows)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub n_features: usize,
    pub n_classes: usize,
    /// Resolved number of split candidates per node.
    pub feature_subsample: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean of the per-tree leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.predict_proba(x)) {
                *a += b;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    n_features: usize,
    m: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best threshold on one feature, scored by `sum_l^2/n_l + sum_r^2/n_r`
    /// over class counts (larger is lower weighted Gini impurity).
    fn best_on(&self, feature: usize, idx: &[usize], total: &[u32], buf: &mut Vec<(f64, usize)>) -> Option<Split> {
        buf.clear();
        buf.extend(idx.iter().map(|&i| (self.x[i][feature], self.y[i])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        if buf[0].0 == buf[buf.len() - 1].0 {
            return None;
        }
        let n = buf.len();
        let mut left = vec![0i64; self.n_classes];
        let mut right: Vec<i64> = total.iter().map(|&c| c as i64).collect();
        let mut sl2: i64 = 0;
        let mut sr2: i64 = right.iter().map(|c| c * c).sum();
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            let c = buf[i].1;
            sl2 += 2 * left[c] + 1;
            sr2 -= 2 * right[c] - 1;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (buf[i].0, buf[i + 1].0);
            let nl = i + 1;
            if a == b || nl < self.min_leaf || n - nl < self.min_leaf {
                continue;
            }
            let score = sl2 as f64 / nl as f64 + sr2 as f64 / (n - nl) as f64;
            if best.as_ref().is_none_or(|s| score > s.score) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, key: u64) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&idx);
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(&mut rng::stream(key, &[]));
        let mut buf = Vec::with_capacity(idx.len());
        let mut best: Option<Split> = None;
        let mut tried = 0;
        for f in order {
            if tried == self.m {
                break;
            }
            let first = self.x[idx[0]][f];
            if idx.iter().all(|&i| self.x[i][f] == first) {
                continue;
            }
            tried += 1;
            if let Some(s) = self.best_on(f, &idx, &counts, &mut buf) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng::derive(key, &[0]));
        let right = self.grow(r, depth + 1, rng::derive(key, &[1]));
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on `sample` (row indices, repeats allowed). Node `k`'s
/// candidate features depend only on the seed and the path to `k`, so two
/// trees grown with different depth limits agree on their common prefix.
fn grow_tree(data: &Dataset, params: &ForestParams, m: usize, sample: Vec<usize>, seed: u64, bootstrap_seed: u64) -> Tree {
    let mut g = Grower {
        x: &data.x,
        y: &data.y,
        n_classes: data.n_classes(),
        n_features: data.n_features(),
        m,
        max_depth: params.max_depth.0,
        min_leaf: params.min_leaf.max(1),
        nodes: Vec::new(),
    };
    g.grow(sample, 0, seed);
    Tree {
        bootstrap_seed,
        nodes: g.nodes,
    }
}

pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<ForestModel, ClassicError> {
    data.check_trainable()?;
    if params.n_trees == 0 {
        return Err(ClassicError::Params("n_trees must be at least 1".into()));
    }
    let m = params.feature_subsample.resolve(data.n_features());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let bootstrap_seed = rng::derive(params.seed, &[t as u64, 0]);
            let mut tree = Tree {
                bootstrap_seed,
                nodes: Vec::new(),
            };
            let sample = tree.sample(data.len(), params.bootstrap);
            tree = grow_tree(data, params, m, sample, rng::derive(params.seed, &[t as u64, 1]), bootstrap_seed);
            tree
        })
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        n_features: data.n_features(),
        n_classes: data.n_classes(),
        feature_subsample: m,
        trees,
    })
}
