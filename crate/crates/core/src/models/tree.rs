//! CART classification trees with Gini impurity.

use std::collections::BTreeSet;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::{FeatureMatrix, FeatureVector};

// Impurity comparisons below this gap count as ties.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        counts: [usize; 2],
    },
}

/// Nodes in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<Node>,
    pub dim: usize,
    pub params: TreeParams,
}

impl DecisionTreeModel {
    /// A single leaf that always answers `label`.
    pub fn constant(dim: usize, label: Label) -> Self {
        let mut counts = [0; 2];
        counts[label.index()] = 1;
        Self {
            nodes: vec![Node::Leaf { label, counts }],
            dim,
            params: TreeParams::default(),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Checks that child links form a single tree over all nodes.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if at >= self.nodes.len() || seen[at] {
                return Err(Error::Malformed(format!("tree node {at} is missing or shared")));
            }
            seen[at] = true;
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &self.nodes[at]
            {
                if *feature >= self.dim || !threshold.is_finite() {
                    return Err(Error::Malformed(format!("tree node {at} has an invalid split")));
                }
                stack.push(*left);
                stack.push(*right);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Malformed("tree has unreachable nodes".into()));
        }
        Ok(())
    }
}

/// `1 - sum of squared class proportions`.
pub fn gini_impurity(counts: [usize; 2]) -> Result<f64> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(Error::invalid("gini impurity of an empty node"));
    }
    Ok(gini(counts))
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - (p0 * p0 + p1 * p1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `(n_left * gini_left + n_right * gini_right) / n`.
    pub weighted_impurity: f64,
}

fn majority(counts: [usize; 2]) -> Label {
    Label::from_bool(counts[1] > counts[0])
}

/// Column-major dense copy of a feature matrix.
pub(crate) struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let mut cols = vec![vec![0.0; x.n_rows()]; x.dim()];
        for (r, row) in x.rows().iter().enumerate() {
            for (c, v) in row.iter() {
                cols[c][r] = v;
            }
        }
        Self { cols }
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }
}

fn class_counts(y: &[Label], ids: &[usize]) -> [usize; 2] {
    let mut c = [0; 2];
    for &i in ids {
        c[y[i].index()] += 1;
    }
    c
}

/// Lowest weighted-impurity split over `features` (ascending order matters
/// for tie breaking), regardless of whether it improves on the parent.
fn search_split(cols: &Columns, y: &[Label], ids: &[usize], features: &[usize]) -> Option<Split> {
    let n = ids.len();
    let total = class_counts(y, ids);
    let mut best: Option<Split> = None;
    let mut vals: Vec<(f64, Label)> = Vec::with_capacity(n);
    for &f in features {
        let col = &cols.cols[f];
        vals.clear();
        vals.extend(ids.iter().map(|&i| (col[i], y[i])));
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if vals[0].0 == vals[n - 1].0 {
            continue;
        }
        let mut left = [0usize; 2];
        for pos in 0..n - 1 {
            left[vals[pos].1.index()] += 1;
            let (a, b) = (vals[pos].0, vals[pos + 1].0);
            if a == b {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (pos + 1) as f64;
            let nr = (n - pos - 1) as f64;
            let imp = (nl * gini(left) + nr * gini(right)) / n as f64;
            if best.is_none_or(|s| imp < s.weighted_impurity - EPS) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    weighted_impurity: imp,
                });
            }
        }
    }
    best
}

/// Exhaustive CART split search over midpoints of consecutive distinct
/// values. Returns `None` unless the split strictly lowers impurity. Ties
/// go to the lower feature ordinal, then the lower threshold.
pub fn best_split(x: &FeatureMatrix, y: &[Label], candidate_features: &[usize]) -> Result<Option<Split>> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if y.len() < 2 {
        return Err(Error::invalid("split search needs at least 2 samples"));
    }
    let mut feats: Vec<usize> = candidate_features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    if let Some(&f) = feats.last() {
        if f >= x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                actual: f + 1,
            });
        }
    }
    let cols = Columns::new(x);
    let ids: Vec<usize> = (0..y.len()).collect();
    let parent = gini(class_counts(y, &ids));
    Ok(search_split(&cols, y, &ids, &feats).filter(|s| s.weighted_impurity < parent - EPS))
}

/// How split candidates are chosen while growing.
pub(crate) enum FeatureChoice<'a> {
    All,
    /// Fresh sorted subset of this size at every split.
    Random {
        rng: &'a mut ChaCha8Rng,
        per_split: usize,
    },
}

pub(crate) struct Grown {
    pub tree: DecisionTreeModel,
    pub features_considered: BTreeSet<usize>,
}

struct Grower<'a, 'b> {
    cols: &'a Columns,
    y: &'a [Label],
    params: TreeParams,
    choice: FeatureChoice<'b>,
    nodes: Vec<Node>,
    considered: BTreeSet<usize>,
}

impl Grower<'_, '_> {
    fn candidates(&mut self) -> Vec<usize> {
        let dim = self.cols.dim();
        match &mut self.choice {
            FeatureChoice::All => (0..dim).collect(),
            FeatureChoice::Random { rng, per_split } => {
                let mut v = index::sample(*rng, dim, (*per_split).min(dim)).into_vec();
                v.sort_unstable();
                v
            }
        }
    }

    fn grow(&mut self, ids: &[usize], depth: usize) -> usize {
        let counts = class_counts(self.y, ids);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: majority(counts),
            counts,
        });

        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_hit = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_hit || ids.len() < self.params.min_samples_split.max(2) {
            return at;
        }

        let feats = self.candidates();
        self.considered.extend(feats.iter().copied());
        // An impure node with distinct feature values is split even when no
        // candidate lowers impurity (XOR-like layouts); otherwise a
        // conflict-free training set could not be memorised.
        let Some(split) = search_split(self.cols, self.y, ids, &feats) else {
            return at;
        };

        let col = &self.cols.cols[split.feature];
        let (left_ids, right_ids): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| col[i] <= split.threshold);
        let left = self.grow(&left_ids, depth + 1);
        let right = self.grow(&right_ids, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Grows a tree on the (possibly repeated) rows `ids` of `cols`.
pub(crate) fn grow_tree(
    cols: &Columns,
    y: &[Label],
    ids: &[usize],
    params: TreeParams,
    choice: FeatureChoice<'_>,
) -> Grown {
    let mut g = Grower {
        cols,
        y,
        params,
        choice,
        nodes: Vec::new(),
        considered: BTreeSet::new(),
    };
    g.grow(ids, 0);
    Grown {
        tree: DecisionTreeModel {
            nodes: g.nodes,
            dim: cols.dim(),
            params,
        },
        features_considered: g.considered,
    }
}

pub fn train_tree(x: &FeatureMatrix, y: &[Label], params: &TreeParams) -> Result<DecisionTreeModel> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot grow a tree on zero samples"));
    }
    let cols = Columns::new(x);
    let ids: Vec<usize> = (0..y.len()).collect();
    Ok(grow_tree(&cols, y, &ids, *params, FeatureChoice::All).tree)
}
