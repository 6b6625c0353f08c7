//! Bagged CART trees with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Columns, DecisionTreeModel, FeatureChoice, TreeParams};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::sparse::{FeatureMatrix, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(dim))`
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        let n = match self {
            MaxFeatures::Sqrt => (dim as f64).sqrt().ceil() as usize,
            MaxFeatures::All => dim,
            MaxFeatures::Count(n) => n,
        };
        n.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    /// Row indices each tree was grown on.
    pub bootstrap_samples: Vec<Vec<usize>>,
    /// Features offered to at least one split of each tree, ascending.
    pub feature_subsets: Vec<Vec<usize>>,
    pub params: ForestParams,
    pub seed: u64,
}

impl RandomForestModel {
    /// Wraps already grown trees, e.g. for vote tests.
    pub fn from_trees(trees: Vec<DecisionTreeModel>, seed: u64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        let n = trees.len();
        Ok(Self {
            feature_subsets: trees.iter().map(|t| (0..t.dim).collect()).collect(),
            bootstrap_samples: vec![Vec::new(); n],
            params: ForestParams {
                n_trees: n,
                ..Default::default()
            },
            trees,
            seed,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn dim(&self) -> usize {
        self.trees[0].dim
    }

    /// Votes per label, indexed by `Label::index`.
    pub fn votes(&self, x: &FeatureVector) -> [usize; 2] {
        let mut v = [0; 2];
        for t in &self.trees {
            v[t.predict(x).index()] += 1;
        }
        v
    }

    /// Majority vote; an even split goes to `Label::Plain`.
    pub fn predict(&self, x: &FeatureVector) -> Label {
        let v = self.votes(x);
        Label::from_bool(v[1] > v[0])
    }
}

/// Tree `t` uses seed `seed + t`, so results do not depend on scheduling.
pub fn train_forest(x: &FeatureMatrix, y: &[Label], params: &ForestParams, seed: u64) -> Result<RandomForestModel> {
    if params.n_trees < 1 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot grow a forest on zero samples"));
    }
    let cols = Columns::new(x);
    let n = y.len();
    let dim = x.dim();
    let per_split = params.max_features.resolve(dim);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
    };

    let grown: Vec<_> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(seed.wrapping_add(t as u64));
            let ids: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let choice = if per_split >= dim {
                FeatureChoice::All
            } else {
                FeatureChoice::Random {
                    rng: &mut rng,
                    per_split,
                }
            };
            let g = grow_tree(&cols, y, &ids, tree_params, choice);
            (g.tree, ids, g.features_considered.into_iter().collect::<Vec<_>>())
        })
        .collect();

    let mut trees = Vec::with_capacity(grown.len());
    let mut bootstrap_samples = Vec::with_capacity(grown.len());
    let mut feature_subsets = Vec::with_capacity(grown.len());
    for (t, ids, feats) in grown {
        trees.push(t);
        bootstrap_samples.push(ids);
        feature_subsets.push(feats);
    }
    Ok(RandomForestModel {
        trees,
        bootstrap_samples,
        feature_subsets,
        params: *params,
        seed,
    })
}
