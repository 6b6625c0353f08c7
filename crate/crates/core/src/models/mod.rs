//! The four classifier families and their shared prediction contract.
//!
//! Every family predicts [`Label::Obfuscated`] only on a strict win: linear
//! models need a decision score above zero, forests need a strict vote
//! majority, and tree leaves need a strict class majority.

pub mod forest;
pub mod logistic;
pub mod svm;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::{FeatureMatrix, FeatureVector};

pub use forest::{train_forest, ForestParams, MaxFeatures, RandomForestModel};
pub use logistic::{train_logistic, LogisticModel, LogisticParams};
pub use svm::{train_linear_svm, LinearSvmModel, SvmParams};
pub use tree::{best_split, gini_impurity, train_tree, DecisionTreeModel, Node, Split, TreeParams};

/// Family selection plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    LogisticRegression(LogisticParams),
    LinearSvm(SvmParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
}

impl ModelSpec {
    pub fn display_name(&self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression(_) => "Logistic Regression",
            ModelSpec::LinearSvm(_) => "SVM",
            ModelSpec::DecisionTree(_) => "Decision Tree",
            ModelSpec::RandomForest(_) => "Random Forest",
        }
    }

    pub fn train(&self, x: &FeatureMatrix, y: &[Label], seed: u64) -> Result<TrainedClassifier> {
        Ok(match self {
            ModelSpec::LogisticRegression(p) => TrainedClassifier::Logistic(train_logistic(x, y, p, seed)?),
            ModelSpec::LinearSvm(p) => TrainedClassifier::LinearSvm(train_linear_svm(x, y, p, seed)?),
            ModelSpec::DecisionTree(p) => {
                check_training_data(x, y)?;
                TrainedClassifier::DecisionTree(train_tree(x, y, p)?)
            }
            ModelSpec::RandomForest(p) => {
                check_training_data(x, y)?;
                TrainedClassifier::RandomForest(train_forest(x, y, p, seed)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Logistic(LogisticModel),
    LinearSvm(LinearSvmModel),
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
}

impl TrainedClassifier {
    pub fn dim(&self) -> usize {
        match self {
            TrainedClassifier::Logistic(m) => m.weights.len(),
            TrainedClassifier::LinearSvm(m) => m.weights.len(),
            TrainedClassifier::DecisionTree(m) => m.dim,
            TrainedClassifier::RandomForest(m) => m.dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, TrainedClassifier::Logistic(_) | TrainedClassifier::LinearSvm(_))
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(())
    }

    /// `w.x + b` for linear families.
    pub fn decision_score(&self, x: &FeatureVector) -> Result<f64> {
        self.check_dim(x)?;
        match self {
            TrainedClassifier::Logistic(m) => Ok(m.decision_score(x)),
            TrainedClassifier::LinearSvm(m) => Ok(m.decision_score(x)),
            _ => Err(Error::invalid("decision scores exist only for linear models")),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Label> {
        self.check_dim(x)?;
        Ok(match self {
            TrainedClassifier::Logistic(m) => Label::from_bool(m.decision_score(x) > 0.0),
            TrainedClassifier::LinearSvm(m) => Label::from_bool(m.decision_score(x) > 0.0),
            TrainedClassifier::DecisionTree(m) => m.predict(x),
            TrainedClassifier::RandomForest(m) => m.predict(x),
        })
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        x.rows().iter().map(|r| self.predict(r)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |w: &[f64], b: f64| w.iter().all(|v| v.is_finite()) && b.is_finite();
        match self {
            TrainedClassifier::Logistic(m) if !finite(&m.weights, m.bias) => {
                Err(Error::Malformed("non-finite logistic weights".into()))
            }
            TrainedClassifier::LinearSvm(m) if !finite(&m.weights, m.bias) => {
                Err(Error::Malformed("non-finite svm weights".into()))
            }
            TrainedClassifier::DecisionTree(m) => m.validate(),
            TrainedClassifier::RandomForest(m) => {
                if m.trees.is_empty() {
                    return Err(Error::Malformed("forest without trees".into()));
                }
                let dim = m.trees[0].dim;
                for t in &m.trees {
                    if t.dim != dim {
                        return Err(Error::Malformed("forest trees disagree on dimension".into()));
                    }
                    t.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub(crate) fn check_training_data(x: &FeatureMatrix, y: &[Label]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let ones = y.iter().filter(|&&l| l == Label::Obfuscated).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Training("training data must contain both classes".into()));
    }
    if x.rows().iter().any(|r| r.iter().any(|(_, v)| !v.is_finite())) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    Ok(())
}
