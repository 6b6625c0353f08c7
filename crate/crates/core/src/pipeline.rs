//! Tokenizer, TF-IDF, optional SMOTE and a classifier as one trainable unit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Label, LabeledCorpus};
use crate::error::{Error, Result};
use crate::models::{ForestParams, LogisticParams, ModelSpec, SvmParams, TrainedClassifier, TreeParams};
use crate::resample::{smote_balance, SmoteParams};
use crate::sparse::{FeatureMatrix, FeatureVector};
use crate::textprep::{fit_tfidf, IdfMode, TfIdfModel, TokenizerOptions};

pub const PIPELINE_FORMAT: &str = "obfuscan-pipeline";
pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Label used in reports; defaults to the model family name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub tokenizer: TokenizerOptions,
    #[serde(default)]
    pub tfidf: IdfMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smote: Option<SmoteParams>,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(model: ModelSpec, seed: u64) -> Self {
        Self {
            name: None,
            tokenizer: TokenizerOptions::default(),
            tfidf: IdfMode::Raw,
            smote: None,
            model,
            seed,
        }
    }

    pub fn with_smote(mut self, smote: SmoteParams) -> Self {
        self.smote = Some(smote);
        self
    }

    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.model.display_name().to_string())
    }

    /// The four families with default hyperparameters and default SMOTE,
    /// in the order Logistic Regression, Decision Tree, Random Forest, SVM.
    pub fn defaults(seed: u64) -> Vec<PipelineConfig> {
        [
            ModelSpec::LogisticRegression(LogisticParams::default()),
            ModelSpec::DecisionTree(TreeParams::default()),
            ModelSpec::RandomForest(ForestParams::default()),
            ModelSpec::LinearSvm(SvmParams::default()),
        ]
        .into_iter()
        .map(|m| PipelineConfig::new(m, seed).with_smote(SmoteParams::default()))
        .collect()
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.smote {
            s.with_seed(self.seed).validate()?;
        }
        match self.model {
            ModelSpec::LogisticRegression(p) if !(p.learning_rate > 0.0 && p.l2 >= 0.0) => {
                Err(Error::Config("logistic learning_rate must be > 0 and l2 >= 0".into()))
            }
            ModelSpec::LinearSvm(p) if p.lambda.is_nan() || p.lambda <= 0.0 => {
                Err(Error::Config("svm lambda must be > 0".into()))
            }
            ModelSpec::RandomForest(p) if p.n_trees == 0 => Err(Error::Config("n_trees must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_fingerprint: String,
    pub n_training_docs: usize,
    pub n_synthetic: usize,
    pub duplicated_singleton: bool,
    pub toolkit_version: String,
    /// Wall-clock creation time; left empty by library fits so that
    /// `(config, corpus)` alone determines the pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub tfidf: TfIdfModel,
    pub classifier: TrainedClassifier,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Decision score for linear families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Anything that maps raw text to a label, for cross-validation drivers.
pub trait TextClassifier {
    fn classify(&self, text: &str) -> Result<Label>;
}

impl TextClassifier for TrainedPipeline {
    fn classify(&self, text: &str) -> Result<Label> {
        Ok(predict_pipeline(self, text).label)
    }
}

impl<F: Fn(&str) -> Label> TextClassifier for F {
    fn classify(&self, text: &str) -> Result<Label> {
        Ok(self(text))
    }
}

/// Tokenized corpus, fitted vectorizer and feature rows.
pub(crate) struct Vectorized {
    pub tfidf: TfIdfModel,
    pub features: FeatureMatrix,
}

pub(crate) fn vectorize(config: &PipelineConfig, corpus: &LabeledCorpus) -> Result<Vectorized> {
    let tokens: Vec<Vec<String>> = corpus.texts().map(|t| config.tokenizer.tokenize(t)).collect();
    let tfidf = fit_tfidf(&tokens, config.tfidf)?;
    let features = tfidf.transform_all(&tokens);
    Ok(Vectorized { tfidf, features })
}

pub fn fit_pipeline(config: &PipelineConfig, corpus: &LabeledCorpus) -> Result<TrainedPipeline> {
    config.validate()?;
    if !corpus.has_both_classes() {
        return Err(Error::Training("training corpus must contain both classes".into()));
    }
    let Vectorized { tfidf, features } = vectorize(config, corpus)?;
    let labels = corpus.labels();

    let (classifier, n_synthetic, duplicated_singleton) = match config.smote {
        Some(params) => {
            let set = smote_balance(&features, &labels, &params.with_seed(config.seed))?;
            let clf = config.model.train(&set.features, &set.labels, config.seed)?;
            (clf, set.n_synthetic(), set.duplicated_singleton)
        }
        None => (config.model.train(&features, &labels, config.seed)?, 0, false),
    };

    Ok(TrainedPipeline {
        config: config.clone(),
        tfidf,
        classifier,
        provenance: Provenance {
            corpus_fingerprint: corpus.fingerprint(),
            n_training_docs: corpus.len(),
            n_synthetic,
            duplicated_singleton,
            toolkit_version: crate::VERSION.to_string(),
            created_unix: None,
        },
    })
}

impl TrainedPipeline {
    pub fn features(&self, text: &str) -> FeatureVector {
        self.tfidf.transform(&self.config.tokenizer.tokenize(text))
    }
}

pub fn predict_pipeline(p: &TrainedPipeline, text: &str) -> Prediction {
    let x = p.features(text);
    // Dimensions agree by construction: the classifier was trained on
    // vectors of the vectorizer's width, and load checks the same.
    let label = p.classifier.predict(&x).expect("classifier width matches vocabulary");
    let score = p.classifier.decision_score(&x).ok();
    Prediction { label, score }
}

#[derive(Serialize, Deserialize)]
struct Envelope<P> {
    format: String,
    format_version: u32,
    checksum: String,
    payload: P,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    format_version: u32,
}

fn payload_checksum(p: &TrainedPipeline) -> Result<String> {
    let canonical = serde_json::to_vec(p).map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&canonical))))
}

pub fn pipeline_to_json(p: &TrainedPipeline) -> Result<String> {
    let env = Envelope {
        format: PIPELINE_FORMAT.to_string(),
        format_version: PIPELINE_FORMAT_VERSION,
        checksum: payload_checksum(p)?,
        payload: p,
    };
    serde_json::to_string_pretty(&env).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn pipeline_from_json(s: &str) -> Result<TrainedPipeline> {
    let header: Header = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
    if header.format != PIPELINE_FORMAT {
        return Err(Error::Malformed(format!(
            "not a pipeline file (format `{}`)",
            header.format
        )));
    }
    if header.format_version != PIPELINE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.format_version,
            supported: PIPELINE_FORMAT_VERSION,
        });
    }
    let env: Envelope<TrainedPipeline> = serde_json::from_str(s).map_err(|_| Error::Checksum)?;
    if payload_checksum(&env.payload)? != env.checksum {
        return Err(Error::Checksum);
    }
    let p = env.payload;
    p.classifier.validate()?;
    if p.classifier.dim() != p.tfidf.dim() {
        return Err(Error::Malformed(format!(
            "classifier width {} does not match vocabulary size {}",
            p.classifier.dim(),
            p.tfidf.dim()
        )));
    }
    Ok(p)
}

pub fn save_pipeline(p: &TrainedPipeline, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pipeline_to_json(p)?).map_err(|e| Error::io(path, e))
}

pub fn load_pipeline(path: impl AsRef<Path>) -> Result<TrainedPipeline> {
    let path = path.as_ref();
    pipeline_from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
