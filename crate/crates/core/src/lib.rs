//! Detection of character-level obfuscation in short texts.
//!
//! The toolkit classifies a text as obfuscated (label 1) or plain (label 0)
//! with a classic pipeline: whitespace tokenization, TF-IDF features,
//! optional SMOTE oversampling of the minority class, and one of four
//! classifier families (logistic regression, linear SVM, CART decision tree,
//! random forest). Models are compared by stratified k-fold
//! cross-validation on precision, recall, F1 and accuracy.
//!
//! Every randomized step takes an explicit seed and is reproducible bit for
//! bit.
//!
//! ```
//! use obfuscan::{cross_validate, generate_synthetic_corpus, PipelineConfig, SynthConfig};
//! use obfuscan::models::{ModelSpec, TreeParams};
//!
//! let corpus = generate_synthetic_corpus(&SynthConfig { n_docs: 60, ..SynthConfig::with_seed(7) })?;
//! let config = PipelineConfig::new(ModelSpec::DecisionTree(TreeParams::default()), 7);
//! let cv = cross_validate(&config, &corpus, 5, 7)?;
//! assert_eq!(cv.folds.len(), 5);
//! # Ok::<(), obfuscan::Error>(())
//! ```

pub mod corpus;
pub mod error;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod resample;
pub mod sparse;
pub mod synth;
pub mod textprep;

pub use corpus::{load_corpus, save_corpus, stratified_k_fold, CorpusFormat, Document, FoldPlan, Label, LabeledCorpus};
pub use error::{Error, ErrorKind, Result};
pub use eval::{
    compute_metrics, confusion_matrix, cross_validate, cross_validate_ordered, grid_search, ConfusionMatrix, CvResult,
    GridSearchResult, MetricsReport, ResampleOrdering,
};
pub use models::{ModelSpec, TrainedClassifier};
pub use pipeline::{fit_pipeline, load_pipeline, predict_pipeline, save_pipeline, PipelineConfig, TrainedPipeline};
pub use resample::{smote_balance, SmoteConfig, SmoteParams};
pub use sparse::{FeatureMatrix, FeatureVector};
pub use synth::{generate_synthetic_corpus, obfuscate_text, SynthConfig};
pub use textprep::{fit_tfidf, tokenize, IdfMode, TfIdfModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

// The guide's code listings compile and run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/tfidf.md")]
    pub mod tfidf {}
    #[doc = include_str!("../../../book/src/smote.md")]
    pub mod smote {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    pub mod classifiers {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/cross_validation.md")]
    pub mod cross_validation {}
    #[doc = include_str!("../../../book/src/synthetic_data.md")]
    pub mod synthetic_data {}
    #[doc = include_str!("../../../book/src/pipelines.md")]
    pub mod pipelines {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
