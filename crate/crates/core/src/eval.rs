//! Confusion-matrix metrics, stratified cross-validation and grid search.
//!
//! Label 1 (obfuscated) is the positive class. Metric definitions:
//!
//! ```text
//! accuracy  = (TP + TN) / (TP + TN + FP + FN)
//! precision = TP / (TP + FP)            0 when TP + FP = 0
//! recall    = TP / (TP + FN)            0 when TP + FN = 0
//! F1        = 2 P R / (P + R)           0 when P + R = 0
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_folds, FoldPlan, Label, LabeledCorpus};
use crate::error::{Error, Result};
use crate::pipeline::{fit_pipeline, vectorize, PipelineConfig, TextClassifier};
use crate::resample::smote_balance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Obfuscated, Label::Obfuscated) => self.tp += 1,
            (Label::Plain, Label::Plain) => self.tn += 1,
            (Label::Obfuscated, Label::Plain) => self.fp += 1,
            (Label::Plain, Label::Obfuscated) => self.fn_ += 1,
        }
    }
}

pub fn confusion_matrix(predictions: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("confusion matrix of zero samples"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        cm.record(p, t);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("metrics of an empty confusion matrix"));
    }
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        confusion: *cm,
    })
}

pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<MetricsReport> {
    compute_metrics(&confusion_matrix(predictions, truth)?)
}

/// Where SMOTE runs relative to the fold split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleOrdering {
    /// Vectorizer and SMOTE are fitted on each training fold only.
    #[default]
    WithinTrainingFolds,
    /// Vectorize and oversample the whole corpus, then split. Test folds
    /// then contain synthetic rows and vocabulary statistics from held-out
    /// text; this exists only to replicate leaky protocols.
    BeforeSplit,
}

impl ResampleOrdering {
    pub fn is_unsafe(self) -> bool {
        self == ResampleOrdering::BeforeSplit
    }

    pub fn describe(self) -> &'static str {
        match self {
            ResampleOrdering::WithinTrainingFolds => "leakage-safe (vectorizer and SMOTE fitted per training fold)",
            ResampleOrdering::BeforeSplit => "UNSAFE: resample-before-split (test folds contain synthetic rows)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Held-out row ids. Under `BeforeSplit` these index the resampled
    /// rows, where ids at or past the corpus length are synthetic.
    pub test_ids: Vec<usize>,
    pub n_train: usize,
    pub n_synthetic: usize,
    pub test: MetricsReport,
    /// Metrics on the fold's original (non-synthetic) training rows.
    pub train: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: PipelineConfig,
    pub k: usize,
    pub seed: u64,
    pub ordering: ResampleOrdering,
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
}

impl CvResult {
    fn assemble(
        config: PipelineConfig,
        k: usize,
        seed: u64,
        ordering: ResampleOrdering,
        plan: FoldPlan,
        folds: Vec<FoldResult>,
    ) -> Self {
        let col =
            |f: fn(&MetricsReport) -> f64| MetricSummary::of(&folds.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
        Self {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            config,
            k,
            seed,
            ordering,
            plan,
            folds,
        }
    }

    pub fn min_train_accuracy(&self) -> f64 {
        self.folds
            .iter()
            .map(|f| f.train.accuracy)
            .fold(f64::INFINITY, f64::min)
    }
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(fold as u64)
}

/// Runs `fit` once per stratified fold and scores the returned classifier
/// on the held-out documents and on the fold's training documents.
///
/// `fit` receives the fold index, the training ids (into `corpus`) and the
/// training documents as their own corpus. Folds may run concurrently;
/// results come back in fold order.
pub fn cross_validate_with<C, F>(
    corpus: &LabeledCorpus,
    k: usize,
    seed: u64,
    fit: F,
) -> Result<(FoldPlan, Vec<FoldResult>)>
where
    C: TextClassifier,
    F: Fn(usize, &[usize], &LabeledCorpus) -> Result<(C, usize)> + Sync,
{
    let plan = stratified_folds(&corpus.labels(), k, seed)?;
    let docs = corpus.documents();
    let folds = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_ids = plan.train_ids(fold);
            let test_ids = plan.test_ids(fold);
            let train = corpus.subset(&train_ids)?;
            if !train.has_both_classes() {
                return Err(Error::Training(format!(
                    "fold {fold}: training split contains a single class"
                )));
            }
            let (clf, n_synthetic) = fit(fold, &train_ids, &train)?;
            let score = |ids: &[usize]| -> Result<MetricsReport> {
                let preds = ids
                    .iter()
                    .map(|&i| clf.classify(&docs[i].text))
                    .collect::<Result<Vec<_>>>()?;
                let truth: Vec<Label> = ids.iter().map(|&i| docs[i].label).collect();
                evaluate(&preds, &truth)
            };
            Ok(FoldResult {
                fold,
                n_train: train_ids.len(),
                n_synthetic,
                test: score(&test_ids)?,
                train: score(&train_ids)?,
                test_ids,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, folds))
}

/// Leakage-safe k-fold cross-validation of a full pipeline.
pub fn cross_validate(config: &PipelineConfig, corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<CvResult> {
    cross_validate_ordered(config, corpus, k, seed, ResampleOrdering::WithinTrainingFolds)
}

pub fn cross_validate_ordered(
    config: &PipelineConfig,
    corpus: &LabeledCorpus,
    k: usize,
    seed: u64,
    ordering: ResampleOrdering,
) -> Result<CvResult> {
    config.validate()?;
    match ordering {
        ResampleOrdering::WithinTrainingFolds => {
            let (plan, folds) = cross_validate_with(corpus, k, seed, |fold, _, train| {
                let mut cfg = config.clone();
                cfg.seed = fold_seed(config.seed, fold);
                let p = fit_pipeline(&cfg, train)?;
                let n_syn = p.provenance.n_synthetic;
                Ok((p, n_syn))
            })?;
            Ok(CvResult::assemble(config.clone(), k, seed, ordering, plan, folds))
        }
        ResampleOrdering::BeforeSplit => cross_validate_leaky(config, corpus, k, seed),
    }
}

fn cross_validate_leaky(config: &PipelineConfig, corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<CvResult> {
    if !corpus.has_both_classes() {
        return Err(Error::invalid("corpus must contain both classes"));
    }
    let v = vectorize(config, corpus)?;
    let labels = corpus.labels();
    let (x, y, synthetic) = match config.smote {
        Some(p) => {
            let set = smote_balance(&v.features, &labels, &p.with_seed(config.seed))?;
            (set.features, set.labels, set.synthetic_flags)
        }
        None => (v.features, labels, vec![false; corpus.len()]),
    };
    let plan = stratified_folds(&y, k, seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_ids = plan.train_ids(fold);
            let test_ids = plan.test_ids(fold);
            let tx = x.select(&train_ids);
            let ty: Vec<Label> = train_ids.iter().map(|&i| y[i]).collect();
            let clf = config.model.train(&tx, &ty, fold_seed(config.seed, fold))?;
            let score = |ids: &[usize]| -> Result<MetricsReport> {
                let preds = ids.iter().map(|&i| clf.predict(x.row(i))).collect::<Result<Vec<_>>>()?;
                let truth: Vec<Label> = ids.iter().map(|&i| y[i]).collect();
                evaluate(&preds, &truth)
            };
            let train_originals: Vec<usize> = train_ids.iter().copied().filter(|&i| !synthetic[i]).collect();
            Ok(FoldResult {
                fold,
                n_train: train_ids.len(),
                n_synthetic: train_ids.iter().filter(|&&i| synthetic[i]).count(),
                test: score(&test_ids)?,
                train: score(&train_originals)?,
                test_ids,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::assemble(
        config.clone(),
        k,
        seed,
        ResampleOrdering::BeforeSplit,
        plan,
        folds,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub results: Vec<CvResult>,
}

impl GridSearchResult {
    pub fn best(&self) -> &CvResult {
        &self.results[self.best_index]
    }

    pub fn best_config(&self) -> &PipelineConfig {
        &self.best().config
    }
}

/// Index of the preferred result: highest mean F1, then highest mean
/// accuracy, then earliest position.
pub fn select_best(results: &[CvResult]) -> Option<usize> {
    const TIE: f64 = 1e-12;
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &results[b];
                if r.f1.mean > cur.f1.mean + TIE {
                    true
                } else if (r.f1.mean - cur.f1.mean).abs() <= TIE {
                    r.accuracy.mean > cur.accuracy.mean + TIE
                } else {
                    false
                }
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

pub fn grid_search(grid: &[PipelineConfig], corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<GridSearchResult> {
    grid_search_ordered(grid, corpus, k, seed, ResampleOrdering::WithinTrainingFolds)
}

pub fn grid_search_ordered(
    grid: &[PipelineConfig],
    corpus: &LabeledCorpus,
    k: usize,
    seed: u64,
    ordering: ResampleOrdering,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::invalid("grid search needs at least one configuration"));
    }
    let results = grid
        .par_iter()
        .map(|c| cross_validate_ordered(c, corpus, k, seed, ordering))
        .collect::<Result<Vec<_>>>()?;
    let best_index = select_best(&results).expect("non-empty grid");
    Ok(GridSearchResult { best_index, results })
}
