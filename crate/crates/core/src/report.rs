//! Experiment manifests and report rendering.
//!
//! A cross-validation report carries a per-model metric table (precision,
//! recall and F1 averaged over folds) and per-model mean accuracy for bar
//! charts, plus the full per-fold results. Reports are deterministic
//! functions of their inputs and contain no timestamps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::eval::{cross_validate_ordered, select_best, CvResult, MetricSummary, ResampleOrdering};
use crate::pipeline::PipelineConfig;

pub const CV_REPORT_FORMAT: &str = "obfuscan-cv-report";
pub const COMBINED_REPORT_FORMAT: &str = "obfuscan-combined-report";
pub const LEAKAGE_REPORT_FORMAT: &str = "obfuscan-leakage-report";

const METRICS_NOTE: &str = "precision, recall and F1 are means over cross-validation test folds; \
positive class = 1 (obfuscated); a zero denominator yields 0";

/// Everything needed to re-run an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub resolved_config: serde_json::Value,
    pub seed: Option<u64>,
    pub input_fingerprints: BTreeMap<String, String>,
    pub toolkit_version: String,
    pub output_paths: Vec<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, resolved_config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            resolved_config,
            seed,
            input_fingerprints: BTreeMap::new(),
            toolkit_version: crate::VERSION.to_string(),
            output_paths: Vec::new(),
        }
    }

    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> Result<String> {
        to_pretty_json(self)
    }
}

/// SHA-256 of raw bytes, hex encoded.
pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_pretty_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Malformed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub ordering: ResampleOrdering,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub accuracy: MetricSummary,
    pub min_train_accuracy: f64,
}

impl ReportRow {
    fn from_result(r: &CvResult) -> Self {
        let mut model = r.config.display_name();
        if r.ordering.is_unsafe() {
            model.push_str(" [UNSAFE: resample-before-split]");
        }
        Self {
            model,
            ordering: r.ordering,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            accuracy: r.accuracy,
            min_train_accuracy: r.min_train_accuracy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTableRow {
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBar {
    pub model: String,
    pub mean_accuracy: f64,
}

fn table_of(rows: &[ReportRow]) -> Vec<MetricTableRow> {
    rows.iter()
        .map(|r| MetricTableRow {
            model: r.model.clone(),
            precision: r.precision.mean,
            recall: r.recall.mean,
            f1: r.f1.mean,
            mean_accuracy: r.accuracy.mean,
        })
        .collect()
}

fn bars_of(rows: &[ReportRow]) -> Vec<AccuracyBar> {
    rows.iter()
        .map(|r| AccuracyBar {
            model: r.model.clone(),
            mean_accuracy: r.accuracy.mean,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub format: String,
    pub toolkit_version: String,
    pub manifest_fingerprint: String,
    pub corpus_fingerprint: String,
    pub n_documents: usize,
    pub class_counts: [usize; 2],
    pub k: usize,
    pub seed: u64,
    pub ordering: String,
    pub metrics_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_note: Option<String>,
    pub best_by_f1: Option<String>,
    pub rows: Vec<ReportRow>,
    pub table: Vec<MetricTableRow>,
    pub accuracy_bars: Vec<AccuracyBar>,
    pub results: Vec<CvResult>,
}

impl CvReport {
    pub fn new(
        results: Vec<CvResult>,
        corpus: &LabeledCorpus,
        manifest_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        let first = results
            .first()
            .ok_or_else(|| Error::invalid("a report needs at least one result"))?;
        let (k, seed) = (first.k, first.seed);
        let ordering = if results.iter().any(|r| r.ordering.is_unsafe()) {
            ResampleOrdering::BeforeSplit
        } else {
            ResampleOrdering::WithinTrainingFolds
        };
        let rows: Vec<ReportRow> = results.iter().map(ReportRow::from_result).collect();
        Ok(Self {
            format: CV_REPORT_FORMAT.to_string(),
            toolkit_version: crate::VERSION.to_string(),
            manifest_fingerprint: manifest_fingerprint.into(),
            corpus_fingerprint: corpus.fingerprint(),
            n_documents: corpus.len(),
            class_counts: corpus.class_counts(),
            k,
            seed,
            ordering: ordering.describe().to_string(),
            metrics_note: METRICS_NOTE.to_string(),
            data_note: None,
            best_by_f1: select_best(&results).map(|i| rows[i].model.clone()),
            table: table_of(&rows),
            accuracy_bars: bars_of(&rows),
            rows,
            results,
        })
    }

    pub fn with_data_note(mut self, note: impl Into<String>) -> Self {
        self.data_note = Some(note.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        to_pretty_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        if r.format != CV_REPORT_FORMAT {
            return Err(Error::Malformed(format!("not a cv report (format `{}`)", r.format)));
        }
        Ok(r)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Cross-validation report ({}-fold, seed {})", self.k, self.seed);
        let _ = writeln!(
            out,
            "corpus {} ({} documents: {} plain, {} obfuscated)",
            &self.corpus_fingerprint[..16],
            self.n_documents,
            self.class_counts[0],
            self.class_counts[1]
        );
        let _ = writeln!(out, "resampling: {}", self.ordering);
        if let Some(note) = &self.data_note {
            let _ = writeln!(out, "data: {note}");
        }
        let _ = writeln!(out, "manifest {}", self.manifest_fingerprint);
        out.push('\n');
        out.push_str(&render_rows(&self.rows));
        out.push('\n');
        if let Some(best) = &self.best_by_f1 {
            let _ = writeln!(out, "best by mean F1: {best}");
        }
        let _ = writeln!(out, "note: {}", self.metrics_note);
        out
    }

    pub fn accuracy_bars_csv(&self) -> String {
        bars_csv(&self.accuracy_bars)
    }
}

fn bars_csv(bars: &[AccuracyBar]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "mean_accuracy"]).expect("in-memory write");
    for b in bars {
        w.write_record([b.model.as_str(), &format!("{:.6}", b.mean_accuracy)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn render_rows(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.model.chars().count()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>15}  {:>9}",
        "Model", "Precision", "Recall", "F1-Score", "Mean accuracy", "Min train"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 2 + 9 + 2 + 9 + 2 + 9 + 2 + 15 + 2 + 9));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>15}  {:>9.2}",
            r.model,
            r.precision.mean,
            r.recall.mean,
            r.f1.mean,
            format!("{:.2} ± {:.2}", r.accuracy.mean, r.accuracy.std),
            r.min_train_accuracy
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSource {
    pub manifest_fingerprint: String,
    pub corpus_fingerprint: String,
    pub k: usize,
    pub seed: u64,
}

/// Rows of several cv reports side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub format: String,
    pub toolkit_version: String,
    pub manifest_fingerprint: String,
    pub sources: Vec<ReportSource>,
    pub metrics_note: String,
    pub rows: Vec<ReportRow>,
    pub table: Vec<MetricTableRow>,
    pub accuracy_bars: Vec<AccuracyBar>,
}

impl CombinedReport {
    pub fn new(reports: &[CvReport], manifest_fingerprint: impl Into<String>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("nothing to combine"));
        }
        let rows: Vec<ReportRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
        Ok(Self {
            format: COMBINED_REPORT_FORMAT.to_string(),
            toolkit_version: crate::VERSION.to_string(),
            manifest_fingerprint: manifest_fingerprint.into(),
            sources: reports
                .iter()
                .map(|r| ReportSource {
                    manifest_fingerprint: r.manifest_fingerprint.clone(),
                    corpus_fingerprint: r.corpus_fingerprint.clone(),
                    k: r.k,
                    seed: r.seed,
                })
                .collect(),
            metrics_note: METRICS_NOTE.to_string(),
            table: table_of(&rows),
            accuracy_bars: bars_of(&rows),
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_pretty_json(self)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Combined report over {} cv run(s)", self.sources.len());
        for s in &self.sources {
            let _ = writeln!(
                out,
                "  source manifest {} corpus {} k={} seed={}",
                &s.manifest_fingerprint[..16.min(s.manifest_fingerprint.len())],
                &s.corpus_fingerprint[..16.min(s.corpus_fingerprint.len())],
                s.k,
                s.seed
            );
        }
        let _ = writeln!(out, "manifest {}", self.manifest_fingerprint);
        out.push('\n');
        out.push_str(&render_rows(&self.rows));
        let _ = writeln!(out, "\nnote: {}", self.metrics_note);
        out
    }

    pub fn accuracy_bars_csv(&self) -> String {
        bars_csv(&self.accuracy_bars)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageRow {
    pub seed: u64,
    pub corpus_fingerprint: String,
    pub safe_recall: f64,
    pub unsafe_recall: f64,
    pub safe_f1: f64,
    pub unsafe_f1: f64,
}

/// Minority-class recall under both resampling orderings, seed by seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub format: String,
    pub toolkit_version: String,
    pub model: String,
    pub k: usize,
    pub safe_ordering: String,
    pub unsafe_ordering: String,
    pub rows: Vec<LeakageRow>,
    pub mean_safe_recall: f64,
    pub mean_unsafe_recall: f64,
}

/// Cross-validates `config` on each `(seed, corpus)` pair under both
/// orderings. The seed drives fold assignment and every component.
pub fn compare_resample_orderings(
    config: &PipelineConfig,
    corpora: &[(u64, LabeledCorpus)],
    k: usize,
) -> Result<LeakageReport> {
    if corpora.is_empty() {
        return Err(Error::invalid("leakage comparison needs at least one corpus"));
    }
    let mut rows = Vec::with_capacity(corpora.len());
    for (seed, corpus) in corpora {
        let mut cfg = config.clone();
        cfg.seed = *seed;
        let safe = cross_validate_ordered(&cfg, corpus, k, *seed, ResampleOrdering::WithinTrainingFolds)?;
        let leaky = cross_validate_ordered(&cfg, corpus, k, *seed, ResampleOrdering::BeforeSplit)?;
        rows.push(LeakageRow {
            seed: *seed,
            corpus_fingerprint: corpus.fingerprint(),
            safe_recall: safe.recall.mean,
            unsafe_recall: leaky.recall.mean,
            safe_f1: safe.f1.mean,
            unsafe_f1: leaky.f1.mean,
        });
    }
    let n = rows.len() as f64;
    Ok(LeakageReport {
        format: LEAKAGE_REPORT_FORMAT.to_string(),
        toolkit_version: crate::VERSION.to_string(),
        model: config.display_name(),
        k,
        safe_ordering: ResampleOrdering::WithinTrainingFolds.describe().to_string(),
        unsafe_ordering: ResampleOrdering::BeforeSplit.describe().to_string(),
        mean_safe_recall: rows.iter().map(|r| r.safe_recall).sum::<f64>() / n,
        mean_unsafe_recall: rows.iter().map(|r| r.unsafe_recall).sum::<f64>() / n,
        rows,
    })
}

impl LeakageReport {
    pub fn to_json(&self) -> Result<String> {
        to_pretty_json(self)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Resampling-order comparison: {} ({}-fold)", self.model, self.k);
        let _ = writeln!(out, "  safe:   {}", self.safe_ordering);
        let _ = writeln!(out, "  unsafe: {}", self.unsafe_ordering);
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>6}  {:>12}  {:>30}  {:>8}  {:>26}",
            "seed", "safe recall", "UNSAFE (before-split) recall", "safe F1", "UNSAFE (before-split) F1"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6}  {:>12.3}  {:>30.3}  {:>8.3}  {:>26.3}",
                r.seed, r.safe_recall, r.unsafe_recall, r.safe_f1, r.unsafe_f1
            );
        }
        let _ = writeln!(
            out,
            "\nmean minority recall: safe {:.3}, UNSAFE {:.3}",
            self.mean_safe_recall, self.mean_unsafe_recall
        );
        out
    }
}
