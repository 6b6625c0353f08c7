//! Labelled document collections, dataset files and stratified fold plans.
//!
//! Two on-disk formats are supported, both UTF-8:
//!
//! * CSV with the header `text,label`, comma delimited, double-quote escaping;
//! * JSONL, one object per line with a string `text` and an integer `label`.
//!
//! Label `1` marks an obfuscated text, `0` a plain one.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seeded_rng;

/// Binary obfuscation label. `Obfuscated` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Plain = 0,
    Obfuscated = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Plain, Label::Obfuscated];

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Plain => Label::Obfuscated,
            Label::Obfuscated => Label::Plain,
        }
    }

    pub fn from_bool(positive: bool) -> Label {
        if positive {
            Label::Obfuscated
        } else {
            Label::Plain
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Plain),
            1 => Ok(Label::Obfuscated),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Plain),
            1 => Ok(Label::Obfuscated),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub text: String,
    pub label: Label,
}

/// An ordered, validated collection of documents.
///
/// Ids are always `0..len` in document order and no text is blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    documents: Vec<Document>,
    class_counts: [usize; 2],
}

impl LabeledCorpus {
    /// Builds a corpus from `(text, label)` pairs, assigning ids in order.
    pub fn new<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        let mut documents = Vec::new();
        let mut class_counts = [0usize; 2];
        for (id, (text, label)) in records.into_iter().enumerate() {
            let text = text.into();
            if text.trim().is_empty() {
                return Err(Error::invalid(format!("document {id} has empty text")));
            }
            class_counts[label.index()] += 1;
            documents.push(Document { id, text, label });
        }
        if documents.is_empty() {
            return Err(Error::invalid("zero records"));
        }
        Ok(Self {
            documents,
            class_counts,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.class_counts[label.index()]
    }

    pub fn class_counts(&self) -> [usize; 2] {
        self.class_counts
    }

    pub fn has_both_classes(&self) -> bool {
        self.class_counts.iter().all(|&c| c > 0)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    /// A new corpus holding the given documents, in the given order,
    /// re-numbered from zero.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        Self::new(ids.iter().map(|&i| {
            let d = &self.documents[i];
            (d.text.clone(), d.label)
        }))
    }

    /// SHA-256 over the ordered `(text, label)` pairs, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in &self.documents {
            h.update((d.text.len() as u64).to_le_bytes());
            h.update(d.text.as_bytes());
            h.update([d.label.as_u8()]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CorpusFormat::Csv => "csv",
            CorpusFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    text: String,
    label: i64,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    text: &'a str,
    label: u8,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Csv => read_csv(path, BufReader::new(file)),
        CorpusFormat::Jsonl => read_jsonl(path, BufReader::new(file)),
    }
}

fn record_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn validate_record(path: &Path, line: u64, raw: RawRecord) -> Result<(String, Label)> {
    let label = Label::try_from(raw.label).map_err(|m| record_error(path, line, m))?;
    if raw.text.trim().is_empty() {
        return Err(record_error(path, line, "empty text field"));
    }
    Ok((raw.text, label))
}

fn read_csv<R: std::io::Read>(path: &Path, reader: R) -> Result<LabeledCorpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .quote(b'"')
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| record_error(path, 1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "text" || &headers[1] != "label" {
        return Err(record_error(
            path,
            1,
            format!(
                "expected header `text,label`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            record_error(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let label_field = row[1].trim();
        let label: i64 = label_field
            .parse()
            .map_err(|_| record_error(path, line, format!("label `{label_field}` is not an integer")))?;
        records.push(validate_record(
            path,
            line,
            RawRecord {
                text: row[0].to_string(),
                label,
            },
        )?);
    }
    finish(path, records)
}

fn read_jsonl<R: BufRead>(path: &Path, reader: R) -> Result<LabeledCorpus> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| record_error(path, lineno, e.to_string()))?;
        records.push(validate_record(path, lineno, raw)?);
    }
    finish(path, records)
}

fn finish(path: &Path, records: Vec<(String, Label)>) -> Result<LabeledCorpus> {
    if records.is_empty() {
        return Err(Error::invalid(format!("{}: zero records", path.display())));
    }
    LabeledCorpus::new(records)
}

/// Serializes the corpus in `format`. Output loads back to an equal corpus.
pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, format: CorpusFormat, out: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<writer>", e);
    match format {
        CorpusFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
            for d in corpus.documents() {
                w.serialize(OutRecord {
                    text: &d.text,
                    label: d.label.as_u8(),
                })
                .map_err(|e| Error::Malformed(e.to_string()))?;
            }
            w.flush().map_err(io_err)?;
        }
        CorpusFormat::Jsonl => {
            let mut out = out;
            for d in corpus.documents() {
                let line = serde_json::to_string(&OutRecord {
                    text: &d.text,
                    label: d.label.as_u8(),
                })
                .map_err(|e| Error::Malformed(e.to_string()))?;
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn save_corpus(corpus: &LabeledCorpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(corpus, format, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Assignment of every document to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_ids(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified fold assignment over a label sequence.
///
/// Each class is shuffled with the seeded generator (class 0 first), then
/// the concatenation is dealt round-robin across folds with a single running
/// counter. Per-class fold counts and total fold sizes therefore each differ
/// by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > labels.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of documents ({})",
            labels.len()
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::invalid(
            "stratification needs at least one document of each class",
        ));
    }

    let mut rng = seeded_rng(seed);
    let mut assignments = vec![usize::MAX; labels.len()];
    let mut next = 0usize;
    for ids in by_class.iter_mut() {
        ids.shuffle(&mut rng);
        for &i in ids.iter() {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, assignments })
}

pub fn stratified_k_fold(corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<FoldPlan> {
    stratified_folds(&corpus.labels(), k, seed)
}
