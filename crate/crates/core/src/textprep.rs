//! Tokenization and TF-IDF vectorization.
//!
//! For a document `d` and term `t`:
//!
//! ```text
//! tf(t, d)  = f(t, d) / sum over t' of f(t', d)
//! idf(t)    = ln(N / df(t))                    (raw)
//!           = ln((1 + N) / (1 + df(t))) + 1    (smoothed)
//! w(t, d)   = tf(t, d) * idf(t)
//! ```
//!
//! `N` is the number of fitting documents and `df(t)` the number of them
//! containing `t`. At transform time the tf denominator only counts tokens
//! that are in the fitted vocabulary, so an in-vocabulary document's tf
//! values sum to one and unseen tokens never contribute.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{FeatureMatrix, FeatureVector};

// Stripped from token edges only. Symbols commonly used as letter
// stand-ins (`@ $ * # % & + |`) are kept so `@kili` stays distinct from `kili`.
const EDGE_PUNCT: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']', '{', '}', '<', '>', '-', '_', '/', '\\', '`', '~',
    '^', '=', '«', '»', '“', '”', '‘', '’', '„', '…', '–', '—', '¡', '¿',
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerOptions {
    pub lowercase: bool,
    pub strip_edge_punctuation: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_edge_punctuation: true,
        }
    }
}

impl TokenizerOptions {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .filter_map(|raw| {
                let tok = if self.strip_edge_punctuation {
                    raw.trim_matches(|c| EDGE_PUNCT.contains(&c))
                } else {
                    raw
                };
                if tok.is_empty() {
                    None
                } else if self.lowercase {
                    Some(tok.to_lowercase())
                } else {
                    Some(tok.to_string())
                }
            })
            .collect()
    }
}

/// Lowercases, splits on whitespace and strips edge punctuation. Interior
/// punctuation and digits are kept: `mj1nga` and `m*inga` survive intact.
///
/// ```
/// assert_eq!(obfuscan::tokenize("Wewe ni Mjinga!"), ["wewe", "ni", "mjinga"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    TokenizerOptions::default().tokenize(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdfMode {
    #[default]
    Raw,
    Smoothed,
}

impl IdfMode {
    pub fn idf(self, n_docs: usize, df: usize) -> f64 {
        let (n, df) = (n_docs as f64, df as f64);
        match self {
            IdfMode::Raw => (n / df).ln(),
            IdfMode::Smoothed => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }
}

/// Sorted term list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_sorted(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfIdfFile", into = "TfIdfFile")]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    df: Vec<usize>,
    idf: Vec<f64>,
    n_docs: usize,
    mode: IdfMode,
}

impl TfIdfModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn mode(&self) -> IdfMode {
        self.mode
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocabulary.column(term).map(|c| self.idf[c])
    }

    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut total = 0usize;
        for tok in tokens {
            if let Some(c) = self.vocabulary.column(tok.as_ref()) {
                *counts.entry(c).or_default() += 1;
                total += 1;
            }
        }
        let entries = counts
            .into_iter()
            .map(|(c, f)| (c, (f as f64 / total as f64) * self.idf[c]))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        FeatureVector::from_sorted_unchecked(self.dim(), entries)
    }

    pub fn transform_all<S: AsRef<str>>(&self, docs: &[Vec<S>]) -> FeatureMatrix {
        let rows = docs.iter().map(|d| self.transform(d)).collect();
        FeatureMatrix::new(self.dim(), rows).expect("rows built with model dimension")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
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

/// Fits vocabulary and document frequencies on already tokenized documents.
pub fn fit_tfidf<S: AsRef<str>>(docs: &[Vec<S>], mode: IdfMode) -> Result<TfIdfModel> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot fit TF-IDF on zero documents"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    let n_docs = docs.len();
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let df: Vec<usize> = df.into_values().collect();
    let idf = df.iter().map(|&d| mode.idf(n_docs, d)).collect();
    Ok(TfIdfModel {
        vocabulary: Vocabulary::from_sorted(terms),
        df,
        idf,
        n_docs,
        mode,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfIdfFile {
    n_docs: usize,
    mode: IdfMode,
    terms: Vec<TermEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    term: String,
    df: usize,
    idf: f64,
}

impl From<TfIdfModel> for TfIdfFile {
    fn from(m: TfIdfModel) -> Self {
        let terms = m
            .vocabulary
            .terms
            .into_iter()
            .zip(m.df)
            .zip(m.idf)
            .map(|((term, df), idf)| TermEntry { term, df, idf })
            .collect();
        TfIdfFile {
            n_docs: m.n_docs,
            mode: m.mode,
            terms,
        }
    }
}

impl TryFrom<TfIdfFile> for TfIdfModel {
    type Error = String;

    fn try_from(f: TfIdfFile) -> std::result::Result<Self, String> {
        if f.terms.windows(2).any(|w| w[0].term >= w[1].term) {
            return Err("terms must be strictly sorted".into());
        }
        let mut terms = Vec::with_capacity(f.terms.len());
        let mut df = Vec::with_capacity(f.terms.len());
        let mut idf = Vec::with_capacity(f.terms.len());
        for e in f.terms {
            if e.df == 0 || e.df > f.n_docs {
                return Err(format!("term `{}` has df {} outside 1..={}", e.term, e.df, f.n_docs));
            }
            if !e.idf.is_finite() || e.idf < 0.0 {
                return Err(format!("term `{}` has invalid idf {}", e.term, e.idf));
            }
            terms.push(e.term);
            df.push(e.df);
            idf.push(e.idf);
        }
        Ok(TfIdfModel {
            vocabulary: Vocabulary::from_sorted(terms),
            df,
            idf,
            n_docs: f.n_docs,
            mode: f.mode,
        })
    }
}
