//! Sparse non-negative feature vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sparse vector with strictly increasing column indices.
///
/// Stored weights are finite and non-zero. TF-IDF and SMOTE only ever
/// produce non-negative weights; that is checked where those vectors are
/// built, not here, so linear-model tests can use signed inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from `(column, weight)` pairs in any order. Zero
    /// weights are dropped; repeated columns and non-finite weights are
    /// rejected.
    pub fn from_entries(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by_key(|&(c, _)| c);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("column {} given twice", w[0].0)));
            }
        }
        for &(c, w) in &entries {
            if c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c + 1,
                });
            }
            if !w.is_finite() {
                return Err(Error::invalid(format!("non-finite weight at column {c}")));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_entries(values.len(), values.iter().copied().enumerate().collect())
    }

    // Caller guarantees sorted, unique, in-range, finite, non-zero.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(c, w)| c < dim && w != 0.0 && w.is_finite()));
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, w) in &self.entries {
            out[c] = w;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_non_negative(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w >= 0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, w)| w * dense[c]).sum()
    }

    pub fn squared_distance(&self, other: &FeatureVector) -> f64 {
        merge(self, other).map(|(_, a, b)| (a - b) * (a - b)).sum()
    }

    pub fn scaled(&self, factor: f64) -> FeatureVector {
        let entries = self
            .entries
            .iter()
            .map(|&(c, w)| (c, w * factor))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        Self::from_sorted_unchecked(self.dim, entries)
    }
}

/// Walks the union of stored columns of `a` and `b` in column order,
/// yielding `(column, a_value, b_value)`.
pub(crate) fn merge<'a>(a: &'a FeatureVector, b: &'a FeatureVector) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        let ea = a.entries.get(i);
        let eb = b.entries.get(j);
        match (ea, eb) {
            (None, None) => None,
            (Some(&(c, w)), None) => {
                i += 1;
                Some((c, w, 0.0))
            }
            (None, Some(&(c, w))) => {
                j += 1;
                Some((c, 0.0, w))
            }
            (Some(&(ca, wa)), Some(&(cb, wb))) => {
                if ca == cb {
                    i += 1;
                    j += 1;
                    Some((ca, wa, wb))
                } else if ca < cb {
                    i += 1;
                    Some((ca, wa, 0.0))
                } else {
                    j += 1;
                    Some((cb, 0.0, wb))
                }
            }
        }
    })
}

/// Rows of equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, rows: Vec<FeatureVector>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim,
            });
        }
        Ok(Self { dim, rows })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| FeatureVector::from_dense(r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureVector {
        &self.rows[i]
    }

    pub fn select(&self, ids: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            dim: self.dim,
            rows: ids.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn push(&mut self, row: FeatureVector) -> Result<()> {
        if row.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.dim,
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn into_rows(self) -> Vec<FeatureVector> {
        self.rows
    }
}
