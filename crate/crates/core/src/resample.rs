//! SMOTE oversampling of the minority class.
//!
//! A synthetic row is `x_i + lambda * (x_j - x_i)` where `x_i` is a minority
//! row, `x_j` one of its nearest minority neighbours and `lambda` is drawn
//! uniformly from `[0, 1]`. Resampling happens in feature space; there is no
//! synthetic text.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::sparse::{merge, FeatureMatrix, FeatureVector};

/// Resampling knobs without a seed; pipelines supply the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    pub target_ratio: f64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
        }
    }
}

impl SmoteParams {
    pub fn with_seed(self, seed: u64) -> SmoteConfig {
        SmoteConfig {
            k_neighbors: self.k_neighbors,
            target_ratio: self.target_ratio,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub target_ratio: f64,
    pub seed: u64,
}

impl SmoteConfig {
    pub fn new(seed: u64) -> Self {
        SmoteParams::default().with_seed(seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("smote k_neighbors must be at least 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "smote target_ratio must be in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Where a synthetic row came from. Indices are rows of the input matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSet {
    /// Original rows in input order, then synthetics.
    pub features: FeatureMatrix,
    pub labels: Vec<Label>,
    pub synthetic_flags: Vec<bool>,
    /// One entry per synthetic row, in output order.
    pub origins: Vec<SyntheticOrigin>,
    pub minority: Label,
    /// Set when the minority class had a single row and was duplicated
    /// instead of interpolated.
    pub duplicated_singleton: bool,
}

impl ResampledSet {
    pub fn n_synthetic(&self) -> usize {
        self.origins.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }
}

/// Number of synthetic rows needed so that minority / majority reaches
/// `target_ratio`: `ceil(target_ratio * majority) - minority`, floored at 0.
///
/// A 1e-9 slack absorbs representation error in products such as
/// `0.3 * 10`, which would otherwise round up to 4.
pub fn synthetic_count(minority: usize, majority: usize, target_ratio: f64) -> usize {
    let target = (target_ratio * majority as f64 - 1e-9).ceil();
    let target = if target < 0.0 { 0 } else { target as usize };
    target.saturating_sub(minority)
}

/// Componentwise `x_i + lambda * (x_j - x_i)`.
///
/// `lambda == 0` returns `x_i` and `lambda == 1` returns `x_j` exactly; every
/// component is kept within `[min(x_i, x_j), max(x_i, x_j)]`.
pub fn interpolate(x_i: &FeatureVector, x_j: &FeatureVector, lambda: f64) -> Result<FeatureVector> {
    if x_i.dim() != x_j.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_i.dim(),
            actual: x_j.dim(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let entries = merge(x_i, x_j)
        .map(|(c, a, b)| {
            let v = if lambda == 1.0 {
                b
            } else {
                (a + lambda * (b - a)).clamp(a.min(b), a.max(b))
            };
            (c, v)
        })
        .filter(|&(_, v)| v != 0.0)
        .collect();
    Ok(FeatureVector::from_sorted_unchecked(x_i.dim(), entries))
}

/// The `k` rows nearest to `query_index` by Euclidean distance, excluding
/// the query. `k` is clamped to `rows - 1`; ties go to the lower ordinal.
pub fn k_nearest_minority(query_index: usize, minority_rows: &[FeatureVector], k: usize) -> Result<Vec<usize>> {
    if minority_rows.len() < 2 {
        return Err(Error::invalid(
            "nearest-neighbour search needs at least 2 minority rows",
        ));
    }
    if query_index >= minority_rows.len() {
        return Err(Error::invalid(format!(
            "query row {query_index} out of range for {} rows",
            minority_rows.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let query = &minority_rows[query_index];
    let mut cands: Vec<(f64, usize)> = minority_rows
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query_index)
        .map(|(i, r)| (query.squared_distance(r), i))
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.truncate(k.min(minority_rows.len() - 1));
    Ok(cands.into_iter().map(|(_, i)| i).collect())
}

/// Oversamples the smaller class until it reaches `target_ratio` of the
/// larger one.
pub fn smote_balance(features: &FeatureMatrix, labels: &[Label], config: &SmoteConfig) -> Result<ResampledSet> {
    config.validate()?;
    if features.n_rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.n_rows(),
            labels.len()
        )));
    }
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::invalid("SMOTE needs samples of both classes"));
    }
    let minority = if counts[0] < counts[1] {
        Label::Plain
    } else {
        Label::Obfuscated
    };
    let n_min = counts[minority.index()];
    let n_maj = counts[minority.flip().index()];
    let n_new = synthetic_count(n_min, n_maj, config.target_ratio);

    let mut out = ResampledSet {
        features: features.clone(),
        labels: labels.to_vec(),
        synthetic_flags: vec![false; labels.len()],
        origins: Vec::with_capacity(n_new),
        minority,
        duplicated_singleton: false,
    };
    if n_new == 0 {
        return Ok(out);
    }

    let minority_ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();

    if minority_ids.len() == 1 {
        let only = minority_ids[0];
        for _ in 0..n_new {
            out.features.push(features.row(only).clone())?;
            out.origins.push(SyntheticOrigin {
                base: only,
                neighbor: only,
                lambda: 0.0,
            });
        }
        out.duplicated_singleton = true;
    } else {
        let minority_rows: Vec<FeatureVector> = minority_ids.iter().map(|&i| features.row(i).clone()).collect();
        let neighbors = (0..minority_rows.len())
            .map(|q| k_nearest_minority(q, &minority_rows, config.k_neighbors))
            .collect::<Result<Vec<_>>>()?;

        let mut rng = seeded_rng(config.seed);
        for _ in 0..n_new {
            let i = rng.gen_range(0..minority_rows.len());
            let nbrs = &neighbors[i];
            let j = nbrs[rng.gen_range(0..nbrs.len())];
            let lambda: f64 = rng.gen_range(0.0..=1.0);
            out.features
                .push(interpolate(&minority_rows[i], &minority_rows[j], lambda)?)?;
            out.origins.push(SyntheticOrigin {
                base: minority_ids[i],
                neighbor: minority_ids[j],
                lambda,
            });
        }
    }
    out.labels.extend(std::iter::repeat_n(minority, n_new));
    out.synthetic_flags.extend(std::iter::repeat_n(true, n_new));
    Ok(out)
}
