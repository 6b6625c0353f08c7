//! Independent reference implementations and random generators shared by
//! the integration and acceptance tests. Nothing here calls into the code
//! under test except to build inputs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use obfuscan::corpus::FoldPlan;
use obfuscan::models::{DecisionTreeModel, RandomForestModel};
use obfuscan::resample::ResampledSet;
use obfuscan::{ConfusionMatrix, FeatureMatrix, FeatureVector, Label, TfIdfModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Term weights straight from the definitions: `tf = count / doc length`,
/// `idf = ln(N / df)`, weight `tf * idf`. Keyed by term, zeros omitted.
pub fn tfidf_oracle(docs: &[Vec<String>]) -> Vec<BTreeMap<String, f64>> {
    let n = docs.len() as f64;
    docs.iter()
        .map(|doc| {
            let mut out = BTreeMap::new();
            for term in doc {
                if out.contains_key(term) {
                    continue;
                }
                let count = doc.iter().filter(|t| *t == term).count() as f64;
                let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
                let w = count / doc.len() as f64 * (n / df).ln();
                if w != 0.0 {
                    out.insert(term.clone(), w);
                }
            }
            out
        })
        .collect()
}

/// Largest relative error between the library vectors and the oracle,
/// failing outright on any support mismatch.
pub fn tfidf_max_rel_error(model: &TfIdfModel, docs: &[Vec<String>]) -> Result<f64, String> {
    let expected = tfidf_oracle(docs);
    let mut worst: f64 = 0.0;
    for (d, (doc, want)) in docs.iter().zip(&expected).enumerate() {
        let got = model.transform(doc);
        let got: BTreeMap<String, f64> = got
            .iter()
            .map(|(c, v)| (model.vocabulary().term(c).to_string(), v))
            .collect();
        if got.keys().collect::<Vec<_>>() != want.keys().collect::<Vec<_>>() {
            return Err(format!("doc {d}: support {:?} != {:?}", got.keys(), want.keys()));
        }
        for (t, w) in want {
            worst = worst.max(((got[t] - w) / w).abs());
        }
    }
    Ok(worst)
}

/// A small corpus of token lists over a tiny alphabet so terms repeat.
pub fn random_token_docs(r: &mut impl Rng, max_docs: usize) -> Vec<Vec<String>> {
    const WORDS: [&str; 8] = ["a", "b", "c", "dd", "ee", "f1", "g@", "hh"];
    let n = r.gen_range(1..=max_docs);
    (0..n)
        .map(|_| {
            let len = r.gen_range(1..=8);
            (0..len)
                .map(|_| WORDS[r.gen_range(0..WORDS.len())].to_string())
                .collect()
        })
        .collect()
}

pub struct MetricOracle {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics from the confusion counts, with F1 taken from the count form
/// `2tp / (2tp + fp + fn)` rather than the harmonic mean.
pub fn metric_oracle(cm: &ConfusionMatrix) -> MetricOracle {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    MetricOracle {
        accuracy: div(tp + tn, tp + tn + fp + fn_),
        precision: div(tp, tp + fp),
        recall: div(tp, tp + fn_),
        f1: div(2.0 * tp, 2.0 * tp + fp + fn_),
    }
}

pub fn random_confusion(r: &mut impl Rng) -> ConfusionMatrix {
    // Small counts hit the zero-denominator cases often.
    let mut draw = || if r.gen_bool(0.2) { 0 } else { r.gen_range(0..50) };
    let mut cm = ConfusionMatrix {
        tp: draw(),
        tn: draw(),
        fp: draw(),
        fn_: draw(),
    };
    if cm.total() == 0 {
        cm.tn = 1;
    }
    cm
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random non-negative sparse-ish rows with an imbalanced label split.
pub fn random_imbalanced(r: &mut impl Rng) -> (FeatureMatrix, Vec<Label>) {
    let dim = r.gen_range(1..=6);
    let n_min = r.gen_range(1..=8);
    let n_maj = n_min + r.gen_range(1..=12);
    let minority = if r.gen_bool(0.5) {
        Label::Plain
    } else {
        Label::Obfuscated
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (count, label) in [(n_maj, minority.flip()), (n_min, minority)] {
        for _ in 0..count {
            let dense: Vec<f64> = (0..dim)
                .map(|_| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(0.0..3.0) })
                .collect();
            rows.push(dense);
            labels.push(label);
        }
    }
    // Interleave so minority rows are not all at the end.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.gen_range(0..=i));
    }
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    (FeatureMatrix::from_dense_rows(&rows).unwrap(), labels)
}

/// Brute-force check of a SMOTE output: originals kept in place, every
/// synthetic row on the segment between two distinct-index minority rows
/// with the neighbour among the base's k nearest, and counts matching
/// `ceil(ratio * majority) - minority`.
pub fn check_smote(x: &FeatureMatrix, y: &[Label], out: &ResampledSet, k: usize, ratio: f64) -> Result<(), String> {
    let n = y.len();
    let count = |l: Label| y.iter().filter(|&&v| v == l).count();
    let minority = if count(Label::Plain) < count(Label::Obfuscated) {
        Label::Plain
    } else {
        Label::Obfuscated
    };
    let (n_min, n_maj) = (count(minority), count(minority.flip()));
    let target = ((ratio * n_maj as f64) - 1e-9).ceil().max(0.0) as usize;
    let want_new = target.saturating_sub(n_min);
    if out.features.n_rows() != n + want_new || out.labels.len() != n + want_new {
        return Err(format!("expected {} rows, got {}", n + want_new, out.features.n_rows()));
    }
    for (i, &label) in y.iter().enumerate() {
        if out.features.row(i) != x.row(i) || out.labels[i] != label || out.synthetic_flags[i] {
            return Err(format!("original row {i} altered"));
        }
    }
    let min_ids: Vec<usize> = (0..n).filter(|&i| y[i] == minority).collect();
    for s in 0..want_new {
        let row = out.features.row(n + s).to_dense();
        let o = out.origins[s];
        if out.labels[n + s] != minority || !out.synthetic_flags[n + s] {
            return Err(format!("synthetic row {s} mislabelled"));
        }
        if !(0.0..=1.0).contains(&o.lambda) {
            return Err(format!("lambda {} out of range", o.lambda));
        }
        if y[o.base] != minority || y[o.neighbor] != minority {
            return Err(format!("synthetic row {s} built from a majority row"));
        }
        let (a, b) = (x.row(o.base).to_dense(), x.row(o.neighbor).to_dense());
        for c in 0..a.len() {
            let expect = a[c] + o.lambda * (b[c] - a[c]);
            if (row[c] - expect).abs() > 1e-12 || row[c] < a[c].min(b[c]) || row[c] > a[c].max(b[c]) {
                return Err(format!("synthetic row {s} col {c}: {} off segment ({expect})", row[c]));
            }
        }
        if min_ids.len() > 1 {
            if o.base == o.neighbor {
                return Err(format!("synthetic row {s} interpolates a row with itself"));
            }
            // Brute-force kNN: the neighbour must be no farther than the
            // k-th nearest other minority row.
            let dist = |i: usize| -> f64 {
                let (p, q) = (x.row(o.base).to_dense(), x.row(i).to_dense());
                p.iter().zip(&q).map(|(u, v)| (u - v) * (u - v)).sum()
            };
            let mut ds: Vec<f64> = min_ids.iter().filter(|&&i| i != o.base).map(|&i| dist(i)).collect();
            ds.sort_by(f64::total_cmp);
            let kth = ds[k.min(ds.len()) - 1];
            if dist(o.neighbor) > kth {
                return Err(format!("synthetic row {s}: neighbour outside the {k} nearest"));
            }
        }
    }
    Ok(())
}

/// Central finite-difference gradient of `f` at `w`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut p = w.to_vec();
            let mut m = w.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Independent mean log-loss plus `l2/2 |w|^2`, bias unpenalised.
/// `params` is `weights ++ [bias]`.
pub fn logistic_objective(x: &[Vec<f64>], y: &[f64], params: &[f64], l2: f64) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    let mut total = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
        let p = 1.0 / (1.0 + (-z).exp());
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    total / x.len() as f64 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Checks that the fold plan is a partition, that fold sizes differ by at
/// most one within each class, and that fold sizes are balanced.
pub fn check_fold_plan(plan: &FoldPlan, labels: &[Label]) -> Result<(), String> {
    let k = plan.k;
    let mut seen = vec![0usize; labels.len()];
    for f in 0..k {
        for i in plan.test_ids(f) {
            seen[i] += 1;
        }
        let train: BTreeSet<usize> = plan.train_ids(f).into_iter().collect();
        let test: BTreeSet<usize> = plan.test_ids(f).into_iter().collect();
        if !train.is_disjoint(&test) || train.len() + test.len() != labels.len() {
            return Err(format!("fold {f}: train/test not complementary"));
        }
    }
    if let Some(i) = seen.iter().position(|&c| c != 1) {
        return Err(format!("document {i} tested {} times", seen[i]));
    }
    for l in Label::ALL {
        let per_fold: Vec<usize> = (0..k)
            .map(|f| plan.test_ids(f).iter().filter(|&&i| labels[i] == l).count())
            .collect();
        let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("class {l}: per-fold counts {per_fold:?}"));
        }
    }
    Ok(())
}

/// Every point of `{0, .., levels-1}^dim`, scaled by `step`, capped at
/// `limit` points.
pub fn grid(dim: usize, levels: usize, step: f64, limit: usize) -> Vec<FeatureVector> {
    let total = levels.pow(dim as u32).min(limit);
    (0..total)
        .map(|mut code| {
            let dense: Vec<f64> = (0..dim)
                .map(|_| {
                    let v = (code % levels) as f64 * step;
                    code /= levels;
                    v
                })
                .collect();
            FeatureVector::from_dense(&dense).unwrap()
        })
        .collect()
}

pub fn forest_tree_mismatches(forest: &RandomForestModel, tree: &DecisionTreeModel, inputs: &[FeatureVector]) -> usize {
    inputs.iter().filter(|x| forest.predict(x) != tree.predict(x)).count()
}

/// True when no two rows with identical feature vectors carry different
/// labels, which is what exact memorization requires.
pub fn is_conflict_free(x: &FeatureMatrix, y: &[Label]) -> bool {
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            if y[i] != y[j] && x.row(i) == x.row(j) {
                return false;
            }
        }
    }
    true
}
