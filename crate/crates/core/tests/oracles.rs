mod common;

use common::*;
use obfuscan::corpus::stratified_folds;
use obfuscan::models::logistic::loss_and_gradient;
use obfuscan::models::{
    train_forest, train_linear_svm, train_tree, ForestParams, LinearSvmModel, LogisticModel, LogisticParams,
    MaxFeatures, SvmParams, TreeParams,
};
use obfuscan::{
    compute_metrics, fit_tfidf, grid_search, smote_balance, ConfusionMatrix, FeatureMatrix, FeatureVector, IdfMode,
    Label, LabeledCorpus, ModelSpec, PipelineConfig, SmoteConfig, TrainedClassifier,
};
use proptest::prelude::*;
use rand::Rng;

fn labels(bits: &[u8]) -> Vec<Label> {
    bits.iter().map(|&b| Label::try_from(b).unwrap()).collect()
}

#[test]
fn tfidf_matches_brute_force() {
    let mut r = rng(11);
    for _ in 0..200 {
        let docs = random_token_docs(&mut r, 10);
        let Ok(model) = fit_tfidf(&docs, IdfMode::Raw) else {
            continue;
        };
        let err = tfidf_max_rel_error(&model, &docs).unwrap();
        assert!(err < 1e-12, "relative error {err}");
    }
}

#[test]
fn smote_output_matches_geometry_oracle() {
    let mut r = rng(5);
    for _ in 0..200 {
        let (x, y) = random_imbalanced(&mut r);
        let k = r.gen_range(1..=6);
        let ratio = [0.5, 0.8, 1.0][r.gen_range(0..3)];
        let config = SmoteConfig {
            k_neighbors: k,
            target_ratio: ratio,
            seed: r.gen(),
        };
        let out = smote_balance(&x, &y, &config).unwrap();
        check_smote(&x, &y, &out, k, ratio).unwrap();
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut r = rng(3);
    for _ in 0..20 {
        let (n, d) = (5, 3);
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect())
            .collect();
        let mut bits: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        bits[0] = 0;
        bits[1] = 1;
        let y = labels(&bits);
        let t: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let params: Vec<f64> = (0..=d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let l2 = [0.0, 1e-4, 0.5][r.gen_range(0..3)];

        let x = FeatureMatrix::from_dense_rows(&dense).unwrap();
        let (loss, g, gb) = loss_and_gradient(&x, &y, &params[..d], params[d], l2);
        let fd = finite_difference(|p| logistic_objective(&dense, &t, p, l2), &params, 1e-5);
        let analytic: Vec<f64> = g.iter().copied().chain([gb]).collect();

        let diff: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        assert!(diff / scale < 1e-6, "relative gradient error {}", diff / scale);
        assert!(rel_close(loss, logistic_objective(&dense, &t, &params, l2), 1e-12));
    }
}

/// Brute-force search for a separating line over a grid of directions and
/// offsets.
fn separable_by_search(x: &[[f64; 2]], y: &[Label]) -> bool {
    (0..360).any(|deg| {
        let a = (deg as f64).to_radians();
        let (c, s) = (a.cos(), a.sin());
        (-100..=100).any(|bi| {
            let b = bi as f64 * 0.05;
            x.iter()
                .zip(y)
                .all(|(p, &l)| ((c * p[0] + s * p[1] + b) > 0.0) == (l == Label::Obfuscated))
        })
    })
}

fn blobs(seed: u64) -> (Vec<[f64; 2]>, Vec<Label>) {
    let mut r = rng(seed);
    let mut pts = Vec::new();
    let mut ys = Vec::new();
    for i in 0..24 {
        let (cx, cy, l) = if i % 2 == 0 {
            (3.0, 0.5, Label::Obfuscated)
        } else {
            (0.5, 3.0, Label::Plain)
        };
        pts.push([cx + r.gen_range(-0.4..0.4), cy + r.gen_range(-0.4..0.4)]);
        ys.push(l);
    }
    (pts, ys)
}

#[test]
fn svm_separates_separable_blobs() {
    for seed in 0..5 {
        let (pts, y) = blobs(seed);
        assert!(separable_by_search(&pts, &y));
        let x = FeatureMatrix::from_dense_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let clf = TrainedClassifier::LinearSvm(train_linear_svm(&x, &y, &SvmParams::default(), seed).unwrap());
        assert_eq!(clf.predict_all(&x).unwrap(), y, "seed {seed}");
    }
}

#[test]
fn svm_label_flip_negates_the_model() {
    let (pts, y) = blobs(9);
    let x = FeatureMatrix::from_dense_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
    let flipped: Vec<Label> = y.iter().map(|l| l.flip()).collect();
    let a = train_linear_svm(&x, &y, &SvmParams::default(), 4).unwrap();
    let b = train_linear_svm(&x, &flipped, &SvmParams::default(), 4).unwrap();
    for (u, v) in a.weights.iter().zip(&b.weights) {
        assert_eq!(*u, -*v);
    }
    assert_eq!(a.bias, -b.bias);
    let ca = TrainedClassifier::LinearSvm(a);
    let cb = TrainedClassifier::LinearSvm(b);
    for row in x.rows() {
        let (sa, sb) = (ca.decision_score(row).unwrap(), cb.decision_score(row).unwrap());
        assert_eq!(sa, -sb);
        if sa != 0.0 {
            assert_eq!(ca.predict(row).unwrap(), cb.predict(row).unwrap().flip());
        }
    }
}

#[test]
fn one_tree_forest_equals_tree_on_a_grid() {
    let mut r = rng(21);
    for trial in 0..10 {
        let dim = 3;
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..dim).map(|_| r.gen_range(0..9) as f64 * 0.25).collect())
            .collect();
        let mut y: Vec<Label> = (0..30).map(|_| Label::from_bool(r.gen_bool(0.5))).collect();
        y[0] = Label::Plain;
        y[1] = Label::Obfuscated;
        let x = FeatureMatrix::from_dense_rows(&rows).unwrap();
        let max_depth = [None, Some(2)][trial % 2];
        let tree = train_tree(
            &x,
            &y,
            &TreeParams {
                max_depth,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            max_depth,
            ..ForestParams::default()
        };
        let forest = train_forest(&x, &y, &params, trial as u64).unwrap();
        let inputs = grid(dim, 10, 0.25, 1000);
        assert_eq!(inputs.len(), 1000);
        assert_eq!(forest_tree_mismatches(&forest, &tree, &inputs), 0);
    }
}

/// Best training accuracy of any depth-1 tree, by exhaustive search.
fn best_stump_accuracy(x: &FeatureMatrix, y: &[Label]) -> f64 {
    let n = y.len() as f64;
    let mut best = 0.0f64;
    for f in 0..x.dim() {
        let mut vals: Vec<f64> = x.rows().iter().map(|r| r.get(f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut cuts: Vec<f64> = vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        cuts.push(f64::INFINITY);
        for t in cuts {
            for (left, right) in [
                (Label::Plain, Label::Obfuscated),
                (Label::Obfuscated, Label::Plain),
                (Label::Plain, Label::Plain),
                (Label::Obfuscated, Label::Obfuscated),
            ] {
                let ok = x
                    .rows()
                    .iter()
                    .zip(y)
                    .filter(|(r, &l)| (if r.get(f) <= t { left } else { right }) == l)
                    .count();
                best = best.max(ok as f64 / n);
            }
        }
    }
    best
}

#[test]
fn grid_search_prefers_the_deeper_tree_when_a_stump_cannot_fit() {
    // Label 1 iff exactly one of `x`, `y` is present.
    let mut records = Vec::new();
    for _ in 0..10 {
        records.push(("x", Label::Obfuscated));
        records.push(("y", Label::Obfuscated));
        records.push(("x y", Label::Plain));
        records.push(("q", Label::Plain));
    }
    let corpus = LabeledCorpus::new(records).unwrap();

    let tokens: Vec<Vec<String>> = corpus.texts().map(obfuscan::tokenize).collect();
    let tfidf = fit_tfidf(&tokens, IdfMode::Raw).unwrap();
    let x = tfidf.transform_all(&tokens);
    assert!(best_stump_accuracy(&x, &corpus.labels()) < 1.0);

    let stump = PipelineConfig::new(
        ModelSpec::DecisionTree(TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        }),
        0,
    );
    let deep = PipelineConfig::new(ModelSpec::DecisionTree(TreeParams::default()), 0);
    let res = grid_search(&[stump, deep.clone()], &corpus, 5, 1).unwrap();
    assert_eq!(res.best_index, 1);
    assert_eq!(res.best_config(), &deep);
    assert_eq!(res.results[1].f1.mean, 1.0);
    assert!(res.results[0].f1.mean < 1.0);
}

#[test]
fn ten_document_fold_plan_enumeration() {
    // 6 plain, 4 obfuscated, k = 5: every fold holds 2 documents, and the
    // obfuscated ones land in four distinct folds.
    let y = labels(&[0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
    for seed in 0..50 {
        let plan = stratified_folds(&y, 5, seed).unwrap();
        check_fold_plan(&plan, &y).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        let mut ones: Vec<usize> = (6..10).map(|i| plan.assignments[i]).collect();
        ones.sort();
        ones.dedup();
        assert_eq!(ones.len(), 4);
    }
}

proptest! {
    #[test]
    fn metric_identities(tp in 0usize..60, tn in 0usize..60, fp in 0usize..60, fn_ in 0usize..60) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let cm = ConfusionMatrix { tp, tn, fp, fn_ };
        let m = compute_metrics(&cm).unwrap();
        let o = metric_oracle(&cm);
        prop_assert!(rel_close(m.accuracy, o.accuracy, 1e-12));
        prop_assert!(rel_close(m.precision, o.precision, 1e-12));
        prop_assert!(rel_close(m.recall, o.recall, 1e-12));
        prop_assert!(rel_close(m.f1, o.f1, 1e-12));
        if m.precision > 0.0 && m.recall > 0.0 {
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
        }
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn fold_plans_partition_and_stratify(
        bits in proptest::collection::vec(0u8..2, 4..80),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        prop_assume!(bits.contains(&0) && bits.contains(&1) && k <= bits.len());
        let y = labels(&bits);
        let plan = stratified_folds(&y, k, seed).unwrap();
        prop_assert!(check_fold_plan(&plan, &y).is_ok(), "{:?}", check_fold_plan(&plan, &y));
        prop_assert_eq!(&plan, &stratified_folds(&y, k, seed).unwrap());
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn tfidf_invariants(seed in any::<u64>()) {
        let docs = random_token_docs(&mut rng(seed), 10);
        if let Ok(model) = fit_tfidf(&docs, IdfMode::Raw) {
            for d in &docs {
                let v = model.transform(d);
                prop_assert!(v.is_non_negative());
                prop_assert_eq!(v.dim(), model.dim());
            }
            for (&df, &idf) in model.df().iter().zip(model.idf()) {
                prop_assert!(df >= 1 && df <= docs.len());
                prop_assert!(idf >= 0.0);
            }
        }
    }

    #[test]
    fn smote_is_deterministic_and_on_segment(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = random_imbalanced(&mut r);
        let config = SmoteConfig { k_neighbors: 5, target_ratio: 1.0, seed };
        let a = smote_balance(&x, &y, &config).unwrap();
        prop_assert!(check_smote(&x, &y, &a, 5, 1.0).is_ok());
        prop_assert_eq!(a, smote_balance(&x, &y, &config).unwrap());
    }

    #[test]
    fn unbounded_tree_memorizes_conflict_free_data(
        rows in proptest::collection::vec(proptest::collection::vec(0u8..4, 3), 2..40),
        bits in proptest::collection::vec(0u8..2, 40),
    ) {
        let dense: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        // Identical rows share the label of their first occurrence.
        let mut y = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let first = rows.iter().position(|q| q == r).unwrap();
            y.push(if first == i { Label::try_from(bits[i]).unwrap() } else { y[first] });
        }
        let x = FeatureMatrix::from_dense_rows(&dense).unwrap();
        prop_assert!(is_conflict_free(&x, &y));
        let tree = train_tree(&x, &y, &TreeParams::default()).unwrap();
        for (row, &l) in x.rows().iter().zip(&y) {
            prop_assert_eq!(tree.predict(row), l);
        }
    }

    #[test]
    fn linear_labels_invariant_under_positive_scaling(
        w in proptest::collection::vec(-3.0f64..3.0, 3),
        b in -3.0f64..3.0,
        x in proptest::collection::vec(0.0f64..3.0, 3),
        scale in 0.01f64..100.0,
    ) {
        let model = |w: Vec<f64>, b: f64| TrainedClassifier::Logistic(LogisticModel {
            weights: w,
            bias: b,
            params: LogisticParams::default(),
            seed: 0,
        });
        let x = FeatureVector::from_dense(&x).unwrap();
        let base = model(w.clone(), b);
        let scaled = model(w.iter().map(|v| v * scale).collect(), b * scale);
        let s = base.decision_score(&x).unwrap();
        // Skip scores so close to zero that rounding can move them across it.
        prop_assume!(s.abs() > 1e-9);
        prop_assert_eq!(base.predict(&x).unwrap(), scaled.predict(&x).unwrap());
    }

    #[test]
    fn svm_with_any_seed_keeps_finite_weights(seed in any::<u64>()) {
        let (pts, y) = blobs(seed % 7);
        let x = FeatureMatrix::from_dense_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let m: LinearSvmModel = train_linear_svm(&x, &y, &SvmParams { lambda: 1e-2, epochs: 20 }, seed).unwrap();
        prop_assert!(m.weights.iter().all(|w| w.is_finite()) && m.bias.is_finite());
    }
}

#[test]
fn logistic_learns_the_one_dimensional_example() {
    let x = FeatureMatrix::from_dense_rows(&[vec![-1.0], vec![1.0]]).unwrap();
    let y = labels(&[0, 1]);
    let params = LogisticParams {
        l2: 0.0,
        ..LogisticParams::default()
    };
    let m = obfuscan::models::train_logistic(&x, &y, &params, 0).unwrap();
    assert!(m.weights[0] > 0.0);
    assert_eq!(TrainedClassifier::Logistic(m).predict_all(&x).unwrap(), y);
}
