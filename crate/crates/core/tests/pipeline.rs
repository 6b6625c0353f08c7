mod common;

use std::collections::HashSet;
use std::sync::Mutex;

use common::*;
use obfuscan::eval::cross_validate_with;
use obfuscan::models::{LogisticParams, SvmParams, TreeParams};
use obfuscan::pipeline::{pipeline_from_json, pipeline_to_json};
use obfuscan::synth::{default_lexicon, generate_documents};
use obfuscan::{
    cross_validate, fit_pipeline, generate_synthetic_corpus, load_corpus, load_pipeline, predict_pipeline, save_corpus,
    save_pipeline, tokenize, CorpusFormat, Error, Label, LabeledCorpus, ModelSpec, PipelineConfig, SmoteParams,
    SynthConfig,
};
use rand::Rng;

fn tree() -> ModelSpec {
    ModelSpec::DecisionTree(TreeParams::default())
}

fn disjoint_corpus() -> LabeledCorpus {
    LabeledCorpus::new([
        ("habari yako", Label::Plain),
        ("karibu sana", Label::Plain),
        ("asante rafiki", Label::Plain),
        ("habari za asubuhi", Label::Plain),
        ("m.j.1.n.g.a", Label::Obfuscated),
        ("p@mb@v@", Label::Obfuscated),
        ("j1nga k@bisa", Label::Obfuscated),
        ("w3w3 p@mb@v@", Label::Obfuscated),
    ])
    .unwrap()
}

#[test]
fn disjoint_vocabulary_tree_fits_training_data() {
    let corpus = disjoint_corpus();
    let p = fit_pipeline(&PipelineConfig::new(tree(), 0), &corpus).unwrap();
    for d in corpus.documents() {
        assert_eq!(predict_pipeline(&p, &d.text).label, d.label);
    }
}

#[test]
fn smote_on_balanced_data_changes_nothing() {
    let corpus = disjoint_corpus();
    for model in [tree(), ModelSpec::LogisticRegression(LogisticParams::default())] {
        let plain = fit_pipeline(&PipelineConfig::new(model, 3), &corpus).unwrap();
        let smoted = fit_pipeline(
            &PipelineConfig::new(model, 3).with_smote(SmoteParams::default()),
            &corpus,
        )
        .unwrap();
        assert_eq!(smoted.provenance.n_synthetic, 0);
        assert_eq!(plain.classifier, smoted.classifier);
    }
}

#[test]
fn single_class_corpus_is_rejected() {
    let corpus = LabeledCorpus::new([("a", Label::Plain), ("b", Label::Plain)]).unwrap();
    assert!(fit_pipeline(&PipelineConfig::new(tree(), 0), &corpus).is_err());
}

#[test]
fn unseen_text_with_zero_linear_model_is_plain() {
    let corpus = disjoint_corpus();
    let config = PipelineConfig::new(
        ModelSpec::LogisticRegression(LogisticParams {
            epochs: 0,
            ..Default::default()
        }),
        0,
    );
    let p = fit_pipeline(&config, &corpus).unwrap();
    let pred = predict_pipeline(&p, "maneno mapya kabisa");
    assert_eq!(pred.label, Label::Plain);
    assert_eq!(pred.score, Some(0.0));
}

fn random_text(r: &mut impl Rng) -> String {
    const ALPHABET: &[char] = &[
        'a', 'e', 'i', 'o', 'u', 'm', 'j', 'n', 'g', '1', '3', '@', '.', ' ', 'K',
    ];
    let len = r.gen_range(0..30);
    (0..len).map(|_| ALPHABET[r.gen_range(0..ALPHABET.len())]).collect()
}

#[test]
fn save_load_round_trip_preserves_predictions() {
    let corpus = generate_synthetic_corpus(&SynthConfig {
        n_docs: 60,
        ..SynthConfig::with_seed(2)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(8);
    let mut texts: Vec<String> = (0..100).map(|_| random_text(&mut r)).collect();
    texts.extend(corpus.texts().map(String::from));
    for config in PipelineConfig::defaults(4) {
        let p = fit_pipeline(&config, &corpus).unwrap();
        let path = dir.path().join("p.json");
        save_pipeline(&p, &path).unwrap();
        let q = load_pipeline(&path).unwrap();
        assert_eq!(p, q, "{}", config.display_name());
        for t in &texts {
            let (a, b) = (predict_pipeline(&p, t), predict_pipeline(&q, t));
            assert_eq!(a.label, b.label);
            assert_eq!(a.score.map(f64::to_bits), b.score.map(f64::to_bits));
        }
    }
}

#[test]
fn corrupted_and_future_pipeline_files_are_rejected() {
    let p = fit_pipeline(
        &PipelineConfig::new(ModelSpec::LinearSvm(SvmParams::default()), 0),
        &disjoint_corpus(),
    )
    .unwrap();
    let json = pipeline_to_json(&p).unwrap();

    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["payload"]["classifier"]["model"]["bias"] = serde_json::json!(42.0);
    assert!(matches!(pipeline_from_json(&v.to_string()), Err(Error::Checksum)));

    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["format_version"] = serde_json::json!(99);
    let err = pipeline_from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("unsupported version"), "{err}");

    assert!(pipeline_from_json(&json[..json.len() / 2]).is_err());
}

#[test]
fn training_documents_are_recalled_by_the_unbounded_tree() {
    let corpus = generate_synthetic_corpus(&SynthConfig::with_seed(42)).unwrap();
    let p = fit_pipeline(&PipelineConfig::new(tree(), 42), &corpus).unwrap();
    let x = p.tfidf.transform_all(&corpus.texts().map(tokenize).collect::<Vec<_>>());
    assert!(is_conflict_free(&x, &corpus.labels()));
    for d in corpus.documents() {
        assert_eq!(predict_pipeline(&p, &d.text).label, d.label, "{}", d.text);
    }
}

#[test]
fn cross_validation_fits_only_on_training_documents() {
    let corpus = generate_synthetic_corpus(&SynthConfig {
        n_docs: 100,
        ..SynthConfig::with_seed(6)
    })
    .unwrap();
    let config = PipelineConfig::new(tree(), 6).with_smote(SmoteParams::default());
    let seen = Mutex::new(Vec::new());
    let (plan, folds) = cross_validate_with(&corpus, 5, 6, |fold, train_ids, train| {
        let test: HashSet<usize> = (0..corpus.len()).filter(|i| !train_ids.contains(i)).collect();
        assert_eq!(test, plan_test(&corpus, fold));
        let p = fit_pipeline(&config, train)?;
        // The vocabulary holds only tokens from the training documents.
        let train_tokens: HashSet<String> = train.texts().flat_map(tokenize).collect();
        for term in p.tfidf.vocabulary().terms() {
            assert!(
                train_tokens.contains(term),
                "fold {fold}: `{term}` not in training data"
            );
        }
        seen.lock().unwrap().push((fold, train_ids.to_vec()));
        Ok((p.clone(), p.provenance.n_synthetic))
    })
    .unwrap();
    assert_eq!(folds.len(), 5);
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), 5);
    for (fold, train_ids) in seen {
        assert!(train_ids.iter().all(|i| !plan.test_ids(fold).contains(i)));
    }
}

fn plan_test(corpus: &LabeledCorpus, fold: usize) -> HashSet<usize> {
    obfuscan::stratified_k_fold(corpus, 5, 6)
        .unwrap()
        .test_ids(fold)
        .into_iter()
        .collect()
}

#[test]
fn majority_constant_classifier_scores_the_majority_fraction() {
    let records: Vec<(String, Label)> = (0..100)
        .map(|i| (format!("doc{i}"), Label::from_bool(i % 10 >= 7)))
        .collect();
    let corpus = LabeledCorpus::new(records).unwrap();
    let (_, folds) = cross_validate_with(&corpus, 5, 1, |_, _, _| Ok((|_: &str| Label::Plain, 0))).unwrap();
    let mean = folds.iter().map(|f| f.test.accuracy).sum::<f64>() / folds.len() as f64;
    assert_eq!(mean, 0.7);
    assert!(folds.iter().all(|f| f.test.accuracy == 0.7));
}

#[test]
fn cross_validation_is_deterministic_and_means_recompute() {
    let corpus = generate_synthetic_corpus(&SynthConfig {
        n_docs: 80,
        ..SynthConfig::with_seed(3)
    })
    .unwrap();
    for config in PipelineConfig::defaults(3) {
        let a = cross_validate(&config, &corpus, 5, 3).unwrap();
        assert_eq!(a, cross_validate(&config, &corpus, 5, 3).unwrap());
        let mean = a.folds.iter().map(|f| f.test.f1).sum::<f64>() / 5.0;
        assert_eq!(a.f1.mean, mean);
        let tested: usize = a.folds.iter().map(|f| f.test.confusion.total()).sum();
        assert_eq!(tested, corpus.len());
    }
}

#[test]
fn synthetic_corpus_invariants() {
    for (n, frac, ones) in [(200, 0.3, 60), (10, 0.5, 5), (7, 0.5, 4)] {
        let config = SynthConfig {
            n_docs: n,
            obfuscated_fraction: frac,
            ..SynthConfig::with_seed(n as u64)
        };
        let docs = generate_documents(&config).unwrap();
        assert_eq!(docs.iter().filter(|d| d.label == Label::Obfuscated).count(), ones);
        let lexicon: HashSet<String> = default_lexicon().into_iter().collect();
        for d in &docs {
            assert!(lexicon.contains(&d.source));
            match d.label {
                Label::Obfuscated => assert_ne!(d.text, d.source),
                Label::Plain => {
                    let mut got: Vec<&str> = d.text.split_whitespace().collect();
                    let mut want: Vec<&str> = d.source.split_whitespace().collect();
                    got.sort();
                    want.sort();
                    assert_eq!(got, want, "plain document is not a reordering of its source");
                }
            }
        }
    }
}

#[test]
fn generated_corpora_reload_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    for format in [CorpusFormat::Csv, CorpusFormat::Jsonl] {
        let a = dir.path().join(format!("a.{}", format.extension()));
        let b = dir.path().join(format!("b.{}", format.extension()));
        save_corpus(
            &generate_synthetic_corpus(&SynthConfig::with_seed(9)).unwrap(),
            &a,
            format,
        )
        .unwrap();
        save_corpus(
            &generate_synthetic_corpus(&SynthConfig::with_seed(9)).unwrap(),
            &b,
            format,
        )
        .unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let loaded = load_corpus(&a, format).unwrap();
        assert_eq!(loaded, generate_synthetic_corpus(&SynthConfig::with_seed(9)).unwrap());
    }
}
