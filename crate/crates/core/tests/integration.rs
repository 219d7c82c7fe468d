//! Cross-module integration: the protocol's outputs are independent of
//! worker-thread count, and the full library pipeline holds together at
//! a small scale without the CLI layer.

use clq_core::corpus::{generate_synthetic_bilingual, Corpus, Document, Label};
use clq_core::dci;
use clq_core::evaluation::{run_protocol, ProtocolConfig};
use clq_core::learner::{
    cross_val_predictions, predict_hard, predict_soft, train, Loss, TrainConfig,
};
use clq_core::pivots::{select_pivots, PivotConfig, TranslationOracle};
use clq_core::quantifiers::{
    estimate_rates, AccQuantifier, CcQuantifier, Method, PoolQuantifier, PrevalenceEstimate,
};
use clq_core::vectorizer::{build_vocabulary, tfidf_vectorize};

struct Flat {
    labels: Vec<Label>,
}

impl PoolQuantifier for Flat {
    fn method(&self) -> Method {
        Method::Cc
    }

    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate {
        let p = doc_indices
            .iter()
            .filter(|&&i| self.labels[i].is_positive())
            .count() as f64
            / doc_indices.len() as f64;
        PrevalenceEstimate {
            p_pos: p,
            method: Method::Cc,
            unclipped: p,
            degenerate_rates: false,
        }
    }
}

fn label_pool(n: usize) -> Corpus {
    let docs = (0..n)
        .map(|i| Document {
            id: format!("d{i}"),
            terms: [("x".to_string(), 1u32)].into(),
        })
        .collect();
    let labels = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    Corpus::new("tgt", "pool", docs, Some(labels)).unwrap()
}

#[test]
fn protocol_output_is_independent_of_thread_count() {
    let pool = label_pool(500);
    let cfg = ProtocolConfig {
        samples_per_level: 5,
        sample_size: 100,
        base_seed: 77,
        ..Default::default()
    };

    let run_with_threads = |threads: usize| {
        let quantifiers: Vec<(String, Box<dyn PoolQuantifier>)> = vec![(
            "flat".to_string(),
            Box::new(Flat {
                labels: pool.labels.clone().unwrap(),
            }),
        )];
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_protocol(&quantifiers, &pool, &cfg).unwrap())
    };

    let serial = run_with_threads(1);
    let parallel = run_with_threads(4);
    assert_eq!(serial.len(), parallel.len());
    for (a, b) in serial.iter().zip(&parallel) {
        assert_eq!(a.method, b.method);
        assert_eq!((a.level_index, a.sample_index), (b.level_index, b.sample_index));
        assert_eq!(a.est_prev, b.est_prev);
        assert_eq!(a.true_prev, b.true_prev);
    }
}

#[test]
fn library_pipeline_runs_end_to_end_at_small_scale() {
    let synth = generate_synthetic_bilingual(31, 300, 1500, 80).unwrap();
    let vocab_s = build_vocabulary(&[&synth.source_labeled, &synth.source_unlabeled], 1).unwrap();
    let vocab_t = build_vocabulary(&[&synth.target_unlabeled], 1).unwrap();

    let mut oracle = TranslationOracle::new(synth.dictionary.clone(), 400);
    let pivots = select_pivots(
        &synth.source_labeled,
        &synth.source_unlabeled,
        &synth.target_unlabeled,
        &mut oracle,
        &PivotConfig {
            count: 12,
            min_support: 15,
            drift_threshold: 0.5,
        },
    )
    .unwrap();
    assert_eq!(pivots.len(), 12);

    let (theta_s, theta_t) = dci::build_projection(
        &synth.source_unlabeled,
        &synth.target_unlabeled,
        &pivots,
        &vocab_s,
        &vocab_t,
    )
    .unwrap();

    let labels = synth.source_labeled.labels.clone().unwrap();
    let xs: Vec<Vec<f64>> = synth
        .source_labeled
        .documents
        .iter()
        .map(|d| theta_s.project(&tfidf_vectorize(d, &vocab_s)).unwrap())
        .collect();

    let hard_cfg = TrainConfig::new(Loss::Hinge, 100.0, 0.0);
    let soft_cfg = TrainConfig::new(Loss::Logistic, 100.0, 0.0);
    let hard = train(&xs, &labels, &hard_cfg).unwrap();
    let soft = train(&xs, &labels, &soft_cfg).unwrap();
    let cv = cross_val_predictions(&xs, &labels, &hard_cfg, &soft_cfg, 10, 5).unwrap();
    let rates = estimate_rates(&cv).unwrap();
    assert!(rates.tpr_hard > rates.fpr_hard);

    let mut decisions = Vec::new();
    let mut posteriors = Vec::new();
    for doc in &synth.target_test.documents {
        let x = theta_t.project(&tfidf_vectorize(doc, &vocab_t)).unwrap();
        decisions.push(predict_hard(&hard, &x).unwrap());
        posteriors.push(predict_soft(&soft, &x).unwrap());
    }

    let quantifiers: Vec<(String, Box<dyn PoolQuantifier>)> = vec![
        (
            "cc".into(),
            Box::new(CcQuantifier {
                decisions: decisions.clone(),
            }),
        ),
        (
            "acc".into(),
            Box::new(AccQuantifier {
                decisions,
                tpr: rates.tpr_hard,
                fpr: rates.fpr_hard,
            }),
        ),
    ];
    let records = run_protocol(
        &quantifiers,
        &synth.target_test,
        &ProtocolConfig {
            samples_per_level: 5,
            sample_size: 100,
            base_seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(records.len(), 2 * 21 * 5);

    let mean_ae = |name: &str| {
        let (sum, count) = records
            .iter()
            .filter(|r| r.method == name)
            .fold((0.0, 0usize), |(s, c), r| (s + r.ae, c + 1));
        sum / count as f64
    };
    let acc_ae = mean_ae("acc");
    let cc_ae = mean_ae("cc");
    assert!(acc_ae <= 0.15, "acc mean AE {acc_ae}");
    assert!(acc_ae <= cc_ae + 0.02, "acc {acc_ae} vs cc {cc_ae}");
}
