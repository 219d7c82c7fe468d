//! Pivot selection: class-discriminative terms paired with their
//! translations through a budgeted dictionary oracle, with support and
//! prevalence-drift filtering.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// A dictionary-backed word translation oracle with a hard call budget.
/// Every lookup is charged, whether or not it yields a translation.
#[derive(Clone, Debug)]
pub struct TranslationOracle {
    dictionary: HashMap<String, String>,
    budget: usize,
    calls_used: usize,
}

impl TranslationOracle {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>, budget: usize) -> Self {
        TranslationOracle {
            dictionary: pairs.into_iter().collect(),
            budget,
            calls_used: 0,
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn calls_used(&self) -> usize {
        self.calls_used
    }

    /// Look up a translation, consuming one call. Fails once the budget is
    /// spent.
    pub fn translate(&mut self, term: &str) -> Result<Option<&str>> {
        if self.calls_used >= self.budget {
            return Err(Error::OracleBudget {
                budget: self.budget,
            });
        }
        self.calls_used += 1;
        Ok(self.dictionary.get(term).map(String::as_str))
    }
}

/// A translation-equivalent term pair with its mutual-information score.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotPair {
    pub source_term: String,
    pub target_term: String,
    /// MI of term presence against the class label, in bits.
    pub mi_score: f64,
}

/// Mutual information (bits) between term presence and the document class,
/// from the 2x2 contingency table over a labeled corpus. Zero-probability
/// cells contribute 0.
pub fn mutual_information(term: &str, corpus: &Corpus) -> Result<f64> {
    let labels = corpus.require_labels()?;
    if corpus.is_empty() {
        return Err(Error::InsufficientData(
            "mutual information needs a non-empty corpus".into(),
        ));
    }
    let mut cells = [[0usize; 2]; 2]; // [term absent/present][negative/positive]
    for (doc, label) in corpus.documents.iter().zip(labels) {
        let t = usize::from(doc.contains(term));
        let y = usize::from(label.is_positive());
        cells[t][y] += 1;
    }
    let n = corpus.len() as f64;
    let p_term = [
        (cells[0][0] + cells[0][1]) as f64 / n,
        (cells[1][0] + cells[1][1]) as f64 / n,
    ];
    let p_class = [
        (cells[0][0] + cells[1][0]) as f64 / n,
        (cells[0][1] + cells[1][1]) as f64 / n,
    ];
    let mut mi = 0.0;
    for t in 0..2 {
        for y in 0..2 {
            let p = cells[t][y] as f64 / n;
            if p > 0.0 {
                mi += p * (p / (p_term[t] * p_class[y])).log2();
            }
        }
    }
    // Rounding can leave a tiny negative residue at independence.
    Ok(mi.max(0.0))
}

#[derive(Clone, Copy, Debug)]
pub struct PivotConfig {
    /// Number of pivot pairs to select (m).
    pub count: usize,
    /// Minimum document frequency in each unlabeled corpus (phi).
    pub min_support: u32,
    /// Minimum `min(f_s, f_t) / max(f_s, f_t)` document-frequency-rate
    /// ratio between the two sides; 0 disables the drift filter.
    pub drift_threshold: f64,
}

/// Select up to `cfg.count` pivot pairs.
///
/// Candidates are source terms with document frequency >= `min_support` in
/// the source unlabeled corpus, ranked by MI against the class label on the
/// source labeled corpus (descending, ties broken lexicographically). Each
/// candidate costs one oracle call; it is kept if a translation exists, the
/// translation reaches `min_support` in the target unlabeled corpus, and
/// the drift ratio test passes.
pub fn select_pivots(
    source_labeled: &Corpus,
    source_unlabeled: &Corpus,
    target_unlabeled: &Corpus,
    oracle: &mut TranslationOracle,
    cfg: &PivotConfig,
) -> Result<Vec<PivotPair>> {
    if cfg.count < 1 {
        return Err(Error::InvalidInput("pivot count must be >= 1".into()));
    }
    if cfg.min_support < 1 {
        return Err(Error::InvalidInput("min_support must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.drift_threshold) {
        return Err(Error::InvalidInput(
            "drift_threshold must lie in [0, 1]".into(),
        ));
    }

    let df_source = document_frequencies(source_unlabeled);
    let df_target = document_frequencies(target_unlabeled);

    let mut candidates: Vec<&str> = df_source
        .iter()
        .filter(|&(_, &df)| df >= cfg.min_support)
        .map(|(term, _)| *term)
        .collect();
    candidates.sort_unstable();

    let mut scored: Vec<(f64, &str)> = candidates
        .par_iter()
        .map(|term| Ok((mutual_information(term, source_labeled)?, *term)))
        .collect::<Result<_>>()?;
    scored.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));

    let n_source = source_unlabeled.len() as f64;
    let n_target = target_unlabeled.len() as f64;
    let mut pivots: Vec<PivotPair> = Vec::with_capacity(cfg.count);

    for (mi, term) in scored {
        if pivots.len() == cfg.count {
            break;
        }
        let translation = match oracle.translate(term) {
            Ok(t) => t.map(str::to_string),
            Err(Error::OracleBudget { .. }) => {
                return Err(Error::PivotSelection {
                    found: pivots.len(),
                    requested: cfg.count,
                    reason: format!("oracle budget of {} calls exhausted", oracle.budget()),
                });
            }
            Err(e) => return Err(e),
        };
        let Some(target_term) = translation else {
            continue;
        };
        let df_t = df_target.get(target_term.as_str()).copied().unwrap_or(0);
        if df_t < cfg.min_support {
            continue;
        }
        let f_s = f64::from(df_source[term]) / n_source;
        let f_t = f64::from(df_t) / n_target;
        let ratio = f_s.min(f_t) / f_s.max(f_t);
        if ratio < cfg.drift_threshold {
            continue;
        }
        pivots.push(PivotPair {
            source_term: term.to_string(),
            target_term,
            mi_score: mi,
        });
    }

    if pivots.len() < cfg.count {
        return Err(Error::PivotSelection {
            found: pivots.len(),
            requested: cfg.count,
            reason: "candidate list exhausted before reaching the requested count".into(),
        });
    }
    Ok(pivots)
}

fn document_frequencies(corpus: &Corpus) -> HashMap<&str, u32> {
    let mut df: HashMap<&str, u32> = HashMap::new();
    for doc in &corpus.documents {
        for term in doc.terms.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    df
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Label};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn doc(terms: &[&str]) -> Document {
        Document {
            id: String::new(),
            terms: terms.iter().map(|t| (t.to_string(), 1)).collect(),
        }
    }

    /// A labeled corpus realizing the 2x2 contingency table for term "t":
    /// (t & pos, t & neg, !t & pos, !t & neg).
    fn contingency_corpus(cells: [usize; 4]) -> Corpus {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        let groups = [
            (true, Label::Positive, cells[0]),
            (true, Label::Negative, cells[1]),
            (false, Label::Positive, cells[2]),
            (false, Label::Negative, cells[3]),
        ];
        for (has_term, label, count) in groups {
            for _ in 0..count {
                docs.push(if has_term { doc(&["t", "x"]) } else { doc(&["x"]) });
                labels.push(label);
            }
        }
        Corpus::new("en", "books", docs, Some(labels)).unwrap()
    }

    #[test]
    fn perfectly_informative_term_scores_one_bit() {
        let c = contingency_corpus([10, 0, 0, 10]);
        let mi = mutual_information("t", &c).unwrap();
        assert!((mi - 1.0).abs() < 1e-12, "{mi}");
    }

    #[test]
    fn independent_term_scores_zero() {
        let c = contingency_corpus([5, 5, 5, 5]);
        let mi = mutual_information("t", &c).unwrap();
        assert!(mi.abs() < 1e-12, "{mi}");
    }

    #[test]
    fn contingency_table_matches_direct_sum() {
        // Four-cell sum computed independently from the joint/marginals.
        let cells = [30usize, 10, 10, 50];
        let c = contingency_corpus(cells);
        let n = 100.0;
        let joint = [
            [cells[3] as f64 / n, cells[2] as f64 / n], // !t: neg, pos
            [cells[1] as f64 / n, cells[0] as f64 / n], // t: neg, pos
        ];
        let pt = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
        let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
        let mut expected = 0.0;
        for t in 0..2 {
            for y in 0..2 {
                if joint[t][y] > 0.0 {
                    expected += joint[t][y] * (joint[t][y] / (pt[t] * py[y])).log2();
                }
            }
        }
        assert!((expected - 0.2565).abs() < 1e-4, "oracle drifted: {expected}");
        let mi = mutual_information("t", &c).unwrap();
        assert!((mi - expected).abs() < 1e-12, "{mi} vs {expected}");
    }

    #[test]
    fn mutual_information_requires_labels() {
        let c = Corpus::new("en", "books", vec![doc(&["t"])], None).unwrap();
        assert!(mutual_information("t", &c).is_err());
    }

    proptest! {
        /// Simultaneously swapping the classes and complementing term
        /// presence permutes the contingency table without changing MI.
        #[test]
        fn mi_symmetric_under_joint_relabeling(
            a in 0usize..30, b in 0usize..30, c in 0usize..30, d in 0usize..30,
        ) {
            prop_assume!(a + b + c + d > 0);
            let original = contingency_corpus([a, b, c, d]);
            let transformed = contingency_corpus([d, c, b, a]);
            let m1 = mutual_information("t", &original).unwrap();
            let m2 = mutual_information("t", &transformed).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12);
        }
    }

    /// Labeled corpus where MI strictly orders u1 > u2 > u3, plus unlabeled
    /// corpora on both sides sharing the same term names.
    fn selection_fixture() -> (Corpus, Corpus, Corpus, Vec<(String, String)>) {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let pos = i < 10;
            let mut terms = vec!["common"];
            if pos {
                terms.push("u1"); // perfect
                if i < 8 {
                    terms.push("u2"); // strong
                }
                if i < 6 {
                    terms.push("u3"); // weaker
                }
            } else if i >= 16 {
                terms.push("u3");
            }
            docs.push(doc(&terms));
            labels.push(if pos { Label::Positive } else { Label::Negative });
        }
        let labeled = Corpus::new("en", "books", docs, Some(labels)).unwrap();

        let unlabeled_docs: Vec<Document> = (0..10)
            .map(|_| doc(&["u1", "u2", "u3", "common"]))
            .collect();
        let src_unl = Corpus::new("en", "books", unlabeled_docs.clone(), None).unwrap();
        let tgt_unl = Corpus::new("de", "books", unlabeled_docs, None).unwrap();
        let dict = ["u1", "u2", "u3", "common"]
            .iter()
            .map(|t| (t.to_string(), t.to_string()))
            .collect();
        (labeled, src_unl, tgt_unl, dict)
    }

    #[test]
    fn selects_top_mi_terms_when_filters_are_vacuous() {
        let (labeled, src, tgt, dict) = selection_fixture();
        let mut oracle = TranslationOracle::new(dict, 100);
        let cfg = PivotConfig {
            count: 3,
            min_support: 1,
            drift_threshold: 0.0,
        };
        let pivots = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap();
        let terms: Vec<&str> = pivots.iter().map(|p| p.source_term.as_str()).collect();
        assert_eq!(terms, vec!["u1", "u2", "u3"]);
        assert!(pivots[0].mi_score >= pivots[1].mi_score);
        assert!(pivots[1].mi_score >= pivots[2].mi_score);
        assert_eq!(oracle.calls_used(), 3);
    }

    #[test]
    fn drift_filter_rejects_rate_mismatches() {
        // f_s = 0.10 on 10 source docs, f_t = 0.02 on 50 target docs:
        // ratio 0.2 < 0.25 -> rejected.
        let labeled = contingency_corpus([3, 1, 1, 3]);
        let mut src_docs = vec![doc(&["t", "pad"])];
        src_docs.extend((0..9).map(|_| doc(&["pad"])));
        let src = Corpus::new("en", "books", src_docs, None).unwrap();
        let mut tgt_docs = vec![doc(&["t", "pad"])];
        tgt_docs.extend((0..49).map(|_| doc(&["pad"])));
        let tgt = Corpus::new("de", "books", tgt_docs, None).unwrap();

        let dict = vec![("t".to_string(), "t".to_string())];
        let mut oracle = TranslationOracle::new(dict.clone(), 100);
        let cfg = PivotConfig {
            count: 1,
            min_support: 1,
            drift_threshold: 0.25,
        };
        let err = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::PivotSelection { found: 0, requested: 1, .. }
        ));

        // The same candidate passes at a lower threshold.
        let mut oracle = TranslationOracle::new(dict, 100);
        let cfg = PivotConfig {
            drift_threshold: 0.19,
            ..cfg
        };
        let pivots = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap();
        assert_eq!(pivots.len(), 1);
    }

    #[test]
    fn exhausted_budget_reports_partial_progress() {
        let (labeled, src, tgt, dict) = selection_fixture();
        let mut oracle = TranslationOracle::new(dict, 2);
        let cfg = PivotConfig {
            count: 3,
            min_support: 1,
            drift_threshold: 0.0,
        };
        let err = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap_err();
        match err {
            Error::PivotSelection {
                found,
                requested,
                reason,
            } => {
                assert_eq!(found, 2);
                assert_eq!(requested, 3);
                assert!(reason.contains("budget"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(oracle.calls_used(), 2);
    }

    #[test]
    fn too_few_candidates_is_an_error() {
        let (labeled, src, tgt, dict) = selection_fixture();
        let mut oracle = TranslationOracle::new(dict, 100);
        let cfg = PivotConfig {
            count: 10,
            min_support: 1,
            drift_threshold: 0.0,
        };
        let err = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap_err();
        assert!(matches!(err, Error::PivotSelection { found: 4, requested: 10, .. }));
    }

    #[test]
    fn mi_ties_break_lexicographically() {
        // Two terms with identical contingency tables.
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..8 {
            let pos = i < 4;
            let terms: BTreeMap<String, u32> = if pos {
                [
                    ("zz".to_string(), 1),
                    ("aa".to_string(), 1),
                    ("filler".to_string(), 1),
                ]
                .into()
            } else {
                [("filler".to_string(), 1)].into()
            };
            docs.push(Document {
                id: String::new(),
                terms,
            });
            labels.push(if pos { Label::Positive } else { Label::Negative });
        }
        let labeled = Corpus::new("en", "books", docs, Some(labels)).unwrap();
        let unl: Vec<Document> = (0..4).map(|_| doc(&["aa", "zz", "filler"])).collect();
        let src = Corpus::new("en", "books", unl.clone(), None).unwrap();
        let tgt = Corpus::new("de", "books", unl, None).unwrap();
        let dict: Vec<(String, String)> = ["aa", "zz", "filler"]
            .iter()
            .map(|t| (t.to_string(), t.to_string()))
            .collect();
        let mut oracle = TranslationOracle::new(dict, 100);
        let cfg = PivotConfig {
            count: 2,
            min_support: 1,
            drift_threshold: 0.0,
        };
        let pivots = select_pivots(&labeled, &src, &tgt, &mut oracle, &cfg).unwrap();
        assert_eq!(pivots[0].source_term, "aa");
        assert_eq!(pivots[1].source_term, "zz");
    }
}
