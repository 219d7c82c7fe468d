//! Vocabularies and tf-idf weighted sparse document vectors.
//!
//! Weighting is sublinear tf `(1 + ln tf)` times natural-log idf
//! `ln(n_docs / df)`, L2-normalized. Out-of-vocabulary terms are dropped.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

/// A fitted term index with per-term document frequencies.
///
/// Indices are assigned in lexicographic term order and form a gap-free
/// range `0..len()`.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq_of(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }

    /// Number of documents the vocabulary was fitted on.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Rebuild a vocabulary from its serialized parts (term order is the
    /// index order). Used by on-disk caches.
    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<u32>, n_docs: usize) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::InvalidInput(
                "term and doc_freq lengths differ".into(),
            ));
        }
        for (i, df) in doc_freq.iter().enumerate() {
            if *df < 1 || *df as usize > n_docs {
                return Err(Error::InvalidInput(format!(
                    "doc_freq[{i}] = {df} outside 1..={n_docs}"
                )));
            }
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            terms,
            index,
            doc_freq,
            n_docs,
        })
    }
}

/// Fit a vocabulary over one or more corpora, keeping terms that appear in
/// at least `min_df` documents.
pub fn build_vocabulary(corpora: &[&Corpus], min_df: u32) -> Result<Vocabulary> {
    if min_df < 1 {
        return Err(Error::InvalidInput("min_df must be >= 1".into()));
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    let mut n_docs = 0usize;
    for corpus in corpora {
        n_docs += corpus.len();
        for doc in &corpus.documents {
            for term in doc.terms.keys() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
    }

    let mut terms = Vec::new();
    let mut doc_freq = Vec::new();
    for (term, count) in df {
        if count >= min_df {
            terms.push(term.to_string());
            doc_freq.push(count);
        }
    }
    if terms.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no term reaches min_df = {min_df} over {n_docs} documents"
        )));
    }
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        index,
        doc_freq,
        n_docs,
    })
}

/// A sparse vector with strictly increasing indices, no stored zeros, and
/// finite weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        for (i, &(idx, w)) in entries.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite weight at index {idx}"
                )));
            }
            if w == 0.0 {
                return Err(Error::InvalidInput(format!("zero weight at index {idx}")));
            }
            if i > 0 && entries[i - 1].0 >= idx {
                return Err(Error::InvalidInput(
                    "sparse indices must be strictly increasing".into(),
                ));
            }
        }
        Ok(SparseVector { entries })
    }

    pub fn zero() -> Self {
        SparseVector {
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    /// The same vector with every index shifted by `offset`; used to embed
    /// a per-language vector into a concatenated feature space.
    pub fn shifted(&self, offset: usize) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|&(i, w)| (i + offset, w))
                .collect(),
        }
    }
}

/// Weight a document against a fitted vocabulary.
///
/// `weight(t) = (1 + ln tf_t) * ln(n_docs / df_t)`, L2-normalized when the
/// result is nonzero. Terms whose idf vanishes (`df = n_docs`) and
/// out-of-vocabulary terms are dropped; a document with no surviving terms
/// yields the zero vector.
pub fn tfidf_vectorize(doc: &Document, vocab: &Vocabulary) -> SparseVector {
    let n = vocab.n_docs() as f64;
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(doc.terms.len());
    for (term, &count) in &doc.terms {
        let Some(idx) = vocab.index_of(term) else {
            continue;
        };
        let idf = (n / f64::from(vocab.doc_freq_of(idx))).ln();
        let weight = (1.0 + f64::from(count).ln()) * idf;
        if weight != 0.0 {
            entries.push((idx, weight));
        }
    }
    entries.sort_unstable_by_key(|&(i, _)| i);

    let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    SparseVector { entries }
}
