//! Distributional correspondence projection: every vocabulary term gets a
//! profile of correspondence scores against the pivots, computed from
//! document-incidence vectors on the unlabeled corpus of its language.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pivots::PivotPair;
use crate::projection::{ProjectionMatrix, ProjectionMethod};
use crate::vectorizer::Vocabulary;

/// A term's occurrence pattern across one corpus: sparse (document index,
/// weight) pairs with strictly increasing indices. The default
/// construction is binary incidence.
#[derive(Clone, Debug, PartialEq)]
pub struct TermOccurrenceVector {
    entries: Vec<(u32, f64)>,
}

impl TermOccurrenceVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        for (i, &(idx, w)) in entries.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite occurrence weight at document {idx}"
                )));
            }
            if i > 0 && entries[i - 1].0 >= idx {
                return Err(Error::InvalidInput(
                    "occurrence indices must be strictly increasing".into(),
                ));
            }
        }
        Ok(TermOccurrenceVector { entries })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Binary document-incidence vector of `term` over `corpus`.
pub fn occurrence_vector(corpus: &Corpus, term: &str) -> TermOccurrenceVector {
    let entries = corpus
        .documents
        .iter()
        .enumerate()
        .filter(|(_, d)| d.contains(term))
        .map(|(i, _)| (i as u32, 1.0))
        .collect();
    TermOccurrenceVector { entries }
}

/// Cosine distributional correspondence between two occurrence vectors
/// over the same corpus; 0 when either vector is zero. Always in [-1, 1].
pub fn dcf_cosine(u: &TermOccurrenceVector, v: &TermOccurrenceVector) -> f64 {
    let mut dot = 0.0;
    let mut i = 0;
    let mut j = 0;
    let (ue, ve) = (&u.entries, &v.entries);
    while i < ue.len() && j < ve.len() {
        match ue[i].0.cmp(&ve[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += ue[i].1 * ve[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    let nu: f64 = ue.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    let nv: f64 = ve.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Build the per-language projections. Row `w` of the source matrix is the
/// post-processed profile `(dcf(w, pivot_1), ..., dcf(w, pivot_m))`
/// computed on the source unlabeled corpus; the target matrix is the
/// analogue with target pivot terms on the target corpus. Post-processing
/// subtracts the row mean and L2-normalizes; zero rows stay zero. The
/// output dimensionality equals the number of pivots.
pub fn build_projection(
    source_unlabeled: &Corpus,
    target_unlabeled: &Corpus,
    pivots: &[PivotPair],
    vocab_s: &Vocabulary,
    vocab_t: &Vocabulary,
) -> Result<(ProjectionMatrix, ProjectionMatrix)> {
    if pivots.is_empty() {
        return Err(Error::InvalidInput("no pivots given".into()));
    }
    let source_terms: Vec<&str> = pivots.iter().map(|p| p.source_term.as_str()).collect();
    let target_terms: Vec<&str> = pivots.iter().map(|p| p.target_term.as_str()).collect();

    let theta_s = profile_matrix(source_unlabeled, vocab_s, &source_terms)?;
    let theta_t = profile_matrix(target_unlabeled, vocab_t, &target_terms)?;
    Ok((
        ProjectionMatrix::new(theta_s, ProjectionMethod::Dci, vocab_language(source_unlabeled))?,
        ProjectionMatrix::new(theta_t, ProjectionMethod::Dci, vocab_language(target_unlabeled))?,
    ))
}

fn vocab_language(corpus: &Corpus) -> String {
    corpus.language.clone()
}

/// Raw (pre-post-processing) cosine profiles, one row per vocabulary term.
/// Exposed through [`build_projection`]; kept separate so the raw values
/// can be checked against [`dcf_cosine`] directly.
fn raw_profile_matrix(corpus: &Corpus, vocab: &Vocabulary, pivot_terms: &[&str]) -> Result<Matrix> {
    let m = pivot_terms.len();
    let v = vocab.len();

    let pivot_slot: HashMap<usize, usize> = pivot_terms
        .iter()
        .enumerate()
        .map(|(slot, term)| {
            vocab
                .index_of(term)
                .map(|idx| (idx, slot))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "pivot term '{term}' missing from the {} vocabulary",
                        corpus.language
                    ))
                })
        })
        .collect::<Result<_>>()?;

    // Document-major co-occurrence counting.
    let mut cooc = vec![0u32; v * m];
    let mut df = vec![0u32; v];
    for doc in &corpus.documents {
        let term_idxs: Vec<usize> = doc
            .terms
            .keys()
            .filter_map(|t| vocab.index_of(t))
            .collect();
        let slots: Vec<usize> = term_idxs
            .iter()
            .filter_map(|idx| pivot_slot.get(idx).copied())
            .collect();
        for &idx in &term_idxs {
            df[idx] += 1;
            if !slots.is_empty() {
                let row = &mut cooc[idx * m..(idx + 1) * m];
                for &slot in &slots {
                    row[slot] += 1;
                }
            }
        }
    }

    let mut pivot_df = Vec::with_capacity(m);
    for term in pivot_terms {
        let idx = vocab.index_of(term).expect("pivot indices checked above");
        if df[idx] == 0 {
            return Err(Error::InvalidInput(format!(
                "pivot term '{term}' has zero occurrences in the {} unlabeled corpus",
                corpus.language
            )));
        }
        pivot_df.push(f64::from(df[idx]));
    }

    let cooc = &cooc;
    let df = &df;
    let pivot_df = &pivot_df;
    let data: Vec<f64> = (0..v)
        .into_par_iter()
        .flat_map_iter(move |idx| {
            let df_w = f64::from(df[idx]);
            let row = &cooc[idx * m..(idx + 1) * m];
            (0..m).map(move |j| {
                if df_w == 0.0 {
                    0.0
                } else {
                    (f64::from(row[j]) / (df_w.sqrt() * pivot_df[j].sqrt())).clamp(-1.0, 1.0)
                }
            })
        })
        .collect();
    Matrix::from_vec(v, m, data)
}

fn profile_matrix(corpus: &Corpus, vocab: &Vocabulary, pivot_terms: &[&str]) -> Result<Matrix> {
    let mut matrix = raw_profile_matrix(corpus, vocab, pivot_terms)?;
    for r in 0..matrix.rows() {
        post_process_row(matrix.row_mut(r));
    }
    Ok(matrix)
}

/// Subtract the row mean, then L2-normalize. Rows that are zero or
/// constant (zero after centering, up to rounding residue) become zero.
fn post_process_row(row: &mut [f64]) {
    let pre_norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    for v in row.iter_mut() {
        *v -= mean;
    }
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 * (pre_norm + 1.0) {
        for v in row.iter_mut() {
            *v /= norm;
        }
    } else {
        row.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[cfg(test)]
pub(crate) fn raw_profiles_for_tests(
    corpus: &Corpus,
    vocab: &Vocabulary,
    pivot_terms: &[&str],
) -> Result<Matrix> {
    raw_profile_matrix(corpus, vocab, pivot_terms)
}
