//! Bag-of-words corpora: the line-oriented `token:count` file format,
//! in-memory document collections, and a synthetic bilingual generator
//! used for end-to-end testing.
//!
//! Corpus files are UTF-8, one document per line. Each line is a sequence
//! of space-separated `token:count` fields, optionally terminated by a
//! `#label#:positive` or `#label#:negative` field. Tokens may themselves
//! contain colons; the count is whatever follows the *last* colon.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const LABEL_PREFIX: &str = "#label#:";

/// Binary sentiment class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single bag-of-words document. Term counts are at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub terms: BTreeMap<String, u32>,
}

impl Document {
    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    /// Number of distinct terms.
    pub fn distinct_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total token count.
    pub fn token_count(&self) -> u64 {
        self.terms.values().map(|&c| u64::from(c)).sum()
    }
}

/// An ordered collection of documents in one language and domain.
/// Either every document is labeled or none is.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub language: String,
    pub domain: String,
    pub documents: Vec<Document>,
    pub labels: Option<Vec<Label>>,
}

impl Corpus {
    pub fn new(
        language: impl Into<String>,
        domain: impl Into<String>,
        documents: Vec<Document>,
        labels: Option<Vec<Label>>,
    ) -> Result<Self> {
        let language = language.into();
        let domain = domain.into();
        if language.is_empty() || domain.is_empty() {
            return Err(Error::InvalidInput(
                "corpus language and domain tags must be non-empty".into(),
            ));
        }
        if let Some(ref labels) = labels {
            if labels.len() != documents.len() {
                return Err(Error::InvalidInput(format!(
                    "label count {} does not match document count {}",
                    labels.len(),
                    documents.len()
                )));
            }
        }
        Ok(Corpus {
            language,
            domain,
            documents,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn require_labels(&self) -> Result<&[Label]> {
        self.labels.as_deref().ok_or_else(|| {
            Error::InvalidInput(format!(
                "corpus {}/{} carries no labels",
                self.language, self.domain
            ))
        })
    }

    /// Document frequency of a term: the number of documents containing it.
    pub fn document_frequency(&self, term: &str) -> usize {
        self.documents.iter().filter(|d| d.contains(term)).count()
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        msg: msg.into(),
    }
}

/// Parse one corpus line into a document and its optional label.
///
/// The count of a field is the substring after the last colon, so tokens
/// such as `e.g:` or `::)` survive intact. A `#label#:` field is only
/// recognized in final position.
pub fn parse_processed_line(line: &str) -> Result<(Document, Option<Label>)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let mut terms = BTreeMap::new();
    let mut label = None;

    for (pos, field) in fields.iter().enumerate() {
        if pos + 1 == fields.len() {
            if let Some(value) = field.strip_prefix(LABEL_PREFIX) {
                label = Some(match value {
                    "positive" => Label::Positive,
                    "negative" => Label::Negative,
                    other => {
                        return Err(parse_err(format!("unknown label '{other}'")));
                    }
                });
                continue;
            }
        }
        let (token, count_str) = field
            .rsplit_once(':')
            .ok_or_else(|| parse_err(format!("field '{field}' has no count")))?;
        if token.is_empty() {
            return Err(parse_err(format!("field '{field}' has an empty token")));
        }
        let count: u32 = count_str
            .parse()
            .map_err(|_| parse_err(format!("malformed count '{count_str}' in '{field}'")))?;
        if count < 1 {
            return Err(parse_err(format!("count must be >= 1 in '{field}'")));
        }
        *terms.entry(token.to_string()).or_insert(0) += count;
    }

    if terms.is_empty() {
        return Err(parse_err("empty document"));
    }
    Ok((
        Document {
            id: String::new(),
            terms,
        },
        label,
    ))
}

/// Render a document (and optional label) back into the line format.
/// Terms are emitted in lexicographic order.
pub fn serialize_line(doc: &Document, label: Option<Label>) -> String {
    let mut out = String::new();
    for (term, count) in &doc.terms {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(term);
        out.push(':');
        out.push_str(&count.to_string());
    }
    if let Some(label) = label {
        out.push(' ');
        out.push_str(LABEL_PREFIX);
        out.push_str(label.as_str());
    }
    out
}

/// Load a corpus file. Either every line carries a label or none does;
/// anything in between is rejected as mixed labeling.
pub fn load_corpus(
    path: impl AsRef<Path>,
    language: impl Into<String>,
    domain: impl Into<String>,
) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut documents = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let (mut doc, label) = parse_processed_line(&line).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse { line: lineno, msg },
            other => other,
        })?;
        doc.id = format!("d{lineno:06}");

        match (labeled, label.is_some()) {
            (None, has) => labeled = Some(has),
            (Some(expected), has) if expected != has => {
                return Err(Error::Format(format!(
                    "mixed labeling in {}: line {} is {} but earlier lines are {}",
                    path.display(),
                    lineno,
                    if has { "labeled" } else { "unlabeled" },
                    if expected { "labeled" } else { "unlabeled" },
                )));
            }
            _ => {}
        }
        if let Some(label) = label {
            labels.push(label);
        }
        documents.push(doc);
    }

    if documents.is_empty() {
        return Err(Error::Format(format!(
            "empty corpus file: {}",
            path.display()
        )));
    }
    let labels = if labeled == Some(true) {
        Some(labels)
    } else {
        None
    };
    Corpus::new(language, domain, documents, labels)
}

/// Write a corpus in the line format, one document per line.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, doc) in corpus.documents.iter().enumerate() {
        let label = corpus.labels.as_ref().map(|l| l[i]);
        writeln!(w, "{}", serialize_line(doc, label)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Load a bilingual dictionary: one `source<TAB>target` pair per line.
pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: "dictionary line is not tab-separated".into(),
        })?;
        pairs.push((src.to_string(), tgt.to_string()));
    }
    Ok(pairs)
}

/// Write a bilingual dictionary, one tab-separated pair per line.
pub fn write_dictionary(path: impl AsRef<Path>, pairs: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (src, tgt) in pairs {
        writeln!(w, "{src}\t{tgt}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// The output of [`generate_synthetic_bilingual`].
#[derive(Clone, Debug)]
pub struct SyntheticBilingual {
    pub source_labeled: Corpus,
    pub source_unlabeled: Corpus,
    pub target_unlabeled: Corpus,
    /// Labeled target-language pool used for evaluation sampling.
    pub target_test: Corpus,
    /// Identity mapping `s_i -> t_i` over the shared vocabulary indices.
    pub dictionary: Vec<(String, String)>,
}

/// Generate a bilingual benchmark with a known-ground-truth structure.
///
/// Documents are drawn from two class-conditional multinomials over a
/// source vocabulary `s_00000..`; target documents use the renamed
/// vocabulary `t_00000..` with the *same* index-aligned distributions, so
/// the identity dictionary is a perfect translation oracle and a perfect
/// cross-lingual method matches monolingual accuracy.
///
/// Fully deterministic given `seed`.
pub fn generate_synthetic_bilingual(
    seed: u64,
    n_labeled: usize,
    n_unlabeled: usize,
    vocab_size: usize,
) -> Result<SyntheticBilingual> {
    if vocab_size < 20 {
        return Err(Error::InvalidInput(format!(
            "vocab_size must be >= 20, got {vocab_size}"
        )));
    }
    if n_labeled < 1 || n_unlabeled < 1 {
        return Err(Error::InvalidInput(
            "n_labeled and n_unlabeled must be >= 1".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Zipf-like base frequencies. Every term leans toward one class, a
    // minority strongly, the rest mildly; the resulting per-document
    // signal overlaps enough that classification stays imperfect, like
    // real review data.
    let mut pos_weights = Vec::with_capacity(vocab_size);
    let mut neg_weights = Vec::with_capacity(vocab_size);
    for i in 0..vocab_size {
        let base = 1.0 / (i as f64 + 5.0);
        let magnitude = if rng.gen::<f64>() < 0.3 {
            rng.gen_range(0.3..0.6)
        } else {
            rng.gen_range(0.05..0.25)
        };
        let delta = if rng.gen::<bool>() { magnitude } else { -magnitude };
        pos_weights.push(base * (1.0 + delta));
        neg_weights.push(base * (1.0 - delta));
    }
    let pos_cdf = cumulative(&pos_weights);
    let neg_cdf = cumulative(&neg_weights);

    let width = digits(vocab_size - 1);
    let term = |prefix: &str, i: usize| format!("{prefix}_{i:0width$}");

    fn sample_document(
        rng: &mut ChaCha8Rng,
        cdf: &[f64],
        prefix: &str,
        width: usize,
        id: String,
    ) -> Document {
        let length = rng.gen_range(20..=70);
        let mut terms = BTreeMap::new();
        for _ in 0..length {
            let u: f64 = rng.gen();
            let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            *terms
                .entry(format!("{prefix}_{idx:0width$}"))
                .or_insert(0u32) += 1;
        }
        Document { id, terms }
    }

    let make_corpus = |rng: &mut ChaCha8Rng,
                           prefix: &str,
                           id_prefix: &str,
                           n: usize,
                           keep_labels: bool|
     -> (Vec<Document>, Option<Vec<Label>>) {
        let mut docs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = if keep_labels {
                // Alternate for exactly balanced classes.
                if i % 2 == 0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            } else if rng.gen::<bool>() {
                Label::Positive
            } else {
                Label::Negative
            };
            let cdf = if label.is_positive() {
                &pos_cdf
            } else {
                &neg_cdf
            };
            docs.push(sample_document(
                rng,
                cdf,
                prefix,
                width,
                format!("{id_prefix}{:06}", i + 1),
            ));
            labels.push(label);
        }
        (docs, keep_labels.then_some(labels))
    };

    let (docs, labels) = make_corpus(&mut rng, "s", "strain", n_labeled, true);
    let source_labeled = Corpus::new("src", "synthetic", docs, labels)?;
    let (docs, _) = make_corpus(&mut rng, "s", "sunlab", n_unlabeled, false);
    let source_unlabeled = Corpus::new("src", "synthetic", docs, None)?;
    let (docs, _) = make_corpus(&mut rng, "t", "tunlab", n_unlabeled, false);
    let target_unlabeled = Corpus::new("tgt", "synthetic", docs, None)?;
    let (docs, labels) = make_corpus(&mut rng, "t", "ttest", n_labeled, true);
    let target_test = Corpus::new("tgt", "synthetic", docs, labels)?;

    let dictionary = (0..vocab_size)
        .map(|i| (term("s", i), term("t", i)))
        .collect();

    Ok(SyntheticBilingual {
        source_labeled,
        source_unlabeled,
        target_unlabeled,
        target_test,
        dictionary,
    })
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}
