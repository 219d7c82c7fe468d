//! Quantification error measures, the artificial-prevalence sampling
//! protocol, paired significance testing, and the results/summary TSV
//! formats.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::quantifiers::PoolQuantifier;

/// A binary class distribution, carried as the positive-class share.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distribution2 {
    p_pos: f64,
}

impl Distribution2 {
    pub fn new(p_pos: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_pos) {
            return Err(Error::InvalidInput(format!(
                "prevalence {p_pos} outside [0, 1]"
            )));
        }
        Ok(Distribution2 { p_pos })
    }

    pub fn p_pos(self) -> f64 {
        self.p_pos
    }

    pub fn p_neg(self) -> f64 {
        1.0 - self.p_pos
    }
}

/// Absolute error: mean per-class |estimated - true|. In the binary case
/// this equals the positive-class absolute error exactly.
pub fn ae(truth: Distribution2, est: Distribution2) -> f64 {
    0.5 * ((est.p_pos - truth.p_pos).abs() + (est.p_neg() - truth.p_neg()).abs())
}

/// Additive smoothing with `eps = 1 / (2 * sample_size)`, the standard
/// guard for the zero denominators of the relative measures.
pub fn smooth(p: f64, sample_size: usize) -> f64 {
    let eps = 1.0 / (2.0 * sample_size as f64);
    (p + eps) / (1.0 + 2.0 * eps)
}

/// Relative absolute error, with both distributions smoothed.
pub fn rae(truth: Distribution2, est: Distribution2, sample_size: usize) -> f64 {
    let tp = smooth(truth.p_pos, sample_size);
    let tn = smooth(truth.p_neg(), sample_size);
    let ep = smooth(est.p_pos, sample_size);
    let en = smooth(est.p_neg(), sample_size);
    0.5 * ((ep - tp).abs() / tp + (en - tn).abs() / tn)
}

/// Kullback-Leibler divergence (natural log), with both distributions
/// smoothed; nonnegative by Gibbs' inequality.
pub fn kld(truth: Distribution2, est: Distribution2, sample_size: usize) -> f64 {
    let tp = smooth(truth.p_pos, sample_size);
    let tn = smooth(truth.p_neg(), sample_size);
    let ep = smooth(est.p_pos, sample_size);
    let en = smooth(est.p_neg(), sample_size);
    (tp * (tp / ep).ln() + tn * (tn / en).ln()).max(0.0)
}

/// The 21 standard positive-class prevalence levels.
pub const DEFAULT_PREVALENCE_LEVELS: [f64; 21] = [
    0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70,
    0.75, 0.80, 0.85, 0.90, 0.95, 0.99,
];

/// One evaluation sample: which pool documents it contains and where it
/// sits in the protocol grid.
#[derive(Clone, Debug)]
pub struct SampleSpec {
    pub level_index: usize,
    pub sample_index: usize,
    /// Requested prevalence level; the realized positive count is
    /// `round(prevalence * n)`.
    pub prevalence: f64,
    pub doc_indices: Vec<usize>,
}

impl SampleSpec {
    pub fn realized_prevalence(&self, n_positives: usize) -> f64 {
        n_positives as f64 / self.doc_indices.len() as f64
    }

    pub fn document_ids<'a>(&self, pool: &'a Corpus) -> Vec<&'a str> {
        self.doc_indices
            .iter()
            .map(|&i| pool.documents[i].id.as_str())
            .collect()
    }
}

/// Stable seed derivation for one protocol cell, so every method sees the
/// same sample and parallel runs reproduce serial ones. (Deliberately not
/// the standard library hasher, whose output may change across releases.)
pub fn sample_seed(base_seed: u64, level_index: usize, sample_index: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base_seed) ^ level_index as u64) ^ sample_index as u64)
}

/// Draw one sample of size `n` at the requested prevalence: exactly
/// `round(prevalence * n)` positives and the remainder negatives, each
/// chosen uniformly without replacement. Deterministic given `seed`.
pub fn app_sample(pool: &Corpus, prevalence: f64, n: usize, seed: u64) -> Result<SampleSpec> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&prevalence) {
        return Err(Error::InvalidInput(format!(
            "prevalence {prevalence} outside [0, 1]"
        )));
    }
    let labels = pool.require_labels()?;
    let mut pos_pool = Vec::new();
    let mut neg_pool = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if label.is_positive() {
            pos_pool.push(i);
        } else {
            neg_pool.push(i);
        }
    }

    let need_pos = (prevalence * n as f64).round() as usize;
    let need_neg = n - need_pos;
    if pos_pool.len() < need_pos {
        return Err(Error::InsufficientData(format!(
            "pool has {} positive documents but the sample needs {need_pos}",
            pos_pool.len()
        )));
    }
    if neg_pool.len() < need_neg {
        return Err(Error::InsufficientData(format!(
            "pool has {} negative documents but the sample needs {need_neg}",
            neg_pool.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_indices = Vec::with_capacity(n);
    for sel in rand::seq::index::sample(&mut rng, pos_pool.len(), need_pos) {
        doc_indices.push(pos_pool[sel]);
    }
    for sel in rand::seq::index::sample(&mut rng, neg_pool.len(), need_neg) {
        doc_indices.push(neg_pool[sel]);
    }

    Ok(SampleSpec {
        level_index: 0,
        sample_index: 0,
        prevalence,
        doc_indices,
    })
}

/// One (method, sample) evaluation record.
#[derive(Clone, Debug)]
pub struct ProtocolRecord {
    pub method: String,
    pub level_index: usize,
    pub sample_index: usize,
    pub true_prev: f64,
    pub est_prev: f64,
    pub ae: f64,
    pub rae: f64,
    pub kld: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub levels: Vec<f64>,
    pub samples_per_level: usize,
    pub sample_size: usize,
    pub base_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            levels: DEFAULT_PREVALENCE_LEVELS.to_vec(),
            samples_per_level: 100,
            sample_size: 200,
            base_seed: 0,
        }
    }
}

/// Run every quantifier over the full prevalence grid. Each cell's sample
/// is derived from [`sample_seed`], so all methods see identical samples
/// and the output is independent of execution order; records are returned
/// sorted by (method, level, sample).
pub fn run_protocol(
    quantifiers: &[(String, Box<dyn PoolQuantifier>)],
    pool: &Corpus,
    cfg: &ProtocolConfig,
) -> Result<Vec<ProtocolRecord>> {
    if quantifiers.is_empty() {
        return Err(Error::InvalidInput("no quantifiers given".into()));
    }
    if cfg.levels.is_empty() || cfg.samples_per_level == 0 {
        return Err(Error::InvalidInput(
            "protocol needs at least one level and one sample per level".into(),
        ));
    }
    let labels = pool.require_labels()?;

    let cells: Vec<(usize, usize)> = (0..cfg.levels.len())
        .flat_map(|li| (0..cfg.samples_per_level).map(move |si| (li, si)))
        .collect();

    let mut records: Vec<ProtocolRecord> = cells
        .par_iter()
        .map(|&(level_index, sample_index)| -> Result<Vec<ProtocolRecord>> {
            let prevalence = cfg.levels[level_index];
            let seed = sample_seed(cfg.base_seed, level_index, sample_index);
            let mut sample = app_sample(pool, prevalence, cfg.sample_size, seed)?;
            sample.level_index = level_index;
            sample.sample_index = sample_index;

            let n_pos = sample
                .doc_indices
                .iter()
                .filter(|&&i| labels[i].is_positive())
                .count();
            let truth = Distribution2::new(sample.realized_prevalence(n_pos))?;

            quantifiers
                .iter()
                .map(|(name, quantifier)| {
                    let est = quantifier.estimate(&sample.doc_indices);
                    let est_dist = Distribution2::new(est.p_pos)?;
                    Ok(ProtocolRecord {
                        method: name.clone(),
                        level_index,
                        sample_index,
                        true_prev: truth.p_pos(),
                        est_prev: est.p_pos,
                        ae: ae(truth, est_dist),
                        rae: rae(truth, est_dist, cfg.sample_size),
                        kld: kld(truth, est_dist, cfg.sample_size),
                        degenerate: est.degenerate_rates,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    records.sort_by(|a, b| {
        (&a.method, a.level_index, a.sample_index).cmp(&(&b.method, b.level_index, b.sample_index))
    });
    Ok(records)
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied absolute differences receive mean
/// ranks. Returns `(W, p)` with `W = min(W+, W-)`. The p-value is exact
/// (full enumeration of sign assignments) for up to 25 nonzero pairs, and
/// a tie- and continuity-corrected normal approximation beyond that. All
/// pairs equal yields `(0, 1)`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 5 {
        return Err(Error::InsufficientData(
            "paired test needs at least 5 pairs".into(),
        ));
    }

    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok((0.0, 1.0));
    }
    let n = diffs.len();

    // Mean ranks over |d|.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &k in &order[i..=j] {
            ranks[k] = mean_rank;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }

    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let p = if n <= 25 {
        exact_p(&ranks, w)
    } else {
        normal_approx_p(n, &tie_sizes, w)
    };
    Ok((w, p.clamp(0.0, 1.0)))
}

/// Exact two-sided p: the probability, over all 2^n equally likely sign
/// assignments, that `min(W+, W-) <= w`. Computed by dynamic programming
/// over doubled ranks (mean ranks are half-integers).
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len();
    let ranks2: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total2: usize = ranks2.iter().sum();
    let w2 = (2.0 * w).round() as usize;

    // counts[s] = number of assignments with doubled positive rank sum s.
    let mut counts = vec![0.0f64; total2 + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in &ranks2 {
        reach += r;
        for s in (0..=reach).rev() {
            if s >= r && counts[s - r] > 0.0 {
                counts[s] += counts[s - r];
            }
        }
    }

    let favorable: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| s.min(total2 - s) <= w2)
        .map(|(_, c)| c)
        .sum();
    favorable / 2f64.powi(n as i32)
}

fn normal_approx_p(n: usize, tie_sizes: &[usize], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_correction: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            (t * t * t - t) / 48.0
        })
        .sum();
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction;
    if variance <= 0.0 {
        return 1.0;
    }
    // Continuity correction toward the mean; W = min(W+, W-) <= mean.
    let z = (w - mean + 0.5) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

// ---------------------------------------------------------------------------
// Results and summary files
// ---------------------------------------------------------------------------

pub const RESULTS_HEADER: &str =
    "method\tlevel_index\tsample_index\ttrue_prev\test_prev\tae\trae\tkld\tdegenerate_flag";

/// Write protocol records as TSV, floats at 6 decimals.
pub fn write_results_tsv(path: impl AsRef<Path>, records: &[ProtocolRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{RESULTS_HEADER}").map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.method,
            r.level_index,
            r.sample_index,
            r.true_prev,
            r.est_prev,
            r.ae,
            r.rae,
            r.kld,
            u8::from(r.degenerate)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_results_tsv(path: impl AsRef<Path>) -> Result<Vec<ProtocolRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("empty results file {}", path.display())))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header != RESULTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected results header".into(),
        });
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad {what} '{s}'"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad {what} '{s}'"),
            })
        };
        records.push(ProtocolRecord {
            method: fields[0].to_string(),
            level_index: parse_u(fields[1], "level index")?,
            sample_index: parse_u(fields[2], "sample index")?,
            true_prev: parse_f(fields[3], "true prevalence")?,
            est_prev: parse_f(fields[4], "estimated prevalence")?,
            ae: parse_f(fields[5], "ae")?,
            rae: parse_f(fields[6], "rae")?,
            kld: parse_f(fields[7], "kld")?,
            degenerate: match fields[8] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("bad degenerate flag '{other}'"),
                    })
                }
            },
        });
    }
    Ok(records)
}

/// Per-method significance against the best method for one metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignificanceMark {
    /// This is the best (lowest-mean) method for the metric.
    Best,
    /// Not significantly different from the best at alpha = 0.05.
    Dagger,
    /// Not significantly different from the best at alpha = 0.005 (but
    /// significantly different at 0.05).
    DoubleDagger,
    /// Significantly different from the best at both levels.
    None,
}

impl SignificanceMark {
    pub fn as_str(self) -> &'static str {
        match self {
            SignificanceMark::Best => "best",
            SignificanceMark::Dagger => "†",
            SignificanceMark::DoubleDagger => "††",
            SignificanceMark::None => "-",
        }
    }
}

impl fmt::Display for SignificanceMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MetricSummary {
    pub mean: f64,
    pub mark: SignificanceMark,
    /// p-value of the paired test against the best method (1 for the best
    /// itself).
    pub p_vs_best: f64,
}

#[derive(Clone, Debug)]
pub struct MethodSummary {
    pub method: String,
    pub samples: usize,
    pub degenerate_count: usize,
    pub ae: MetricSummary,
    pub rae: MetricSummary,
    pub kld: MetricSummary,
}

/// Aggregate records into per-method means with Wilcoxon marks against the
/// best method per metric. All methods must cover the same (level, sample)
/// cells.
pub fn summarize(records: &[ProtocolRecord]) -> Result<Vec<MethodSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to summarize".into()));
    }
    let mut by_method: BTreeMap<&str, Vec<&ProtocolRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(&r.method).or_default().push(r);
    }
    let methods: Vec<&str> = by_method.keys().copied().collect();
    for group in by_method.values_mut() {
        group.sort_by_key(|r| (r.level_index, r.sample_index));
    }
    let reference_cells: Vec<(usize, usize)> = by_method[methods[0]]
        .iter()
        .map(|r| (r.level_index, r.sample_index))
        .collect();
    for (&method, group) in &by_method {
        let cells: Vec<(usize, usize)> =
            group.iter().map(|r| (r.level_index, r.sample_index)).collect();
        if cells != reference_cells {
            return Err(Error::Format(format!(
                "method '{method}' does not cover the same samples as '{}'",
                methods[0]
            )));
        }
    }

    let metric_values = |method: &str, metric: usize| -> Vec<f64> {
        by_method[method]
            .iter()
            .map(|r| match metric {
                0 => r.ae,
                1 => r.rae,
                _ => r.kld,
            })
            .collect()
    };

    let mut summaries: Vec<MethodSummary> = methods
        .iter()
        .map(|&m| {
            let group = &by_method[m];
            let n = group.len();
            let mean = |metric: usize| -> f64 {
                metric_values(m, metric).iter().sum::<f64>() / n as f64
            };
            MethodSummary {
                method: m.to_string(),
                samples: n,
                degenerate_count: group.iter().filter(|r| r.degenerate).count(),
                ae: MetricSummary {
                    mean: mean(0),
                    mark: SignificanceMark::None,
                    p_vs_best: 1.0,
                },
                rae: MetricSummary {
                    mean: mean(1),
                    mark: SignificanceMark::None,
                    p_vs_best: 1.0,
                },
                kld: MetricSummary {
                    mean: mean(2),
                    mark: SignificanceMark::None,
                    p_vs_best: 1.0,
                },
            }
        })
        .collect();

    for metric in 0..3 {
        let best_idx = (0..summaries.len())
            .min_by(|&i, &j| {
                let mi = metric_field(&summaries[i], metric).mean;
                let mj = metric_field(&summaries[j], metric).mean;
                mi.total_cmp(&mj)
            })
            .expect("non-empty summaries");
        let best_vals = metric_values(&summaries[best_idx].method, metric);

        for (i, summary) in summaries.iter_mut().enumerate() {
            if i == best_idx {
                let field = metric_field_mut(summary, metric);
                field.mark = SignificanceMark::Best;
                field.p_vs_best = 1.0;
                continue;
            }
            let vals = metric_values(&summary.method, metric);
            let (_, p) = wilcoxon_signed_rank(&vals, &best_vals)?;
            let field = metric_field_mut(summary, metric);
            field.p_vs_best = p;
            field.mark = if p > 0.05 {
                SignificanceMark::Dagger
            } else if p > 0.005 {
                SignificanceMark::DoubleDagger
            } else {
                SignificanceMark::None
            };
        }
    }
    Ok(summaries)
}

fn metric_field(s: &MethodSummary, metric: usize) -> &MetricSummary {
    match metric {
        0 => &s.ae,
        1 => &s.rae,
        _ => &s.kld,
    }
}

fn metric_field_mut(s: &mut MethodSummary, metric: usize) -> &mut MetricSummary {
    match metric {
        0 => &mut s.ae,
        1 => &mut s.rae,
        _ => &mut s.kld,
    }
}

pub const SUMMARY_HEADER: &str = "method\tsamples\tae_mean\tae_mark\trae_mean\trae_mark\tkld_mean\tkld_mark\tdegenerate_count";

pub fn write_summary_tsv(path: impl AsRef<Path>, summaries: &[MethodSummary]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{SUMMARY_HEADER}").map_err(|e| Error::io(path, e))?;
    for s in summaries {
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{}",
            s.method,
            s.samples,
            s.ae.mean,
            s.ae.mark,
            s.rae.mean,
            s.rae.mark,
            s.kld.mean,
            s.kld.mark,
            s.degenerate_count
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
