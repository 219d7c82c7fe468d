//! Structural correspondence projection: one auxiliary pivot-presence
//! predictor per pivot pair, assembled into a correlation matrix over the
//! concatenated source+target feature space, then reduced by truncated SVD.

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pivots::PivotPair;
use crate::projection::{ProjectionMatrix, ProjectionMethod};
use crate::vectorizer::Vocabulary;

/// Knobs for the auxiliary predictors. Defaults favor reproducibility:
/// a smooth convex loss minimized by deterministic full-batch descent.
#[derive(Clone, Copy, Debug)]
pub struct AuxPredictorConfig {
    /// L2 regularization strength on the feature weights.
    pub l2_reg: f64,
    /// Iteration cap for the full-batch solver.
    pub max_iters: usize,
    /// Gradient-norm early-stopping tolerance.
    pub tol: f64,
    /// Clip negative weights to zero before assembling the matrix.
    pub clip_negative: bool,
}

impl Default for AuxPredictorConfig {
    fn default() -> Self {
        // The ridge term is firm: with weak regularization the weight
        // split across correlated companion terms is ill-determined, and
        // the cross-lingual symmetry of the columns does not survive.
        AuxPredictorConfig {
            l2_reg: 0.1,
            max_iters: 200,
            tol: 1e-5,
            clip_negative: true,
        }
    }
}

/// Train one auxiliary prediction problem per pivot pair and collect the
/// learned weight vectors as columns of a `(|V_s|+|V_t|) x m` matrix.
///
/// Each problem predicts pivot presence (source pivot for source documents,
/// target pivot for target documents) from binary presence features over
/// the union of both unlabeled corpora. Both pivot terms' own features are
/// masked to zero, so their rows in the returned column are exactly 0.
/// A pivot present in every document makes the task single-class; its
/// column falls back to all zeros. A pivot present in no document is an
/// error.
pub fn train_auxiliary_predictors(
    source_unlabeled: &Corpus,
    target_unlabeled: &Corpus,
    pivots: &[PivotPair],
    vocab_s: &Vocabulary,
    vocab_t: &Vocabulary,
    cfg: &AuxPredictorConfig,
) -> Result<Matrix> {
    if pivots.is_empty() {
        return Err(Error::InvalidInput("no pivots given".into()));
    }
    if source_unlabeled.is_empty() || target_unlabeled.is_empty() {
        return Err(Error::InsufficientData(
            "auxiliary training needs non-empty unlabeled corpora".into(),
        ));
    }

    let offset = vocab_s.len();
    let dim = vocab_s.len() + vocab_t.len();

    // Binary presence features in the concatenated index space, built once.
    let mut features: Vec<Vec<u32>> =
        Vec::with_capacity(source_unlabeled.len() + target_unlabeled.len());
    for doc in &source_unlabeled.documents {
        let mut idxs: Vec<u32> = doc
            .terms
            .keys()
            .filter_map(|t| vocab_s.index_of(t))
            .map(|i| i as u32)
            .collect();
        idxs.sort_unstable();
        features.push(idxs);
    }
    for doc in &target_unlabeled.documents {
        let mut idxs: Vec<u32> = doc
            .terms
            .keys()
            .filter_map(|t| vocab_t.index_of(t))
            .map(|i| (i + offset) as u32)
            .collect();
        idxs.sort_unstable();
        features.push(idxs);
    }

    let columns: Vec<Vec<f64>> = pivots
        .par_iter()
        .map(|pivot| {
            let mut labels = Vec::with_capacity(features.len());
            for doc in &source_unlabeled.documents {
                labels.push(doc.contains(&pivot.source_term));
            }
            for doc in &target_unlabeled.documents {
                labels.push(doc.contains(&pivot.target_term));
            }
            let positives = labels.iter().filter(|&&l| l).count();
            if positives == 0 {
                return Err(Error::UntrainablePivot(pivot.source_term.clone()));
            }
            if positives == labels.len() {
                // Constant-label task: nothing to learn.
                return Ok(vec![0.0; dim]);
            }

            let masked: Vec<u32> = [
                vocab_s.index_of(&pivot.source_term).map(|i| i as u32),
                vocab_t
                    .index_of(&pivot.target_term)
                    .map(|i| (i + offset) as u32),
            ]
            .into_iter()
            .flatten()
            .collect();

            let task: Vec<Vec<u32>> = features
                .iter()
                .map(|idxs| {
                    idxs.iter()
                        .copied()
                        .filter(|i| !masked.contains(i))
                        .collect()
                })
                .collect();

            Ok(train_pivot_predictor(&task, &labels, dim, cfg))
        })
        .collect::<Result<_>>()?;

    let mut w = Matrix::zeros(dim, pivots.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            let v = if cfg.clip_negative { v.max(0.0) } else { v };
            w.set(i, j, v);
        }
    }
    Ok(w)
}

/// Modified-Huber classification loss with L2 regularization, minimized by
/// Nesterov-accelerated full-batch gradient descent with a fixed 1/L step.
/// The bias is fitted but not returned; columns of the correlation matrix
/// hold feature weights only.
fn train_pivot_predictor(
    features: &[Vec<u32>],
    labels: &[bool],
    dim: usize,
    cfg: &AuxPredictorConfig,
) -> Vec<f64> {
    let n = features.len();
    let n_f = n as f64;

    // Curvature bound: modified Huber has second derivative <= 2 and the
    // binary feature rows have squared norm nnz+1 (bias included).
    let sq_norm_sum: f64 = features.iter().map(|f| (f.len() + 1) as f64).sum();
    let step = 1.0 / (2.0 * sq_norm_sum / n_f + cfg.l2_reg);

    let mut w = vec![0.0; dim + 1]; // bias last
    let mut w_prev = w.clone();
    let mut grad = vec![0.0; dim + 1];
    let mut t = 1.0f64;

    for _ in 0..cfg.max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        // Extrapolated point.
        let v: Vec<f64> = w
            .iter()
            .zip(&w_prev)
            .map(|(&a, &b)| a + momentum * (a - b))
            .collect();

        grad.iter_mut().for_each(|g| *g = 0.0);
        for (idxs, &label) in features.iter().zip(labels) {
            let y = if label { 1.0 } else { -1.0 };
            let f: f64 = idxs.iter().map(|&i| v[i as usize]).sum::<f64>() + v[dim];
            let z = y * f;
            // d/df of the modified Huber loss at margin z.
            let g = if z >= 1.0 {
                continue;
            } else if z >= -1.0 {
                -2.0 * (1.0 - z) * y
            } else {
                -4.0 * y
            };
            for &i in idxs {
                grad[i as usize] += g;
            }
            grad[dim] += g;
        }
        let mut grad_norm_sq = 0.0;
        for i in 0..=dim {
            grad[i] /= n_f;
            if i < dim {
                grad[i] += cfg.l2_reg * v[i];
            }
            grad_norm_sq += grad[i] * grad[i];
        }

        w_prev.copy_from_slice(&w);
        for i in 0..=dim {
            w[i] = v[i] - step * grad[i];
        }
        t = t_next;

        if grad_norm_sq.sqrt() <= cfg.tol {
            break;
        }
    }
    w.truncate(dim);
    w
}

/// Truncated SVD factors: the top-`k` left singular vectors as columns.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub factors: Matrix,
    pub singular_values: Vec<f64>,
    /// Number of leading columns backed by a singular value above the rank
    /// tolerance; trailing columns are zero-padded.
    pub effective_rank: usize,
}

impl TruncatedSvd {
    pub fn is_rank_deficient(&self) -> bool {
        self.effective_rank < self.factors.cols()
    }

    pub fn into_projection(
        self,
        method: ProjectionMethod,
        language: impl Into<String>,
    ) -> Result<ProjectionMatrix> {
        ProjectionMatrix::new(self.factors, method, language)
    }
}

const SVD_INIT_SEED: u64 = 0x5eed_51d5_7e3a_11c1;
const SVD_MAX_ITERS: usize = 50;
const SVD_TOL: f64 = 1e-8;

/// Truncated SVD of `w` by block power iteration with orthonormalization
/// (block size `min(2k, min(rows, cols))`, at most 50 iterations, stopping
/// when no top-k singular value moves by more than 1e-8).
///
/// Column signs are fixed by making each column's largest-magnitude entry
/// positive. If `w` has rank below `k` the missing columns are zero and a
/// warning is logged.
pub fn truncated_svd(w: &Matrix, k: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = (w.rows(), w.cols());
    let min_dim = rows.min(cols);
    if k < 1 || k > min_dim {
        return Err(Error::InvalidInput(format!(
            "k = {k} outside 1..={min_dim} for a {rows}x{cols} matrix"
        )));
    }
    let block = (2 * k).min(min_dim);

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SVD_INIT_SEED);
    let mut gaussian_ish = Matrix::zeros(cols, block);
    for r in 0..cols {
        for c in 0..block {
            gaussian_ish.set(r, c, rng.gen_range(-1.0..1.0));
        }
    }

    let mut q = orthonormalize(w.multiply(&gaussian_ish)?);
    let mut prev_sigma: Option<Vec<f64>> = None;
    let mut prev_u: Option<Matrix> = None;
    let mut u_full = Matrix::zeros(rows, block);
    let mut sigma = vec![0.0; block];

    for _ in 0..SVD_MAX_ITERS {
        // One power step on W Wᵀ.
        let z = w.transpose_multiply(&q)?; // cols x block
        q = orthonormalize(w.multiply(&z)?); // rows x block

        // Rayleigh-Ritz on the current subspace.
        let b = q.transpose_multiply(w)?; // block x cols  (Qᵀ W)
        let s = b.multiply(&transpose(&b))?; // block x block
        let (eigvals, eigvecs) = jacobi_eigen(&s);
        sigma = eigvals.iter().map(|&v| v.max(0.0).sqrt()).collect();
        u_full = q.multiply(&eigvecs)?; // rows x block

        // Singular values settle one order earlier than the vectors, so
        // require both to move below tolerance before stopping.
        let sigma_converged = prev_sigma.as_ref().is_some_and(|prev| {
            sigma
                .iter()
                .zip(prev)
                .take(k)
                .all(|(a, b)| (a - b).abs() <= SVD_TOL)
        });
        let factors_converged = prev_u
            .as_ref()
            .is_some_and(|prev| factor_change(&u_full, prev, k) <= SVD_TOL);
        prev_sigma = Some(sigma.clone());
        prev_u = Some(u_full.clone());
        if sigma_converged && factors_converged {
            break;
        }
    }
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank_tol = sigma_max * 1e-9;

    let mut factors = Matrix::zeros(rows, k);
    let mut singular_values = vec![0.0; k];
    let mut effective_rank = 0;
    for j in 0..k {
        if sigma[j] > rank_tol && sigma[j] > 0.0 {
            for r in 0..rows {
                factors.set(r, j, u_full.get(r, j));
            }
            singular_values[j] = sigma[j];
            effective_rank += 1;
        }
    }
    if effective_rank < k {
        log::warn!(
            "requested k = {k} exceeds numerical rank {effective_rank}; padding with zero columns"
        );
    }

    fix_column_signs(&mut factors);
    Ok(TruncatedSvd {
        factors,
        singular_values,
        effective_rank,
    })
}

/// Largest entry-wise change between successive factor iterates over the
/// first `k` columns, up to per-column sign.
fn factor_change(current: &Matrix, previous: &Matrix, k: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..k.min(current.cols()) {
        let mut dot = 0.0;
        for r in 0..current.rows() {
            dot += current.get(r, j) * previous.get(r, j);
        }
        let sign = if dot >= 0.0 { 1.0 } else { -1.0 };
        for r in 0..current.rows() {
            let d = (current.get(r, j) - sign * previous.get(r, j)).abs();
            worst = worst.max(d);
        }
    }
    worst
}

fn transpose(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.cols(), m.rows());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.set(c, r, m.get(r, c));
        }
    }
    out
}

/// Modified Gram-Schmidt with a re-orthogonalization pass. Columns that
/// collapse (linearly dependent input) become zero columns.
#[allow(clippy::needless_range_loop)]
fn orthonormalize(mut m: Matrix) -> Matrix {
    let (rows, cols) = (m.rows(), m.cols());
    for j in 0..cols {
        let mut v: Vec<f64> = (0..rows).map(|r| m.get(r, j)).collect();
        let orig_norm = norm(&v);
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = 0.0;
                for r in 0..rows {
                    dot += m.get(r, i) * v[r];
                }
                if dot != 0.0 {
                    for r in 0..rows {
                        v[r] -= dot * m.get(r, i);
                    }
                }
            }
        }
        let nv = norm(&v);
        if nv <= 1e-12 * orig_norm.max(1.0) {
            for r in 0..rows {
                m.set(r, j, 0.0);
            }
        } else {
            for r in 0..rows {
                m.set(r, j, v[r] / nv);
            }
        }
    }
    m
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with matching orthonormal eigenvector
/// columns.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(s: &Matrix) -> (Vec<f64>, Matrix) {
    let n = s.rows();
    debug_assert_eq!(n, s.cols());
    let mut a: Vec<Vec<f64>> = (0..n).map(|r| s.row(r).to_vec()).collect();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let frob: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let stop = 1e-14 * frob.max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= stop / (n as f64) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - sn * aiq;
                    a[i][q] = sn * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - sn * aqi;
                    a[q][i] = sn * api + c * aqi;
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - sn * viq;
                    row[q] = sn * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));

    let eigvals: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut eigvecs = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            eigvecs.set(r, new_col, v[r][old_col]);
        }
    }
    (eigvals, eigvecs)
}

/// Make the largest-magnitude entry of each column positive (first
/// occurrence wins on ties) so factor signs are deterministic.
fn fix_column_signs(m: &mut Matrix) {
    for j in 0..m.cols() {
        let mut best = 0.0f64;
        let mut best_val = 0.0f64;
        for r in 0..m.rows() {
            let v = m.get(r, j);
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < 0.0 {
            for r in 0..m.rows() {
                let v = m.get(r, j);
                m.set(r, j, -v);
            }
        }
    }
}
