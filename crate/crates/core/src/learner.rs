//! Regularized linear classifiers on projected vectors.
//!
//! One deterministic proximal-gradient solver covers every configuration:
//! logistic loss for soft (probabilistic) models, a large-margin squared
//! hinge for hard models, and an elastic-net penalty
//! `(1/C) * (alpha*||w||_1 + (1-alpha)/2*||w||_2^2)` handled by
//! soft-thresholding. The bias is never regularized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Loss family. `Hinge` trains the margin objective used by linear SVMs
/// (in its smooth squared form); `Logistic` trains log-loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Hinge,
    Logistic,
}

/// Whether a model is meant for binary decisions or posteriors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Hard,
    Soft,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub loss: Loss,
    /// Inverse regularization strength C; larger means weaker penalty.
    pub c: f64,
    /// Elastic-net mixing in [0, 1]; 0 is pure L2.
    pub elastic_alpha: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl TrainConfig {
    pub fn new(loss: Loss, c: f64, elastic_alpha: f64) -> Self {
        TrainConfig {
            loss,
            c,
            elastic_alpha,
            max_iters: 10_000,
            tol: 1e-6,
        }
    }
}

/// A trained linear model `x -> w.x + b`.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: ModelKind,
    pub loss: Loss,
    pub reg_strength: f64,
    pub elastic_alpha: f64,
}

impl LinearModel {
    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, input has {}",
                self.weights.len(),
                x.len()
            )));
        }
        Ok(dot(&self.weights, x) + self.bias)
    }
}

/// Hard decision: 1 iff the margin is strictly positive (a margin of
/// exactly 0 resolves to the negative class).
pub fn predict_hard(model: &LinearModel, x: &[f64]) -> Result<bool> {
    Ok(model.margin(x)? > 0.0)
}

/// Posterior for the positive class via the logistic link. Saturates to
/// 0/1 without overflow for extreme margins.
pub fn predict_soft(model: &LinearModel, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(model.margin(x)?))
}

pub(crate) fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn loss_value(loss: Loss, z: f64) -> f64 {
    match loss {
        Loss::Logistic => {
            // ln(1 + e^{-z}), stable on both tails.
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        }
        Loss::Hinge => {
            let m = (1.0 - z).max(0.0);
            m * m
        }
    }
}

/// d/df loss(y*f) contribution, already multiplied by y.
fn loss_dmargin(loss: Loss, z: f64, y: f64) -> f64 {
    match loss {
        Loss::Logistic => -y * sigmoid(-z),
        Loss::Hinge => -2.0 * (1.0 - z).max(0.0) * y,
    }
}

fn curvature_bound(loss: Loss) -> f64 {
    match loss {
        Loss::Logistic => 0.25,
        Loss::Hinge => 2.0,
    }
}

struct Problem<'a> {
    xs: &'a [Vec<f64>],
    ys: Vec<f64>,
    loss: Loss,
    l1: f64,
    l2: f64,
}

impl Problem<'_> {
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.xs.len() as f64;
        let data: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, &y)| loss_value(self.loss, y * (dot(w, x) + b)))
            .sum();
        let l2_term = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        let l1_term = self.l1 * w.iter().map(|v| v.abs()).sum::<f64>();
        data / n + l2_term + l1_term
    }

    /// Gradient of the smooth part (data loss + L2).
    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.xs.len() as f64;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (x, &y) in self.xs.iter().zip(&self.ys) {
            let g = loss_dmargin(self.loss, y * (dot(w, x) + b), y);
            if g != 0.0 {
                for (gi, &xi) in gw.iter_mut().zip(x) {
                    *gi += g * xi;
                }
                gb += g;
            }
        }
        for (gi, &wi) in gw.iter_mut().zip(w) {
            *gi = *gi / n + self.l2 * wi;
        }
        (gw, gb / n)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Train a model by FISTA with a fixed 1/L step and objective-based
/// momentum restarts. Starts at zero, so the returned objective never
/// exceeds the zero model's.
pub fn train(xs: &[Vec<f64>], ys: &[Label], cfg: &TrainConfig) -> Result<LinearModel> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidInput(
            "training needs equally many vectors and labels".into(),
        ));
    }
    let dims = xs[0].len();
    for x in xs {
        if x.len() != dims {
            return Err(Error::DimensionMismatch(
                "training vectors have inconsistent lengths".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "training vectors contain non-finite features".into(),
            ));
        }
    }
    let positives = ys.iter().filter(|l| l.is_positive()).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::InsufficientData(
            "training needs at least one example of each class".into(),
        ));
    }
    if !cfg.c.is_finite() || cfg.c <= 0.0 {
        return Err(Error::InvalidInput("C must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.elastic_alpha) {
        return Err(Error::InvalidInput(
            "elastic_alpha must lie in [0, 1]".into(),
        ));
    }

    let problem = Problem {
        xs,
        ys: ys
            .iter()
            .map(|l| if l.is_positive() { 1.0 } else { -1.0 })
            .collect(),
        loss: cfg.loss,
        l1: cfg.elastic_alpha / cfg.c,
        l2: (1.0 - cfg.elastic_alpha) / cfg.c,
    };

    let n = xs.len() as f64;
    let sq_norm_sum: f64 = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum();
    let lip = curvature_bound(cfg.loss) * sq_norm_sum / n + problem.l2;
    let step = 1.0 / lip;

    let mut w = vec![0.0; dims];
    let mut b = 0.0;
    let mut w_prev = w.clone();
    let mut b_prev = b;
    let mut obj = problem.objective(&w, b);
    let mut t = 1.0f64;

    let prox_step = |pw: &[f64], pb: f64, gw: &[f64], gb: f64| -> (Vec<f64>, f64) {
        let new_w = pw
            .iter()
            .zip(gw)
            .map(|(&wi, &gi)| soft_threshold(wi - step * gi, step * problem.l1))
            .collect();
        (new_w, pb - step * gb)
    };

    for iter in 0..cfg.max_iters {
        let momentum = {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let m = (t - 1.0) / t_next;
            t = t_next;
            m
        };
        let yw: Vec<f64> = w
            .iter()
            .zip(&w_prev)
            .map(|(&a, &p)| a + momentum * (a - p))
            .collect();
        let yb = b + momentum * (b - b_prev);

        let (gw, gb) = problem.gradient(&yw, yb);
        let (mut cand_w, mut cand_b) = prox_step(&yw, yb, &gw, gb);
        let mut cand_obj = problem.objective(&cand_w, cand_b);

        if cand_obj > obj {
            // Momentum overshot: restart from the last accepted point.
            t = 1.0;
            let (gw, gb) = problem.gradient(&w, b);
            (cand_w, cand_b) = prox_step(&w, b, &gw, gb);
            cand_obj = problem.objective(&cand_w, cand_b);
        }

        w_prev = std::mem::replace(&mut w, cand_w);
        b_prev = std::mem::replace(&mut b, cand_b);
        obj = cand_obj.min(obj);

        // Composite gradient-mapping norm as the stopping criterion; for
        // alpha = 0 this is exactly the gradient norm.
        if iter % 5 == 4 || iter + 1 == cfg.max_iters {
            let (gw, gb) = problem.gradient(&w, b);
            let (pw, pb) = prox_step(&w, b, &gw, gb);
            let mut crit = (b - pb) * (b - pb);
            for (wi, pi) in w.iter().zip(&pw) {
                crit += (wi - pi) * (wi - pi);
            }
            if crit.sqrt() / step <= cfg.tol {
                break;
            }
        }
    }

    Ok(LinearModel {
        weights: w,
        bias: b,
        kind: match cfg.loss {
            Loss::Hinge => ModelKind::Hard,
            Loss::Logistic => ModelKind::Soft,
        },
        loss: cfg.loss,
        reg_strength: cfg.c,
        elastic_alpha: cfg.elastic_alpha,
    })
}

/// The regularization grid `10^-5 ..= 10^5` searched by [`grid_search_c`].
pub const C_GRID: [f64; 11] = [
    1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4, 1e5,
];

/// Deterministic stratified fold assignment: per-class shuffle, then
/// round-robin. Fold sizes within a class differ by at most one.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if l.is_positive() {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::InsufficientData(format!(
            "stratified {folds}-fold split needs {folds} examples per class, got {} positive / {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut assignment = vec![0usize; labels.len()];
    for (pos_in_class, &doc) in pos.iter().enumerate() {
        assignment[doc] = pos_in_class % folds;
    }
    for (pos_in_class, &doc) in neg.iter().enumerate() {
        assignment[doc] = pos_in_class % folds;
    }
    Ok(assignment)
}

/// Grid-search C over [`C_GRID`] by stratified k-fold accuracy.
/// Ties break toward the smaller C.
pub fn grid_search_c(
    xs: &[Vec<f64>],
    ys: &[Label],
    loss: Loss,
    elastic_alpha: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let assignment = stratified_folds(ys, folds, seed)?;

    let accuracies: Vec<f64> = C_GRID
        .par_iter()
        .map(|&c| -> Result<f64> {
            let cfg = TrainConfig::new(loss, c, elastic_alpha);
            let fold_accs: Vec<f64> = (0..folds)
                .into_par_iter()
                .map(|fold| -> Result<f64> {
                    let (train_x, train_y, test_idx) = split_fold(xs, ys, &assignment, fold);
                    let model = train(&train_x, &train_y, &cfg)?;
                    let mut correct = 0usize;
                    for &i in &test_idx {
                        let predicted = predict_hard(&model, &xs[i])?;
                        if predicted == ys[i].is_positive() {
                            correct += 1;
                        }
                    }
                    Ok(correct as f64 / test_idx.len() as f64)
                })
                .collect::<Result<_>>()?;
            Ok(fold_accs.iter().sum::<f64>() / folds as f64)
        })
        .collect::<Result<_>>()?;

    let mut best_c = C_GRID[0];
    let mut best_acc = accuracies[0];
    for (&c, &acc) in C_GRID.iter().zip(&accuracies).skip(1) {
        if acc > best_acc {
            best_acc = acc;
            best_c = c;
        }
    }
    Ok(best_c)
}

fn split_fold(
    xs: &[Vec<f64>],
    ys: &[Label],
    assignment: &[usize],
    fold: usize,
) -> (Vec<Vec<f64>>, Vec<Label>, Vec<usize>) {
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_idx = Vec::new();
    for (i, &f) in assignment.iter().enumerate() {
        if f == fold {
            test_idx.push(i);
        } else {
            train_x.push(xs[i].clone());
            train_y.push(ys[i]);
        }
    }
    (train_x, train_y, test_idx)
}

/// Held-out predictions for one training document.
#[derive(Clone, Copy, Debug)]
pub struct CvRecord {
    pub hard: bool,
    pub posterior: f64,
    pub label: Label,
    pub fold: usize,
}

/// Held-out predictions for every training document, aligned with the
/// input order. Each document appears exactly once.
#[derive(Clone, Debug)]
pub struct CvPredictions {
    pub records: Vec<CvRecord>,
}

/// Stratified k-fold pass that records, for every document, the hard
/// decision of `hard_cfg`'s model and the posterior of `soft_cfg`'s
/// logistic model, both trained without the document's fold.
pub fn cross_val_predictions(
    xs: &[Vec<f64>],
    ys: &[Label],
    hard_cfg: &TrainConfig,
    soft_cfg: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<CvPredictions> {
    let assignment = stratified_folds(ys, folds, seed)?;

    let per_fold: Vec<Vec<(usize, CvRecord)>> = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<Vec<(usize, CvRecord)>> {
            let (train_x, train_y, test_idx) = split_fold(xs, ys, &assignment, fold);
            let hard_model = train(&train_x, &train_y, hard_cfg)?;
            let soft_model = train(&train_x, &train_y, soft_cfg)?;
            test_idx
                .into_iter()
                .map(|i| {
                    Ok((
                        i,
                        CvRecord {
                            hard: predict_hard(&hard_model, &xs[i])?,
                            posterior: predict_soft(&soft_model, &xs[i])?,
                            label: ys[i],
                            fold,
                        },
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut records = vec![
        CvRecord {
            hard: false,
            posterior: 0.0,
            label: Label::Negative,
            fold: 0,
        };
        xs.len()
    ];
    for fold_records in per_fold {
        for (i, record) in fold_records {
            records[i] = record;
        }
    }
    Ok(CvPredictions { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn labels(ys: &[i8]) -> Vec<Label> {
        ys.iter()
            .map(|&y| if y > 0 { Label::Positive } else { Label::Negative })
            .collect()
    }

    #[test]
    fn separable_points_are_fit_perfectly() {
        let xs = vec![vec![1.0, 0.5], vec![-1.0, -0.5]];
        let ys = labels(&[1, -1]);
        for loss in [Loss::Hinge, Loss::Logistic] {
            let model = train(&xs, &ys, &TrainConfig::new(loss, 10.0, 0.0)).unwrap();
            assert!(predict_hard(&model, &xs[0]).unwrap());
            assert!(!predict_hard(&model, &xs[1]).unwrap());
        }
    }

    #[test]
    fn symmetric_data_fits_a_zero_bias() {
        let xs = vec![
            vec![1.0, 2.0],
            vec![-1.0, -2.0],
            vec![0.5, -0.25],
            vec![-0.5, 0.25],
        ];
        let ys = labels(&[1, -1, 1, -1]);
        let model = train(&xs, &ys, &TrainConfig::new(Loss::Logistic, 1.0, 0.0)).unwrap();
        assert!(model.bias.abs() < 1e-3, "bias {}", model.bias);
    }

    #[test]
    fn training_rejects_degenerate_inputs() {
        let xs = vec![vec![1.0], vec![2.0]];
        assert!(train(&xs, &labels(&[1, 1]), &TrainConfig::new(Loss::Logistic, 1.0, 0.0)).is_err());
        assert!(train(
            &[vec![1.0], vec![f64::NAN]],
            &labels(&[1, -1]),
            &TrainConfig::new(Loss::Logistic, 1.0, 0.0)
        )
        .is_err());
        assert!(train(
            &[vec![1.0], vec![1.0, 2.0]],
            &labels(&[1, -1]),
            &TrainConfig::new(Loss::Logistic, 1.0, 0.0)
        )
        .is_err());
    }

    /// Finite-difference oracle for the smooth logistic objective.
    fn fd_gradient(
        problem_xs: &[Vec<f64>],
        ys: &[f64],
        w: &[f64],
        b: f64,
        l2: f64,
    ) -> (Vec<f64>, f64) {
        let objective = |w: &[f64], b: f64| -> f64 {
            let n = problem_xs.len() as f64;
            let data: f64 = problem_xs
                .iter()
                .zip(ys)
                .map(|(x, &y)| {
                    let z = y * (dot(w, x) + b);
                    loss_value(Loss::Logistic, z)
                })
                .sum();
            data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
        };
        let h = 1e-6;
        let mut gw = vec![0.0; w.len()];
        let mut wp = w.to_vec();
        for i in 0..w.len() {
            wp[i] = w[i] + h;
            let up = objective(&wp, b);
            wp[i] = w[i] - h;
            let down = objective(&wp, b);
            wp[i] = w[i];
            gw[i] = (up - down) / (2.0 * h);
        }
        let gb = (objective(w, b + h) - objective(w, b - h)) / (2.0 * h);
        (gw, gb)
    }

    #[test]
    fn logistic_optimum_has_vanishing_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..60 {
            let pos = i % 2 == 0;
            let center: f64 = if pos { 0.8 } else { -0.8 };
            xs.push(vec![
                center + rng.gen_range(-1.0..1.0),
                center + rng.gen_range(-1.0..1.0),
            ]);
            ys.push(if pos { Label::Positive } else { Label::Negative });
        }
        let cfg = TrainConfig::new(Loss::Logistic, 1.0, 0.0);
        let model = train(&xs, &ys, &cfg).unwrap();

        let y_signs: Vec<f64> = ys
            .iter()
            .map(|l| if l.is_positive() { 1.0 } else { -1.0 })
            .collect();
        let problem = Problem {
            xs: &xs,
            ys: y_signs.clone(),
            loss: Loss::Logistic,
            l1: 0.0,
            l2: 1.0 / cfg.c,
        };
        let (gw, gb) = problem.gradient(&model.weights, model.bias);
        let analytic_norm =
            (gw.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt();
        assert!(analytic_norm <= 1e-5, "gradient norm {analytic_norm}");

        // The analytic gradient agrees with central differences.
        let (fd_w, fd_b) = fd_gradient(&xs, &y_signs, &model.weights, model.bias, problem.l2);
        for (a, f) in gw.iter().chain([&gb]).zip(fd_w.iter().chain([&fd_b])) {
            let scale = f.abs().max(1e-3);
            assert!((a - f).abs() <= 1e-4 * scale, "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn predictions_match_scalar_evaluations() {
        let model = LinearModel {
            weights: vec![1.0, -1.0],
            bias: 0.5,
            kind: ModelKind::Soft,
            loss: Loss::Logistic,
            reg_strength: 1.0,
            elastic_alpha: 0.0,
        };
        // Margin 1.5 -> hard positive, sigmoid(1.5) ~ 0.8176.
        let x = vec![2.0, 1.0];
        assert!(predict_hard(&model, &x).unwrap());
        assert!((predict_soft(&model, &x).unwrap() - 0.8176).abs() < 1e-4);

        // Exactly on the boundary: hard negative, soft one-half.
        let boundary = vec![0.0, 0.5];
        assert!(!predict_hard(&model, &boundary).unwrap());
        assert_eq!(predict_soft(&model, &boundary).unwrap(), 0.5);

        // Saturation without overflow.
        let huge = vec![1e6, 0.0];
        assert!((predict_soft(&model, &huge).unwrap() - 1.0).abs() < 1e-12);
        let tiny = vec![-1e6, 0.0];
        assert!(predict_soft(&model, &tiny).unwrap() < 1e-12);

        assert!(predict_hard(&model, &[1.0]).is_err());
    }

    #[test]
    fn solver_always_improves_on_the_zero_model() {
        let xs = vec![
            vec![0.2, 1.4],
            vec![1.2, -0.4],
            vec![-0.7, 0.3],
            vec![-1.5, -1.0],
            vec![0.9, 0.1],
            vec![-0.1, -0.8],
        ];
        let ys = labels(&[1, 1, -1, -1, 1, -1]);
        for loss in [Loss::Hinge, Loss::Logistic] {
            for alpha in [0.0, 0.5, 0.85] {
                let cfg = TrainConfig::new(loss, 0.5, alpha);
                let model = train(&xs, &ys, &cfg).unwrap();
                let problem = Problem {
                    xs: &xs,
                    ys: ys
                        .iter()
                        .map(|l| if l.is_positive() { 1.0 } else { -1.0 })
                        .collect(),
                    loss,
                    l1: alpha / cfg.c,
                    l2: (1.0 - alpha) / cfg.c,
                };
                let trained = problem.objective(&model.weights, model.bias);
                let zero = problem.objective(&[0.0; 2], 0.0);
                assert!(trained <= zero, "{loss:?} alpha {alpha}: {trained} vs {zero}");
            }
        }
    }

    #[test]
    fn grid_has_eleven_points_and_ties_pick_the_smallest() {
        assert_eq!(C_GRID.len(), 11);
        // A dataset every C fits identically (perfectly separable with a
        // huge margin): all accuracies tie at 1.0.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let pos = i % 2 == 0;
            xs.push(vec![if pos { 50.0 } else { -50.0 }]);
            ys.push(if pos { Label::Positive } else { Label::Negative });
        }
        let c = grid_search_c(&xs, &ys, Loss::Logistic, 0.0, 5, 7).unwrap();
        assert_eq!(c, 1e-5);
    }

    #[test]
    fn grid_search_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let pos = i % 2 == 0;
            let center: f64 = if pos { 0.4 } else { -0.4 };
            xs.push(vec![center + rng.gen_range(-1.0..1.0)]);
            ys.push(if pos { Label::Positive } else { Label::Negative });
        }
        let a = grid_search_c(&xs, &ys, Loss::Hinge, 0.0, 5, 7).unwrap();
        let b = grid_search_c(&xs, &ys, Loss::Hinge, 0.0, 5, 7).unwrap();
        assert_eq!(a, b);
        assert!(C_GRID.contains(&a));
    }

    #[test]
    fn stratified_folds_balance_both_classes() {
        let ys: Vec<Label> = (0..23)
            .map(|i| {
                if i < 13 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        let assignment = stratified_folds(&ys, 5, 11).unwrap();
        assert_eq!(assignment.len(), 23);
        for class in [true, false] {
            let mut counts = vec![0usize; 5];
            for (i, &fold) in assignment.iter().enumerate() {
                if ys[i].is_positive() == class {
                    counts[fold] += 1;
                }
            }
            let max = counts.iter().max().unwrap();
            let min = counts.iter().min().unwrap();
            assert!(max - min <= 1, "class {class}: {counts:?}");
        }

        assert!(stratified_folds(&ys[..6], 5, 11).is_err());
    }

    #[test]
    fn cross_validation_covers_every_document_once() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..50 {
            let pos = i % 2 == 0;
            let center: f64 = if pos { 2.0 } else { -2.0 };
            xs.push(vec![center + rng.gen_range(-0.5..0.5)]);
            ys.push(if pos { Label::Positive } else { Label::Negative });
        }
        let hard = TrainConfig::new(Loss::Hinge, 1.0, 0.0);
        let soft = TrainConfig::new(Loss::Logistic, 1.0, 0.0);
        let cv = cross_val_predictions(&xs, &ys, &hard, &soft, 10, 3).unwrap();
        assert_eq!(cv.records.len(), 50);

        // Separable data: every held-out decision is correct, posteriors
        // land on the right side, and fold ids cover 0..10.
        let mut fold_seen = [false; 10];
        for (record, label) in cv.records.iter().zip(&ys) {
            assert_eq!(record.label, *label);
            assert_eq!(record.hard, label.is_positive());
            assert_eq!(record.posterior > 0.5, label.is_positive());
            assert!((0.0..=1.0).contains(&record.posterior));
            fold_seen[record.fold] = true;
        }
        assert!(fold_seen.iter().all(|&f| f));
    }

    proptest! {
        /// Hard decision and soft posterior agree through the shared
        /// parameters: margin > 0 iff posterior > 1/2.
        #[test]
        fn hard_and_soft_views_agree(
            w0 in -3.0f64..3.0,
            w1 in -3.0f64..3.0,
            b in -2.0f64..2.0,
            x0 in -5.0f64..5.0,
            x1 in -5.0f64..5.0,
        ) {
            let model = LinearModel {
                weights: vec![w0, w1],
                bias: b,
                kind: ModelKind::Hard,
                loss: Loss::Hinge,
                reg_strength: 1.0,
                elastic_alpha: 0.0,
            };
            let x = vec![x0, x1];
            let hard = predict_hard(&model, &x).unwrap();
            let soft = predict_soft(&model, &x).unwrap();
            prop_assert_eq!(hard, soft > 0.5);
        }
    }
}
