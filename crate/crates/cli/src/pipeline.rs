//! End-to-end experiment pipeline: ingest, vectorize, pivot selection,
//! projection, classifier training, quantification, and protocol
//! evaluation, with content-addressed caching of the expensive stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use clq_core::corpus::{self, Corpus};
use clq_core::evaluation::{
    self, MethodSummary, ProtocolConfig, ProtocolRecord,
};
use clq_core::learner::{self, LinearModel, Loss, ModelKind, TrainConfig};
use clq_core::pivots::{self, PivotConfig, PivotPair, TranslationOracle};
use clq_core::projection::{ProjectionMatrix, ProjectionMethod};
use clq_core::quantifiers::{
    self, AccQuantifier, CcQuantifier, Method, PaccQuantifier, PccQuantifier, PoolQuantifier,
    RateEstimates,
};
use clq_core::scl::{self, AuxPredictorConfig};
use clq_core::vectorizer::{build_vocabulary, tfidf_vectorize, SparseVector, Vocabulary};
use clq_core::{dci, Error};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct RunOutputs {
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ProtocolRecord>,
}

fn stage<T>(name: &'static str, result: Result<T, Error>) -> Result<T, CliError> {
    result.map_err(|e| CliError::Pipeline {
        stage: name,
        message: e.to_string(),
    })
}

fn stage_io<T>(name: &'static str, result: std::io::Result<T>, what: &Path) -> Result<T, CliError> {
    result.map_err(|e| CliError::Pipeline {
        stage: name,
        message: format!("{}: {e}", what.display()),
    })
}

/// Either projection family, ready to map per-language document vectors
/// into the shared space.
enum Projector {
    /// One matrix over the concatenated source+target index space.
    Scl {
        theta: ProjectionMatrix,
        source_dims: usize,
    },
    /// Separate per-language matrices with aligned output dimensions.
    Dci {
        theta_s: ProjectionMatrix,
        theta_t: ProjectionMatrix,
    },
}

impl Projector {
    fn tag(&self) -> ProjectionMethod {
        match self {
            Projector::Scl { .. } => ProjectionMethod::Scl,
            Projector::Dci { .. } => ProjectionMethod::Dci,
        }
    }

    fn project_source(&self, x: &SparseVector) -> Result<Vec<f64>, Error> {
        match self {
            Projector::Scl { theta, .. } => theta.project(x),
            Projector::Dci { theta_s, .. } => theta_s.project(x),
        }
    }

    fn project_target(&self, x: &SparseVector) -> Result<Vec<f64>, Error> {
        match self {
            Projector::Scl { theta, source_dims } => theta.project(&x.shifted(*source_dims)),
            Projector::Dci { theta_t, .. } => theta_t.project(x),
        }
    }
}

struct InputDigests {
    source_labeled: String,
    source_unlabeled: String,
    target_unlabeled: String,
    dictionary: String,
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest_digest(manifest: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(manifest.as_bytes());
    hex(&hasher.finalize())[..12].to_string()
}

fn cache_file(out_dir: &Path, stage_name: &str, manifest: &str, suffix: &str) -> PathBuf {
    out_dir
        .join("cache")
        .join(format!("{stage_name}-{}{suffix}.tsv", manifest_digest(manifest)))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutputs, CliError> {
    let seed = cfg.validate()?;

    // ── load ────────────────────────────────────────────────────────────
    let source_labeled = stage(
        "load",
        corpus::load_corpus(&cfg.source_labeled, &cfg.source_language, &cfg.domain),
    )?;
    if !source_labeled.is_labeled() {
        return Err(CliError::Pipeline {
            stage: "load",
            message: format!(
                "source training corpus {} carries no labels",
                cfg.source_labeled.display()
            ),
        });
    }
    let source_unlabeled = stage(
        "load",
        corpus::load_corpus(&cfg.source_unlabeled, &cfg.source_language, &cfg.domain),
    )?;
    let target_unlabeled = stage(
        "load",
        corpus::load_corpus(&cfg.target_unlabeled, &cfg.target_language, &cfg.domain),
    )?;
    let target_test = stage(
        "load",
        corpus::load_corpus(&cfg.target_test, &cfg.target_language, &cfg.domain),
    )?;
    if !target_test.is_labeled() {
        return Err(CliError::Pipeline {
            stage: "load",
            message: format!(
                "target test pool {} carries no labels",
                cfg.target_test.display()
            ),
        });
    }
    let dictionary = stage("load", corpus::load_dictionary(&cfg.dictionary))?;

    let digests = InputDigests {
        source_labeled: file_digest(&cfg.source_labeled)?,
        source_unlabeled: file_digest(&cfg.source_unlabeled)?,
        target_unlabeled: file_digest(&cfg.target_unlabeled)?,
        dictionary: file_digest(&cfg.dictionary)?,
    };
    let cache_dir = cfg.out_dir.join("cache");
    stage_io(
        "report",
        std::fs::create_dir_all(&cache_dir),
        &cache_dir,
    )?;

    // ── vocab ───────────────────────────────────────────────────────────
    let vocab_manifest_s = format!(
        "vocab|lang=source|min_df={}|{}|{}",
        cfg.min_df, digests.source_labeled, digests.source_unlabeled
    );
    let vocab_manifest_t = format!(
        "vocab|lang=target|min_df={}|{}",
        cfg.min_df, digests.target_unlabeled
    );
    let vocab_s = load_or_build_vocab(
        &cache_file(&cfg.out_dir, "vocab", &vocab_manifest_s, ""),
        || build_vocabulary(&[&source_labeled, &source_unlabeled], cfg.min_df),
    )?;
    let vocab_t = load_or_build_vocab(
        &cache_file(&cfg.out_dir, "vocab", &vocab_manifest_t, ""),
        || build_vocabulary(&[&target_unlabeled], cfg.min_df),
    )?;
    log::info!(
        "vocabularies: {} source terms, {} target terms",
        vocab_s.len(),
        vocab_t.len()
    );

    // ── pivots ──────────────────────────────────────────────────────────
    let mut oracle = TranslationOracle::new(dictionary, cfg.effective_oracle_budget());
    let pivot_cfg = PivotConfig {
        count: cfg.pivots,
        min_support: cfg.min_support,
        drift_threshold: cfg.drift_threshold,
    };
    let pivots = stage(
        "pivots",
        pivots::select_pivots(
            &source_labeled,
            &source_unlabeled,
            &target_unlabeled,
            &mut oracle,
            &pivot_cfg,
        ),
    )?;
    log::info!(
        "selected {} pivots with {} oracle calls",
        pivots.len(),
        oracle.calls_used()
    );

    let projection_manifest = format!(
        "pivots={}|min_support={}|drift={}|budget={}|min_df={}|{}|{}|{}|{}",
        cfg.pivots,
        cfg.min_support,
        cfg.drift_threshold,
        cfg.effective_oracle_budget(),
        cfg.min_df,
        digests.source_labeled,
        digests.source_unlabeled,
        digests.target_unlabeled,
        digests.dictionary,
    );

    // ── project / train / quantify, per projection family ───────────────
    let mut quantifiers: Vec<(String, Box<dyn PoolQuantifier>)> = Vec::new();
    for (proj_index, method) in cfg.projection.methods().into_iter().enumerate() {
        let projector = build_projector(
            cfg,
            method,
            &projection_manifest,
            &source_unlabeled,
            &target_unlabeled,
            &pivots,
            &vocab_s,
            &vocab_t,
        )?;

        let setup = train_setup(
            cfg,
            seed,
            proj_index,
            &projector,
            &projection_manifest,
            &source_labeled,
            &vocab_s,
        )?;
        log::info!(
            "{}: hard C = {}, soft C = {}, rates tpr/fpr hard = {:.3}/{:.3}, soft = {:.3}/{:.3}",
            projector.tag(),
            setup.hard_c,
            setup.soft_c,
            setup.rates.tpr_hard,
            setup.rates.fpr_hard,
            setup.rates.tpr_soft,
            setup.rates.fpr_soft
        );

        let mut decisions = Vec::with_capacity(target_test.len());
        let mut posteriors = Vec::with_capacity(target_test.len());
        for doc in &target_test.documents {
            let x = tfidf_vectorize(doc, &vocab_t);
            let projected = stage("quantify", projector.project_target(&x))?;
            decisions.push(stage(
                "quantify",
                learner::predict_hard(&setup.hard_model, &projected),
            )?);
            posteriors.push(stage(
                "quantify",
                learner::predict_soft(&setup.soft_model, &projected),
            )?);
        }

        for &q_method in &cfg.methods {
            let name = format!("{}-{}", projector.tag(), q_method);
            let quantifier: Box<dyn PoolQuantifier> = match q_method {
                Method::Cc => Box::new(CcQuantifier {
                    decisions: decisions.clone(),
                }),
                Method::Pcc => Box::new(PccQuantifier {
                    posteriors: posteriors.clone(),
                }),
                Method::Acc => Box::new(AccQuantifier {
                    decisions: decisions.clone(),
                    tpr: setup.rates.tpr_hard,
                    fpr: setup.rates.fpr_hard,
                }),
                Method::Pacc => Box::new(PaccQuantifier {
                    posteriors: posteriors.clone(),
                    tpr: setup.rates.tpr_soft,
                    fpr: setup.rates.fpr_soft,
                }),
            };
            quantifiers.push((name, quantifier));
        }
    }

    // ── evaluate ────────────────────────────────────────────────────────
    let protocol = ProtocolConfig {
        levels: cfg.levels.clone(),
        samples_per_level: cfg.samples_per_level,
        sample_size: cfg.sample_size,
        base_seed: seed,
    };
    let records = stage(
        "evaluate",
        evaluation::run_protocol(&quantifiers, &target_test, &protocol),
    )?;
    let summaries = stage("evaluate", evaluation::summarize(&records))?;

    // ── report ──────────────────────────────────────────────────────────
    stage_io(
        "report",
        std::fs::create_dir_all(&cfg.out_dir),
        &cfg.out_dir,
    )?;
    let results_path = cfg.out_dir.join("results.tsv");
    let summary_path = cfg.out_dir.join("summary.tsv");
    stage("report", evaluation::write_results_tsv(&results_path, &records))?;
    stage("report", evaluation::write_summary_tsv(&summary_path, &summaries))?;

    Ok(RunOutputs {
        results_path,
        summary_path,
        summaries,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_projector(
    cfg: &ExperimentConfig,
    method: ProjectionMethod,
    projection_manifest: &str,
    source_unlabeled: &Corpus,
    target_unlabeled: &Corpus,
    pivots: &[PivotPair],
    vocab_s: &Vocabulary,
    vocab_t: &Vocabulary,
) -> Result<Projector, CliError> {
    match method {
        ProjectionMethod::Scl => {
            let manifest = format!("scl|k={}|{projection_manifest}", cfg.svd_dims);
            let path = cache_file(&cfg.out_dir, "theta-scl", &manifest, "");
            let theta = if path.is_file() {
                log::info!("scl: projection cache hit at {}", path.display());
                stage("project", ProjectionMatrix::read_tsv(&path))?
            } else {
                let w = stage(
                    "project",
                    scl::train_auxiliary_predictors(
                        source_unlabeled,
                        target_unlabeled,
                        pivots,
                        vocab_s,
                        vocab_t,
                        &AuxPredictorConfig::default(),
                    ),
                )?;
                let svd = stage("project", scl::truncated_svd(&w, cfg.svd_dims))?;
                if svd.is_rank_deficient() {
                    log::warn!(
                        "scl: correlation matrix rank {} below requested {}",
                        svd.effective_rank,
                        cfg.svd_dims
                    );
                }
                let language = format!("{}+{}", cfg.source_language, cfg.target_language);
                let theta = stage(
                    "project",
                    svd.into_projection(ProjectionMethod::Scl, language),
                )?;
                stage("project", theta.write_tsv(&path))?;
                theta
            };
            Ok(Projector::Scl {
                theta,
                source_dims: vocab_s.len(),
            })
        }
        ProjectionMethod::Dci => {
            let manifest = format!("dci|{projection_manifest}");
            let path_s = cache_file(&cfg.out_dir, "theta-dci", &manifest, "-src");
            let path_t = cache_file(&cfg.out_dir, "theta-dci", &manifest, "-tgt");
            let (theta_s, theta_t) = if path_s.is_file() && path_t.is_file() {
                log::info!("dci: projection cache hit at {}", path_s.display());
                (
                    stage("project", ProjectionMatrix::read_tsv(&path_s))?,
                    stage("project", ProjectionMatrix::read_tsv(&path_t))?,
                )
            } else {
                let (theta_s, theta_t) = stage(
                    "project",
                    dci::build_projection(
                        source_unlabeled,
                        target_unlabeled,
                        pivots,
                        vocab_s,
                        vocab_t,
                    ),
                )?;
                stage("project", theta_s.write_tsv(&path_s))?;
                stage("project", theta_t.write_tsv(&path_t))?;
                (theta_s, theta_t)
            };
            Ok(Projector::Dci { theta_s, theta_t })
        }
    }
}

struct TrainedSetup {
    hard_c: f64,
    soft_c: f64,
    hard_model: LinearModel,
    soft_model: LinearModel,
    rates: RateEstimates,
}

fn train_setup(
    cfg: &ExperimentConfig,
    seed: u64,
    proj_index: usize,
    projector: &Projector,
    projection_manifest: &str,
    source_labeled: &Corpus,
    vocab_s: &Vocabulary,
) -> Result<TrainedSetup, CliError> {
    let alpha = match projector.tag() {
        ProjectionMethod::Scl => cfg.elastic_alpha,
        ProjectionMethod::Dci => 0.0,
    };
    let manifest = format!(
        "models|{}|k={}|alpha={alpha}|folds_grid={}|folds_rates={}|seed={seed}|{projection_manifest}",
        projector.tag(),
        cfg.svd_dims,
        cfg.folds_grid,
        cfg.folds_rates,
    );
    let cache_path = cache_file(&cfg.out_dir, "models", &manifest, "");
    if cache_path.is_file() {
        log::info!(
            "{}: model cache hit at {}",
            projector.tag(),
            cache_path.display()
        );
        return read_setup_cache(&cache_path, alpha);
    }

    let labels = stage("train", source_labeled.require_labels().map(<[_]>::to_vec))?;
    let mut xs = Vec::with_capacity(source_labeled.len());
    for doc in &source_labeled.documents {
        let v = tfidf_vectorize(doc, vocab_s);
        xs.push(stage("train", projector.project_source(&v))?);
    }

    let grid_seed_hard = evaluation::sample_seed(seed, 101, proj_index);
    let grid_seed_soft = evaluation::sample_seed(seed, 102, proj_index);
    let rates_seed = evaluation::sample_seed(seed, 103, proj_index);

    let hard_c = stage(
        "train",
        learner::grid_search_c(&xs, &labels, Loss::Hinge, alpha, cfg.folds_grid, grid_seed_hard),
    )?;
    let soft_c = stage(
        "train",
        learner::grid_search_c(
            &xs,
            &labels,
            Loss::Logistic,
            0.0,
            cfg.folds_grid,
            grid_seed_soft,
        ),
    )?;
    let hard_cfg = TrainConfig::new(Loss::Hinge, hard_c, alpha);
    let soft_cfg = TrainConfig::new(Loss::Logistic, soft_c, 0.0);
    let hard_model = stage("train", learner::train(&xs, &labels, &hard_cfg))?;
    let soft_model = stage("train", learner::train(&xs, &labels, &soft_cfg))?;
    let cv = stage(
        "train",
        learner::cross_val_predictions(&xs, &labels, &hard_cfg, &soft_cfg, cfg.folds_rates, rates_seed),
    )?;
    let rates = stage("train", quantifiers::estimate_rates(&cv))?;

    let setup = TrainedSetup {
        hard_c,
        soft_c,
        hard_model,
        soft_model,
        rates,
    };
    write_setup_cache(&cache_path, &setup)?;
    Ok(setup)
}

fn write_setup_cache(path: &Path, setup: &TrainedSetup) -> Result<(), CliError> {
    let file = stage_io("train", File::create(path), path)?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: String| stage_io("train", writeln!(w, "{line}"), path);
    emit(format!("hard_c\t{}", setup.hard_c))?;
    emit(format!("soft_c\t{}", setup.soft_c))?;
    emit(format!("tpr_hard\t{}", setup.rates.tpr_hard))?;
    emit(format!("fpr_hard\t{}", setup.rates.fpr_hard))?;
    emit(format!("tpr_soft\t{}", setup.rates.tpr_soft))?;
    emit(format!("fpr_soft\t{}", setup.rates.fpr_soft))?;
    emit(format!("hard_bias\t{}", setup.hard_model.bias))?;
    emit(format!("soft_bias\t{}", setup.soft_model.bias))?;
    let join = |ws: &[f64]| {
        ws.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("\t")
    };
    emit(format!("hard_weights\t{}", join(&setup.hard_model.weights)))?;
    emit(format!("soft_weights\t{}", join(&setup.soft_model.weights)))?;
    Ok(())
}

fn read_setup_cache(path: &Path, alpha: f64) -> Result<TrainedSetup, CliError> {
    let file = stage_io("train", File::open(path), path)?;
    let mut values: std::collections::HashMap<String, String> = std::collections::HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = stage_io("train", line, path)?;
        if let Some((key, value)) = line.split_once('\t') {
            values.insert(key.to_string(), value.to_string());
        }
    }
    let bad_cache = |what: &str| CliError::Pipeline {
        stage: "train",
        message: format!("corrupt model cache {}: missing {what}", path.display()),
    };
    let scalar = |key: &str| -> Result<f64, CliError> {
        values
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad_cache(key))
    };
    let weights = |key: &str| -> Result<Vec<f64>, CliError> {
        values
            .get(key)
            .map(|v| {
                v.split('\t')
                    .map(|f| f.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
            .ok()
            .flatten()
            .ok_or_else(|| bad_cache(key))
    };

    let hard_c = scalar("hard_c")?;
    let soft_c = scalar("soft_c")?;
    Ok(TrainedSetup {
        hard_c,
        soft_c,
        hard_model: LinearModel {
            weights: weights("hard_weights")?,
            bias: scalar("hard_bias")?,
            kind: ModelKind::Hard,
            loss: Loss::Hinge,
            reg_strength: hard_c,
            elastic_alpha: alpha,
        },
        soft_model: LinearModel {
            weights: weights("soft_weights")?,
            bias: scalar("soft_bias")?,
            kind: ModelKind::Soft,
            loss: Loss::Logistic,
            reg_strength: soft_c,
            elastic_alpha: 0.0,
        },
        rates: RateEstimates {
            tpr_hard: scalar("tpr_hard")?,
            fpr_hard: scalar("fpr_hard")?,
            tpr_soft: scalar("tpr_soft")?,
            fpr_soft: scalar("fpr_soft")?,
        },
    })
}

fn load_or_build_vocab(
    path: &Path,
    build: impl FnOnce() -> Result<Vocabulary, Error>,
) -> Result<Vocabulary, CliError> {
    if path.is_file() {
        let file = stage_io("vocab", File::open(path), path)?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(line) => stage_io("vocab", line, path)?,
            None => {
                return Err(CliError::Pipeline {
                    stage: "vocab",
                    message: format!("empty vocabulary cache {}", path.display()),
                })
            }
        };
        let n_docs: usize = header
            .strip_prefix("n_docs\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Pipeline {
                stage: "vocab",
                message: format!("corrupt vocabulary cache {}", path.display()),
            })?;
        let mut terms = Vec::new();
        let mut dfs = Vec::new();
        for line in lines {
            let line = stage_io("vocab", line, path)?;
            if let Some((term, df)) = line.split_once('\t') {
                terms.push(term.to_string());
                dfs.push(df.parse().map_err(|_| CliError::Pipeline {
                    stage: "vocab",
                    message: format!("corrupt vocabulary cache {}", path.display()),
                })?);
            }
        }
        return stage("vocab", Vocabulary::from_parts(terms, dfs, n_docs));
    }

    let vocab = stage("vocab", build())?;
    let file = stage_io("vocab", File::create(path), path)?;
    let mut w = BufWriter::new(file);
    stage_io("vocab", writeln!(w, "n_docs\t{}", vocab.n_docs()), path)?;
    for i in 0..vocab.len() {
        stage_io(
            "vocab",
            writeln!(w, "{}\t{}", vocab.term(i), vocab.doc_freq_of(i)),
            path,
        )?;
    }
    Ok(vocab)
}
