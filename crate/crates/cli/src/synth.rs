//! `synth` subcommand: write a synthetic bilingual benchmark plus a
//! ready-to-run config file.

use std::path::{Path, PathBuf};

use clq_core::corpus::{generate_synthetic_bilingual, write_corpus, write_dictionary};

use crate::CliError;

#[derive(Clone, Debug)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub vocab_size: usize,
}

impl SynthArgs {
    pub fn new(out_dir: PathBuf, seed: u64) -> Self {
        SynthArgs {
            out_dir,
            seed,
            n_labeled: 2000,
            n_unlabeled: 10_000,
            vocab_size: 300,
        }
    }
}

/// Generate and write the benchmark files. Returns the written paths
/// (corpora and config; the dictionary is alongside them).
pub fn run_synth(args: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    let synth =
        generate_synthetic_bilingual(args.seed, args.n_labeled, args.n_unlabeled, args.vocab_size)
            .map_err(|e| CliError::Config(e.to_string()))?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            args.out_dir.display()
        ))
    })?;
    let write_err = |path: &Path, e: clq_core::Error| {
        CliError::Pipeline {
            stage: "synth",
            message: format!("cannot write {}: {e}", path.display()),
        }
    };

    let source_train = args.out_dir.join("source_train.txt");
    let source_unlabeled = args.out_dir.join("source_unlabeled.txt");
    let target_unlabeled = args.out_dir.join("target_unlabeled.txt");
    let target_test = args.out_dir.join("target_test.txt");
    let dictionary = args.out_dir.join("dictionary.tsv");
    let config = args.out_dir.join("config.txt");

    write_corpus(&source_train, &synth.source_labeled).map_err(|e| write_err(&source_train, e))?;
    write_corpus(&source_unlabeled, &synth.source_unlabeled)
        .map_err(|e| write_err(&source_unlabeled, e))?;
    write_corpus(&target_unlabeled, &synth.target_unlabeled)
        .map_err(|e| write_err(&target_unlabeled, e))?;
    write_corpus(&target_test, &synth.target_test).map_err(|e| write_err(&target_test, e))?;
    write_dictionary(&dictionary, &synth.dictionary).map_err(|e| write_err(&dictionary, e))?;

    // Hyperparameters scaled down to the synthetic vocabulary.
    let config_body = format!(
        "# synthetic bilingual benchmark (seed {seed})\n\
         source_labeled = source_train.txt\n\
         source_unlabeled = source_unlabeled.txt\n\
         target_unlabeled = target_unlabeled.txt\n\
         target_test = target_test.txt\n\
         dictionary = dictionary.tsv\n\
         \n\
         projection = both\n\
         methods = cc,pcc,acc,pacc\n\
         \n\
         pivots = 60\n\
         min_support = 30\n\
         svd_dims = 40\n\
         elastic_alpha = 0.85\n\
         drift_threshold = 0.5\n\
         oracle_budget = 600\n\
         \n\
         samples_per_level = 100\n\
         sample_size = 200\n\
         folds_grid = 5\n\
         folds_rates = 10\n\
         \n\
         seed = {seed}\n\
         out_dir = run\n",
        seed = args.seed
    );
    std::fs::write(&config, config_body).map_err(|e| CliError::Pipeline {
        stage: "synth",
        message: format!("cannot write {}: {e}", config.display()),
    })?;

    Ok(vec![
        source_train,
        source_unlabeled,
        target_unlabeled,
        target_test,
        config,
        dictionary,
    ])
}
