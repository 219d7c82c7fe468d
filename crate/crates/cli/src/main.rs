use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clq_cli::config::ExperimentConfig;
use clq_cli::report::{run_report, summary_table};
use clq_cli::synth::{run_synth, SynthArgs};
use clq_cli::{pipeline, CliError};

/// Cross-lingual text quantification experiments.
#[derive(Parser)]
#[command(name = "clq", version, about)]
struct Cli {
    /// Worker threads for the parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bilingual benchmark with a known ground truth.
    Synth {
        /// Output directory for the corpus, dictionary, and config files.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed (required: runs must be reproducible).
        #[arg(long)]
        seed: u64,
        /// Labeled documents per language (training set and test pool).
        #[arg(long, default_value_t = 2000)]
        labeled: usize,
        /// Unlabeled documents per language.
        #[arg(long, default_value_t = 10_000)]
        unlabeled: usize,
        /// Vocabulary size per language.
        #[arg(long, default_value_t = 300)]
        vocab: usize,
    },
    /// Run the full pipeline and write results.tsv / summary.tsv.
    Run(RunArgs),
    /// Summarize one or more results files with significance marks.
    Report {
        /// results.tsv files produced by `run`.
        results: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Projection family: scl, dci, or both.
    #[arg(long)]
    projection: Option<String>,
    /// Comma-separated quantification methods (cc,pcc,acc,pacc).
    #[arg(long)]
    methods: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of pivots (m).
    #[arg(long)]
    pivots: Option<usize>,
    /// Minimum pivot support (phi).
    #[arg(long)]
    min_support: Option<u32>,
    /// Latent dimensionality k of the SVD projection.
    #[arg(long)]
    svd_dims: Option<usize>,
    /// Prevalence-drift filter threshold in [0, 1].
    #[arg(long)]
    drift_threshold: Option<f64>,
    /// Translation oracle call budget (0 = 10 per pivot).
    #[arg(long)]
    oracle_budget: Option<usize>,
    /// Folds for the regularization grid search.
    #[arg(long)]
    folds_grid: Option<usize>,
    /// Folds for the error-rate estimation pass.
    #[arg(long)]
    folds_rates: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("clq: cannot configure {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    }

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth {
            out,
            seed,
            labeled,
            unlabeled,
            vocab,
        } => {
            let args = SynthArgs {
                n_labeled: labeled,
                n_unlabeled: unlabeled,
                vocab_size: vocab,
                ..SynthArgs::new(out, seed)
            };
            let written = run_synth(&args)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Run(args) => {
            let cfg = build_run_config(&args)?;
            let outputs = pipeline::run_experiment(&cfg)?;
            println!("results: {}", outputs.results_path.display());
            println!("summary: {}", outputs.summary_path.display());
            println!();
            print!("{}", summary_table(&outputs.summaries));
            Ok(())
        }
        Command::Report { results } => {
            let table = run_report(&results)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn build_run_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(ref projection) = args.projection {
        cfg.set("projection", projection, None)?;
    }
    if let Some(ref methods) = args.methods {
        cfg.set("methods", methods, None)?;
    }
    if let Some(ref out) = args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(pivots) = args.pivots {
        cfg.pivots = pivots;
    }
    if let Some(min_support) = args.min_support {
        cfg.min_support = min_support;
    }
    if let Some(svd_dims) = args.svd_dims {
        cfg.svd_dims = svd_dims;
    }
    if let Some(drift) = args.drift_threshold {
        cfg.drift_threshold = drift;
    }
    if let Some(budget) = args.oracle_budget {
        cfg.oracle_budget = budget;
    }
    if let Some(folds) = args.folds_grid {
        cfg.folds_grid = folds;
    }
    if let Some(folds) = args.folds_rates {
        cfg.folds_rates = folds;
    }
    Ok(cfg)
}
