//! Experiment configuration: a flat `key = value` text file with CLI flag
//! overrides. Relative paths resolve against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clq_core::evaluation::DEFAULT_PREVALENCE_LEVELS;
use clq_core::projection::ProjectionMethod;
use clq_core::quantifiers::Method;

use crate::CliError;

/// Which projection families to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionChoice {
    Scl,
    Dci,
    Both,
}

impl ProjectionChoice {
    pub fn methods(self) -> Vec<ProjectionMethod> {
        match self {
            ProjectionChoice::Scl => vec![ProjectionMethod::Scl],
            ProjectionChoice::Dci => vec![ProjectionMethod::Dci],
            ProjectionChoice::Both => vec![ProjectionMethod::Scl, ProjectionMethod::Dci],
        }
    }
}

impl FromStr for ProjectionChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "scl" => Ok(ProjectionChoice::Scl),
            "dci" => Ok(ProjectionChoice::Dci),
            "both" => Ok(ProjectionChoice::Both),
            other => Err(CliError::Config(format!(
                "projection must be scl, dci, or both, got '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub source_labeled: PathBuf,
    pub source_unlabeled: PathBuf,
    pub target_unlabeled: PathBuf,
    pub target_test: PathBuf,
    pub dictionary: PathBuf,

    pub source_language: String,
    pub target_language: String,
    pub domain: String,

    pub projection: ProjectionChoice,
    pub methods: Vec<Method>,

    /// Number of pivots (m).
    pub pivots: usize,
    /// Minimum pivot document frequency (phi).
    pub min_support: u32,
    /// Latent dimensionality k for the SVD-based projection.
    pub svd_dims: usize,
    /// Elastic-net mixing for the SVD projection's hard classifier.
    pub elastic_alpha: f64,
    pub drift_threshold: f64,
    /// Translation oracle call budget; 0 means 10 * pivots.
    pub oracle_budget: usize,
    pub min_df: u32,

    pub levels: Vec<f64>,
    pub samples_per_level: usize,
    pub sample_size: usize,
    pub folds_grid: usize,
    pub folds_rates: usize,

    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source_labeled: PathBuf::new(),
            source_unlabeled: PathBuf::new(),
            target_unlabeled: PathBuf::new(),
            target_test: PathBuf::new(),
            dictionary: PathBuf::new(),
            source_language: "src".into(),
            target_language: "tgt".into(),
            domain: "default".into(),
            projection: ProjectionChoice::Both,
            methods: Method::ALL.to_vec(),
            pivots: 450,
            min_support: 30,
            svd_dims: 100,
            elastic_alpha: 0.85,
            drift_threshold: 0.5,
            oracle_budget: 0,
            min_df: 1,
            levels: DEFAULT_PREVALENCE_LEVELS.to_vec(),
            samples_per_level: 100,
            sample_size: 200,
            folds_grid: 5,
            folds_rates: 10,
            seed: None,
            out_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));

        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "config line {} is not 'key = value': '{raw}'",
                    idx + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!(
                    "duplicate config key '{key}' at line {}",
                    idx + 1
                )));
            }
            cfg.set(key, value, Some(base))?;
        }
        Ok(cfg)
    }

    /// Apply one `key = value` setting. `base` is the directory against
    /// which relative paths resolve (None: leave them as written).
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), CliError> {
        let path_of = |value: &str| -> PathBuf {
            let p = PathBuf::from(value);
            match (p.is_relative(), base) {
                (true, Some(b)) => b.join(p),
                _ => p,
            }
        };
        let bad = |what: &str| CliError::Config(format!("bad {what} value '{value}'"));

        match key {
            "source_labeled" => self.source_labeled = path_of(value),
            "source_unlabeled" => self.source_unlabeled = path_of(value),
            "target_unlabeled" => self.target_unlabeled = path_of(value),
            "target_test" => self.target_test = path_of(value),
            "dictionary" => self.dictionary = path_of(value),
            "out_dir" => self.out_dir = path_of(value),
            "source_language" => self.source_language = value.to_string(),
            "target_language" => self.target_language = value.to_string(),
            "domain" => self.domain = value.to_string(),
            "projection" => self.projection = value.parse()?,
            "methods" => {
                let mut methods = Vec::new();
                for part in value.split(',') {
                    let m: Method = part
                        .trim()
                        .parse()
                        .map_err(|e| CliError::Config(format!("{e}")))?;
                    if !methods.contains(&m) {
                        methods.push(m);
                    }
                }
                if methods.is_empty() {
                    return Err(bad("methods"));
                }
                self.methods = methods;
            }
            "pivots" => self.pivots = value.parse().map_err(|_| bad("pivots"))?,
            "min_support" => self.min_support = value.parse().map_err(|_| bad("min_support"))?,
            "svd_dims" => self.svd_dims = value.parse().map_err(|_| bad("svd_dims"))?,
            "elastic_alpha" => {
                self.elastic_alpha = value.parse().map_err(|_| bad("elastic_alpha"))?
            }
            "drift_threshold" => {
                self.drift_threshold = value.parse().map_err(|_| bad("drift_threshold"))?
            }
            "oracle_budget" => {
                self.oracle_budget = value.parse().map_err(|_| bad("oracle_budget"))?
            }
            "min_df" => self.min_df = value.parse().map_err(|_| bad("min_df"))?,
            "levels" => {
                let mut levels = Vec::new();
                for part in value.split(',') {
                    let v: f64 = part.trim().parse().map_err(|_| bad("levels"))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(bad("levels"));
                    }
                    levels.push(v);
                }
                if levels.is_empty() {
                    return Err(bad("levels"));
                }
                self.levels = levels;
            }
            "samples_per_level" => {
                self.samples_per_level = value.parse().map_err(|_| bad("samples_per_level"))?
            }
            "sample_size" => self.sample_size = value.parse().map_err(|_| bad("sample_size"))?,
            "folds_grid" => self.folds_grid = value.parse().map_err(|_| bad("folds_grid"))?,
            "folds_rates" => self.folds_rates = value.parse().map_err(|_| bad("folds_rates"))?,
            "seed" => self.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            other => {
                return Err(CliError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Effective oracle budget: explicit value or 10 calls per pivot.
    pub fn effective_oracle_budget(&self) -> usize {
        if self.oracle_budget == 0 {
            10 * self.pivots
        } else {
            self.oracle_budget
        }
    }

    /// Check counts, ranges, and file existence; returns the seed.
    pub fn validate(&self) -> Result<u64, CliError> {
        let seed = self.seed.ok_or_else(|| {
            CliError::Config("a seed is required: set 'seed' in the config or pass --seed".into())
        })?;
        for (what, path) in [
            ("source_labeled", &self.source_labeled),
            ("source_unlabeled", &self.source_unlabeled),
            ("target_unlabeled", &self.target_unlabeled),
            ("target_test", &self.target_test),
            ("dictionary", &self.dictionary),
        ] {
            if path.as_os_str().is_empty() {
                return Err(CliError::Config(format!("{what} path is not set")));
            }
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "{what} file does not exist: {}",
                    path.display()
                )));
            }
        }
        for (what, value) in [
            ("pivots", self.pivots),
            ("svd_dims", self.svd_dims),
            ("samples_per_level", self.samples_per_level),
            ("sample_size", self.sample_size),
        ] {
            if value == 0 {
                return Err(CliError::Config(format!("{what} must be positive")));
            }
        }
        if self.min_support == 0 || self.min_df == 0 {
            return Err(CliError::Config(
                "min_support and min_df must be positive".into(),
            ));
        }
        if self.folds_grid < 2 || self.folds_rates < 2 {
            return Err(CliError::Config("fold counts must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.elastic_alpha) {
            return Err(CliError::Config("elastic_alpha must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.drift_threshold) {
            return Err(CliError::Config(
                "drift_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn parses_keys_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("exp.conf");
        let mut f = std::fs::File::create(&config_path).unwrap();
        writeln!(f, "# comment line").unwrap();
        writeln!(f, "source_labeled = data/train.txt").unwrap();
        writeln!(f, "pivots = 60").unwrap();
        writeln!(f, "methods = cc, pacc").unwrap();
        writeln!(f, "seed = 7").unwrap();
        writeln!(f, "projection = dci").unwrap();
        drop(f);

        let cfg = ExperimentConfig::from_file(&config_path).unwrap();
        assert_eq!(cfg.source_labeled, dir.path().join("data/train.txt"));
        assert_eq!(cfg.pivots, 60);
        assert_eq!(cfg.methods, vec![Method::Cc, Method::Pacc]);
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.projection, ProjectionChoice::Dci);
        assert_eq!(cfg.sample_size, 200);
        assert_eq!(cfg.levels.len(), 21);
    }

    #[test]
    fn rejects_unknown_keys_duplicates_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        for body in [
            "mystery = 1\n",
            "pivots = 10\npivots = 20\n",
            "pivots = ten\n",
            "methods = cc,zz\n",
            "just a line\n",
        ] {
            let p = dir.path().join("bad.conf");
            std::fs::write(&p, body).unwrap();
            assert!(
                ExperimentConfig::from_file(&p).is_err(),
                "accepted: {body:?}"
            );
        }
    }

    #[test]
    fn validation_requires_seed_and_existing_files() {
        let cfg = ExperimentConfig::default();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("seed")));

        let mut cfg = ExperimentConfig {
            seed: Some(1),
            ..Default::default()
        };
        cfg.dictionary = PathBuf::from("/nonexistent/dict.tsv");
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("source_labeled")));
    }

    #[test]
    fn default_budget_is_ten_calls_per_pivot() {
        let mut cfg = ExperimentConfig {
            pivots: 50,
            ..Default::default()
        };
        assert_eq!(cfg.effective_oracle_budget(), 500);
        cfg.oracle_budget = 123;
        assert_eq!(cfg.effective_oracle_budget(), 123);
    }
}
