//! The run configuration file.
//!
//! ```toml
//! bundle = "corpus.jsonl"
//! output = "out"
//! seed = 7                      # inherited by experiments without their own
//! verbosity = "normal"          # quiet | normal | verbose
//!
//! [resources]
//! embeddings = "res/embeddings.txt"
//! e_given_f = "res/e_given_f.tsv"
//! f_given_e = "res/f_given_e.tsv"
//! concept_graph = "res/concepts.tsv"
//! manual_lists = "res/manual_lists.toml"
//!
//! [[experiment]]
//! name = "binary_1to1_forest"
//! task = "binary_1to1"
//! [experiment.classifier]
//! kind = "forest"
//! n_trees = 300
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evaluation::ExperimentConfig;
use crate::resources::ResourcePaths;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    bundle: PathBuf,
    #[serde(default = "default_output")]
    output: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    verbosity: Verbosity,
    #[serde(default = "yes")]
    normalize: bool,
    #[serde(default)]
    released_features: bool,
    resources: ResourcePaths,
    #[serde(default)]
    experiment: Vec<toml::Table>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bundle: PathBuf,
    pub resources: ResourcePaths,
    pub output: PathBuf,
    pub seed: u64,
    pub verbosity: Verbosity,
    /// Apply clitic, digit and case normalization before featurizing.
    pub normalize: bool,
    /// Features come from the released annotation rather than a re-run of
    /// the preprocessing tools; reports flag the difference.
    pub released_features: bool,
    pub experiments: Vec<ExperimentConfig>,
    /// SHA-256 of the configuration text.
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    /// Parses configuration text; `name` labels errors.
    pub fn parse(text: &str, base: &Path, name: &str) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::Parse {
            path: name.to_string(),
            message,
        };
        let de = toml::de::Deserializer::parse(text).map_err(|e| err(e.to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| err(e.to_string()))?;
        let mut experiments = Vec::new();
        for (i, mut table) in raw.experiment.into_iter().enumerate() {
            table.entry("seed").or_insert(toml::Value::Integer(raw.seed as i64));
            let exp: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
                .map_err(|e| err(format!("experiment {}: {e}", i + 1)))?;
            experiments.push(exp);
        }
        let mut resources = raw.resources;
        resources.rebase(base);
        let rebase = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        Ok(RunConfig {
            bundle: rebase(raw.bundle),
            output: rebase(raw.output),
            resources,
            seed: raw.seed,
            verbosity: raw.verbosity,
            normalize: raw.normalize,
            released_features: raw.released_features,
            experiments,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    /// Replaces every experiment seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        for e in &mut self.experiments {
            e.seed = seed;
        }
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentConfig> {
        self.experiments.iter().find(|e| e.name == name)
    }

    pub fn experiment_names(&self) -> Vec<&str> {
        self.experiments.iter().map(|e| e.name.as_str()).collect()
    }

    /// Structural problems: duplicate names, invalid experiments and
    /// missing resource files. Empty when the configuration is usable.
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.experiments {
            if !seen.insert(e.name.as_str()) {
                out.push(format!("duplicate experiment name `{}`", e.name));
            }
            if let Err(err) = e.validate() {
                out.push(err.to_string());
            }
        }
        for (name, path) in self.resources.all() {
            if !path.is_file() {
                out.push(format!("resource `{name}` not found at {}", path.display()));
            }
        }
        out
    }
}
