//! Pipeline configuration: a line-oriented `key = value` file plus overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use paperrec::eval::Aggregation;
use paperrec::{ClusterParams, MergeParams, TrainingParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Files produced by the stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Artifact {
    Corpus,
    Cocitations,
    WordVectors,
    TfIdf,
    Embeddings,
    Clusters,
    Recommendations,
    Histogram,
}

impl Artifact {
    pub const ALL: [Artifact; 8] = [
        Artifact::Corpus,
        Artifact::Cocitations,
        Artifact::WordVectors,
        Artifact::TfIdf,
        Artifact::Embeddings,
        Artifact::Clusters,
        Artifact::Recommendations,
        Artifact::Histogram,
    ];

    /// Config key naming the artifact path.
    pub fn key(self) -> &'static str {
        match self {
            Artifact::Corpus => "corpus",
            Artifact::Cocitations => "cocitations",
            Artifact::WordVectors => "word_vectors",
            Artifact::TfIdf => "tfidf",
            Artifact::Embeddings => "embeddings",
            Artifact::Clusters => "clusters",
            Artifact::Recommendations => "recommendations",
            Artifact::Histogram => "histogram",
        }
    }

    pub fn default_file_name(self) -> &'static str {
        match self {
            Artifact::Corpus => "corpus.jsonl",
            Artifact::Cocitations => "cocitations.tsv",
            Artifact::WordVectors => "words.txt",
            Artifact::TfIdf => "tfidf.tsv",
            Artifact::Embeddings => "embeddings.bin",
            Artifact::Clusters => "clusters.bin",
            Artifact::Recommendations => "recommendations.tsv",
            Artifact::Histogram => "eval_histogram.csv",
        }
    }

    /// Stage that writes the artifact.
    pub fn producer(self) -> &'static str {
        match self {
            Artifact::Corpus => "ingest",
            Artifact::Cocitations => "cocite",
            Artifact::WordVectors | Artifact::TfIdf | Artifact::Embeddings => "embed",
            Artifact::Clusters => "cluster",
            Artifact::Recommendations => "recommend",
            Artifact::Histogram => "eval",
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    paths: [Option<PathBuf>; 8],
    pub training: TrainingParams,
    pub cluster: ClusterParams,
    pub merge: MergeParams,
    /// Entries kept per paper by the `cocite` stage.
    pub cocite_top_k: usize,
    pub eval_k: usize,
    pub aggregation: Aggregation,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("paperrec-work"),
            paths: Default::default(),
            training: TrainingParams::default(),
            cluster: ClusterParams::default(),
            merge: MergeParams::default(),
            cocite_top_k: 20,
            eval_k: 10,
            aggregation: Aggregation::Macro,
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl PipelineConfig {
    /// Defaults with artifacts under `work_dir`.
    pub fn in_dir(work_dir: impl Into<PathBuf>, workers: usize) -> Self {
        Self {
            work_dir: work_dir.into(),
            workers,
            ..Self::default()
        }
    }

    /// Reads a config file on top of the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::Io { .. } | ConfigError::Syntax { .. } => e,
                other => ConfigError::Syntax {
                    line: i + 1,
                    message: other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    /// Applies a single `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("override {pair:?} is not key=value"),
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Some(a) = Artifact::ALL.iter().find(|a| a.key() == key) {
            self.paths[*a as usize] = Some(PathBuf::from(value));
            return Ok(());
        }
        match key {
            "work_dir" => self.work_dir = PathBuf::from(value),
            "workers" => self.workers = parse(key, value)?,
            "seed" => {
                let seed = parse(key, value)?;
                self.training.seed = seed;
                self.cluster.seed = seed;
            }
            "embedding_size" => self.training.embedding_size = parse(key, value)?,
            "window" => self.training.window = parse(key, value)?,
            "epochs" => self.training.max_iterations = parse(key, value)?,
            "min_count" => self.training.min_count = parse(key, value)?,
            "subsample" => self.training.subsample = parse(key, value)?,
            "negatives" => self.training.negatives = parse(key, value)?,
            "learning_rate" => self.training.learning_rate = parse(key, value)?,
            "initial_k" => self.cluster.initial_k = parse(key, value)?,
            "kmeans_iterations" => self.cluster.max_iterations = parse(key, value)?,
            "min_error" => self.cluster.min_error = parse(key, value)?,
            "size_cap" => self.cluster.size_cap = parse(key, value)?,
            "max_samples_per_topic" => self.cluster.max_samples_per_topic = parse(key, value)?,
            "topic_confidence" => self.cluster.topic_confidence = parse(key, value)?,
            "theta" => self.merge.theta = parse(key, value)?,
            "tau" => self.merge.tau = parse(key, value)?,
            "top_k" => self.merge.top_k = parse(key, value)?,
            "cocite_top_k" => self.cocite_top_k = parse(key, value)?,
            "eval_k" => self.eval_k = parse(key, value)?,
            "aggregation" => {
                self.aggregation = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                })?
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Path of an artifact: the configured one, or its default name inside `work_dir`.
    pub fn path(&self, artifact: Artifact) -> PathBuf {
        self.paths[artifact as usize]
            .clone()
            .unwrap_or_else(|| self.work_dir.join(artifact.default_file_name()))
    }

    /// Checks every parameter group.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn fmt::Display| ConfigError::Invalid(e.to_string());
        self.training.validate().map_err(|e| invalid(&e))?;
        self.cluster.validate().map_err(|e| invalid(&e))?;
        self.merge.validate().map_err(|e| invalid(&e))?;
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be >= 1".into()));
        }
        if self.cocite_top_k == 0 {
            return Err(ConfigError::Invalid("cocite_top_k must be >= 1".into()));
        }
        if self.eval_k == 0 {
            return Err(ConfigError::Invalid("eval_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_override() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("# run settings\nwork_dir = /tmp/w\nseed=9\ntop_k = 5 # fewer\nembeddings = e.bin\n")
            .unwrap();
        assert_eq!(cfg.training.seed, 9);
        assert_eq!(cfg.cluster.seed, 9);
        assert_eq!(cfg.merge.top_k, 5);
        assert_eq!(cfg.path(Artifact::Embeddings), PathBuf::from("e.bin"));
        assert_eq!(cfg.path(Artifact::Corpus), PathBuf::from("/tmp/w/corpus.jsonl"));
        cfg.apply_override("top_k=7").unwrap();
        assert_eq!(cfg.merge.top_k, 7);
    }

    #[test]
    fn errors_name_the_line_or_key() {
        let mut cfg = PipelineConfig::default();
        let e = cfg.apply_text("seed = 1\nnonsense\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = cfg.apply_text("window = wide\n").unwrap_err();
        assert!(e.to_string().contains("window"), "{e}");
        assert!(matches!(cfg.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn validation_reports_invariant() {
        let cfg = PipelineConfig {
            merge: MergeParams {
                top_k: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("top_k must be >= 1"), "{e}");
    }
}
