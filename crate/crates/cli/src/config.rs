//! Run configuration: a fixed set of dotted keys with defaults, filled from a
//! `key=value` file and then from command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key=value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("{path}:{line}: `{key}` is set twice")]
    Duplicate { path: PathBuf, line: usize, key: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("`{key}` = `{value}`: {message}")]
    BadValue { key: String, value: String, message: String },
    #[error("`{0}` is required for this command")]
    Missing(String),
}

/// Every accepted key and its default; an empty default means "unset".
const KEYS: &[(&str, &str)] = &[
    ("run.seed", "0"),
    ("run.jobs", "auto"),
    ("run.summary", ""),
    ("audio.output_rate", "16000"),
    ("audio.encoding", "float32"),
    ("vad.frame_ms", "30"),
    ("vad.floor_percentile", "10"),
    ("vad.threshold_db", "6"),
    ("screen.pool", ""),
    ("screen.quota", "20000"),
    ("screen.out", ""),
    ("screen.min_duration_s", "2"),
    ("screen.min_words", "2"),
    ("screen.min_snr_db", "50"),
    ("mixer.noise_power", "p56"),
    ("build.manifest", ""),
    ("build.lengths", ""),
    ("build.candidates", ""),
    ("build.noise_dir", ""),
    ("build.out", ""),
    ("build.validation_size", "0"),
    ("eval.pairs", ""),
    ("eval.weights", ""),
    ("eval.out", "metrics.tsv"),
    ("feats.input", ""),
    ("feats.weights", ""),
    ("feats.out", ""),
    ("feats.kind", "encoder"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    /// Applies a `key=value` override given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(pair.to_string()))?;
        self.set(k.trim(), v.trim())
    }

    /// Reads a config file: one `key=value` per line, `#` starts a comment
    /// line, blank lines are ignored. Keys may appear at most once.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text, path)
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax {
                path: origin.to_path_buf(),
                line: i + 1,
            })?;
            let key = k.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            self.set(key, v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a configuration key"))
    }

    pub fn parse<T>(&self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let value = self.get(key);
        value.parse().map_err(|e: T::Err| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            message: e.to_string(),
        })
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        match self.get(key) {
            "" => Err(ConfigError::Missing(key.to_string())),
            v => Ok(PathBuf::from(v)),
        }
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        Some(self.get(key)).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    pub fn bad(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: key.to_string(),
            value: self.get(key).to_string(),
            message: message.into(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
