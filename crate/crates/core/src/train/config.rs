//! Flat `key = value` config files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys understood by [`TrainConfig`]:
//!
//! | key             | type  | default |
//! |-----------------|-------|---------|
//! | `epochs`        | int   | 20      |
//! | `learning_rate` | float | 0.001   |
//! | `batch_size`    | int   | 16      |
//! | `seed`          | int   | 13      |
//! | `input_dim`     | int   | 100     |
//! | `hidden_dim`    | int   | 200     |
//! | `doc_dim`       | int   | 100     |
//! | `layers`        | int   | 1       |
//! | `gradient_clip` | float | 5.0     |
//! | `shuffle`       | bool  | true    |
//!
//! Unknown keys are rejected.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::net::ModelDims;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("config line {line}: bad value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| ConfigError::BadValue {
            line: self.line,
            key: self.key.clone(),
            value: self.value.clone(),
        })
    }
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_owned(),
            });
        }
        entries.push(Entry {
            line,
            key: key.to_owned(),
            value: value.to_owned(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Documents per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub dims: ModelDims,
    /// Maximum global L2 norm of a batch gradient.
    pub gradient_clip: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 16,
            seed: 13,
            dims: ModelDims::new(100, 200, 100),
            gradient_clip: 5.0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = TrainConfig::default();
        for entry in parse_entries(text)? {
            config.apply(&entry)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one key; unknown keys are an error.
    pub fn apply(&mut self, entry: &Entry) -> Result<(), ConfigError> {
        match entry.key.as_str() {
            "epochs" => self.epochs = entry.parse()?,
            "learning_rate" => self.learning_rate = entry.parse()?,
            "batch_size" => self.batch_size = entry.parse()?,
            "seed" => self.seed = entry.parse()?,
            "input_dim" => self.dims.input = entry.parse()?,
            "hidden_dim" => self.dims.hidden = entry.parse()?,
            "doc_dim" => self.dims.doc = entry.parse()?,
            "layers" => self.dims.layers = entry.parse()?,
            "gradient_clip" => self.gradient_clip = entry.parse()?,
            "shuffle" => self.shuffle = entry.parse()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: entry.line,
                    key: entry.key.clone(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive")))
            }
        };
        positive("epochs", self.epochs > 0)?;
        positive("batch_size", self.batch_size > 0)?;
        positive("learning_rate", self.learning_rate > 0.0 && self.learning_rate.is_finite())?;
        positive("gradient_clip", self.gradient_clip > 0.0 && self.gradient_clip.is_finite())?;
        positive("input_dim", self.dims.input > 0)?;
        positive("hidden_dim", self.dims.hidden > 0)?;
        positive("doc_dim", self.dims.doc > 0)?;
        positive("layers", self.dims.layers > 0)
    }

    /// The effective configuration in the file format, one key per line.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "input_dim = {}", self.dims.input);
        let _ = writeln!(out, "hidden_dim = {}", self.dims.hidden);
        let _ = writeln!(out, "doc_dim = {}", self.dims.doc);
        let _ = writeln!(out, "layers = {}", self.dims.layers);
        let _ = writeln!(out, "gradient_clip = {}", self.gradient_clip);
        let _ = writeln!(out, "shuffle = {}", self.shuffle);
        out
    }
}
