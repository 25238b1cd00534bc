//! TOML run configuration for the `grid` subcommand.
//!
//! ```toml
//! [paths]
//! embeddings = "vectors.tsv"
//! conso = "MRCONSO.RRF"
//! rel = "MRREL.RRF"
//! output_dir = "out"
//!
//! language = "ENG"          # optional concept-file language filter
//!
//! [[benchmarks]]
//! name = "mayosrs"
//! path = "mayosrs.csv"
//! scale_min = 1.0
//! scale_max = 10.0
//!
//! [retrofit]
//! iterations = 10
//! alpha = 1.0
//! beta = "inverse-degree"   # or "uniform"
//!
//! [grid]
//! sets = ["RN", "RQ+RN+SY"]
//! include_baseline = true
//! policy = "skip"           # or "fail"
//! jobs = 1
//! ```
//!
//! Command-line flags override config values.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use relfit::model::{BetaScheme, RelationCode, RetrofitConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// Language filter applied to the concept file (e.g. "ENG").
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub benchmarks: Vec<BenchmarkEntry>,
    #[serde(default)]
    pub retrofit: RetrofitSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub embeddings: PathBuf,
    #[serde(default)]
    pub conso: Option<PathBuf>,
    #[serde(default)]
    pub rel: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkEntry {
    pub name: String,
    pub path: PathBuf,
    pub scale_min: f64,
    pub scale_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrofitSection {
    pub iterations: usize,
    pub alpha: f64,
    pub beta: String,
    pub early_stop: Option<f64>,
}

impl Default for RetrofitSection {
    fn default() -> Self {
        Self {
            iterations: 10,
            alpha: 1.0,
            beta: BetaScheme::default().to_string(),
            early_stop: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Relation sets, one per entry, codes joined with `+` (e.g. "RQ+RN+SY").
    pub sets: Vec<String>,
    pub include_baseline: Option<bool>,
    pub policy: Option<String>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_toml_str(&text)?;
        config.check_paths()?;
        Ok(config)
    }

    /// Referenced input paths must exist at load time.
    fn check_paths(&self) -> Result<(), ConfigError> {
        let mut check = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!(
                    "input path does not exist: {}",
                    p.display()
                )))
            }
        };
        check(&self.paths.embeddings)?;
        if let Some(p) = &self.paths.conso {
            check(p)?;
        }
        if let Some(p) = &self.paths.rel {
            check(p)?;
        }
        for b in &self.benchmarks {
            check(&b.path)?;
        }
        Ok(())
    }

    pub fn retrofit_config(&self) -> Result<RetrofitConfig, ConfigError> {
        let beta_scheme: BetaScheme = self
            .retrofit
            .beta
            .parse()
            .map_err(|e: relfit::model::ModelError| ConfigError::Invalid(e.to_string()))?;
        let cfg = RetrofitConfig {
            iterations: self.retrofit.iterations,
            alpha: self.retrofit.alpha,
            beta_scheme,
            early_stop: self.retrofit.early_stop,
        };
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

/// Parses one relation set like "RQ+RN+SY". Only closed-set codes are
/// allowed here.
pub fn parse_relation_set(raw: &str) -> Result<BTreeSet<RelationCode>, String> {
    let mut set = BTreeSet::new();
    for token in raw.split('+') {
        let token = token.trim();
        if token.is_empty() {
            return Err(format!("empty relation code in set `{raw}`"));
        }
        let code: RelationCode = token
            .parse()
            .map_err(|_| format!("unknown relation code {token}"))?;
        if !code.is_closed() {
            return Err(format!("unknown relation code {token}"));
        }
        set.insert(code);
    }
    if set.is_empty() {
        return Err("empty relation set".into());
    }
    Ok(set)
}

/// Parses a semicolon-separated list of relation sets ("RN;RQ+RN+SY;...").
pub fn parse_relation_sets(raw: &str) -> Result<Vec<BTreeSet<RelationCode>>, String> {
    let mut sets = Vec::new();
    for piece in raw.split(';') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        sets.push(parse_relation_set(piece)?);
    }
    if sets.is_empty() {
        return Err("no relation sets given".into());
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [paths]
            embeddings = "emb.tsv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.retrofit.iterations, 10);
        assert_eq!(cfg.retrofit.alpha, 1.0);
        assert!(cfg.benchmarks.is_empty());
        assert!(cfg.grid.sets.is_empty());
        assert!(cfg.retrofit_config().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str(
            r#"
            [paths]
            embeddings = "emb.tsv"
            typo_field = 3
            "#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn relation_set_parsing() {
        let set = parse_relation_set("RQ+RN+SY").unwrap();
        assert_eq!(relfit::eval::relation_set_label(&set), "RN+RQ+SY");
        assert_eq!(
            parse_relation_set("ZZ").unwrap_err(),
            "unknown relation code ZZ"
        );
        assert!(parse_relation_set("RN++SY").is_err());

        let sets = parse_relation_sets("AQ;RN; RQ+RN+SY ").unwrap();
        assert_eq!(sets.len(), 3);
        assert!(parse_relation_sets(" ; ").is_err());
    }

    #[test]
    fn invalid_retrofit_section_is_caught() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [paths]
            embeddings = "emb.tsv"
            [retrofit]
            iterations = 0
            "#,
        )
        .unwrap();
        assert!(cfg.retrofit_config().is_err());
    }
}
