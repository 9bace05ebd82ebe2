//! Study configuration read from a TOML file.
//!
//! Relative paths resolve against the directory of the config file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::{Language, Mode};
use crate::providers::{HttpEndpoint, MockProfiles, ProviderParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Where a provider's answers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Mock(MockProfiles),
    Http(HttpEndpoint),
}

impl Backend {
    pub fn is_mock(&self) -> bool {
        matches!(self, Backend::Mock(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(flatten)]
    pub params: ProviderParams,
    pub backend: Backend,
}

fn default_replications() -> u32 {
    20
}

fn default_languages() -> Vec<Language> {
    vec![Language::English]
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Interest]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

fn default_max_in_flight() -> usize {
    8
}

/// Settings for the analysis stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Providers compared across LLMs; the first provider of each family if unset.
    #[serde(default)]
    pub providers: Option<Vec<String>>,
    /// Language of the by-LLM interest analysis; the first configured language if unset.
    #[serde(default)]
    pub language: Option<Language>,
    /// Expert competence ratings, CSV `rater,item_id,score`.
    #[serde(default)]
    pub expert_ratings: Option<PathBuf>,
    /// Occupation table, CSV `code,occupation`; the built-in table if unset.
    #[serde(default)]
    pub occupations: Option<PathBuf>,
    /// Reports land in `<reports_dir>/<name>/`; defaults to `<output_dir>/reports`.
    #[serde(default)]
    pub reports_dir: Option<PathBuf>,
}

/// A complete study definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default = "default_languages")]
    pub languages: Vec<Language>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Item bank CSV; the built-in bank if unset.
    #[serde(default)]
    pub item_bank: Option<PathBuf>,
    /// Directory with prompt templates; the built-in templates if unset.
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Upper bound on concurrent administrations.
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::from("<string>"), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse, validate, and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.item_bank,
            &mut self.prompts_dir,
            &mut self.analysis.expert_ratings,
            &mut self.analysis.occupations,
            &mut self.analysis.reports_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replications < 1 {
            return Err(ConfigError::Invalid("replications must be >= 1".into()));
        }
        if self.providers.is_empty() {
            return Err(ConfigError::Invalid("at least one provider is required".into()));
        }
        if self.languages.is_empty() {
            return Err(ConfigError::Invalid("at least one language is required".into()));
        }
        if self.modes.is_empty() {
            return Err(ConfigError::Invalid("at least one mode is required".into()));
        }
        if self.max_in_flight < 1 {
            return Err(ConfigError::Invalid("max_in_flight must be >= 1".into()));
        }
        let unique = |n: usize, what: &str| -> Result<(), ConfigError> {
            if n != 0 {
                return Err(ConfigError::Invalid(format!("duplicate {what}")));
            }
            Ok(())
        };
        unique(self.languages.len() - self.languages.iter().collect::<BTreeSet<_>>().len(), "language")?;
        unique(self.modes.len() - self.modes.iter().collect::<BTreeSet<_>>().len(), "mode")?;
        let mut names = BTreeSet::new();
        for p in &self.providers {
            p.params.validate().map_err(ConfigError::Invalid)?;
            if !names.insert(p.params.name.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate provider name {:?}", p.params.name)));
            }
            if let Backend::Mock(m) = &p.backend {
                m.validate().map_err(|e| ConfigError::Invalid(format!("provider {}: {e}", p.params.name)))?;
            }
        }
        if let Some(list) = &self.analysis.providers {
            if list.is_empty() {
                return Err(ConfigError::Invalid("analysis.providers is empty".into()));
            }
            if let Some(p) = list.iter().find(|p| !names.contains(p.as_str())) {
                return Err(ConfigError::Invalid(format!("analysis.providers names unknown provider {p:?}")));
            }
        }
        if let Some(l) = self.analysis.language {
            if !self.languages.contains(&l) {
                return Err(ConfigError::Invalid(format!("analysis.language {l} is not a run language")));
            }
        }
        Ok(())
    }

    pub fn all_mock(&self) -> bool {
        self.providers.iter().all(|p| p.backend.is_mock())
    }

    pub fn provider(&self, name: &str) -> Option<&ProviderConfig> {
        self.providers.iter().find(|p| p.params.name == name)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.analysis.reports_dir.clone().unwrap_or_else(|| self.output_dir.join("reports"))
    }
}
