use std::path::{Path, PathBuf};

use planminer::classifier::{ClassifierConfig, ModelKind};
use planminer::corpus::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEED_ENV: &str = "PLANMINER_SEED";
pub const DEFAULT_SEED: u64 = 42;

/// Effective run settings: built-in defaults, then the config file, then flags.
///
/// The seed falls back to `PLANMINER_SEED` when neither a flag nor the
/// config file sets it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Folds for `xval` and `curve`.
    pub k: usize,
    pub model: ModelKind,
    /// Plan-heading lexicon, one heading per line. Built-in list when unset.
    pub lexicon: Option<PathBuf>,
    /// word2vec text-format vectors for the pretrained CNN kinds. When unset,
    /// vectors are fit on each training split.
    pub embeddings: Option<PathBuf>,
    pub synth: SynthConfig,
    pub classifier: ClassifierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            k: 10,
            model: ModelKind::SvmAll,
            lexicon: None,
            embeddings: None,
            synth: SynthConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config {}: {}", source.display(), e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Fills an unset seed from the environment value, then the default.
    pub fn resolve_seed(&mut self, env: Option<&str>) -> Result<u64, CliError> {
        let seed = match (self.seed, env) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            (None, None) => DEFAULT_SEED,
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k < 2 {
            return Err(CliError::Usage(format!("k must be at least 2, got {}", self.k)));
        }
        self.synth.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}
