use std::path::Path;

use rfgp::prediction::QmcSettings;
use rfgp::simulate::MethodSettings;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: rfgp::Error,
    },
    #[error(transparent)]
    Runtime(#[from] rfgp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::File { .. } | CliError::Runtime(_) => 1,
        }
    }
}

/// Turns a validation failure into a config error.
pub fn invalid(e: rfgp::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Attaches the offending file to an error that does not already name it.
pub fn at(path: &Path) -> impl FnOnce(rfgp::Error) -> CliError + '_ {
    move |source| match source {
        rfgp::Error::Io { .. } => CliError::Runtime(source),
        _ => CliError::File {
            path: path.display().to_string(),
            source,
        },
    }
}

/// Parses a JSON config; a missing path yields the default.
pub fn read<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Config for `fit` and `cv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub seed: u64,
    pub settings: MethodSettings,
}

/// Overrides applied to a saved model at prediction time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub k: Option<usize>,
    pub qmc: Option<QmcSettings>,
}
