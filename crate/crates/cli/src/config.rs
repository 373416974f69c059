//! Built-in defaults and the optional TOML config file. Resolution order is
//! always flags, then file values, then the defaults below.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

pub mod defaults {
    pub const SEED: u64 = 0;
    pub const STATES: usize = 20;
    pub const MAX_ITERS: usize = 100;
    pub const TOL: f64 = 1e-4;
    pub const SMOOTHING: f64 = 1e-6;
    pub const K_NEIGHBORS: usize = 30;
    pub const N: usize = 10;
    pub const N1: usize = 7;
    pub const N2: usize = 3;
    pub const MAP_K: usize = 10;
    pub const CF: &str = "binary-pseudo";

    pub const GEN_USERS: usize = 972;
    pub const GEN_LENGTH: usize = 29;
    pub const GEN_ARTISTS: usize = 50;
    pub const GEN_STATES: usize = 5;
}

/// Errors carry the exit code the binary should report: 2 for usage and
/// validation problems, 3 for numeric failures.
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<playseq::Error> for CliError {
    fn from(err: playseq::Error) -> Self {
        let code = match err {
            playseq::Error::NonFinite { .. } => 3,
            _ => 2,
        };
        CliError {
            message: err.to_string(),
            code,
        }
    }
}

/// Keys accepted in a `--config` file. Unknown keys are rejected so typos
/// cannot silently fall back to defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub states: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub smoothing: Option<f64>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub map_k: Option<usize>,
    pub cf: Option<String>,
    pub threads: Option<usize>,
    pub users: Option<usize>,
    pub length: Option<usize>,
    pub artists: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// flag > file > default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
