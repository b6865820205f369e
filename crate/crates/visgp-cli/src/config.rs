//! Optional JSON run configuration; command-line flags take precedence.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use visgp::estimate::SgdConfig;
use visgp::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub domain_path: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
    /// "exponential" or "matern".
    pub family: Option<String>,
    pub nu: Option<f64>,
    pub k: Option<usize>,
    pub d_max: Option<f64>,
    /// "full" or "sgd".
    pub method: Option<String>,
    pub sgd: Option<SgdConfig>,
    /// "nc", "mp", or "pw".
    pub strategy: Option<String>,
    pub level: Option<f64>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::InvalidInput(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidInput(format!("bad config JSON: {e}")))
            }
        }
    }
}
