use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Optional defaults read from `--config`; command-line flags win.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub vocab: Option<PathBuf>,
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    /// Seed for `gen-data` when `--seed` is absent; 0 otherwise.
    pub seed: Option<u64>,
    pub ceiling_height: Option<f64>,
}

impl CliConfig {
    /// Relative paths in the file resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c: CliConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.vocab, &mut c.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }
}
