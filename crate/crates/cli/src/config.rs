//! Optional TOML defaults for `analyze`. Keys mirror the long flags with underscores;
//! list-valued keys take arrays of the same strings the flags accept. Relative paths
//! resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::failure::{CmdResult, Failure};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default)]
    pub input: Vec<PathBuf>,
    #[serde(default)]
    pub effect: Vec<String>,
    pub layer: Option<String>,
    #[serde(default)]
    pub format: Vec<String>,
    pub order: Option<String>,
    pub ratio_average_duplicates: Option<bool>,
    pub smacof: Option<bool>,
    pub residual_format: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub emit: Vec<String>,
    pub jobs: Option<usize>,
}

pub fn load(path: &Path) -> CmdResult<AnalyzeConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("i/o error on {}: {e}", path.display())))?;
    let mut cfg: AnalyzeConfig = toml::from_str(&text)
        .map_err(|e| Failure::validation(format!("config {}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    cfg.input.iter_mut().for_each(resolve);
    cfg.out.as_mut().map(resolve);
    Ok(cfg)
}
