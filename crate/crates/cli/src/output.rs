//! Output files, written whole or not at all.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let werr = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(werr)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents).map_err(werr)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        werr(e)
    })
}

/// Run record: configuration echo, versions and timings.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub mode: String,
    pub arguments: Vec<String>,
    pub threads: usize,
    pub config_echo: String,
    pub defaulted: Vec<String>,
    pub overridden: Vec<String>,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub skipped: Vec<String>,
    pub failed_cells: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}
