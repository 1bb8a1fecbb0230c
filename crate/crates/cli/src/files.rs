use std::fs;
use std::path::{Path, PathBuf};

use cde_core::economics::solution::Solution;
use cde_core::instance::Instance;

use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn read_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::parse(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_solution(path: &Path) -> Result<Solution, CliError> {
    Solution::parse(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

/// `dir/stem.suffix` next to `path`, e.g. `runs/tri.algo1.transcript.json` for `runs/tri.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instance".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}
