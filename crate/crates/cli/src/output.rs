//! Per-run output directories.

use std::fs;
use std::path::{Path, PathBuf};

use hybridscreen::fsutil::write_atomic;
use hybridscreen::ingest::sha256_hex;
use hybridscreen::{Error, Result};
use serde::Serialize;

use crate::args::OutputArgs;

pub struct RunDir {
    pub run_id: String,
    pub path: PathBuf,
}

/// `<command>-<first 12 hex digits of the SHA-256 of the argument JSON>`.
pub fn default_run_id<A: Serialize>(command: &str, args: &A) -> Result<String> {
    let json = serde_json::to_string(args)?;
    Ok(format!("{command}-{}", &sha256_hex(json.as_bytes())[..12]))
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RunDir {
    /// Creates the run directory. An existing non-empty directory is an
    /// error unless `--overwrite` was given, in which case it is cleared.
    pub fn create<A: Serialize>(command: &str, out: &OutputArgs, args: &A) -> Result<Self> {
        let run_id = match &out.run_id {
            Some(id) => id.clone(),
            None => default_run_id(command, args)?,
        };
        if !valid_run_id(&run_id) {
            return Err(Error::Validation(format!(
                "run id {run_id:?} may only contain letters, digits, '-', '_' and '.'"
            )));
        }
        let path = out.out_dir.join(&run_id);
        if path.exists() {
            let occupied = !path.is_dir() || fs::read_dir(&path)?.next().is_some();
            if occupied {
                if !out.overwrite {
                    return Err(Error::Validation(format!(
                        "{} already exists; pass --overwrite or choose another --run-id",
                        path.display()
                    )));
                }
                if path.is_dir() {
                    fs::remove_dir_all(&path)?;
                } else {
                    fs::remove_file(&path)?;
                }
            }
        }
        fs::create_dir_all(&path)?;
        Ok(RunDir { run_id, path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.file(name);
        write_atomic(&p, bytes)?;
        Ok(p)
    }

    pub fn write_json<V: Serialize>(&self, name: &str, value: &V) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Input paths are checked up front so that a typo is a validation error
/// rather than an I/O failure halfway through a run.
pub fn require_file(flag: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{flag}: {} is not an existing file", p.display())))
    }
}

pub fn require_dir(flag: &str, p: &Path) -> Result<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{flag}: {} is not an existing directory", p.display())))
    }
}

pub fn require_path(flag: &str, p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{flag}: {} does not exist", p.display())))
    }
}
