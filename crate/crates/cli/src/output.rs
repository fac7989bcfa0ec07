//! Output files that are removed again unless the command completes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates `dir` (and parents) if needed; a directory created here is
    /// removed on failure when it is left empty.
    pub fn dir(&mut self, dir: &Path) -> Result<PathBuf> {
        if !dir.exists() {
            let mut missing = Vec::new();
            let mut cur = Some(dir);
            while let Some(d) = cur {
                if d.as_os_str().is_empty() || d.exists() {
                    break;
                }
                missing.push(d.to_path_buf());
                cur = d.parent();
            }
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            self.created_dirs.extend(missing);
        } else if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        Ok(dir.to_path_buf())
    }

    /// Registers `path` as an output of this run and returns it.
    pub fn file(&mut self, path: impl Into<PathBuf>) -> Result<PathBuf> {
        let path = path.into();
        if path.is_dir() {
            return Err(CliError::Usage(format!(
                "{} is a directory",
                path.display()
            )));
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            self.dir(parent)?;
        }
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.files
    }

    /// Keeps every registered output.
    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        // Deepest first; `remove_dir` only succeeds on empty directories.
        for d in &self.created_dirs {
            let _ = fs::remove_dir(d);
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(shaftpower::Error::from)?;
    write_text(path, &(text + "\n"))
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
