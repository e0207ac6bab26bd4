//! All-or-nothing output directories.
//!
//! Files are staged in a hidden temporary directory inside the target and
//! renamed into place on [`Artifacts::commit`]. Dropping without a commit
//! leaves the target directory untouched.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use crate::error::Result;

pub struct Artifacts {
    target: PathBuf,
    staging: TempDir,
    names: Vec<String>,
}

impl Artifacts {
    pub fn new(target: &Path) -> Result<Self> {
        fs::create_dir_all(target)?;
        let staging = tempfile::Builder::new().prefix(".pricelab-").tempdir_in(target)?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            names: Vec::new(),
        })
    }

    pub fn add(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.staging.path().join(name), bytes)?;
        self.names.push(name.to_string());
        Ok(())
    }

    /// Move every staged file into the target. On failure, files already
    /// moved are removed again.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dest = self.target.join(name);
            if let Err(e) = fs::rename(self.staging.path().join(name), &dest) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
            done.push(dest);
        }
        Ok(done)
    }
}
