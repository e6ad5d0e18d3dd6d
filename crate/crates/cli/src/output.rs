//! All-or-nothing output. Files and directories are assembled next to their
//! destination and moved into place only once complete, so a failed run
//! never leaves a partial artifact behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::{NamedTempFile, TempDir};

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = parent_of(path);
    let mut tmp = NamedTempFile::new_in(&dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes to `path`, or stdout when `None`.
pub fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub struct StagedDir {
    staging: TempDir,
    target: PathBuf,
}

impl StagedDir {
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() && !target.is_dir() {
            anyhow::bail!(crate::Invalid(format!("{} exists and is not a directory", target.display())));
        }
        let dir = parent_of(target);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".hoipt-staging")
            .tempdir_in(&dir)
            .with_context(|| format!("creating staging directory in {}", dir.display()))?;
        Ok(Self { staging, target: target.to_path_buf() })
    }

    pub fn write(&self, relative: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
        let path = self.staging.path().join(relative);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Moves the staged tree into place, replacing an existing directory.
    pub fn commit(self) -> Result<()> {
        let staged = self.staging.keep();
        if self.target.exists() {
            let old = tempfile::Builder::new().prefix(".hoipt-old").tempdir_in(parent_of(&self.target))?.keep();
            fs::remove_dir(&old)?;
            fs::rename(&self.target, &old).with_context(|| format!("replacing {}", self.target.display()))?;
            fs::rename(&staged, &self.target).with_context(|| format!("writing {}", self.target.display()))?;
            fs::remove_dir_all(&old)?;
        } else {
            fs::rename(&staged, &self.target).with_context(|| format!("writing {}", self.target.display()))?;
        }
        Ok(())
    }
}
