use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Removes every file it wrote (and directories it created) unless committed.
#[derive(Debug, Default)]
pub struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_dir(&mut self, dir: &Path) -> Result<()> {
        // remember the outermost missing ancestor so cleanup removes it all
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        self.dirs.extend(missing);
        Ok(())
    }

    /// Runs `write` for `path`, registering the file first.
    pub fn write<F>(&mut self, path: PathBuf, write: F) -> Result<PathBuf>
    where
        F: FnOnce(&Path) -> mip_core::Result<()>,
    {
        self.files.push(path.clone());
        write(&path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            if f.exists() {
                log::info!("removing partial output {}", f.display());
                let _ = fs::remove_file(f);
            }
        }
        // innermost first; only empty directories go
        for d in &self.dirs {
            let _ = fs::remove_dir(d);
        }
    }
}
