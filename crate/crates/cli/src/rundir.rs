//! Run-stamped output directories.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::Local;

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates `<out>/<command>-<YYYYmmdd-HHMMSS>`, adding `-2`, `-3`, ...
    /// when several runs start within the same second.
    pub fn create(out: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let stamp = format!("{command}-{}", Local::now().format("%Y%m%d-%H%M%S"));
        for k in 1.. {
            let name = if k == 1 { stamp.clone() } else { format!("{stamp}-{k}") };
            let path = out.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_second_runs_get_distinct_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), "train").unwrap();
        let b = RunDir::create(tmp.path(), "train").unwrap();
        assert_ne!(a.path(), b.path());
        assert!(a.path().file_name().unwrap().to_str().unwrap().starts_with("train-"));
        b.write("runs/x/metrics.csv", "a\n").unwrap();
        assert!(b.path().join("runs/x/metrics.csv").is_file());
    }
}
