//! Single-writer guard for an output directory.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const LOCK_NAME: &str = ".mdenoise.lock";

/// Holds `<dir>/.mdenoise.lock` until dropped.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(LOCK_NAME);
        let mut file = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                return Err(CliError::Locked {
                    dir: dir.to_owned(),
                    holder: match holder.trim() {
                        "" => "unknown holder".to_string(),
                        h => h.to_string(),
                    },
                });
            }
            Err(e) => return Err(CliError::Io(format!("{}: {e}", path.display()))),
        };
        let _ = writeln!(file, "pid {}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_holder_is_refused_until_release() {
        let dir = tempfile::tempdir().unwrap();
        let first = DirLock::acquire(dir.path()).unwrap();
        let err = DirLock::acquire(dir.path()).unwrap_err();
        assert!(matches!(err, CliError::Locked { .. }), "{err}");
        drop(first);
        assert!(!dir.path().join(LOCK_NAME).exists());
        DirLock::acquire(dir.path()).unwrap();
    }
}
