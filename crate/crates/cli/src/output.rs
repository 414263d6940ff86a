//! Staged outputs: files are written next to their destination under a
//! hidden name and renamed into place only when the whole command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Default)]
pub struct Staging {
    entries: Vec<(PathBuf, PathBuf)>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Staging {
    pub fn new() -> Self {
        Self::default()
    }

    /// Temporary path for `target`. The extension is kept so format
    /// detection by extension still works.
    pub fn path_for(&mut self, target: impl AsRef<Path>) -> Result<PathBuf> {
        let target = target.as_ref().to_path_buf();
        let name = target
            .file_name()
            .ok_or_else(|| CliError::validation(format!("output path {} has no file name", target.display())))?;
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        self.ensure_dir(parent)?;
        let tmp = parent.join(format!(".partial.{}", name.to_string_lossy()));
        self.entries.push((tmp.clone(), target));
        Ok(tmp)
    }

    /// Creates `dir` and its missing ancestors, remembering which ones are
    /// new so they can be removed again on failure.
    pub fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        for d in missing.iter().rev() {
            fs::create_dir(d).map_err(|e| CliError::io(format!("creating {}: {e}", d.display())))?;
            self.dirs.push(d.clone());
        }
        Ok(())
    }

    /// Drops a staged file that will not be committed.
    pub fn discard(&mut self, tmp: &Path) {
        let _ = fs::remove_file(tmp);
        self.entries.retain(|(t, _)| t != tmp);
    }

    pub fn write(&mut self, target: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
        let tmp = self.path_for(&target)?;
        fs::write(&tmp, bytes).map_err(|e| CliError::io(format!("writing {}: {e}", target.as_ref().display())))
    }

    pub fn commit(mut self) -> Result<()> {
        for (tmp, target) in &self.entries {
            fs::rename(tmp, target).map_err(|e| CliError::io(format!("moving output to {}: {e}", target.display())))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (tmp, _) in &self.entries {
            let _ = fs::remove_file(tmp);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_left_behind_without_commit() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("new/sub/a.txt");
        {
            let mut s = Staging::new();
            s.write(&out, b"x").unwrap();
            assert!(dir.path().join("new/sub/.partial.a.txt").exists());
        }
        assert!(!dir.path().join("new").exists());
    }

    #[test]
    fn commit_moves_files_into_place() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("b.png");
        let mut s = Staging::new();
        let tmp = s.path_for(&out).unwrap();
        assert_eq!(tmp.extension().unwrap(), "png");
        fs::write(&tmp, b"y").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read(&out).unwrap(), b"y");
        assert!(!tmp.exists());
    }
}
