//! Shared-folder access.
//!
//! Both sides of the protocol go through [`ShareFs`] so tests can swap in the
//! fault-injecting [`crate::faultfs::FaultFs`]. A missing file reads as empty.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const DEFAULT_INPUT_NAME: &str = "input.txt";
pub const DEFAULT_OUTPUT_NAME: &str = "output.txt";

/// Line separator used on the file protocol (classic Mac CR).
pub const LINE_SEPARATOR: u8 = 0x0D;

pub trait ShareFs: Send + Sync {
    /// Whole-file read; a missing file is empty.
    fn read(&self, path: &Path) -> io::Result<Vec<u8>>;
    /// Overwrites in place (not atomic).
    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()>;
    /// Replaces the file contents via temp file and rename.
    fn replace(&self, path: &Path, bytes: &[u8]) -> io::Result<()>;
    fn truncate(&self, path: &Path) -> io::Result<()>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RealFs;

impl ShareFs for RealFs {
    fn read(&self, path: &Path) -> io::Result<Vec<u8>> {
        match fs::read(path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        fs::write(path, bytes)
    }

    fn replace(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })
    }

    fn truncate(&self, path: &Path) -> io::Result<()> {
        fs::OpenOptions::new().write(true).create(true).truncate(true).open(path).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharePaths {
    pub dir: PathBuf,
    pub input_name: String,
    pub output_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SharePathsError {
    #[error("input and output file names must differ (both {0:?})")]
    SameNames(String),
    #[error("file name {0:?} must be a plain file name")]
    BadName(String),
    #[error("share directory {0} does not exist")]
    MissingDir(PathBuf),
}

impl SharePaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            input_name: DEFAULT_INPUT_NAME.to_string(),
            output_name: DEFAULT_OUTPUT_NAME.to_string(),
        }
    }

    pub fn input(&self) -> PathBuf {
        self.dir.join(&self.input_name)
    }

    pub fn output(&self) -> PathBuf {
        self.dir.join(&self.output_name)
    }

    /// Name checks only; see [`SharePaths::validate_dir`] for the directory.
    pub fn validate(&self) -> Result<(), SharePathsError> {
        for name in [&self.input_name, &self.output_name] {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(SharePathsError::BadName(name.clone()));
            }
        }
        if self.input_name == self.output_name {
            return Err(SharePathsError::SameNames(self.input_name.clone()));
        }
        Ok(())
    }

    pub fn validate_dir(&self) -> Result<(), SharePathsError> {
        self.validate()?;
        if !self.dir.is_dir() {
            return Err(SharePathsError::MissingDir(self.dir.clone()));
        }
        Ok(())
    }
}
