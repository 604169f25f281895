//! In-memory shared folder with sync delays and torn reads.
//!
//! Models a folder synced between two machines. Each side sees its own writes
//! at once; the other side sees them after a delay. The first read of a
//! foreign write may return a strict prefix of it (a partial sync), after
//! which that side sees the whole file. Reads and writes are counted per side
//! and path so tests can assert on access budgets.

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::share::ShareFs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Host,
    Guest,
}

impl Side {
    fn other(self) -> Side {
        match self {
            Side::Host => Side::Guest,
            Side::Guest => Side::Host,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultConfig {
    /// Foreign writes become visible after a uniform delay in `0..=max_delay`.
    pub max_delay: Duration,
    /// Chance that the first read of a foreign write is torn.
    pub torn_read_probability: f64,
    pub seed: u64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self { max_delay: Duration::ZERO, torn_read_probability: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Visibility {
    At(Instant),
    /// Hidden from the other side for this many more of its reads.
    AfterReads(usize),
}

#[derive(Debug)]
struct Version {
    writer: Side,
    visibility: Visibility,
    bytes: Arc<[u8]>,
    tear_checked: bool,
}

#[derive(Debug, Default)]
struct Stats {
    reads: HashMap<(Side, PathBuf), usize>,
    writes: HashMap<(Side, PathBuf), usize>,
    torn_reads: usize,
}

#[derive(Debug)]
struct Inner {
    files: HashMap<PathBuf, Vec<Version>>,
    rng: StdRng,
    stats: Stats,
}

#[derive(Debug, Clone)]
pub struct FaultFs {
    cfg: FaultConfig,
    inner: Arc<Mutex<Inner>>,
}

impl FaultFs {
    pub fn new(cfg: FaultConfig) -> Self {
        let inner = Inner {
            files: HashMap::new(),
            rng: StdRng::seed_from_u64(cfg.seed),
            stats: Stats::default(),
        };
        Self { cfg, inner: Arc::new(Mutex::new(inner)) }
    }

    pub fn view(&self, side: Side) -> FaultView {
        FaultView { fs: self.clone(), side }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Writes as `side`, hidden from the other side for its next `reads` reads.
    pub fn write_hidden_for_reads(&self, side: Side, path: &Path, bytes: &[u8], reads: usize) {
        self.push(side, path, bytes, Some(Visibility::AfterReads(reads)));
    }

    pub fn read_count(&self, side: Side, path: &Path) -> usize {
        self.lock().stats.reads.get(&(side, path.to_path_buf())).copied().unwrap_or(0)
    }

    pub fn write_count(&self, side: Side, path: &Path) -> usize {
        self.lock().stats.writes.get(&(side, path.to_path_buf())).copied().unwrap_or(0)
    }

    pub fn torn_reads(&self) -> usize {
        self.lock().stats.torn_reads
    }

    pub fn reset_counts(&self) {
        let mut inner = self.lock();
        inner.stats.reads.clear();
        inner.stats.writes.clear();
    }

    /// Current contents as seen by `side`, without counting a read or tearing.
    pub fn peek(&self, side: Side, path: &Path) -> Vec<u8> {
        let inner = self.lock();
        let now = Instant::now();
        inner
            .files
            .get(path)
            .and_then(|versions| {
                versions.iter().rev().find(|v| {
                    v.writer == side
                        || match v.visibility {
                            Visibility::At(t) => t <= now,
                            Visibility::AfterReads(n) => n == 0,
                        }
                })
            })
            .map(|v| v.bytes.to_vec())
            .unwrap_or_default()
    }

    fn push(&self, side: Side, path: &Path, bytes: &[u8], visibility: Option<Visibility>) {
        let mut inner = self.lock();
        let visibility = visibility.unwrap_or_else(|| {
            let max = self.cfg.max_delay.as_micros() as u64;
            let delay = if max == 0 { 0 } else { inner.rng.gen_range(0..=max) };
            Visibility::At(Instant::now() + Duration::from_micros(delay))
        });
        *inner.stats.writes.entry((side, path.to_path_buf())).or_default() += 1;
        let versions = inner.files.entry(path.to_path_buf()).or_default();
        versions.push(Version { writer: side, visibility, bytes: Arc::from(bytes), tear_checked: false });
        if versions.len() > 16 {
            versions.drain(..versions.len() - 16);
        }
    }

    fn read_as(&self, side: Side, path: &Path) -> Vec<u8> {
        let mut guard = self.lock();
        let inner = &mut *guard;
        *inner.stats.reads.entry((side, path.to_path_buf())).or_default() += 1;
        let now = Instant::now();
        let Some(versions) = inner.files.get_mut(path) else {
            return Vec::new();
        };

        let mut visible: Option<usize> = None;
        for (i, v) in versions.iter_mut().enumerate() {
            let seen = v.writer == side
                || match &mut v.visibility {
                    Visibility::At(t) => *t <= now,
                    Visibility::AfterReads(n) => {
                        if *n == 0 {
                            true
                        } else {
                            *n -= 1;
                            false
                        }
                    }
                };
            // stored in write order, so the last visible one is the newest
            if seen {
                visible = Some(i);
            }
        }
        let Some(idx) = visible else {
            return Vec::new();
        };
        let version = &mut versions[idx];
        if version.writer == side.other() && !version.tear_checked {
            version.tear_checked = true;
            let len = version.bytes.len();
            if len > 0 && inner.rng.gen_bool(self.cfg.torn_read_probability.clamp(0.0, 1.0)) {
                let cut = inner.rng.gen_range(0..len);
                inner.stats.torn_reads += 1;
                return version.bytes[..cut].to_vec();
            }
        }
        version.bytes.to_vec()
    }
}

/// One side's handle onto a [`FaultFs`].
#[derive(Debug, Clone)]
pub struct FaultView {
    fs: FaultFs,
    side: Side,
}

impl FaultView {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn fs(&self) -> &FaultFs {
        &self.fs
    }
}

impl ShareFs for FaultView {
    fn read(&self, path: &Path) -> io::Result<Vec<u8>> {
        Ok(self.fs.read_as(self.side, path))
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        self.fs.push(self.side, path, bytes, None);
        Ok(())
    }

    fn replace(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        self.fs.push(self.side, path, bytes, None);
        Ok(())
    }

    fn truncate(&self, path: &Path) -> io::Result<()> {
        self.fs.push(self.side, path, &[], None);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PathBuf {
        PathBuf::from("/share/input.txt")
    }

    #[test]
    fn own_writes_are_immediate() {
        let fs = FaultFs::new(FaultConfig { max_delay: Duration::from_secs(60), ..Default::default() });
        let guest = fs.view(Side::Guest);
        let host = fs.view(Side::Host);
        guest.write(&p(), b"hi\r").unwrap();
        assert_eq!(guest.read(&p()).unwrap(), b"hi\r");
        assert!(host.read(&p()).unwrap().is_empty());
    }

    #[test]
    fn hidden_for_reads() {
        let fs = FaultFs::new(FaultConfig::default());
        let guest = fs.view(Side::Guest);
        fs.write_hidden_for_reads(Side::Host, &p(), b"x\r", 2);
        assert!(guest.read(&p()).unwrap().is_empty());
        assert!(guest.read(&p()).unwrap().is_empty());
        assert_eq!(guest.read(&p()).unwrap(), b"x\r");
        assert_eq!(fs.read_count(Side::Guest, &p()), 3);
    }

    #[test]
    fn newer_own_write_shadows_older_foreign_one() {
        let fs = FaultFs::new(FaultConfig::default());
        let guest = fs.view(Side::Guest);
        let host = fs.view(Side::Host);
        host.replace(&p(), b"old\r").unwrap();
        guest.truncate(&p()).unwrap();
        assert!(guest.read(&p()).unwrap().is_empty());
        host.replace(&p(), b"new\r").unwrap();
        assert_eq!(guest.read(&p()).unwrap(), b"new\r");
    }

    #[test]
    fn torn_read_happens_once() {
        let fs = FaultFs::new(FaultConfig { torn_read_probability: 1.0, ..Default::default() });
        let guest = fs.view(Side::Guest);
        let host = fs.view(Side::Host);
        host.replace(&p(), b"hello\r").unwrap();
        let first = guest.read(&p()).unwrap();
        assert!(first.len() < 6 && b"hello\r".starts_with(&first));
        assert_eq!(guest.read(&p()).unwrap(), b"hello\r");
        assert_eq!(fs.torn_reads(), 1);
    }

    #[test]
    fn delayed_visibility() {
        let fs = FaultFs::new(FaultConfig { max_delay: Duration::from_millis(30), seed: 7, ..Default::default() });
        let guest = fs.view(Side::Guest);
        fs.view(Side::Host).replace(&p(), b"a\r").unwrap();
        std::thread::sleep(Duration::from_millis(40));
        assert_eq!(guest.read(&p()).unwrap(), b"a\r");
    }
}
