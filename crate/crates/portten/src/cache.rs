//! Compiled-kernel cache keyed by [`KernelCacheKey`].
//!
//! Entries live in memory for the life of the cache; when a directory is
//! configured, compiled binaries are also written there as `<digest>.bin` and
//! handed back to the compiler on a later miss.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use portten_core::codegen::{KernelCacheKey, KernelSource};

use crate::error::CompileError;

pub const CACHE_DIR_ENV: &str = "PORTTEN_KERNEL_CACHE_DIR";

/// What a compiler callback produces: the handle plus, optionally, a binary
/// worth persisting.
pub struct Compiled<H> {
    pub handle: H,
    pub binary: Option<Vec<u8>>,
}

impl<H> Compiled<H> {
    pub fn new(handle: H) -> Self {
        Self { handle, binary: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub compiles: u64,
    pub disk_loads: u64,
    pub entries: usize,
}

impl CacheStats {
    pub fn lookups(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        match self.lookups() {
            0 => 0.0,
            n => self.hits as f64 / n as f64,
        }
    }
}

type Slot<H> = Arc<Mutex<Option<H>>>;

pub struct KernelCache<H> {
    slots: Mutex<HashMap<KernelCacheKey, Slot<H>>>,
    dir: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
    compiles: AtomicU64,
    disk_loads: AtomicU64,
}

impl<H: Clone> Default for KernelCache<H> {
    fn default() -> Self {
        Self::new()
    }
}

impl<H: Clone> KernelCache<H> {
    /// In-memory only.
    pub fn new() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
            dir: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            compiles: AtomicU64::new(0),
            disk_loads: AtomicU64::new(0),
        }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), ..Self::new() })
    }

    /// Uses `PORTTEN_KERNEL_CACHE_DIR` when set; an unusable directory is
    /// logged and the cache stays in memory.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(&dir).unwrap_or_else(|e| {
                log::warn!("kernel cache directory {dir:?} unusable ({e}); caching in memory only");
                Self::new()
            }),
            _ => Self::new(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Returns the handle cached for `(source, backend)`, calling `compile`
    /// only on a miss. Concurrent callers for one key wait for a single build;
    /// other keys proceed independently. Failed builds are not cached.
    ///
    /// `compile` receives a previously persisted binary when one exists.
    pub fn get_or_build<F>(&self, source: &KernelSource, backend: &str, compile: F) -> Result<H, CompileError>
    where
        F: FnOnce(&KernelSource, Option<&[u8]>) -> Result<Compiled<H>, String>,
    {
        let key = KernelCacheKey::new(source, backend);
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.entry(key).or_default().clone()
        };
        let mut entry = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(handle) = entry.as_ref() {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(handle.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);

        let stored = self.read_binary(&key);
        if stored.is_some() {
            self.disk_loads.fetch_add(1, Ordering::Relaxed);
        } else {
            self.compiles.fetch_add(1, Ordering::Relaxed);
        }
        let compiled = compile(source, stored.as_deref()).map_err(|diagnostic| CompileError {
            backend: backend.to_owned(),
            diagnostic,
            source: source.clone(),
        })?;
        if stored.is_none() {
            if let Some(binary) = &compiled.binary {
                self.write_binary(&key, binary);
            }
        }
        *entry = Some(compiled.handle.clone());
        Ok(compiled.handle)
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            compiles: self.compiles.load(Ordering::Relaxed),
            disk_loads: self.disk_loads.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    /// Number of keys holding a built handle.
    pub fn len(&self) -> usize {
        let slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        slots
            .values()
            .filter(|s| s.lock().map(|h| h.is_some()).unwrap_or(false))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn binary_path(&self, key: &KernelCacheKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.bin")))
    }

    fn read_binary(&self, key: &KernelCacheKey) -> Option<Vec<u8>> {
        let path = self.binary_path(key)?;
        fs::read(path).ok().filter(|b| !b.is_empty())
    }

    fn write_binary(&self, key: &KernelCacheKey, binary: &[u8]) {
        let Some(path) = self.binary_path(key) else { return };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let result = fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(binary))
            .and_then(|_| fs::rename(&tmp, &path));
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            log::warn!("could not persist kernel binary {}: {e}", path.display());
        }
    }
}
