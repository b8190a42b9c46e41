//! `--dump-kernels`: write each distinct rendered kernel to a numbered file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use portten_core::codegen::{KernelCacheKey, KernelSource};

pub struct KernelDump {
    dir: PathBuf,
    state: Mutex<(usize, HashSet<KernelCacheKey>)>,
}

impl KernelDump {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, state: Mutex::new((0, HashSet::new())) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `source` as `NNNN-<entry>.cl` unless identical text was already
    /// written. Returns the path when a file was created.
    pub fn record(&self, source: &KernelSource) -> std::io::Result<Option<PathBuf>> {
        let key = KernelCacheKey::new(source, "");
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if !state.1.insert(key) {
            return Ok(None);
        }
        let path = self.dir.join(format!("{:04}-{}.cl", state.0, source.entry_point));
        state.0 += 1;
        fs::write(&path, &source.text)?;
        Ok(Some(path))
    }

    pub fn count(&self) -> usize {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).0
    }
}

static GLOBAL: OnceLock<KernelDump> = OnceLock::new();

/// Installs the process-wide dump directory. Only the first call takes effect.
pub fn install(dir: impl Into<PathBuf>) -> std::io::Result<&'static KernelDump> {
    let dump = KernelDump::new(dir)?;
    Ok(GLOBAL.get_or_init(|| dump))
}

/// Called by the backends for every kernel they render.
pub(crate) fn observe(source: &KernelSource) {
    if let Some(dump) = GLOBAL.get() {
        if let Err(e) = dump.record(source) {
            log::warn!("kernel dump to {} failed: {e}", dump.dir.display());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_and_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        let dump = KernelDump::new(dir.path()).unwrap();
        let src = |t: &str| KernelSource {
            text: t.into(),
            entry_point: "portten_apply".into(),
            build_options: String::new(),
        };
        let a = dump.record(&src("one")).unwrap().unwrap();
        assert!(dump.record(&src("one")).unwrap().is_none());
        let b = dump.record(&src("two")).unwrap().unwrap();
        assert_eq!(a.file_name().unwrap(), "0000-portten_apply.cl");
        assert_eq!(b.file_name().unwrap(), "0001-portten_apply.cl");
        assert_eq!(fs::read_to_string(b).unwrap(), "two");
        assert_eq!(dump.count(), 2);
    }
}
