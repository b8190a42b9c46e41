//! Thread-safe wrapper around the convolution registry.

use std::sync::{Arc, RwLock};

use portten_core::conv::{ConvGeometry, ConvImplEntry, ConvRegistry};
use portten_core::Tensor;

use crate::Result;

/// [`ConvRegistry`] behind a read-write lock: selection and runs take the read
/// side, registration the write side.
#[derive(Clone, Default)]
pub struct SharedRegistry(Arc<RwLock<ConvRegistry>>);

impl SharedRegistry {
    pub fn with_builtins() -> Self {
        Self(Arc::new(RwLock::new(ConvRegistry::with_builtins())))
    }

    pub fn register(&self, entry: ConvImplEntry) -> Result<()> {
        Ok(self.0.write().unwrap_or_else(|e| e.into_inner()).register(entry)?)
    }

    /// Name of the entry [`ConvRegistry::select`] picks for `g`.
    pub fn select(&self, g: &ConvGeometry) -> Result<String> {
        Ok(self.0.read().unwrap_or_else(|e| e.into_inner()).select(g)?.name.clone())
    }

    pub fn names(&self) -> Vec<String> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).names()
    }

    pub fn get(&self, name: &str) -> Option<ConvImplEntry> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).get(name).cloned()
    }

    /// Runs the named implementation, or the selected one for `None`. The lock
    /// is released before the convolution itself runs.
    pub fn run(&self, name: Option<&str>, input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
        let entry = {
            let reg = self.0.read().unwrap_or_else(|e| e.into_inner());
            match name {
                Some(n) => reg.get(n).cloned(),
                None => Some(reg.select(g)?.clone()),
            }
        };
        match entry {
            Some(e) if (e.supports)(g) => Ok((e.run)(input, weight, bias, g)?),
            Some(e) => Err(portten_core::Error::Unsupported(format!("{} does not support {g:?}", e.name)).into()),
            None => Err(portten_core::Error::Registry(format!("unknown implementation {:?}", name.unwrap_or_default())).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concurrent_register_and_select() {
        let reg = SharedRegistry::with_builtins();
        let g = ConvGeometry::square(1, 1, 6, 1, 3, 1, 1);
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let reg = reg.clone();
                std::thread::spawn(move || {
                    let name = format!("custom-{i}");
                    reg.register(ConvImplEntry::new(name, i, |_| true, portten_core::conv::conv_direct)).unwrap();
                    reg.select(&g).unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), "winograd");
        }
        assert_eq!(reg.names().len(), 8);
        assert!(reg.register(ConvImplEntry::new("custom-0", 0, |_| true, portten_core::conv::conv_direct)).is_err());
    }
}
