//! Named convolution implementations with a support predicate and priority.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{conv_direct, conv_im2col_batched, conv_im2col_forward, conv_winograd_2x2_3x3, default_batch_chunk, winograd_supports};
use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub type SupportsFn = Arc<dyn Fn(&ConvGeometry) -> bool + Send + Sync>;
pub type ConvFn = Arc<dyn Fn(&Tensor, &Tensor, Option<&Tensor>, &ConvGeometry) -> Result<Tensor> + Send + Sync>;

#[derive(Clone)]
pub struct ConvImplEntry {
    pub name: String,
    pub priority: i32,
    pub supports: SupportsFn,
    pub run: ConvFn,
}

impl ConvImplEntry {
    pub fn new(
        name: impl Into<String>,
        priority: i32,
        supports: impl Fn(&ConvGeometry) -> bool + Send + Sync + 'static,
        run: impl Fn(&Tensor, &Tensor, Option<&Tensor>, &ConvGeometry) -> Result<Tensor> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            priority,
            supports: Arc::new(supports),
            run: Arc::new(run),
        }
    }
}

impl core::fmt::Debug for ConvImplEntry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConvImplEntry")
            .field("name", &self.name)
            .field("priority", &self.priority)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvRegistry {
    entries: Vec<ConvImplEntry>,
}

impl ConvRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// direct (0), im2col (10), im2col-batched (20), winograd (30, 3×3 stride 1 only).
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        let all = |_: &ConvGeometry| true;
        let builtins = [
            ConvImplEntry::new("direct", 0, all, conv_direct),
            ConvImplEntry::new("im2col", 10, all, conv_im2col_forward),
            ConvImplEntry::new("im2col-batched", 20, all, |x, w, b, g| {
                conv_im2col_batched(x, w, b, g, default_batch_chunk(g))
            }),
            ConvImplEntry::new("winograd", 30, winograd_supports, conv_winograd_2x2_3x3),
        ];
        for e in builtins {
            r.register(e).expect("builtin names are distinct");
        }
        r
    }

    pub fn register(&mut self, entry: ConvImplEntry) -> Result<()> {
        if self.get(&entry.name).is_some() {
            return Err(Error::Registry(format!("implementation {:?} already registered", entry.name)));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Highest-priority entry supporting `g`; ties go to the lexicographically
    /// smallest name.
    pub fn select(&self, g: &ConvGeometry) -> Result<&ConvImplEntry> {
        self.entries
            .iter()
            .filter(|e| (e.supports)(g))
            .min_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.name.cmp(&b.name)))
            .ok_or_else(|| Error::Registry(format!("no implementation supports {g:?}")))
    }

    pub fn get(&self, name: &str) -> Option<&ConvImplEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.to_string()).collect()
    }

    /// Runs the named implementation, or the selected one when `name` is `None`.
    pub fn run(&self, name: Option<&str>, input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
        let entry = match name {
            Some(n) => {
                let e = self.get(n).ok_or_else(|| Error::Registry(format!("unknown implementation {n:?}")))?;
                if !(e.supports)(g) {
                    return Err(Error::Unsupported(format!("{n} does not support {g:?}")));
                }
                e
            }
            None => self.select(g)?,
        };
        (entry.run)(input, weight, bias, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winograd_preferred_when_supported() {
        let r = ConvRegistry::with_builtins();
        assert_eq!(r.select(&ConvGeometry::square(1, 1, 8, 1, 3, 1, 1)).unwrap().name, "winograd");
        assert_eq!(r.select(&ConvGeometry::square(1, 1, 8, 1, 3, 1, 2)).unwrap().name, "im2col-batched");
        assert_eq!(r.select(&ConvGeometry::square(1, 1, 8, 1, 5, 2, 1)).unwrap().name, "im2col-batched");
    }

    #[test]
    fn ties_break_by_name() {
        let mut r = ConvRegistry::empty();
        let zero = |x: &Tensor, _: &Tensor, _: Option<&Tensor>, _: &ConvGeometry| Ok(x.clone());
        r.register(ConvImplEntry::new("zeta", 5, |_| true, zero)).unwrap();
        r.register(ConvImplEntry::new("alpha", 5, |_| true, zero)).unwrap();
        r.register(ConvImplEntry::new("low", 1, |_| true, zero)).unwrap();
        assert_eq!(r.select(&ConvGeometry::square(1, 1, 4, 1, 1, 0, 1)).unwrap().name, "alpha");
    }

    #[test]
    fn duplicate_and_missing() {
        let mut r = ConvRegistry::with_builtins();
        let dup = ConvImplEntry::new("direct", 99, |_| true, conv_direct);
        assert!(matches!(r.register(dup), Err(Error::Registry(_))));
        assert_eq!(r.names(), ["direct", "im2col", "im2col-batched", "winograd"]);
        assert!(ConvRegistry::empty().select(&ConvGeometry::square(1, 1, 4, 1, 1, 0, 1)).is_err());
        let g = ConvGeometry::square(1, 1, 8, 1, 5, 2, 1);
        let x = Tensor::zeros(&g.input_sizes()).unwrap();
        let w = Tensor::zeros(&g.weight_sizes()).unwrap();
        assert!(matches!(r.run(Some("winograd"), &x, &w, None, &g), Err(Error::Unsupported(_))));
        assert!(matches!(r.run(Some("nope"), &x, &w, None, &g), Err(Error::Registry(_))));
        assert_eq!(r.run(None, &x, &w, None, &g).unwrap().sizes(), &g.output_sizes());
    }
}
