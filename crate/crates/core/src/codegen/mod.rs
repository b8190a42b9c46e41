//! Runtime generation of geometry-specialized OpenCL C kernels.
//!
//! Every generator binds the exact geometry of one call (sizes, strides,
//! kernel extents, workgroup size) into a [`RenderContext`] and renders one of
//! the bundled `.kt.tmpl` templates. Loop bounds and index arithmetic become
//! literals in the emitted source, so a generated kernel only ever serves the
//! geometry it was rendered for; the kernel cache keys on the text.

mod apply;
mod im2col;
mod reduce;

use alloc::string::String;
use core::fmt;

use sha2::{Digest, Sha256};

pub use apply::{gen_apply_kernel, ApplyGeometry, ApplySpec, APPLY_BUILD_OPTIONS, APPLY_ENTRY};
pub use im2col::{gen_im2col_kernel, gen_im2col_kernel_batched, IM2COL_ENTRY, UNROLL_MAX_TAPS};
pub use reduce::{gen_reduce_kernel, ReduceGeometry, ReduceOp, ReducePlan, REDUCE_ENTRY, REDUCE_WORKGROUP_SIZES};

use crate::template::{RenderContext, Template};
use crate::Result;

pub const APPLY_TEMPLATE: &str = include_str!("../../templates/apply.kt.tmpl");
pub const REDUCE_TEMPLATE: &str = include_str!("../../templates/reduce.kt.tmpl");
pub const IM2COL_TEMPLATE: &str = include_str!("../../templates/im2col.kt.tmpl");

/// Rendered kernel text plus what a backend needs to build it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelSource {
    pub text: String,
    pub entry_point: String,
    pub build_options: String,
}

impl KernelSource {
    /// Number of definitions of the entry point (`void <entry>(`) in the text.
    pub fn entry_definitions(&self) -> usize {
        let pattern = alloc::format!("void {}(", self.entry_point);
        self.text.matches(pattern.as_str()).count()
    }
}

/// SHA-256 over (text, build options, backend identifier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KernelCacheKey([u8; 32]);

impl KernelCacheKey {
    pub fn new(source: &KernelSource, backend: &str) -> Self {
        let mut hasher = Sha256::new();
        // Length prefixes keep the concatenation unambiguous.
        for part in [source.text.as_str(), source.build_options.as_str(), backend] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        Self(hasher.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for KernelCacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

fn render(template: &str, ctx: &RenderContext, entry: &str, build_options: &str) -> Result<KernelSource> {
    let text = Template::parse(template)?.render(ctx)?;
    let source = KernelSource {
        text,
        entry_point: entry.into(),
        build_options: build_options.into(),
    };
    debug_assert_eq!(source.entry_definitions(), 1);
    Ok(source)
}
