use portten_core::codegen::{gen_apply_kernel, gen_im2col_kernel, gen_reduce_kernel, ApplySpec, KernelSource, ReduceGeometry, ReduceOp};
use portten_core::conv::{im2col, ConvGeometry};
use portten_core::reference::{self, Reduced};
use portten_core::{choose_launch, BackendDescriptor, Tensor};

use super::{apply_geometry, check_launch, rendered, Backend};
use crate::cache::{CacheStats, Compiled, KernelCache};
use crate::Result;

/// Host backend. It renders and caches the same kernels a device would
/// build, so dispatch pays the same specialization cost, but it executes the
/// operation descriptor directly instead of the generated text.
pub struct ReferenceBackend {
    descriptor: BackendDescriptor,
    cache: KernelCache<()>,
}

impl Default for ReferenceBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl ReferenceBackend {
    pub fn new() -> Self {
        Self {
            descriptor: BackendDescriptor::reference(),
            cache: KernelCache::new(),
        }
    }

    fn prepare(&self, source: KernelSource) -> Result<()> {
        let source = rendered(source);
        self.cache.get_or_build(&source, &self.descriptor.name, |s, _| match s.entry_definitions() {
            1 => Ok(Compiled::new(())),
            n => Err(format!("expected one definition of {}, found {n}", s.entry_point)),
        })?;
        Ok(())
    }
}

impl Backend for ReferenceBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn apply(&self, spec: &ApplySpec, operands: &[&Tensor], scalar: f32) -> Result<()> {
        let geometry = apply_geometry(operands)?;
        self.prepare(gen_apply_kernel(spec, &geometry)?)?;
        check_launch(&choose_launch(geometry.numel().max(1), &self.descriptor), &self.descriptor);
        Ok(reference::apply(spec, operands, scalar)?)
    }

    fn reduce(&self, op: ReduceOp, t: &Tensor, dim: Option<usize>) -> Result<Reduced> {
        let geometry = ReduceGeometry::from_tensor(t, dim)?;
        self.prepare(gen_reduce_kernel(op, &geometry, self.descriptor.reduce_workgroup())?)?;
        Ok(reference::reduce(op, t, dim)?)
    }

    fn im2col(&self, image: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
        self.prepare(gen_im2col_kernel(g)?)?;
        Ok(im2col(image, g)?)
    }

    fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }
}
