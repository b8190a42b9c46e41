//! OpenCL device backend.
//!
//! The runtime is loaded dynamically, so a missing ICD simply yields no
//! devices. Kernels are rendered per call, built through the kernel cache and
//! launched on one in-order queue; submission is serialized by a mutex.
//! Operands travel as the smallest storage range covering every view that
//! shares that storage, with offsets passed as kernel arguments relative to
//! the range start.

use std::ptr;
use std::sync::{Arc, Mutex};

use opencl3::command_queue::CommandQueue;
use opencl3::context::Context;
use opencl3::device::{Device, CL_DEVICE_TYPE_ALL};
use opencl3::kernel::{ExecuteKernel, Kernel};
use opencl3::memory::{Buffer, CL_MEM_READ_WRITE};
use opencl3::platform::get_platforms;
use opencl3::program::Program;
use opencl3::types::{cl_int, CL_BLOCKING};

use portten_core::codegen::{
    gen_apply_kernel, gen_im2col_kernel, gen_reduce_kernel, ApplySpec, KernelSource, ReduceGeometry, ReduceOp, ReducePlan,
};
use portten_core::conv::ConvGeometry;
use portten_core::reference::Reduced;
use portten_core::{choose_launch, BackendDescriptor, LaunchConfig, Storage, Tensor};

use super::{apply_geometry, check_launch, rendered, Backend};
use crate::cache::{CacheStats, Compiled, KernelCache};
use crate::{Error, Result};

fn cl_err(what: &str) -> impl Fn(opencl3::error_codes::ClError) -> Error + '_ {
    move |e| Error::Backend(format!("{what}: {e}"))
}

fn all_devices() -> Result<Vec<Device>> {
    let mut found = Vec::new();
    for platform in get_platforms().map_err(cl_err("clGetPlatformIDs"))? {
        match platform.get_devices(CL_DEVICE_TYPE_ALL) {
            Ok(ids) => found.extend(ids.into_iter().map(Device::new)),
            Err(e) => log::warn!("skipping OpenCL platform {:?}: {e}", platform.name().unwrap_or_default()),
        }
    }
    Ok(found)
}

fn describe(index: usize, device: &Device) -> Result<BackendDescriptor> {
    let name = device.name().map_err(cl_err("CL_DEVICE_NAME"))?;
    Ok(BackendDescriptor {
        name: format!("opencl:{index}:{}", name.trim()),
        max_workgroup_size: device.max_work_group_size().map_err(cl_err("CL_DEVICE_MAX_WORK_GROUP_SIZE"))?,
        local_mem_bytes: device.local_mem_size().map_err(cl_err("CL_DEVICE_LOCAL_MEM_SIZE"))? as usize,
        is_device: true,
    })
}

/// Descriptors of every OpenCL device; probe failures are logged and yield
/// an empty list.
pub fn probe() -> Vec<BackendDescriptor> {
    let described = all_devices().and_then(|devices| devices.iter().enumerate().map(|(i, d)| describe(i, d)).collect());
    described.unwrap_or_else(|e| {
        log::warn!("OpenCL probe failed: {e}");
        Vec::new()
    })
}

/// A device-resident copy of a tensor's elements in logical order.
pub struct DeviceBuffer {
    buffer: Buffer<f32>,
    len: usize,
}

impl DeviceBuffer {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

enum Arg<'a> {
    Buffer(&'a Buffer<f32>),
    Int(cl_int),
    Float(f32),
}

/// Storage range `[start, start + len)` uploaded once for all views on it.
struct Region {
    storage: Storage,
    start: usize,
    len: usize,
}

fn regions(operands: &[&Tensor]) -> (Vec<Region>, Vec<usize>) {
    let mut regions: Vec<Region> = Vec::new();
    let mut owner = Vec::with_capacity(operands.len());
    for t in operands {
        let (lo, hi) = (t.storage_offset(), t.storage_offset() + t.max_reach() + 1);
        match regions.iter().position(|r| r.storage.same(t.storage())) {
            Some(i) => {
                let r = &mut regions[i];
                let end = (r.start + r.len).max(hi);
                r.start = r.start.min(lo);
                r.len = end - r.start;
                owner.push(i);
            }
            None => {
                owner.push(regions.len());
                regions.push(Region { storage: t.storage().clone(), start: lo, len: hi - lo });
            }
        }
    }
    (regions, owner)
}

fn int_arg(v: usize) -> Result<cl_int> {
    cl_int::try_from(v).map_err(|_| portten_core::Error::Unsupported(format!("index {v} exceeds 32-bit kernel arithmetic")).into())
}

pub struct OpenClBackend {
    descriptor: BackendDescriptor,
    context: Context,
    queue: Mutex<CommandQueue>,
    cache: KernelCache<Arc<Program>>,
}

impl OpenClBackend {
    /// Opens device `index` in [`probe`] order.
    pub fn open(index: usize) -> Result<Self> {
        let devices = all_devices()?;
        let count = devices.len();
        let device = devices
            .into_iter()
            .nth(index)
            .ok_or_else(|| Error::Backend(format!("OpenCL device {index} requested, {count} available")))?;
        let descriptor = describe(index, &device)?;
        let context = Context::from_device(&device).map_err(cl_err("clCreateContext"))?;
        let queue = CommandQueue::create_default_with_properties(&context, 0, 0).map_err(cl_err("clCreateCommandQueue"))?;
        log::info!("using {}", descriptor.name);
        Ok(Self {
            descriptor,
            context,
            queue: Mutex::new(queue),
            cache: KernelCache::from_env(),
        })
    }

    fn program(&self, source: KernelSource) -> Result<Arc<Program>> {
        let source = rendered(source);
        let context = &self.context;
        let program = self.cache.get_or_build(&source, &self.descriptor.name, |s, stored| {
            if let Some(binary) = stored {
                match Program::create_and_build_from_binary(context, &[binary], &s.build_options) {
                    Ok(p) => return Ok(Compiled::new(Arc::new(p))),
                    Err(e) => log::warn!("cached binary rejected ({e}); rebuilding from source"),
                }
            }
            let program = Program::create_and_build_from_source(context, &s.text, &s.build_options)?;
            let binary = program.get_binaries().ok().and_then(|b| b.into_iter().next());
            Ok(Compiled { handle: Arc::new(program), binary })
        })?;
        Ok(program)
    }

    fn buffer(&self, len: usize) -> Result<Buffer<f32>> {
        // SAFETY: no host pointer is supplied; the runtime owns the allocation.
        unsafe { Buffer::<f32>::create(&self.context, CL_MEM_READ_WRITE, len.max(1), ptr::null_mut()) }
            .map_err(cl_err("clCreateBuffer"))
    }

    fn write(&self, buffer: &mut Buffer<f32>, data: &[f32]) -> Result<()> {
        let queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        // SAFETY: blocking write; `data` outlives the call.
        unsafe { queue.enqueue_write_buffer(buffer, CL_BLOCKING, 0, data, &[]) }.map_err(cl_err("clEnqueueWriteBuffer"))?;
        Ok(())
    }

    fn read(&self, buffer: &Buffer<f32>, len: usize) -> Result<Vec<f32>> {
        let mut data = vec![0.0f32; len];
        let queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        // SAFETY: blocking read into a host slice of exactly `len` elements.
        unsafe { queue.enqueue_read_buffer(buffer, CL_BLOCKING, 0, &mut data, &[]) }.map_err(cl_err("clEnqueueReadBuffer"))?;
        Ok(data)
    }

    fn upload_region(&self, region: &Region) -> Result<Buffer<f32>> {
        let mut host = vec![0.0f32; region.len];
        region.storage.read_slice(region.start, &mut host);
        let mut buffer = self.buffer(region.len)?;
        self.write(&mut buffer, &host)?;
        Ok(buffer)
    }

    fn launch(&self, program: &Program, entry: &str, args: &[Arg<'_>], launch: LaunchConfig) -> Result<()> {
        check_launch(&launch, &self.descriptor);
        let kernel = Kernel::create(program, entry).map_err(cl_err("clCreateKernel"))?;
        let queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        let mut exec = ExecuteKernel::new(&kernel);
        // SAFETY: argument order and types follow the generated signature.
        unsafe {
            for arg in args {
                match arg {
                    Arg::Buffer(b) => exec.set_arg(*b),
                    Arg::Int(v) => exec.set_arg(v),
                    Arg::Float(v) => exec.set_arg(v),
                };
            }
            exec.set_global_work_size(launch.global_size)
                .set_local_work_size(launch.workgroup_size)
                .enqueue_nd_range(&queue)
        }
        .map_err(cl_err("clEnqueueNDRangeKernel"))?;
        queue.finish().map_err(cl_err("clFinish"))?;
        Ok(())
    }

    /// Copies `t` to the device in logical order, staging non-contiguous
    /// views through a contiguous copy.
    pub fn upload(&self, t: &Tensor) -> Result<DeviceBuffer> {
        let staged;
        let source = if t.is_contiguous() {
            t
        } else {
            staged = t.contiguous()?;
            &staged
        };
        let region = Region { storage: source.storage().clone(), start: source.storage_offset(), len: source.numel() };
        Ok(DeviceBuffer { buffer: self.upload_region(&region)?, len: region.len })
    }

    /// Writes a device buffer back into `t`, which must hold as many elements.
    pub fn download(&self, buffer: &DeviceBuffer, t: &Tensor) -> Result<()> {
        if buffer.len != t.numel() {
            return Err(portten_core::Error::SizeMismatch(format!(
                "device buffer of {} elements into tensor of {}",
                buffer.len,
                t.numel()
            ))
            .into());
        }
        let data = self.read(&buffer.buffer, buffer.len)?;
        Ok(t.write_from(&data)?)
    }
}

impl Backend for OpenClBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn apply(&self, spec: &ApplySpec, operands: &[&Tensor], scalar: f32) -> Result<()> {
        let geometry = apply_geometry(operands)?;
        let program = self.program(gen_apply_kernel(spec, &geometry)?)?;
        let numel = geometry.numel();
        if numel == 0 {
            return Ok(());
        }
        let (regions, owner) = regions(operands);
        let buffers = regions.iter().map(|r| self.upload_region(r)).collect::<Result<Vec<_>>>()?;
        let mut args = Vec::with_capacity(2 * operands.len() + 1);
        for (t, &r) in operands.iter().zip(&owner) {
            int_arg(regions[r].len)?;
            args.push(Arg::Buffer(&buffers[r]));
            args.push(Arg::Int(int_arg(t.storage_offset() - regions[r].start)?));
        }
        args.push(Arg::Float(scalar));
        int_arg(numel)?;
        self.launch(&program, portten_core::codegen::APPLY_ENTRY, &args, choose_launch(numel, &self.descriptor))?;

        let dst = &regions[owner[0]];
        let data = self.read(&buffers[owner[0]], dst.len)?;
        for i in operands[0].storage_indices() {
            dst.storage.set(i, data[i - dst.start]);
        }
        Ok(())
    }

    fn reduce(&self, op: ReduceOp, t: &Tensor, dim: Option<usize>) -> Result<Reduced> {
        let geometry = ReduceGeometry::from_tensor(t, dim)?;
        let workgroup = self.descriptor.reduce_workgroup();
        let plan = ReducePlan::new(&geometry, workgroup)?;
        let program = self.program(gen_reduce_kernel(op, &geometry, workgroup)?)?;
        let (regions, _) = regions(&[t]);
        int_arg(regions[0].len)?;
        let input = self.upload_region(&regions[0])?;
        let output = self.buffer(plan.groups)?;
        let args = [Arg::Buffer(&input), Arg::Int(int_arg(t.storage_offset() - regions[0].start)?), Arg::Buffer(&output), Arg::Int(0)];
        let launch = LaunchConfig { global_size: plan.grid(), workgroup_size: workgroup };
        self.launch(&program, portten_core::codegen::REDUCE_ENTRY, &args, launch)?;
        let partials = self.read(&output, plan.groups)?;
        match dim {
            None => Ok(Reduced::Scalar(partials.into_iter().fold(op.identity(), |a, b| op.combine(a, b)))),
            Some(d) => {
                let mut sizes = t.sizes().to_vec();
                sizes[d] = 1;
                Ok(Reduced::Tensor(Tensor::from_vec(&sizes, partials)?))
            }
        }
    }

    fn im2col(&self, image: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
        g.validate()?;
        let want = [g.in_channels, g.in_h, g.in_w];
        if image.sizes() != want {
            return Err(portten_core::Error::SizeMismatch(format!("im2col input {:?}, expected {want:?}", image.sizes())).into());
        }
        let program = self.program(gen_im2col_kernel(g)?)?;
        let input = self.upload(image)?;
        let len = g.taps() * g.positions();
        int_arg(len)?;
        let output = self.buffer(len)?;
        let work_items = g.in_channels * g.positions();
        let args = [Arg::Buffer(&input.buffer), Arg::Int(0), Arg::Buffer(&output), Arg::Int(0)];
        self.launch(&program, portten_core::codegen::IM2COL_ENTRY, &args, choose_launch(work_items, &self.descriptor))?;
        Ok(Tensor::from_vec(&[g.taps(), g.positions()], self.read(&output, len)?)?)
    }

    fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }
}

