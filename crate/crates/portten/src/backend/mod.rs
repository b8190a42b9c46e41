//! Execution backends behind one dispatch contract.
//!
//! The reference backend always exists and runs on the host; device backends
//! (OpenCL, behind the `device` feature) are probed at startup and appended
//! when a runtime is present.

#[cfg(feature = "device")]
pub mod device;
mod reference;

use std::str::FromStr;
use std::sync::Arc;

use portten_core::codegen::{ApplyGeometry, ApplySpec, KernelSource, ReduceOp};
use portten_core::conv::{gemm_tiled, ConvGeometry, GemmSpec};
use portten_core::reference::Reduced;
use portten_core::{BackendDescriptor, LaunchConfig, Tensor};

pub use reference::ReferenceBackend;

use crate::cache::CacheStats;
use crate::{Error, Result};

pub const BACKEND_ENV: &str = "PORTTEN_BACKEND";
pub const DEVICE_ENV: &str = "PORTTEN_DEVICE";

pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Identifier mixed into kernel cache keys.
    fn id(&self) -> &str {
        &self.descriptor().name
    }

    /// `operands[0] = expr(operands, scalar)` elementwise. Operands share sizes
    /// and may be arbitrary strided, offset views.
    fn apply(&self, spec: &ApplySpec, operands: &[&Tensor], scalar: f32) -> Result<()>;

    fn reduce(&self, op: ReduceOp, t: &Tensor, dim: Option<usize>) -> Result<Reduced>;

    /// Lowers one C×H×W image to a (C·kH·kW) × (outH·outW) matrix.
    fn im2col(&self, image: &Tensor, g: &ConvGeometry) -> Result<Tensor>;

    fn cache_stats(&self) -> CacheStats;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    Reference,
    Device,
    #[default]
    Auto,
}

impl FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reference" => Ok(Self::Reference),
            "device" => Ok(Self::Device),
            "auto" | "" => Ok(Self::Auto),
            other => Err(Error::Validation(format!("unknown backend {other:?} (expected reference, device or auto)"))),
        }
    }
}

impl BackendChoice {
    /// `PORTTEN_BACKEND`, defaulting to auto.
    pub fn from_env() -> Result<Self> {
        std::env::var(BACKEND_ENV).map_or(Ok(Self::Auto), |v| v.parse())
    }
}

fn device_index() -> Result<usize> {
    match std::env::var(DEVICE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("{DEVICE_ENV}={v:?} is not a device index"))),
        Err(_) => Ok(0),
    }
}

#[cfg(feature = "device")]
fn probe_devices() -> Vec<BackendDescriptor> {
    device::probe()
}

#[cfg(not(feature = "device"))]
fn probe_devices() -> Vec<BackendDescriptor> {
    Vec::new()
}

/// Reference first, then every device found, unless `PORTTEN_BACKEND=reference`.
pub fn backend_enumerate() -> Vec<BackendDescriptor> {
    let mut all = vec![BackendDescriptor::reference()];
    match BackendChoice::from_env() {
        Ok(BackendChoice::Reference) => {}
        Ok(_) => all.extend(probe_devices()),
        Err(e) => {
            log::warn!("{e}; enumerating all backends");
            all.extend(probe_devices());
        }
    }
    all
}

/// Instantiates a backend. `Device` fails when no device runtime is usable;
/// `Auto` falls back to the reference backend with a warning.
pub fn select_backend(choice: BackendChoice) -> Result<Arc<dyn Backend>> {
    match choice {
        BackendChoice::Reference => Ok(Arc::new(ReferenceBackend::new())),
        BackendChoice::Device => open_device(device_index()?),
        BackendChoice::Auto => match device_index().and_then(open_device) {
            Ok(b) => Ok(b),
            Err(e) => {
                log::warn!("no device backend ({e}); using reference");
                Ok(Arc::new(ReferenceBackend::new()))
            }
        },
    }
}

#[cfg(feature = "device")]
fn open_device(index: usize) -> Result<Arc<dyn Backend>> {
    Ok(Arc::new(device::OpenClBackend::open(index)?))
}

#[cfg(not(feature = "device"))]
fn open_device(_index: usize) -> Result<Arc<dyn Backend>> {
    Err(Error::Backend("built without the `device` feature".into()))
}

/// Validates operands, then runs `spec` on `backend`.
pub fn dispatch_apply(backend: &dyn Backend, spec: &ApplySpec, operands: &[&Tensor], scalar: f32) -> Result<()> {
    if operands.len() != spec.arity() {
        return Err(portten_core::Error::SizeMismatch(format!(
            "{} operands for an arity-{} expression",
            operands.len(),
            spec.arity()
        ))
        .into());
    }
    ApplyGeometry::from_tensors(operands)?;
    backend.apply(spec, operands, scalar)
}

/// Parses `expression` and dispatches it; convenience for one-off calls.
pub fn dispatch_expression(backend: &dyn Backend, expression: &str, operands: &[&Tensor], scalar: f32) -> Result<()> {
    let spec = ApplySpec::new(operands.len(), expression)?;
    dispatch_apply(backend, &spec, operands, scalar)
}

pub fn dispatch_reduce(backend: &dyn Backend, op: ReduceOp, t: &Tensor, dim: Option<usize>) -> Result<Reduced> {
    backend.reduce(op, t, dim)
}

/// Kernel geometry for an apply; rank-0 operands are treated as one element.
pub(crate) fn apply_geometry(operands: &[&Tensor]) -> Result<ApplyGeometry> {
    let mut g = ApplyGeometry::from_tensors(operands)?;
    if g.sizes.is_empty() {
        g.sizes = vec![1];
        g.strides = vec![vec![1]; operands.len()];
    }
    Ok(g)
}

pub(crate) fn check_launch(launch: &LaunchConfig, d: &BackendDescriptor) {
    assert!(
        launch.workgroup_size <= d.max_workgroup_size && launch.global_size.is_multiple_of(launch.workgroup_size),
        "illegal launch {launch:?} on {}",
        d.name
    );
}

pub(crate) fn rendered(source: KernelSource) -> KernelSource {
    crate::dump::observe(&source);
    source
}

/// im2col convolution whose lowering runs on `backend` and whose GEMM runs
/// on the host.
pub fn conv_lowered(backend: &dyn Backend, input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
    g.validate()?;
    let check = |what: &str, t: &Tensor, want: &[usize]| -> Result<()> {
        if t.sizes() != want {
            return Err(portten_core::Error::SizeMismatch(format!("{what} has sizes {:?}, expected {want:?}", t.sizes())).into());
        }
        Ok(())
    };
    check("input", input, &g.input_sizes())?;
    check("weight", weight, &g.weight_sizes())?;
    if let Some(b) = bias {
        check("bias", b, &[g.out_channels])?;
    }
    let w = weight.to_vec();
    let b = bias.map(Tensor::to_vec);
    let positions = g.positions();
    let out_len = g.out_channels * positions;
    let mut out = vec![0.0f32; g.batch * out_len];
    let spec = GemmSpec::new(g.out_channels, positions, g.taps());
    for n in 0..g.batch {
        let slice = input.narrow(0, n, 1)?;
        let slice = if slice.is_contiguous() { slice } else { slice.contiguous()? };
        let image = slice.view(&[g.in_channels, g.in_h, g.in_w])?;
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        let cols = backend.im2col(&image, g)?.to_vec();
        gemm_tiled(&spec, &w, &cols, dst)?;
        if let Some(b) = &b {
            for (k, row) in dst.chunks_mut(positions).enumerate() {
                row.iter_mut().for_each(|v| *v += b[k]);
            }
        }
    }
    Ok(Tensor::from_vec(&g.output_sizes(), out)?)
}
