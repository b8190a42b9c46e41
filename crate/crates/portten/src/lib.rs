//! Host-side runtime for `portten-core`: the kernel cache, backend selection
//! (reference interpreter and an OpenCL device backend), kernel dumps and the
//! benchmark harness behind `portten-bench`.
//!
//! ```
//! use portten::backend::dispatch_expression;
//! use portten::core::{codegen::ReduceOp, Tensor};
//! use portten::{dispatch_reduce, select_backend, BackendChoice};
//!
//! # fn main() -> portten::Result<()> {
//! let backend = select_backend(BackendChoice::Reference)?;
//! let x = Tensor::zeros(&[4, 6])?;
//! let y = Tensor::from_vec(&[4, 8], (0..32).map(|v| v as f32).collect())?.narrow(1, 2, 6)?;
//! dispatch_expression(backend.as_ref(), "x = x + y * s", &[&x, &y], 0.5)?;
//! let total = dispatch_reduce(backend.as_ref(), ReduceOp::Sum, &x, None)?.scalar();
//! assert_eq!(total, Some(198.0));
//! # Ok(())
//! # }
//! ```

pub mod backend;
pub mod bench;
pub mod cache;
pub mod dump;
mod error;
pub mod registry;

pub use backend::{backend_enumerate, dispatch_apply, dispatch_reduce, select_backend, Backend, BackendChoice, ReferenceBackend};
pub use cache::{CacheStats, Compiled, KernelCache};
pub use error::{CompileError, Error, Result};
pub use portten_core as core;
pub use registry::SharedRegistry;
