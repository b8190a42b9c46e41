//! Core of the portten tensor-compute library.
//!
//! Everything in this crate is pure computation over host memory and builds
//! without `std` (only `alloc` is required):
//!
//! * [`tensor`]: strided views over shared flat storage with an element offset.
//! * [`template`]: a small Jinja-style templater used to specialize kernels.
//! * [`expr`]: the pointwise expression grammar shared by codegen and the
//!   reference interpreter.
//! * [`codegen`]: geometry-specialized OpenCL C for apply, reduce and im2col.
//! * [`launch`] and [`reference`]: launch sizing and the host reference backend.
//! * [`conv`]: direct, im2col, batched im2col and Winograd convolution, GEMM,
//!   backward passes and the pluggable implementation registry.
//!
//! IO, caching, device runtimes and the benchmark CLI live in the `portten` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod codegen;
pub mod conv;
mod error;
pub mod expr;
pub mod launch;
pub mod layers;
pub mod reference;
pub mod template;
pub mod tensor;

pub use error::{Error, Result};
pub use launch::{choose_launch, BackendDescriptor, LaunchConfig};
pub use tensor::{Storage, Tensor, MAX_DIMS};
