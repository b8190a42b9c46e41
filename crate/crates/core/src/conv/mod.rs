//! 2-D convolution in NCHW layout with KCRS weights.

mod backward;
mod direct;
mod forward;
pub mod gemm;
mod geometry;
mod lowering;
mod registry;
mod winograd;

pub use backward::{conv_backward_input, conv_backward_weight};
pub use direct::conv_direct;
pub use forward::{conv_im2col_batched, conv_im2col_forward, default_batch_chunk, LOWERED_BUDGET};
pub use gemm::{gemm, gemm_naive, gemm_slices, gemm_tiled, GemmSpec, GemmVariant};
pub use geometry::ConvGeometry;
pub use lowering::{col2im, im2col};
pub use registry::{ConvFn, ConvImplEntry, ConvRegistry, SupportsFn};
pub use winograd::{conv_winograd_2x2_3x3, filter_transform, input_transform, output_transform, winograd_supports};
