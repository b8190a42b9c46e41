//! GEMM-based forward convolution via im2col lowering.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::direct::check_forward;
use super::gemm::{gemm_tiled, GemmSpec};
use super::lowering::im2col_slice;
use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Lowered-matrix budget (elements) used to pick a default batch chunk.
pub const LOWERED_BUDGET: usize = 8 << 20;

/// Images per lowering that keep the lowered matrix within [`LOWERED_BUDGET`].
pub fn default_batch_chunk(g: &ConvGeometry) -> usize {
    let per_image = (g.taps() * g.positions()).max(1);
    (LOWERED_BUDGET / per_image).clamp(1, g.batch.max(1))
}

/// One im2col + GEMM per image: the weight, viewed as K × (C·kH·kW), times
/// the lowered image, plus bias per output channel.
pub fn conv_im2col_forward(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
    check_forward(input, weight, bias, g)?;
    let x = input.to_vec();
    let w = weight.to_vec();
    let b = bias.map(Tensor::to_vec);
    let (taps, positions) = (g.taps(), g.positions());
    let image_len = g.in_channels * g.in_h * g.in_w;
    let out_len = g.out_channels * positions;
    let mut cols = vec![0.0f32; taps * positions];
    let mut out = vec![0.0f32; g.batch * out_len];
    let spec = GemmSpec::new(g.out_channels, positions, taps);
    for n in 0..g.batch {
        im2col_slice(&x[n * image_len..(n + 1) * image_len], g, &mut cols, positions, 0);
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        gemm_tiled(&spec, &w, &cols, dst)?;
        if let Some(b) = &b {
            for (k, row) in dst.chunks_mut(positions).enumerate() {
                row.iter_mut().for_each(|v| *v += b[k]);
            }
        }
    }
    Tensor::from_vec(&g.output_sizes(), out)
}

/// Lowers `chunk` images side by side into one (C·kH·kW) × (chunk·outH·outW)
/// matrix and runs a single GEMM per chunk. The last chunk may be short.
pub fn conv_im2col_batched(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    g: &ConvGeometry,
    chunk: usize,
) -> Result<Tensor> {
    check_forward(input, weight, bias, g)?;
    if chunk < 1 || chunk > g.batch {
        return Err(Error::Geometry(format!("batch chunk {chunk} outside 1..={}", g.batch)));
    }
    let x = input.to_vec();
    let w = weight.to_vec();
    let b = bias.map(Tensor::to_vec);
    let (taps, positions) = (g.taps(), g.positions());
    let image_len = g.in_channels * g.in_h * g.in_w;
    let out_len = g.out_channels * positions;
    let mut out = vec![0.0f32; g.batch * out_len];
    let mut cols: Vec<f32> = vec![0.0; taps * chunk * positions];
    let mut product: Vec<f32> = vec![0.0; g.out_channels * chunk * positions];

    for first in (0..g.batch).step_by(chunk) {
        let count = chunk.min(g.batch - first);
        let row_len = count * positions;
        for i in 0..count {
            let n = first + i;
            im2col_slice(&x[n * image_len..(n + 1) * image_len], g, &mut cols, row_len, i * positions);
        }
        let spec = GemmSpec::new(g.out_channels, row_len, taps);
        gemm_tiled(&spec, &w, &cols[..taps * row_len], &mut product[..g.out_channels * row_len])?;
        for i in 0..count {
            let dst = &mut out[(first + i) * out_len..(first + i + 1) * out_len];
            for (k, row) in dst.chunks_mut(positions).enumerate() {
                let src = &product[k * row_len + i * positions..k * row_len + (i + 1) * positions];
                match &b {
                    Some(b) => row.iter_mut().zip(src).for_each(|(d, &s)| *d = s + b[k]),
                    None => row.copy_from_slice(src),
                }
            }
        }
    }
    Tensor::from_vec(&g.output_sizes(), out)
}
