use alloc::vec::Vec;

use super::{render, KernelSource, IM2COL_TEMPLATE};
use crate::conv::ConvGeometry;
use crate::template::RenderContext;
use crate::{Error, Result};

pub const IM2COL_ENTRY: &str = "portten_im2col";

/// Kernels with at most this many taps (kH·kW) get fully unrolled tap loops.
pub const UNROLL_MAX_TAPS: usize = 25;

/// im2col for one image writing a (C·kH·kW) × (outH·outW) matrix.
pub fn gen_im2col_kernel(geom: &ConvGeometry) -> Result<KernelSource> {
    gen_im2col_kernel_batched(geom, 1)
}

/// im2col for one image of a chunk of `chunk` images lowered side by side,
/// so the matrix row length is `chunk·outH·outW`; the column offset of each
/// image is a kernel argument.
pub fn gen_im2col_kernel_batched(geom: &ConvGeometry, chunk: usize) -> Result<KernelSource> {
    geom.validate()?;
    if chunk == 0 {
        return Err(Error::Geometry("im2col chunk must be at least 1".into()));
    }
    let taps = geom.kernel_h * geom.kernel_w;
    let mut ctx = RenderContext::new();
    ctx.insert("entry", IM2COL_ENTRY)?;
    ctx.insert("channels", geom.in_channels)?;
    ctx.insert("in_h", geom.in_h)?;
    ctx.insert("in_w", geom.in_w)?;
    ctx.insert("in_hw", geom.in_h * geom.in_w)?;
    ctx.insert("kernel_h", geom.kernel_h)?;
    ctx.insert("kernel_w", geom.kernel_w)?;
    ctx.insert("pad_h", geom.pad_h)?;
    ctx.insert("pad_w", geom.pad_w)?;
    ctx.insert("stride_h", geom.stride_h)?;
    ctx.insert("stride_w", geom.stride_w)?;
    ctx.insert("out_h", geom.out_h())?;
    ctx.insert("out_w", geom.out_w())?;
    ctx.insert("out_hw", geom.positions())?;
    ctx.insert("taps", taps)?;
    ctx.insert("taps_total", geom.taps())?;
    ctx.insert("col_stride", chunk * geom.positions())?;
    ctx.insert("work_items", geom.in_channels * geom.positions())?;
    ctx.insert("padded", geom.pad_h > 0 || geom.pad_w > 0)?;
    ctx.insert("unroll", taps <= UNROLL_MAX_TAPS)?;
    ctx.insert("kernel_rows", (0..geom.kernel_h).collect::<Vec<_>>())?;
    ctx.insert("kernel_cols", (0..geom.kernel_w).collect::<Vec<_>>())?;
    render(IM2COL_TEMPLATE, &ctx, IM2COL_ENTRY, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_kernel_has_no_padding_branch() {
        let k = gen_im2col_kernel(&ConvGeometry::square(1, 8, 10, 4, 1, 0, 1)).unwrap();
        assert!(!k.text.contains(">= 0"));
        assert!(!k.text.contains('?'));
        assert!(k.text.contains("col[(0 * 1 + 0) * 100] = im[(h0 + 0) * 10 + w0 + 0];"));
        assert!(!k.text.contains("for (int r"));
    }

    #[test]
    fn padded_3x3_guards_every_tap() {
        let k = gen_im2col_kernel(&ConvGeometry::square(1, 2, 5, 4, 3, 1, 1)).unwrap();
        assert_eq!(k.text.matches("h0 + 2 >= 0").count(), 3);
        assert_eq!(k.text.matches(": 0.0f;").count(), 9);
        assert!(!k.text.contains("for (int r"));
    }

    #[test]
    fn large_kernels_keep_loops() {
        let k = gen_im2col_kernel(&ConvGeometry::square(1, 3, 32, 8, 7, 3, 2)).unwrap();
        assert!(k.text.contains("for (int r = 0; r < 7; ++r)"));
        assert!(k.text.contains("for (int s = 0; s < 7; ++s)"));
        let k = gen_im2col_kernel(&ConvGeometry::square(1, 3, 32, 8, 5, 2, 1)).unwrap();
        assert!(!k.text.contains("for (int r"));
    }

    #[test]
    fn batched_kernel_widens_rows() {
        let g = ConvGeometry::square(4, 1, 4, 1, 3, 0, 1);
        let k = gen_im2col_kernel_batched(&g, 3).unwrap();
        assert!(k.text.contains("* 12 + oh * 2 + ow"));
        assert!(gen_im2col_kernel_batched(&g, 0).is_err());
    }
}
