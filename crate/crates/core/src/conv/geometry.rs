use alloc::format;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Full description of a 2-D convolution problem (NCHW input, KCRS weights).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl ConvGeometry {
    /// Square image, square kernel, symmetric padding and stride.
    pub fn square(batch: usize, in_channels: usize, size: usize, out_channels: usize, kernel: usize, pad: usize, stride: usize) -> Self {
        Self {
            batch,
            in_channels,
            in_h: size,
            in_w: size,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            pad_h: pad,
            pad_w: pad,
            stride_h: stride,
            stride_w: stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch", self.batch),
            ("in_channels", self.in_channels),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
            ("out_channels", self.out_channels),
            ("kernel_h", self.kernel_h),
            ("kernel_w", self.kernel_w),
            ("stride_h", self.stride_h),
            ("stride_w", self.stride_w),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Geometry(format!("{name} must be at least 1")));
        }
        if self.kernel_h > self.in_h + 2 * self.pad_h || self.kernel_w > self.in_w + 2 * self.pad_w {
            return Err(Error::Geometry(format!(
                "{}x{} kernel exceeds padded {}x{} input",
                self.kernel_h,
                self.kernel_w,
                self.in_h + 2 * self.pad_h,
                self.in_w + 2 * self.pad_w
            )));
        }
        Ok(())
    }

    /// Output height, floor rule.
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad_h - self.kernel_h) / self.stride_h + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad_w - self.kernel_w) / self.stride_w + 1
    }

    /// Rows of the lowered matrix: C·kH·kW.
    pub fn taps(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Output positions per image: outH·outW.
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn input_sizes(&self) -> [usize; 4] {
        [self.batch, self.in_channels, self.in_h, self.in_w]
    }

    pub fn weight_sizes(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    pub fn output_sizes(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h(), self.out_w()]
    }

    /// Multiply-accumulates of one forward pass.
    pub fn macs(&self) -> usize {
        self.batch * self.out_channels * self.positions() * self.taps()
    }

    pub(crate) fn check_tensor(&self, what: &str, t: &Tensor, expected: &[usize]) -> Result<()> {
        if t.sizes() != expected {
            return Err(Error::SizeMismatch(format!(
                "{what} has sizes {:?}, geometry requires {expected:?}",
                t.sizes()
            )));
        }
        Ok(())
    }
}
