//! im2col lowering and its scatter-add adjoint col2im.
//!
//! The lowered matrix has one row per (channel, kernel row, kernel column)
//! tap, channel-major, and one column per output position `oh * outW + ow`.

use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Lowers one C×H×W image into `cols`, a row-major matrix with rows of
/// `row_len` elements, starting at column `col_offset`.
pub(crate) fn im2col_slice(image: &[f32], g: &ConvGeometry, cols: &mut [f32], row_len: usize, col_offset: usize) {
    let (out_h, out_w) = (g.out_h(), g.out_w());
    let (h, w) = (g.in_h as isize, g.in_w as isize);
    for c in 0..g.in_channels {
        let plane = &image[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for kr in 0..g.kernel_h {
            for ks in 0..g.kernel_w {
                let row = (c * g.kernel_h + kr) * g.kernel_w + ks;
                let dst = &mut cols[row * row_len + col_offset..row * row_len + col_offset + out_h * out_w];
                for oh in 0..out_h {
                    let ih = (oh * g.stride_h + kr) as isize - g.pad_h as isize;
                    let line = &mut dst[oh * out_w..(oh + 1) * out_w];
                    if ih < 0 || ih >= h {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[ih as usize * g.in_w..(ih as usize + 1) * g.in_w];
                    for (ow, v) in line.iter_mut().enumerate() {
                        let iw = (ow * g.stride_w + ks) as isize - g.pad_w as isize;
                        *v = if iw < 0 || iw >= w { 0.0 } else { src[iw as usize] };
                    }
                }
            }
        }
    }
}

/// Adds every entry of the lowered matrix back into its source pixel of
/// `image`; entries that came from padding are dropped.
pub(crate) fn col2im_slice(cols: &[f32], g: &ConvGeometry, row_len: usize, col_offset: usize, image: &mut [f32]) {
    let (out_h, out_w) = (g.out_h(), g.out_w());
    let (h, w) = (g.in_h as isize, g.in_w as isize);
    for c in 0..g.in_channels {
        let plane = &mut image[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for kr in 0..g.kernel_h {
            for ks in 0..g.kernel_w {
                let row = (c * g.kernel_h + kr) * g.kernel_w + ks;
                let src = &cols[row * row_len + col_offset..row * row_len + col_offset + out_h * out_w];
                for oh in 0..out_h {
                    let ih = (oh * g.stride_h + kr) as isize - g.pad_h as isize;
                    if ih < 0 || ih >= h {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * g.in_w..(ih as usize + 1) * g.in_w];
                    for ow in 0..out_w {
                        let iw = (ow * g.stride_w + ks) as isize - g.pad_w as isize;
                        if iw >= 0 && iw < w {
                            dst[iw as usize] += src[oh * out_w + ow];
                        }
                    }
                }
            }
        }
    }
}

fn image_sizes(g: &ConvGeometry) -> [usize; 3] {
    [g.in_channels, g.in_h, g.in_w]
}

/// Lowers a single C×H×W image to a (C·kH·kW) × (outH·outW) matrix.
pub fn im2col(input: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
    g.validate()?;
    g.check_tensor("im2col input", input, &image_sizes(g))?;
    let mut cols = alloc::vec![0.0f32; g.taps() * g.positions()];
    im2col_slice(&input.to_vec(), g, &mut cols, g.positions(), 0);
    Tensor::from_vec(&[g.taps(), g.positions()], cols)
}

/// Scatter-adds a (C·kH·kW) × (outH·outW) matrix into a fresh C×H×W image.
pub fn col2im(matrix: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
    g.validate()?;
    if matrix.sizes() != [g.taps(), g.positions()] {
        return Err(Error::SizeMismatch(alloc::format!(
            "col2im matrix has sizes {:?}, geometry requires [{}, {}]",
            matrix.sizes(),
            g.taps(),
            g.positions()
        )));
    }
    let mut image = alloc::vec![0.0f32; g.in_channels * g.in_h * g.in_w];
    col2im_slice(&matrix.to_vec(), g, g.positions(), 0, &mut image);
    Tensor::from_vec(&image_sizes(g), image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn pointwise_lowering_is_reshape() {
        let g = ConvGeometry::square(1, 2, 3, 1, 1, 0, 1);
        let data: Vec<f32> = (0..18).map(|v| v as f32).collect();
        let x = Tensor::from_vec(&[2, 3, 3], data.clone()).unwrap();
        let m = im2col(&x, &g).unwrap();
        assert_eq!(m.sizes(), &[2, 9]);
        assert_eq!(m.to_vec(), data);
        assert_eq!(col2im(&m, &g).unwrap().to_vec(), data);
    }

    #[test]
    fn single_receptive_field() {
        let g = ConvGeometry::square(1, 1, 2, 1, 2, 0, 1);
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = im2col(&x, &g).unwrap();
        assert_eq!(m.sizes(), &[4, 1]);
        assert_eq!(m.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn padded_3x3_matches_enumeration() {
        let g = ConvGeometry::square(1, 1, 3, 1, 3, 1, 1);
        let data: Vec<f32> = (1..=9).map(|v| v as f32).collect();
        let x = Tensor::from_vec(&[1, 3, 3], data.clone()).unwrap();
        let m = im2col(&x, &g).unwrap().to_vec();
        // Brute force: column (i, j) row (r, s) reads pixel (i + r - 1, j + s - 1).
        for i in 0..3i32 {
            for j in 0..3i32 {
                for r in 0..3i32 {
                    for s in 0..3i32 {
                        let (y, x) = (i + r - 1, j + s - 1);
                        let expected = if (0..3).contains(&y) && (0..3).contains(&x) {
                            data[(y * 3 + x) as usize]
                        } else {
                            0.0
                        };
                        assert_eq!(m[((r * 3 + s) * 9 + i * 3 + j) as usize], expected);
                    }
                }
            }
        }
        let top_left: Vec<f32> = (0..9).map(|row| m[row * 9]).collect();
        assert_eq!(top_left.iter().filter(|&&v| v == 0.0).count(), 5);
    }

    #[test]
    fn col2im_counts_coverage() {
        let g = ConvGeometry::square(1, 1, 3, 1, 3, 1, 1);
        let ones = Tensor::from_vec(&[9, 9], vec![1.0; 81]).unwrap();
        let img = col2im(&ones, &g).unwrap().to_vec();
        assert_eq!(img, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
        let zeros = Tensor::zeros(&[9, 9]).unwrap();
        assert_eq!(col2im(&zeros, &g).unwrap().to_vec(), vec![0.0; 9]);
    }

    #[test]
    fn shape_errors() {
        let g = ConvGeometry::square(1, 1, 3, 1, 3, 1, 1);
        assert!(im2col(&Tensor::zeros(&[1, 3, 4]).unwrap(), &g).is_err());
        assert!(col2im(&Tensor::zeros(&[9, 8]).unwrap(), &g).is_err());
    }
}
