//! Non-convolution layers used by the model benchmark: max pooling and ReLU.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl PoolGeometry {
    pub fn new(kernel_h: usize, kernel_w: usize, stride_h: usize, stride_w: usize) -> Self {
        Self { kernel_h, kernel_w, stride_h, stride_w }
    }

    pub fn validate(&self, in_h: usize, in_w: usize) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::Geometry(format!("pool kernel and stride must be positive, got {self:?}")));
        }
        if self.kernel_h > in_h || self.kernel_w > in_w {
            return Err(Error::Geometry(format!(
                "pool window {}x{} exceeds input {in_h}x{in_w}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok(())
    }

    pub fn out_h(&self, in_h: usize) -> usize {
        (in_h - self.kernel_h) / self.stride_h + 1
    }

    pub fn out_w(&self, in_w: usize) -> usize {
        (in_w - self.kernel_w) / self.stride_w + 1
    }
}

fn nchw(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    <[usize; 4]>::try_from(t.sizes()).map_err(|_| Error::Shape(format!("{what} must be rank 4 (NCHW), got {:?}", t.sizes())))
}

/// Max pooling without padding. Returns the output and, per output element,
/// the flat input index of its maximum (the lowest index on ties).
pub fn maxpool_forward(input: &Tensor, p: &PoolGeometry) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w] = nchw(input, "maxpool input")?;
    p.validate(h, w)?;
    let (oh, ow) = (p.out_h(h), p.out_w(w));
    let x = input.to_vec();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + i * p.stride_h * w + j * p.stride_w;
                for r in 0..p.kernel_h {
                    for s in 0..p.kernel_w {
                        let at = base + (i * p.stride_h + r) * w + j * p.stride_w + s;
                        if x[at] > x[best] {
                            best = at;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[n, c, oh, ow], out)?, argmax))
}

/// Routes each upstream gradient to the input position that won the forward max.
pub fn maxpool_backward(grad_output: &Tensor, argmax: &[usize], input_sizes: &[usize]) -> Result<Tensor> {
    if grad_output.numel() != argmax.len() {
        return Err(Error::SizeMismatch(format!(
            "{} gradients for {} pooled positions",
            grad_output.numel(),
            argmax.len()
        )));
    }
    let len: usize = input_sizes.iter().product();
    let mut grad = vec![0.0f32; len];
    for (g, &i) in grad_output.to_vec().iter().zip(argmax) {
        *grad.get_mut(i).ok_or_else(|| Error::OutOfRange(format!("argmax {i} beyond input of {len}")))? += g;
    }
    Tensor::from_vec(input_sizes, grad)
}

pub fn relu_forward(input: &Tensor) -> Result<Tensor> {
    Tensor::from_vec(input.sizes(), input.to_vec().into_iter().map(|v| v.max(0.0)).collect())
}

/// Passes the gradient where the forward input was strictly positive.
pub fn relu_backward(grad_output: &Tensor, input: &Tensor) -> Result<Tensor> {
    if grad_output.sizes() != input.sizes() {
        return Err(Error::SizeMismatch(format!("{:?} vs {:?}", grad_output.sizes(), input.sizes())));
    }
    let g = grad_output
        .to_vec()
        .into_iter()
        .zip(input.to_vec())
        .map(|(g, x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.sizes(), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_2x2() {
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(|v| v as f32).collect()).unwrap();
        let (y, arg) = maxpool_forward(&x, &PoolGeometry::new(2, 2, 2, 2)).unwrap();
        assert_eq!(y.sizes(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![5.0, 7.0, 13.0, 15.0]);
        assert_eq!(arg, vec![5, 7, 13, 15]);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0; 4]).unwrap();
        let (_, arg) = maxpool_forward(&x, &PoolGeometry::new(2, 2, 2, 2)).unwrap();
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn overlapping_windows_accumulate() {
        let x = Tensor::from_vec(&[1, 1, 1, 3], vec![0.0, 9.0, 0.0]).unwrap();
        let (y, arg) = maxpool_forward(&x, &PoolGeometry::new(1, 2, 1, 1)).unwrap();
        assert_eq!(y.to_vec(), vec![9.0, 9.0]);
        let dy = Tensor::from_vec(&[1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(maxpool_backward(&dy, &arg, x.sizes()).unwrap().to_vec(), vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn pool_rejects_bad_geometry() {
        let x = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        assert!(maxpool_forward(&x, &PoolGeometry::new(3, 3, 1, 1)).is_err());
        assert!(maxpool_forward(&x, &PoolGeometry::new(2, 2, 0, 1)).is_err());
        assert!(maxpool_forward(&Tensor::zeros(&[2, 2]).unwrap(), &PoolGeometry::new(1, 1, 1, 1)).is_err());
    }

    #[test]
    fn relu_round_trip() {
        let x = Tensor::from_vec(&[4], vec![-1.0, 0.0, 2.0, -0.5]).unwrap();
        assert_eq!(relu_forward(&x).unwrap().to_vec(), vec![0.0, 0.0, 2.0, 0.0]);
        let dy = Tensor::from_vec(&[4], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(relu_backward(&dy, &x).unwrap().to_vec(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
