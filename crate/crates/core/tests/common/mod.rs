//! Random problem generators and error metrics shared by integration tests.
#![allow(dead_code)]

use portten_core::conv::ConvGeometry;
use portten_core::tensor::contiguous_strides;
use portten_core::{Storage, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

/// `max|a - b| / max|reference|`, with an all-zero reference compared absolutely.
pub fn rel_err(actual: &[f32], reference: &[f32]) -> f64 {
    assert_eq!(actual.len(), reference.len());
    let diff = actual
        .iter()
        .zip(reference)
        .map(|(&a, &r)| (a as f64 - r as f64).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|&r| (r as f64).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn random_tensor(rng: &mut impl Rng, sizes: &[usize]) -> Tensor {
    let n = sizes.iter().product();
    Tensor::from_vec(sizes, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

/// Small valid convolution. Every third draw is 3×3 stride 1 so that
/// Winograd gets exercised.
pub fn random_geometry(rng: &mut impl Rng, index: usize) -> ConvGeometry {
    loop {
        let winograd = index.is_multiple_of(3);
        let kernel_h = if winograd { 3 } else { rng.gen_range(1..=5) };
        let kernel_w = if winograd { 3 } else { rng.gen_range(1..=5) };
        let g = ConvGeometry {
            batch: rng.gen_range(1..=3),
            in_channels: rng.gen_range(1..=4),
            in_h: rng.gen_range(3..=12),
            in_w: rng.gen_range(3..=12),
            out_channels: rng.gen_range(1..=5),
            kernel_h,
            kernel_w,
            pad_h: rng.gen_range(0..=2),
            pad_w: rng.gen_range(0..=2),
            stride_h: if winograd { 1 } else { rng.gen_range(1..=3) },
            stride_w: if winograd { 1 } else { rng.gen_range(1..=3) },
        };
        if g.validate().is_ok() {
            return g;
        }
    }
}

pub struct ConvProblem {
    pub geometry: ConvGeometry,
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn random_problem(rng: &mut impl Rng, index: usize) -> ConvProblem {
    let geometry = random_geometry(rng, index);
    ConvProblem {
        input: random_tensor(rng, &geometry.input_sizes()),
        weight: random_tensor(rng, &geometry.weight_sizes()),
        bias: random_tensor(rng, &[geometry.out_channels]),
        geometry,
    }
}

/// A view of `sizes` over a larger random storage: random dimension order,
/// padding between rows and a leading offset.
pub fn random_view(rng: &mut impl Rng, sizes: &[usize]) -> Tensor {
    let rank = sizes.len();
    let mut order: Vec<usize> = (0..rank).collect();
    order.shuffle(rng);
    let padded: Vec<usize> = order.iter().map(|&d| sizes[d] + rng.gen_range(0..=2)).collect();
    let packed = contiguous_strides(&padded);
    let mut strides = vec![0; rank];
    for (slot, &d) in order.iter().enumerate() {
        strides[d] = packed[slot];
    }
    let offset = rng.gen_range(0..=4);
    let len = offset + padded.iter().product::<usize>() + rng.gen_range(0..=3);
    let storage = Storage::from_vec((0..len).map(|_| rng.gen_range(-2.0f32..2.0)).collect());
    Tensor::from_parts(storage, offset, sizes, &strides).unwrap()
}

pub fn random_sizes(rng: &mut impl Rng, max_rank: usize, max_size: usize) -> Vec<usize> {
    let rank = rng.gen_range(1..=max_rank);
    (0..rank).map(|_| rng.gen_range(1..=max_size)).collect()
}
