//! Backward passes via the transposed im2col formulation.

use alloc::vec;

use super::gemm::{gemm_tiled, GemmSpec};
use super::lowering::{col2im_slice, im2col_slice};
use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::Result;

fn check(g: &ConvGeometry, grad_output: &Tensor) -> Result<()> {
    g.validate()?;
    g.check_tensor("grad_output", grad_output, &g.output_sizes())
}

/// Gradient of the loss with respect to the input: per image, `Wᵀ · dY`
/// (a (C·kH·kW) × (outH·outW) matrix) scattered back with col2im.
pub fn conv_backward_input(grad_output: &Tensor, weight: &Tensor, g: &ConvGeometry) -> Result<Tensor> {
    check(g, grad_output)?;
    g.check_tensor("weight", weight, &g.weight_sizes())?;
    let dy = grad_output.to_vec();
    let w = weight.to_vec();
    let (taps, positions) = (g.taps(), g.positions());
    let image_len = g.in_channels * g.in_h * g.in_w;
    let out_len = g.out_channels * positions;
    let spec = GemmSpec::new(taps, positions, g.out_channels).transposed(true, false);
    let mut cols = vec![0.0f32; taps * positions];
    let mut grad_input = vec![0.0f32; g.batch * image_len];
    for n in 0..g.batch {
        gemm_tiled(&spec, &w, &dy[n * out_len..(n + 1) * out_len], &mut cols)?;
        col2im_slice(&cols, g, positions, 0, &mut grad_input[n * image_len..(n + 1) * image_len]);
    }
    Tensor::from_vec(&g.input_sizes(), grad_input)
}

/// Gradients with respect to the weight and bias:
/// `dW = Σ_n dY_n · im2col(x_n)ᵀ` and `db[k] = Σ_{n,i,j} dY[n,k,i,j]`.
pub fn conv_backward_weight(input: &Tensor, grad_output: &Tensor, g: &ConvGeometry) -> Result<(Tensor, Tensor)> {
    check(g, grad_output)?;
    g.check_tensor("input", input, &g.input_sizes())?;
    let x = input.to_vec();
    let dy = grad_output.to_vec();
    let (taps, positions) = (g.taps(), g.positions());
    let image_len = g.in_channels * g.in_h * g.in_w;
    let out_len = g.out_channels * positions;
    let mut cols = vec![0.0f32; taps * positions];
    let mut grad_weight = vec![0.0f32; g.out_channels * taps];
    let mut grad_bias = vec![0.0f32; g.out_channels];
    for n in 0..g.batch {
        im2col_slice(&x[n * image_len..(n + 1) * image_len], g, &mut cols, positions, 0);
        let dy_n = &dy[n * out_len..(n + 1) * out_len];
        let beta = if n == 0 { 0.0 } else { 1.0 };
        let spec = GemmSpec::new(g.out_channels, taps, positions)
            .transposed(false, true)
            .scaled(1.0, beta);
        gemm_tiled(&spec, dy_n, &cols, &mut grad_weight)?;
        for (k, row) in dy_n.chunks(positions).enumerate() {
            grad_bias[k] += row.iter().sum::<f32>();
        }
    }
    Ok((
        Tensor::from_vec(&g.weight_sizes(), grad_weight)?,
        Tensor::from_vec(&[g.out_channels], grad_bias)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::conv_direct;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(sizes: &[usize], rng: &mut impl Rng) -> Tensor {
        let n = sizes.iter().product();
        Tensor::from_vec(sizes, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Loss L = Σ out ⊙ dY, so dL/dθ is the backward result.
    fn loss(x: &Tensor, w: &Tensor, b: &Tensor, dy: &[f32], g: &ConvGeometry) -> f64 {
        let out = conv_direct(x, w, Some(b), g).unwrap().to_vec();
        out.iter().zip(dy).map(|(o, d)| *o as f64 * *d as f64).sum()
    }

    fn central_difference(t: &Tensor, i: usize, step: f32, mut f: impl FnMut() -> f64) -> f64 {
        let orig = t.storage().get(i);
        t.storage().set(i, orig + step);
        let plus = f();
        t.storage().set(i, orig - step);
        let minus = f();
        t.storage().set(i, orig);
        (plus - minus) / (2.0 * step as f64)
    }

    #[test]
    fn finite_differences_tiny_geometry() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        let g = ConvGeometry::square(1, 2, 5, 3, 3, 1, 1);
        let x = random(&g.input_sizes(), &mut rng);
        let w = random(&g.weight_sizes(), &mut rng);
        let b = random(&[3], &mut rng);
        let dy_t = random(&g.output_sizes(), &mut rng);
        let dy = dy_t.to_vec();
        let dx = conv_backward_input(&dy_t, &w, &g).unwrap().to_vec();
        let (dw, db) = conv_backward_weight(&x, &dy_t, &g).unwrap();
        let (dw, db) = (dw.to_vec(), db.to_vec());
        let step = 1e-2;
        let mut worst = 0.0f64;
        for i in 0..x.numel() {
            let fd = central_difference(&x, i, step, || loss(&x, &w, &b, &dy, &g));
            worst = worst.max((fd - dx[i] as f64).abs());
        }
        for i in 0..w.numel() {
            let fd = central_difference(&w, i, step, || loss(&x, &w, &b, &dy, &g));
            worst = worst.max((fd - dw[i] as f64).abs());
        }
        for i in 0..b.numel() {
            let fd = central_difference(&b, i, step, || loss(&x, &w, &b, &dy, &g));
            worst = worst.max((fd - db[i] as f64).abs());
        }
        assert!(worst <= 1e-2, "max abs error {worst}");
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(22);
        let g = ConvGeometry::square(2, 2, 4, 2, 3, 1, 2);
        let x = random(&g.input_sizes(), &mut rng);
        let w = random(&g.weight_sizes(), &mut rng);
        let dy = Tensor::zeros(&g.output_sizes()).unwrap();
        assert!(conv_backward_input(&dy, &w, &g).unwrap().to_vec().iter().all(|&v| v == 0.0));
        let (dw, db) = conv_backward_weight(&x, &dy, &g).unwrap();
        assert!(dw.to_vec().iter().chain(db.to_vec().iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn pointwise_weight_gradient_closed_form() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        let g = ConvGeometry::square(2, 3, 4, 2, 1, 0, 1);
        let x = random(&g.input_sizes(), &mut rng);
        let dy = random(&g.output_sizes(), &mut rng);
        let (dw, _) = conv_backward_weight(&x, &dy, &g).unwrap();
        let (xv, dyv, dw) = (x.to_vec(), dy.to_vec(), dw.to_vec());
        for k in 0..2 {
            for c in 0..3 {
                let want: f32 = (0..2)
                    .flat_map(|n| (0..16).map(move |p| (n, p)))
                    .map(|(n, p)| xv[(n * 3 + c) * 16 + p] * dyv[(n * 2 + k) * 16 + p])
                    .sum();
                assert!((dw[k * 3 + c] - want).abs() <= 1e-5);
            }
        }
    }
}
