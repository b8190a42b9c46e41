use alloc::vec;

use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::Result;

pub(crate) fn check_forward(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<()> {
    g.validate()?;
    g.check_tensor("input", input, &g.input_sizes())?;
    g.check_tensor("weight", weight, &g.weight_sizes())?;
    if let Some(b) = bias {
        g.check_tensor("bias", b, &[g.out_channels])?;
    }
    Ok(())
}

/// Direct cross-correlation with zero padding, straight from the definition.
///
/// `out[n,k,i,j] = bias[k] + Σ_{c,r,s} in[n, c, i·sH + r − pH, j·sW + s − pW] · w[k,c,r,s]`
pub fn conv_direct(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
    check_forward(input, weight, bias, g)?;
    let x = input.to_vec();
    let w = weight.to_vec();
    let b = bias.map(Tensor::to_vec);
    let (out_h, out_w) = (g.out_h(), g.out_w());
    let mut out = vec![0.0f32; g.batch * g.out_channels * out_h * out_w];
    let mut at = 0;
    for n in 0..g.batch {
        for k in 0..g.out_channels {
            for i in 0..out_h {
                for j in 0..out_w {
                    let mut acc = 0.0f32;
                    for c in 0..g.in_channels {
                        for r in 0..g.kernel_h {
                            let y = (i * g.stride_h + r) as isize - g.pad_h as isize;
                            if y < 0 || y >= g.in_h as isize {
                                continue;
                            }
                            for s in 0..g.kernel_w {
                                let xx = (j * g.stride_w + s) as isize - g.pad_w as isize;
                                if xx < 0 || xx >= g.in_w as isize {
                                    continue;
                                }
                                let xi = ((n * g.in_channels + c) * g.in_h + y as usize) * g.in_w + xx as usize;
                                let wi = ((k * g.in_channels + c) * g.kernel_h + r) * g.kernel_w + s;
                                acc += x[xi] * w[wi];
                            }
                        }
                    }
                    out[at] = acc + b.as_ref().map_or(0.0, |b| b[k]);
                    at += 1;
                }
            }
        }
    }
    Tensor::from_vec(&g.output_sizes(), out)
}
