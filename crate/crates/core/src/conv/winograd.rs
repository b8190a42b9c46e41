//! Winograd minimal filtering F(2×2, 3×3).
//!
//! Each 2×2 output tile is computed from a 4×4 input tile (tiles overlap by
//! two pixels): `Y = Aᵀ [ Σ_c (G g_c Gᵀ) ⊙ (Bᵀ d_c B) ] A`. The channel sum
//! happens in the transform domain, so each tile costs 16 multiplies per
//! channel instead of 36.

use alloc::format;
use alloc::vec;

use super::direct::check_forward;
use super::ConvGeometry;
use crate::tensor::Tensor;
use crate::{Error, Result};

type Mat<const R: usize, const C: usize> = [[f32; C]; R];

const BT: Mat<4, 4> = [
    [1.0, 0.0, -1.0, 0.0],
    [0.0, 1.0, 1.0, 0.0],
    [0.0, -1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, -1.0],
];

const G: Mat<4, 3> = [
    [1.0, 0.0, 0.0],
    [0.5, 0.5, 0.5],
    [0.5, -0.5, 0.5],
    [0.0, 0.0, 1.0],
];

const AT: Mat<2, 4> = [[1.0, 1.0, 1.0, 0.0], [0.0, 1.0, -1.0, -1.0]];

fn mul<const R: usize, const I: usize, const C: usize>(a: &Mat<R, I>, b: &Mat<I, C>) -> Mat<R, C> {
    let mut out = [[0.0; C]; R];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..I).map(|i| a[r][i] * b[i][c]).sum();
        }
    }
    out
}

fn transpose<const R: usize, const C: usize>(a: &Mat<R, C>) -> Mat<C, R> {
    let mut out = [[0.0; R]; C];
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c][r] = *v;
        }
    }
    out
}

/// `G g Gᵀ` for a 3×3 filter.
pub fn filter_transform(g: &Mat<3, 3>) -> Mat<4, 4> {
    mul(&mul(&G, g), &transpose(&G))
}

/// `Bᵀ d B` for a 4×4 input tile.
pub fn input_transform(d: &Mat<4, 4>) -> Mat<4, 4> {
    mul(&mul(&BT, d), &transpose(&BT))
}

/// `Aᵀ m A`, back to a 2×2 output tile.
pub fn output_transform(m: &Mat<4, 4>) -> Mat<2, 2> {
    mul(&mul(&AT, m), &transpose(&AT))
}

pub fn winograd_supports(g: &ConvGeometry) -> bool {
    g.kernel_h == 3 && g.kernel_w == 3 && g.stride_h == 1 && g.stride_w == 1
}

pub fn conv_winograd_2x2_3x3(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
    check_forward(input, weight, bias, g)?;
    if !winograd_supports(g) {
        return Err(Error::Unsupported(format!(
            "winograd F(2x2,3x3) needs a 3x3 stride-1 kernel, got {}x{} stride {}x{}",
            g.kernel_h, g.kernel_w, g.stride_h, g.stride_w
        )));
    }
    let x = input.to_vec();
    let w = weight.to_vec();
    let b = bias.map(Tensor::to_vec);
    let (cin, cout) = (g.in_channels, g.out_channels);
    let (h, wd) = (g.in_h as isize, g.in_w as isize);
    let (out_h, out_w) = (g.out_h(), g.out_w());
    let (tiles_h, tiles_w) = (out_h.div_ceil(2), out_w.div_ceil(2));

    let mut u = vec![[[0.0f32; 4]; 4]; cout * cin];
    for k in 0..cout {
        for c in 0..cin {
            let base = (k * cin + c) * 9;
            let mut f = [[0.0; 3]; 3];
            for (r, row) in f.iter_mut().enumerate() {
                row.copy_from_slice(&w[base + r * 3..base + r * 3 + 3]);
            }
            u[k * cin + c] = filter_transform(&f);
        }
    }

    let mut out = vec![0.0f32; g.batch * cout * out_h * out_w];
    let mut v = vec![[[0.0f32; 4]; 4]; cin];
    for n in 0..g.batch {
        for th in 0..tiles_h {
            for tw in 0..tiles_w {
                let (y0, x0) = ((2 * th) as isize - g.pad_h as isize, (2 * tw) as isize - g.pad_w as isize);
                for (c, vc) in v.iter_mut().enumerate() {
                    let plane = &x[(n * cin + c) * g.in_h * g.in_w..];
                    let mut d = [[0.0; 4]; 4];
                    for (dy, row) in d.iter_mut().enumerate() {
                        let y = y0 + dy as isize;
                        if y < 0 || y >= h {
                            continue;
                        }
                        for (dx, val) in row.iter_mut().enumerate() {
                            let xx = x0 + dx as isize;
                            if xx >= 0 && xx < wd {
                                *val = plane[y as usize * g.in_w + xx as usize];
                            }
                        }
                    }
                    *vc = input_transform(&d);
                }
                for k in 0..cout {
                    let mut m = [[0.0f32; 4]; 4];
                    for (c, vc) in v.iter().enumerate() {
                        let uk = &u[k * cin + c];
                        for i in 0..4 {
                            for j in 0..4 {
                                m[i][j] += uk[i][j] * vc[i][j];
                            }
                        }
                    }
                    let y = output_transform(&m);
                    let bias_k = b.as_ref().map_or(0.0, |b| b[k]);
                    let plane = &mut out[(n * cout + k) * out_h * out_w..(n * cout + k + 1) * out_h * out_w];
                    for (dy, row) in y.iter().enumerate() {
                        let oy = 2 * th + dy;
                        if oy >= out_h {
                            continue;
                        }
                        for (dx, val) in row.iter().enumerate() {
                            let ox = 2 * tw + dx;
                            if ox < out_w {
                                plane[oy * out_w + ox] = val + bias_k;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&g.output_sizes(), out)
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

    fn max_rel(a: &[f32], b: &[f32]) -> f32 {
        let scale = b.iter().fold(0.0f32, |m, v| m.max(v.abs())).max(1e-12);
        a.iter().zip(b).fold(0.0f32, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn one_tile_transforms_match_correlation() {
        // A single tile with no channel sum must equal the 2x2 valid correlation.
        let d = [[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0], [9.0, 10.0, 11.0, 12.0], [13.0, 14.0, 15.0, 16.0]];
        let f = [[0.0, 1.0, 0.0], [2.0, 0.0, -1.0], [0.0, 0.5, 0.0]];
        let (u, v) = (filter_transform(&f), input_transform(&d));
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = u[i][j] * v[i][j];
            }
        }
        let y = output_transform(&m);
        for oy in 0..2 {
            for ox in 0..2 {
                let want: f32 = (0..3).flat_map(|r| (0..3).map(move |s| (r, s))).map(|(r, s)| d[oy + r][ox + s] * f[r][s]).sum();
                assert!((y[oy][ox] - want).abs() < 1e-5, "{oy},{ox}: {} vs {want}", y[oy][ox]);
            }
        }
    }

    #[test]
    fn single_tile_matches_direct() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let g = ConvGeometry::square(1, 1, 4, 1, 3, 0, 1);
        let (x, w) = (random(&g.input_sizes(), &mut rng), random(&g.weight_sizes(), &mut rng));
        let got = conv_winograd_2x2_3x3(&x, &w, None, &g).unwrap().to_vec();
        let want = conv_direct(&x, &w, None, &g).unwrap().to_vec();
        assert!(max_rel(&got, &want) <= 1e-3);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let g = ConvGeometry::square(2, 1, 5, 1, 3, 1, 1);
        let x = random(&g.input_sizes(), &mut rng);
        let mut taps = vec![0.0; 9];
        taps[4] = 1.0;
        let w = Tensor::from_vec(&[1, 1, 3, 3], taps).unwrap();
        let got = conv_winograd_2x2_3x3(&x, &w, None, &g).unwrap().to_vec();
        let diff = got.iter().zip(x.to_vec()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn vgg_style_layer() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        let g = ConvGeometry::square(1, 4, 16, 4, 3, 1, 1);
        let (x, w, b) = (random(&g.input_sizes(), &mut rng), random(&g.weight_sizes(), &mut rng), random(&[4], &mut rng));
        let got = conv_winograd_2x2_3x3(&x, &w, Some(&b), &g).unwrap().to_vec();
        let want = conv_direct(&x, &w, Some(&b), &g).unwrap().to_vec();
        assert!(max_rel(&got, &want) <= 1e-3);
    }

    #[test]
    fn odd_output_and_wide_padding() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(14);
        let g = ConvGeometry {
            pad_w: 2,
            ..ConvGeometry::square(2, 3, 7, 2, 3, 0, 1)
        };
        let (x, w) = (random(&g.input_sizes(), &mut rng), random(&g.weight_sizes(), &mut rng));
        let got = conv_winograd_2x2_3x3(&x, &w, None, &g).unwrap().to_vec();
        let want = conv_direct(&x, &w, None, &g).unwrap().to_vec();
        assert_eq!(got.len(), want.len());
        assert!(max_rel(&got, &want) <= 1e-3);
    }

    #[test]
    fn rejects_unsupported_geometry() {
        let g = ConvGeometry::square(1, 1, 8, 1, 3, 1, 2);
        let x = Tensor::zeros(&g.input_sizes()).unwrap();
        let w = Tensor::zeros(&g.weight_sizes()).unwrap();
        assert!(matches!(conv_winograd_2x2_3x3(&x, &w, None, &g), Err(Error::Unsupported(_))));
        let g = ConvGeometry::square(1, 1, 8, 1, 5, 1, 1);
        let x = Tensor::zeros(&g.input_sizes()).unwrap();
        let w = Tensor::zeros(&g.weight_sizes()).unwrap();
        assert!(conv_winograd_2x2_3x3(&x, &w, None, &g).is_err());
    }
}
