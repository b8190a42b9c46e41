// Kernel cases frozen as golden files; shared with the acceptance suite via `include!`.

use portten_core::codegen::{
    gen_apply_kernel, gen_im2col_kernel, gen_im2col_kernel_batched, gen_reduce_kernel, ApplyGeometry, ApplySpec, KernelSource,
    ReduceGeometry, ReduceOp,
};
use portten_core::conv::ConvGeometry;

fn golden_cases() -> Vec<(&'static str, KernelSource)> {
    let apply = |arity: usize, expr: &str, sizes: &[usize], strides: Vec<Vec<usize>>| {
        let spec = ApplySpec::new(arity, expr).unwrap();
        gen_apply_kernel(&spec, &ApplyGeometry { sizes: sizes.to_vec(), strides }).unwrap()
    };
    let reduce = |op: ReduceOp, sizes: &[usize], strides: &[usize], dim: Option<usize>, wg: usize| {
        let g = ReduceGeometry { sizes: sizes.to_vec(), strides: strides.to_vec(), dim };
        gen_reduce_kernel(op, &g, wg).unwrap()
    };
    let im2col = |g: ConvGeometry| gen_im2col_kernel(&g).unwrap();
    vec![
        ("apply_scale_contiguous_1d", apply(1, "x = x * 2", &[1024], vec![vec![1]])),
        ("apply_add_narrowed_view", apply(2, "x = x + y", &[3, 4], vec![vec![4, 1], vec![6, 1]])),
        (
            "apply_ternary_mixed",
            apply(3, "x = max(y, z) * s", &[2, 3, 4], vec![vec![12, 4, 1], vec![1, 8, 2], vec![12, 4, 1]]),
        ),
        (
            "apply_unary_functions_strided_4d",
            apply(2, "x = tanh(x) - exp(-y) / sqrt(abs(y) + 1)", &[2, 2, 3, 2], vec![vec![24, 12, 4, 2], vec![1, 2, 4, 12]]),
        ),
        ("reduce_sum_all_contiguous", reduce(ReduceOp::Sum, &[1000], &[1], None, 256)),
        ("reduce_max_along_dim1", reduce(ReduceOp::Max, &[4, 6], &[6, 1], Some(1), 64)),
        ("reduce_min_all_narrowed", reduce(ReduceOp::Min, &[5, 7], &[10, 1], None, 128)),
        ("im2col_1x1_unpadded", im2col(ConvGeometry::square(1, 8, 14, 16, 1, 0, 1))),
        ("im2col_3x3_pad1", im2col(ConvGeometry::square(1, 3, 32, 8, 3, 1, 1))),
        ("im2col_5x5_pad2", im2col(ConvGeometry::square(1, 64, 27, 192, 5, 2, 1))),
        ("im2col_7x7_stride2", im2col(ConvGeometry::square(1, 3, 64, 16, 7, 3, 2))),
        ("im2col_11x11_stride4", im2col(ConvGeometry::square(1, 3, 224, 64, 11, 2, 4))),
        ("im2col_3x3_batched_chunk4", gen_im2col_kernel_batched(&ConvGeometry::square(8, 16, 14, 16, 3, 1, 1), 4).unwrap()),
    ]
}
