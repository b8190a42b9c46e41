//! Single-precision GEMM: `C = alpha * op(A) * op(B) + beta * C`.
//!
//! Matrices are row-major with explicit leading dimensions (row strides).
//! Two variants share one contract: [`gemm_naive`], the triple-loop oracle,
//! and [`gemm_tiled`], which packs panels of A and B and streams a row of
//! the accumulator block at a time. Both accumulate each output element over
//! `k` in ascending order from zero, so their results agree bit for bit and
//! an output element never depends on how many columns share its GEMM call.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GemmSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub trans_a: bool,
    pub trans_b: bool,
    pub alpha: f32,
    pub beta: f32,
    pub lda: usize,
    pub ldb: usize,
    pub ldc: usize,
}

impl GemmSpec {
    /// Packed, non-transposed `C(m×n) = A(m×k) · B(k×n)`.
    pub fn new(m: usize, n: usize, k: usize) -> Self {
        Self {
            m,
            n,
            k,
            trans_a: false,
            trans_b: false,
            alpha: 1.0,
            beta: 0.0,
            lda: k,
            ldb: n,
            ldc: n,
        }
    }

    /// Sets transposition flags and repacks the leading dimensions to match.
    pub fn transposed(mut self, trans_a: bool, trans_b: bool) -> Self {
        self.trans_a = trans_a;
        self.trans_b = trans_b;
        self.lda = if trans_a { self.m } else { self.k };
        self.ldb = if trans_b { self.k } else { self.n };
        self
    }

    pub fn scaled(mut self, alpha: f32, beta: f32) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// (rows, cols) of A and B as stored.
    fn stored_a(&self) -> (usize, usize) {
        if self.trans_a {
            (self.k, self.m)
        } else {
            (self.m, self.k)
        }
    }

    fn stored_b(&self) -> (usize, usize) {
        if self.trans_b {
            (self.n, self.k)
        } else {
            (self.k, self.n)
        }
    }

    pub fn validate(&self, a_len: usize, b_len: usize, c_len: usize) -> Result<()> {
        let check = |name: &str, (rows, cols): (usize, usize), ld: usize, len: usize| -> Result<()> {
            if ld < cols {
                return Err(Error::SizeMismatch(format!(
                    "leading dimension {ld} of {name} is below its {cols} columns"
                )));
            }
            let need = if rows == 0 || cols == 0 { 0 } else { (rows - 1) * ld + cols };
            if len < need {
                return Err(Error::SizeMismatch(format!(
                    "{name} holds {len} elements, {rows}x{cols} with ld {ld} needs {need}"
                )));
            }
            Ok(())
        };
        check("A", self.stored_a(), self.lda, a_len)?;
        check("B", self.stored_b(), self.ldb, b_len)?;
        check("C", (self.m, self.n), self.ldc, c_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GemmVariant {
    Naive,
    #[default]
    Tiled,
}

#[inline]
fn finish(alpha: f32, beta: f32, acc: f32, c: &mut f32) {
    *c = if alpha == 0.0 {
        if beta == 0.0 {
            0.0
        } else {
            beta * *c
        }
    } else if beta == 0.0 {
        alpha * acc
    } else {
        alpha * acc + beta * *c
    };
}

/// Triple-loop reference GEMM.
pub fn gemm_naive(spec: &GemmSpec, a: &[f32], b: &[f32], c: &mut [f32]) -> Result<()> {
    spec.validate(a.len(), b.len(), c.len())?;
    for i in 0..spec.m {
        for j in 0..spec.n {
            let mut acc = 0.0f32;
            for p in 0..spec.k {
                let av = if spec.trans_a { a[p * spec.lda + i] } else { a[i * spec.lda + p] };
                let bv = if spec.trans_b { b[j * spec.ldb + p] } else { b[p * spec.ldb + j] };
                acc += av * bv;
            }
            finish(spec.alpha, spec.beta, acc, &mut c[i * spec.ldc + j]);
        }
    }
    Ok(())
}

const BLOCK_N: usize = 256;
const BLOCK_K: usize = 128;
const BLOCK_M: usize = 64;

/// Cache-blocked GEMM with packed panels.
pub fn gemm_tiled(spec: &GemmSpec, a: &[f32], b: &[f32], c: &mut [f32]) -> Result<()> {
    spec.validate(a.len(), b.len(), c.len())?;
    let (m, n, k) = (spec.m, spec.n, spec.k);
    if m == 0 || n == 0 {
        return Ok(());
    }
    let mut b_panel = vec![0.0f32; BLOCK_K * BLOCK_N];
    let mut a_panel = vec![0.0f32; BLOCK_M * BLOCK_K];
    let mut acc = vec![0.0f32; m * BLOCK_N.min(n)];

    for jc in (0..n).step_by(BLOCK_N) {
        let nb = BLOCK_N.min(n - jc);
        acc[..m * nb].iter_mut().for_each(|v| *v = 0.0);
        for pc in (0..k).step_by(BLOCK_K) {
            let kb = BLOCK_K.min(k - pc);
            for p in 0..kb {
                let row = &mut b_panel[p * nb..(p + 1) * nb];
                if spec.trans_b {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = b[(jc + j) * spec.ldb + pc + p];
                    }
                } else {
                    let start = (pc + p) * spec.ldb + jc;
                    row.copy_from_slice(&b[start..start + nb]);
                }
            }
            for ic in (0..m).step_by(BLOCK_M) {
                let mb = BLOCK_M.min(m - ic);
                for i in 0..mb {
                    for p in 0..kb {
                        a_panel[i * kb + p] = if spec.trans_a {
                            a[(pc + p) * spec.lda + ic + i]
                        } else {
                            a[(ic + i) * spec.lda + pc + p]
                        };
                    }
                }
                for i in 0..mb {
                    let acc_row = &mut acc[(ic + i) * nb..(ic + i + 1) * nb];
                    let a_row = &a_panel[i * kb..(i + 1) * kb];
                    for (p, &av) in a_row.iter().enumerate() {
                        let b_row = &b_panel[p * nb..(p + 1) * nb];
                        for (out, &bv) in acc_row.iter_mut().zip(b_row) {
                            *out += av * bv;
                        }
                    }
                }
            }
        }
        for i in 0..m {
            let c_row = &mut c[i * spec.ldc + jc..i * spec.ldc + jc + nb];
            for (cv, &av) in c_row.iter_mut().zip(&acc[i * nb..(i + 1) * nb]) {
                finish(spec.alpha, spec.beta, av, cv);
            }
        }
    }
    Ok(())
}

pub fn gemm_slices(variant: GemmVariant, spec: &GemmSpec, a: &[f32], b: &[f32], c: &mut [f32]) -> Result<()> {
    match variant {
        GemmVariant::Naive => gemm_naive(spec, a, b, c),
        GemmVariant::Tiled => gemm_tiled(spec, a, b, c),
    }
}

/// GEMM over tensors: A, B and C are read in logical row-major order, so the
/// leading dimensions in `spec` describe their logical layout. C is updated in place.
pub fn gemm(variant: GemmVariant, spec: &GemmSpec, a: &Tensor, b: &Tensor, c: &Tensor) -> Result<()> {
    let a_data = a.to_vec();
    let b_data = b.to_vec();
    let mut c_data: Vec<f32> = c.to_vec();
    gemm_slices(variant, spec, &a_data, &b_data, &mut c_data)?;
    c.write_from(&c_data)
}
