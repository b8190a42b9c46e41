use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use super::{render, KernelSource, APPLY_TEMPLATE};
use crate::expr::{parse_assignment, Assignment, Operand};
use crate::template::RenderContext;
use crate::tensor::{contiguous_strides, Tensor};
use crate::{Error, Result, MAX_DIMS};

pub const APPLY_ENTRY: &str = "portten_apply";

/// Division and sqrt rounded like the host, so device results match the
/// reference interpreter bit for bit.
pub const APPLY_BUILD_OPTIONS: &str = "-cl-fp32-correctly-rounded-divide-sqrt";

/// A pointwise operation: `x = f(x, y, z, s)` over `arity` tensor operands.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplySpec {
    arity: usize,
    expression: String,
    program: Assignment,
}

impl ApplySpec {
    pub fn new(arity: usize, expression: &str) -> Result<Self> {
        let program = parse_assignment(expression, arity)?;
        Ok(Self {
            arity,
            expression: expression.split_whitespace().collect::<Vec<_>>().join(" "),
            program,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn expression(&self) -> &str {
        &self.expression
    }

    pub fn program(&self) -> &Assignment {
        &self.program
    }
}

/// Shared sizes plus per-operand strides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyGeometry {
    pub sizes: Vec<usize>,
    pub strides: Vec<Vec<usize>>,
}

impl ApplyGeometry {
    pub fn from_tensors(operands: &[&Tensor]) -> Result<Self> {
        let first = operands
            .first()
            .ok_or_else(|| Error::SizeMismatch("apply needs at least one operand".into()))?;
        for (i, t) in operands.iter().enumerate().skip(1) {
            if t.sizes() != first.sizes() {
                return Err(Error::SizeMismatch(format!(
                    "operand {i} has sizes {:?}, destination has {:?}",
                    t.sizes(),
                    first.sizes()
                )));
            }
        }
        Ok(Self {
            sizes: first.sizes().to_vec(),
            strides: operands.iter().map(|t| t.strides().to_vec()).collect(),
        })
    }

    /// Whether operand `i` can be addressed as `offset + linear`.
    pub fn is_contiguous(&self, i: usize) -> bool {
        let expected = contiguous_strides(&self.sizes);
        self.sizes
            .iter()
            .zip(self.strides[i].iter().zip(&expected))
            .all(|(&size, (&s, &e))| size == 1 || s == e)
    }

    pub fn numel(&self) -> usize {
        self.sizes.iter().product()
    }
}

pub fn gen_apply_kernel(spec: &ApplySpec, geometry: &ApplyGeometry) -> Result<KernelSource> {
    let rank = geometry.sizes.len();
    if rank == 0 || rank > MAX_DIMS {
        return Err(Error::Unsupported(format!("{rank}-dimensional apply")));
    }
    if geometry.strides.len() != spec.arity() || geometry.strides.iter().any(|s| s.len() != rank) {
        return Err(Error::SizeMismatch(format!(
            "geometry describes {} operands, spec has arity {}",
            geometry.strides.len(),
            spec.arity()
        )));
    }

    let mut operands = Vec::new();
    let mut contiguous = Vec::new();
    let mut strided = Vec::new();
    let mut ctx = RenderContext::new();
    for op in Operand::ALL {
        let active = op.index() < spec.arity();
        let is_strided = active && !geometry.is_contiguous(op.index());
        if active {
            operands.push(op.name().to_string());
            if is_strided {
                strided.push(op.name().to_string());
                ctx.insert(&format!("{}_strides", op.name()), geometry.strides[op.index()].as_slice())?;
            } else {
                contiguous.push(op.name().to_string());
            }
        }
        ctx.insert(&format!("{}_strided", op.name()), is_strided)?;
    }

    ctx.insert("entry", APPLY_ENTRY)?;
    ctx.insert("expression", spec.expression())?;
    ctx.insert("expression_c", spec.program().value.to_c())?;
    ctx.insert("arity", spec.arity())?;
    ctx.insert("numel", geometry.numel())?;
    ctx.insert("sizes", geometry.sizes.as_slice())?;
    ctx.insert("inner_dims", (1..rank).rev().collect::<Vec<_>>())?;
    ctx.insert("decode", !strided.is_empty())?;
    ctx.insert("operands", operands)?;
    ctx.insert("contiguous", contiguous)?;
    ctx.insert("strided", strided)?;
    render(APPLY_TEMPLATE, &ctx, APPLY_ENTRY, APPLY_BUILD_OPTIONS)
}

impl ApplyGeometry {
    /// Geometry with every operand contiguous.
    pub fn contiguous(sizes: &[usize], arity: usize) -> Self {
        Self {
            sizes: sizes.to_vec(),
            strides: vec![contiguous_strides(sizes); arity],
        }
    }
}
