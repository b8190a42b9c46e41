use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use super::{render, KernelSource, REDUCE_TEMPLATE};
use crate::template::RenderContext;
use crate::tensor::{contiguous_strides, Tensor};
use crate::{Error, Result, MAX_DIMS};

pub const REDUCE_ENTRY: &str = "portten_reduce";

pub const REDUCE_WORKGROUP_SIZES: [usize; 4] = [32, 64, 128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReduceOp {
    Sum,
    Max,
    Min,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Sum => "sum",
            ReduceOp::Max => "max",
            ReduceOp::Min => "min",
        }
    }

    pub fn identity(self) -> f32 {
        match self {
            ReduceOp::Sum => 0.0,
            ReduceOp::Max => f32::NEG_INFINITY,
            ReduceOp::Min => f32::INFINITY,
        }
    }

    #[inline]
    pub fn combine(self, a: f32, b: f32) -> f32 {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Max => libm::fmaxf(a, b),
            ReduceOp::Min => libm::fminf(a, b),
        }
    }

    fn c_combine(self) -> &'static str {
        match self {
            ReduceOp::Sum => "((a) + (b))",
            ReduceOp::Max => "fmax((a), (b))",
            ReduceOp::Min => "fmin((a), (b))",
        }
    }

    fn c_identity(self) -> &'static str {
        match self {
            ReduceOp::Sum => "0.0f",
            ReduceOp::Max => "-INFINITY",
            ReduceOp::Min => "INFINITY",
        }
    }
}

impl FromStr for ReduceOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(ReduceOp::Sum),
            "max" => Ok(ReduceOp::Max),
            "min" => Ok(ReduceOp::Min),
            other => Err(Error::Unsupported(format!("reduction `{other}`"))),
        }
    }
}

/// Input layout of a reduction and the dimension reduced (all when `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReduceGeometry {
    pub sizes: Vec<usize>,
    pub strides: Vec<usize>,
    pub dim: Option<usize>,
}

impl ReduceGeometry {
    pub fn from_tensor(t: &Tensor, dim: Option<usize>) -> Result<Self> {
        let g = Self {
            sizes: t.sizes().to_vec(),
            strides: t.strides().to_vec(),
            dim,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let rank = self.sizes.len();
        if rank == 0 || rank > MAX_DIMS || self.strides.len() != rank {
            return Err(Error::Unsupported(format!("{rank}-dimensional reduction")));
        }
        if self.sizes.contains(&0) {
            return Err(Error::Shape("reduction over an empty tensor".into()));
        }
        if let Some(d) = self.dim {
            if d >= rank {
                return Err(Error::OutOfRange(format!("reduce dimension {d} of rank {rank}")));
            }
        }
        Ok(())
    }

    pub fn numel(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Number of values produced: 1 for reduce-all, else the product of the kept sizes.
    pub fn outputs(&self) -> usize {
        match self.dim {
            None => 1,
            Some(d) => self.numel() / self.sizes[d],
        }
    }
}

/// Launch shape of the first reduction stage.
///
/// Reduce-all runs `groups` workgroups over a grid-stride loop and leaves one
/// partial per group for a host finish (`groups <= workgroup`). Reduce-dim
/// runs one workgroup per output element and needs no second stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducePlan {
    pub workgroup: usize,
    pub groups: usize,
}

impl ReducePlan {
    pub fn new(geometry: &ReduceGeometry, workgroup: usize) -> Result<Self> {
        if !REDUCE_WORKGROUP_SIZES.contains(&workgroup) {
            return Err(Error::Unsupported(format!(
                "reduction workgroup size {workgroup}, expected one of {REDUCE_WORKGROUP_SIZES:?}"
            )));
        }
        let groups = match geometry.dim {
            None => geometry.numel().div_ceil(workgroup).min(workgroup),
            Some(_) => geometry.outputs(),
        };
        Ok(Self { workgroup, groups })
    }

    pub fn grid(&self) -> usize {
        self.groups * self.workgroup
    }
}

pub fn gen_reduce_kernel(op: ReduceOp, geometry: &ReduceGeometry, workgroup: usize) -> Result<KernelSource> {
    geometry.validate()?;
    let plan = ReducePlan::new(geometry, workgroup)?;
    let rank = geometry.sizes.len();

    let mut ctx = RenderContext::new();
    ctx.insert("entry", REDUCE_ENTRY)?;
    ctx.insert("op", op.name())?;
    ctx.insert("combine", op.c_combine())?;
    ctx.insert("identity", op.c_identity())?;
    ctx.insert("workgroup", workgroup)?;
    ctx.insert("groups", plan.groups)?;
    ctx.insert("grid", plan.grid())?;
    ctx.insert("sizes", geometry.sizes.as_slice())?;
    ctx.insert("numel", geometry.numel())?;
    let mut steps = Vec::new();
    let mut step = workgroup / 2;
    while step >= 1 {
        steps.push(step);
        step /= 2;
    }
    ctx.insert("steps", steps)?;
    match geometry.dim {
        None => {
            ctx.insert("mode", "all")?;
            ctx.insert("reduce_all", true)?;
            ctx.insert("contiguous", geometry.strides == contiguous_strides(&geometry.sizes))?;
            ctx.insert("strides", geometry.strides.as_slice())?;
            ctx.insert("inner_dims", (1..rank).rev().collect::<Vec<_>>())?;
        }
        Some(d) => {
            ctx.insert("mode", format!("along dimension {d}"))?;
            ctx.insert("reduce_all", false)?;
            let outer_sizes: Vec<usize> = (0..rank).filter(|&e| e != d).map(|e| geometry.sizes[e]).collect();
            let outer_strides: Vec<usize> = (0..rank).filter(|&e| e != d).map(|e| geometry.strides[e]).collect();
            ctx.insert("has_outer", !outer_sizes.is_empty())?;
            ctx.insert("outer_inner_dims", (1..outer_sizes.len()).rev().collect::<Vec<_>>())?;
            ctx.insert("outer_sizes", outer_sizes)?;
            ctx.insert("outer_strides", outer_strides)?;
            ctx.insert("reduce_size", geometry.sizes[d])?;
            ctx.insert("reduce_stride", geometry.strides[d])?;
        }
    }
    render(REDUCE_TEMPLATE, &ctx, REDUCE_ENTRY, "")
}
