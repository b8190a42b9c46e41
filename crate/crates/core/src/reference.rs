//! Host reference execution of apply and reduce descriptors.
//!
//! The reference path interprets the operation directly instead of running
//! generated kernel text: it needs no device runtime and serves as the oracle
//! the device backend is compared against. Reductions accumulate
//! sequentially in logical order.

use alloc::format;
use alloc::vec::Vec;

use crate::codegen::{ApplyGeometry, ApplySpec, ReduceGeometry, ReduceOp};
use crate::tensor::{StorageIndices, Tensor};
use crate::{Error, Result};

enum Cursor<'a> {
    Flat(usize),
    Strided(StorageIndices<'a>),
}

impl Cursor<'_> {
    fn new(t: &Tensor) -> Cursor<'_> {
        if t.is_contiguous() {
            Cursor::Flat(t.storage_offset())
        } else {
            Cursor::Strided(t.storage_indices())
        }
    }

    #[inline]
    fn next_index(&mut self) -> usize {
        match self {
            Cursor::Flat(i) => {
                let at = *i;
                *i += 1;
                at
            }
            Cursor::Strided(it) => it.next().expect("cursor exhausted"),
        }
    }
}

/// `operands[0][i] = f(operands[..][i], scalar)` at every logical index `i`.
///
/// Elements are visited in logical order; the destination may alias an input
/// only at the same logical positions.
pub fn apply(spec: &ApplySpec, operands: &[&Tensor], scalar: f32) -> Result<()> {
    if operands.len() != spec.arity() {
        return Err(Error::SizeMismatch(format!(
            "{} operands for an arity-{} expression",
            operands.len(),
            spec.arity()
        )));
    }
    let geometry = ApplyGeometry::from_tensors(operands)?;
    let program = &spec.program().value;
    let mut cursors: Vec<Cursor<'_>> = operands.iter().map(|t| Cursor::new(t)).collect();
    let mut values = [0.0f32; 3];
    for _ in 0..geometry.numel() {
        let mut dst = 0;
        for (slot, (cursor, t)) in cursors.iter_mut().zip(operands).enumerate() {
            let at = cursor.next_index();
            if slot == 0 {
                dst = at;
            }
            values[slot] = t.storage().get(at);
        }
        operands[0].storage().set(dst, program.eval(&values, scalar));
    }
    Ok(())
}

/// Result of a reduction: a scalar for reduce-all, otherwise a tensor whose
/// reduced dimension has size 1.
#[derive(Debug, Clone)]
pub enum Reduced {
    Scalar(f32),
    Tensor(Tensor),
}

impl Reduced {
    pub fn scalar(&self) -> Option<f32> {
        match self {
            Reduced::Scalar(v) => Some(*v),
            Reduced::Tensor(_) => None,
        }
    }

    pub fn tensor(&self) -> Option<&Tensor> {
        match self {
            Reduced::Tensor(t) => Some(t),
            Reduced::Scalar(_) => None,
        }
    }
}

/// Storage index of the first element of each reduced lane, in output order.
pub(crate) fn lane_starts(t: &Tensor, dim: usize) -> Result<Tensor> {
    let mut sizes = t.sizes().to_vec();
    sizes[dim] = 1;
    Tensor::from_parts(t.storage().clone(), t.storage_offset(), &sizes, t.strides())
}

pub fn reduce(op: ReduceOp, t: &Tensor, dim: Option<usize>) -> Result<Reduced> {
    let geometry = ReduceGeometry::from_tensor(t, dim)?;
    let storage = t.storage();
    match geometry.dim {
        None => Ok(Reduced::Scalar(
            t.storage_indices()
                .fold(op.identity(), |acc, i| op.combine(acc, storage.get(i))),
        )),
        Some(d) => {
            let (len, stride) = (t.sizes()[d], t.strides()[d]);
            let lanes = lane_starts(t, d)?;
            let values: Vec<f32> = lanes
                .storage_indices()
                .map(|start| (0..len).fold(op.identity(), |acc, r| op.combine(acc, storage.get(start + r * stride))))
                .collect();
            Ok(Reduced::Tensor(Tensor::from_vec(lanes.sizes(), values)?))
        }
    }
}

/// Max or min along `dim` together with the position of the winner along
/// that dimension. Ties resolve to the lowest index.
pub fn reduce_indexed(op: ReduceOp, t: &Tensor, dim: usize) -> Result<(Tensor, Vec<usize>)> {
    if op == ReduceOp::Sum {
        return Err(Error::Unsupported("indexed sum".into()));
    }
    ReduceGeometry::from_tensor(t, Some(dim))?;
    let (len, stride) = (t.sizes()[dim], t.strides()[dim]);
    let storage = t.storage();
    let lanes = lane_starts(t, dim)?;
    let mut values = Vec::with_capacity(lanes.numel());
    let mut indices = Vec::with_capacity(lanes.numel());
    for start in lanes.storage_indices() {
        let mut best = storage.get(start);
        let mut best_at = 0;
        for r in 1..len {
            let v = storage.get(start + r * stride);
            let better = match op {
                ReduceOp::Max => v > best || (best.is_nan() && !v.is_nan()),
                _ => v < best || (best.is_nan() && !v.is_nan()),
            };
            if better {
                best = v;
                best_at = r;
            }
        }
        values.push(best);
        indices.push(best_at);
    }
    Ok((Tensor::from_vec(lanes.sizes(), values)?, indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(sizes: &[usize], data: &[f32]) -> Tensor {
        Tensor::from_vec(sizes, data.to_vec()).unwrap()
    }

    #[test]
    fn apply_examples() {
        let x = t(&[3], &[1.0, 2.0, 3.0]);
        apply(&ApplySpec::new(1, "x = x * 2").unwrap(), &[&x], 0.0).unwrap();
        assert_eq!(x.to_vec(), vec![2.0, 4.0, 6.0]);

        let x = Tensor::zeros(&[2, 5]).unwrap();
        apply(&ApplySpec::new(1, "x = s").unwrap(), &[&x], 0.5).unwrap();
        assert_eq!(x.to_vec(), vec![0.5; 10]);
    }

    #[test]
    fn apply_through_offset_views() {
        let base = t(&[3, 4], &(0..12).map(|v| v as f32).collect::<Vec<_>>());
        let y = base.narrow(1, 1, 2).unwrap().narrow(0, 1, 2).unwrap();
        let x = Tensor::zeros(&[2, 2]).unwrap();
        apply(&ApplySpec::new(2, "x = x + y").unwrap(), &[&x, &y], 0.0).unwrap();
        assert_eq!(x.to_vec(), vec![5.0, 6.0, 9.0, 10.0]);

        // Strided destination leaves its neighbours alone.
        let dst = base.narrow(1, 0, 1).unwrap();
        apply(&ApplySpec::new(1, "x = -1").unwrap(), &[&dst], 0.0).unwrap();
        assert_eq!(base.to_vec()[..5], [-1.0, 1.0, 2.0, 3.0, -1.0]);
    }

    #[test]
    fn apply_validates_operands() {
        let a = Tensor::zeros(&[2]).unwrap();
        let b = Tensor::zeros(&[3]).unwrap();
        let spec = ApplySpec::new(2, "x = y").unwrap();
        assert!(apply(&spec, &[&a, &b], 0.0).is_err());
        assert!(apply(&spec, &[&a], 0.0).is_err());
    }

    #[test]
    fn reduce_examples() {
        let series = t(&[1000], &(1..=1000).map(|v| v as f32).collect::<Vec<_>>());
        assert_eq!(reduce(ReduceOp::Sum, &series, None).unwrap().scalar(), Some(500500.0));

        let m = t(&[2, 3], &[1.0, 5.0, 3.0, 9.0, 2.0, 2.0]);
        let r = reduce(ReduceOp::Max, &m, Some(1)).unwrap();
        let r = r.tensor().unwrap();
        assert_eq!(r.sizes(), &[2, 1]);
        assert_eq!(r.to_vec(), vec![5.0, 9.0]);

        let r = reduce(ReduceOp::Min, &m, Some(0)).unwrap();
        assert_eq!(r.tensor().unwrap().sizes(), &[1, 3]);
        assert_eq!(r.tensor().unwrap().to_vec(), vec![1.0, 2.0, 2.0]);

        let same = t(&[4], &[2.5; 4]);
        assert_eq!(reduce(ReduceOp::Max, &same, None).unwrap().scalar(), Some(2.5));
        assert!(reduce(ReduceOp::Sum, &m, Some(2)).is_err());
    }

    #[test]
    fn indexed_ties_pick_lowest() {
        let m = t(&[2, 4], &[1.0, 7.0, 7.0, 0.0, 3.0, 3.0, 3.0, 3.0]);
        let (v, i) = reduce_indexed(ReduceOp::Max, &m, 1).unwrap();
        assert_eq!(v.to_vec(), vec![7.0, 3.0]);
        assert_eq!(i, vec![1, 0]);
        let (_, i) = reduce_indexed(ReduceOp::Min, &m, 1).unwrap();
        assert_eq!(i, vec![3, 0]);
        assert!(reduce_indexed(ReduceOp::Sum, &m, 1).is_err());
    }
}
