//! Strided tensors over shared flat storage.
//!
//! Device buffers cannot carry an implicit offset, so a view into the middle
//! of a buffer is expressed as `(storage, storage_offset, sizes, strides)`
//! rather than as a shifted pointer. Every kernel generator and backend in
//! this crate consumes that quadruple directly.

use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::{Error, Result};

/// Maximum tensor rank.
pub const MAX_DIMS: usize = 8;

/// Flat, shared, 32-bit float storage.
///
/// Cloning a `Storage` clones the handle, not the data: all clones observe
/// each other's writes. Elements are kept as raw bits in relaxed atomics,
/// which makes the type `Send + Sync`; callers are still responsible for
/// ordering writes that touch the same elements.
#[derive(Clone)]
pub struct Storage {
    cells: Arc<[AtomicU32]>,
}

impl Storage {
    /// Allocates `len` zero-initialized elements, reporting allocation failure
    /// instead of aborting.
    pub fn zeros(len: usize) -> Result<Self> {
        let mut cells = Vec::new();
        cells.try_reserve_exact(len).map_err(|_| Error::Alloc(len))?;
        cells.extend((0..len).map(|_| AtomicU32::new(0)));
        Ok(Self { cells: cells.into() })
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        let cells: Vec<AtomicU32> = data.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        Self { cells: cells.into() }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> f32 {
        f32::from_bits(self.cells[index].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, index: usize, value: f32) {
        self.cells[index].store(value.to_bits(), Ordering::Relaxed);
    }

    /// True when both handles refer to the same allocation.
    pub fn same(&self, other: &Storage) -> bool {
        Arc::ptr_eq(&self.cells, &other.cells)
    }

    pub fn to_vec(&self) -> Vec<f32> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Writes `data` starting at element `start`.
    pub fn write_slice(&self, start: usize, data: &[f32]) {
        for (cell, v) in self.cells[start..start + data.len()].iter().zip(data) {
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    /// Reads `out.len()` elements starting at element `start`.
    pub fn read_slice(&self, start: usize, out: &mut [f32]) {
        for (cell, v) in self.cells[start..start + out.len()].iter().zip(out.iter_mut()) {
            *v = f32::from_bits(cell.load(Ordering::Relaxed));
        }
    }
}

impl fmt::Debug for Storage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Storage").field("len", &self.len()).finish()
    }
}

/// Row-major strides for `sizes`.
pub fn contiguous_strides(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; sizes.len()];
    for d in (0..sizes.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * sizes[d + 1];
    }
    strides
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Shape("empty size list".into()));
    }
    if sizes.len() > MAX_DIMS {
        return Err(Error::Shape(format!(
            "{} dimensions exceeds the maximum of {MAX_DIMS}",
            sizes.len()
        )));
    }
    if let Some(d) = sizes.iter().position(|&s| s < 1) {
        return Err(Error::Shape(format!("size of dimension {d} must be at least 1")));
    }
    Ok(())
}

/// A strided view over a [`Storage`].
#[derive(Clone)]
pub struct Tensor {
    storage: Storage,
    offset: usize,
    sizes: Vec<usize>,
    strides: Vec<usize>,
}

impl Tensor {
    /// Fresh zero-filled contiguous tensor.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        let numel = sizes.iter().product();
        Ok(Self {
            storage: Storage::zeros(numel)?,
            offset: 0,
            sizes: sizes.to_vec(),
            strides: contiguous_strides(sizes),
        })
    }

    /// Fresh contiguous tensor holding `data` in row-major order.
    pub fn from_vec(sizes: &[usize], data: Vec<f32>) -> Result<Self> {
        check_sizes(sizes)?;
        let numel: usize = sizes.iter().product();
        if data.len() != numel {
            return Err(Error::SizeMismatch(format!(
                "{} values for {numel} elements",
                data.len()
            )));
        }
        Ok(Self {
            storage: Storage::from_vec(data),
            offset: 0,
            sizes: sizes.to_vec(),
            strides: contiguous_strides(sizes),
        })
    }

    /// Builds a view from raw parts, checking that every reachable element
    /// lies inside the storage.
    pub fn from_parts(
        storage: Storage,
        storage_offset: usize,
        sizes: &[usize],
        strides: &[usize],
    ) -> Result<Self> {
        check_sizes(sizes)?;
        if strides.len() != sizes.len() {
            return Err(Error::Shape(format!(
                "{} strides for {} dimensions",
                strides.len(),
                sizes.len()
            )));
        }
        let reach: usize = sizes.iter().zip(strides).map(|(s, st)| (s - 1) * st).sum();
        if storage_offset + reach >= storage.len() {
            return Err(Error::OutOfRange(format!(
                "view reaches element {} of a storage of length {}",
                storage_offset + reach,
                storage.len()
            )));
        }
        Ok(Self {
            storage,
            offset: storage_offset,
            sizes: sizes.to_vec(),
            strides: strides.to_vec(),
        })
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn storage_offset(&self) -> usize {
        self.offset
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn rank(&self) -> usize {
        self.sizes.len()
    }

    pub fn numel(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Largest storage index reachable from the offset.
    pub fn max_reach(&self) -> usize {
        self.sizes.iter().zip(&self.strides).map(|(s, st)| (s - 1) * st).sum()
    }

    /// A view restricted to `[start, start + length)` along `dim`. Shares storage.
    pub fn narrow(&self, dim: usize, start: usize, length: usize) -> Result<Tensor> {
        if dim >= self.rank() {
            return Err(Error::OutOfRange(format!(
                "dimension {dim} of a rank-{} tensor",
                self.rank()
            )));
        }
        if length < 1 || start + length > self.sizes[dim] {
            return Err(Error::OutOfRange(format!(
                "narrow [{start}, {}) of dimension {dim} with size {}",
                start + length,
                self.sizes[dim]
            )));
        }
        let mut sizes = self.sizes.clone();
        sizes[dim] = length;
        Ok(Tensor {
            storage: self.storage.clone(),
            offset: self.offset + start * self.strides[dim],
            sizes,
            strides: self.strides.clone(),
        })
    }

    pub fn is_contiguous(&self) -> bool {
        // Size-1 dimensions can carry any stride without changing the layout.
        let mut expected = 1;
        for d in (0..self.rank()).rev() {
            if self.sizes[d] != 1 && self.strides[d] != expected {
                return false;
            }
            expected *= self.sizes[d];
        }
        true
    }

    /// Reinterprets a contiguous tensor with new sizes of the same element count.
    pub fn view(&self, sizes: &[usize]) -> Result<Tensor> {
        check_sizes(sizes)?;
        if !self.is_contiguous() {
            return Err(Error::Shape("view of a non-contiguous tensor".into()));
        }
        let numel: usize = sizes.iter().product();
        if numel != self.numel() {
            return Err(Error::SizeMismatch(format!(
                "view of {} elements as {numel}",
                self.numel()
            )));
        }
        Ok(Tensor {
            storage: self.storage.clone(),
            offset: self.offset,
            sizes: sizes.to_vec(),
            strides: contiguous_strides(sizes),
        })
    }

    fn linear_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.rank() {
            return Err(Error::OutOfRange(format!(
                "{}-d index into a rank-{} tensor",
                index.len(),
                self.rank()
            )));
        }
        let mut at = self.offset;
        for (d, (&i, (&size, &stride))) in index.iter().zip(self.sizes.iter().zip(&self.strides)).enumerate() {
            if i >= size {
                return Err(Error::OutOfRange(format!("index {i} in dimension {d} of size {size}")));
            }
            at += i * stride;
        }
        Ok(at)
    }

    pub fn get(&self, index: &[usize]) -> Result<f32> {
        Ok(self.storage.get(self.linear_index(index)?))
    }

    pub fn set(&self, index: &[usize], value: f32) -> Result<()> {
        self.storage.set(self.linear_index(index)?, value);
        Ok(())
    }

    /// Storage indices of every element, in logical row-major order.
    pub fn storage_indices(&self) -> StorageIndices<'_> {
        StorageIndices {
            sizes: &self.sizes,
            strides: &self.strides,
            coord: [0; MAX_DIMS],
            next: Some(self.offset),
        }
    }

    /// Elements in logical row-major order.
    pub fn to_vec(&self) -> Vec<f32> {
        if self.is_contiguous() {
            let mut out = vec![0.0; self.numel()];
            self.storage.read_slice(self.offset, &mut out);
            return out;
        }
        self.storage_indices().map(|i| self.storage.get(i)).collect()
    }

    /// Writes `data` in logical row-major order.
    pub fn write_from(&self, data: &[f32]) -> Result<()> {
        if data.len() != self.numel() {
            return Err(Error::SizeMismatch(format!(
                "{} values for {} elements",
                data.len(),
                self.numel()
            )));
        }
        if self.is_contiguous() {
            self.storage.write_slice(self.offset, data);
        } else {
            for (i, &v) in self.storage_indices().zip(data) {
                self.storage.set(i, v);
            }
        }
        Ok(())
    }

    pub fn fill(&self, value: f32) {
        for i in self.storage_indices() {
            self.storage.set(i, value);
        }
    }

    /// This tensor if already contiguous, otherwise a packed copy.
    pub fn contiguous(&self) -> Result<Tensor> {
        if self.is_contiguous() {
            return Ok(self.clone());
        }
        let out = Tensor::zeros(&self.sizes)?;
        out.copy_from(self)?;
        Ok(out)
    }

    /// Element-wise copy of `src` into this view, both traversed in logical order.
    ///
    /// Copying between views that share any storage element is rejected.
    pub fn copy_from(&self, src: &Tensor) -> Result<()> {
        if self.sizes != src.sizes {
            return Err(Error::SizeMismatch(format!(
                "copy from {:?} into {:?}",
                src.sizes, self.sizes
            )));
        }
        if self.overlaps(src) {
            return Err(Error::Overlap("source and destination share elements".into()));
        }
        if self.is_contiguous() && src.is_contiguous() {
            let mut buf = vec![0.0; self.numel()];
            src.storage.read_slice(src.offset, &mut buf);
            self.storage.write_slice(self.offset, &buf);
            return Ok(());
        }
        for (d, s) in self.storage_indices().zip(src.storage_indices()) {
            self.storage.set(d, src.storage.get(s));
        }
        Ok(())
    }

    /// True when the two views touch at least one common storage element.
    pub fn overlaps(&self, other: &Tensor) -> bool {
        if !self.storage.same(&other.storage) {
            return false;
        }
        let (a_lo, a_hi) = (self.offset, self.offset + self.max_reach());
        let (b_lo, b_hi) = (other.offset, other.offset + other.max_reach());
        if a_hi < b_lo || b_hi < a_lo {
            return false;
        }
        let mut mine: Vec<usize> = self.storage_indices().collect();
        mine.sort_unstable();
        other.storage_indices().any(|i| mine.binary_search(&i).is_ok())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("sizes", &self.sizes)
            .field("strides", &self.strides)
            .field("storage_offset", &self.offset)
            .finish()
    }
}

/// Iterator over the storage indices of a tensor in logical order.
pub struct StorageIndices<'a> {
    sizes: &'a [usize],
    strides: &'a [usize],
    coord: [usize; MAX_DIMS],
    next: Option<usize>,
}

impl Iterator for StorageIndices<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let current = self.next?;
        let mut at = current;
        let mut d = self.sizes.len();
        loop {
            if d == 0 {
                self.next = None;
                break;
            }
            d -= 1;
            self.coord[d] += 1;
            at += self.strides[d];
            if self.coord[d] < self.sizes[d] {
                self.next = Some(at);
                break;
            }
            at -= self.coord[d] * self.strides[d];
            self.coord[d] = 0;
        }
        Some(current)
    }
}
