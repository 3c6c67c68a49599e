//! Per-row mutable state shared across workers without locks.

use std::cell::UnsafeCell;

/// A vector whose elements are mutated concurrently under a single-writer-
/// per-element discipline: during a parallel phase each element belongs to
/// exactly one task and only the worker executing that task touches it.
/// The engine guarantees tasks never overlap, so aliasing mutable access
/// cannot occur. Outside parallel phases, access goes through `&mut self`
/// and is checked by the borrow checker as usual.
///
/// Elements live in `UnsafeCell`s so per-element mutable references are
/// formed without ever creating a mutable reference to the container.
pub struct RowShards<T> {
    cells: Vec<UnsafeCell<T>>,
}

// Safety: disjoint elements are handed out to different threads; the
// container itself is never resized while shared.
unsafe impl<T: Send> Sync for RowShards<T> {}
unsafe impl<T: Send> Send for RowShards<T> {}

impl<T> RowShards<T> {
    pub fn new(values: Vec<T>) -> Self {
        RowShards {
            cells: values.into_iter().map(UnsafeCell::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mutable access to element `i`.
    ///
    /// # Safety
    /// The caller must be the unique accessor of element `i` for the
    /// duration of the borrow; the engine upholds this by giving every row
    /// to exactly one task per phase.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn row_mut(&self, i: usize) -> &mut T {
        &mut *self.cells[i].get()
    }

    /// Shared access to element `i` under the same uniqueness contract.
    ///
    /// # Safety
    /// No other thread may hold a mutable borrow of element `i`.
    pub unsafe fn row_ref(&self, i: usize) -> &T {
        &*self.cells[i].get()
    }

    /// Mutable access to the elements `[offset, offset + len)`, for flat
    /// per-row blocks (lower-bound rows, membership rows).
    ///
    /// # Safety
    /// As for [`RowShards::row_mut`]: the range must belong to the caller's
    /// task exclusively.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn range_mut(&self, offset: usize, len: usize) -> &mut [T] {
        assert!(offset + len <= self.cells.len());
        // UnsafeCell<T> is repr(transparent) over T.
        std::slice::from_raw_parts_mut(self.cells.as_ptr().add(offset) as *mut T, len)
    }

    /// Exclusive full view; use between parallel phases.
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        unsafe { std::slice::from_raw_parts_mut(self.cells.as_mut_ptr() as *mut T, self.cells.len()) }
    }

    /// Shared full view; takes `&mut self` so the borrow checker proves no
    /// worker still holds a shard.
    pub fn as_slice(&mut self) -> &[T] {
        unsafe { std::slice::from_raw_parts(self.cells.as_ptr() as *const T, self.cells.len()) }
    }

    pub fn into_inner(self) -> Vec<T> {
        self.cells.into_iter().map(UnsafeCell::into_inner).collect()
    }
}

impl<T: Clone> RowShards<T> {
    pub fn to_vec(&mut self) -> Vec<T> {
        self.as_slice().to_vec()
    }
}
