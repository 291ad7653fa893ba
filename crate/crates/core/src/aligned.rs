//! Zero-initialised heap buffers whose first element sits on a 32-byte boundary.

use std::alloc::{self, Layout};
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::ptr::NonNull;

use crate::error::{Error, Result};

pub const ALIGN_BYTES: usize = 32;

/// Plain numeric element types that are valid when all bits are zero.
///
/// # Safety
/// Implementors must be `Copy`, have no padding and accept the all-zero bit
/// pattern as a valid value.
pub unsafe trait Zeroable: Copy + Send + Sync + 'static {}

unsafe impl Zeroable for u32 {}
unsafe impl Zeroable for f64 {}

pub struct AlignedVec<T: Zeroable> {
    ptr: NonNull<T>,
    len: usize,
}

// SAFETY: AlignedVec owns its allocation exclusively, like Vec<T>.
unsafe impl<T: Zeroable> Send for AlignedVec<T> {}
unsafe impl<T: Zeroable> Sync for AlignedVec<T> {}

impl<T: Zeroable> AlignedVec<T> {
    /// Allocates `len` zeroed elements, reporting allocation failure as an error.
    pub fn zeroed(len: usize) -> Result<Self> {
        if len == 0 || std::mem::size_of::<T>() == 0 {
            return Ok(Self {
                ptr: NonNull::dangling(),
                len: 0,
            });
        }
        let bytes = len
            .checked_mul(std::mem::size_of::<T>())
            .ok_or(Error::Allocation { bytes: usize::MAX })?;
        let layout = Self::layout(len).ok_or(Error::Allocation { bytes })?;
        // SAFETY: layout has non-zero size.
        let raw = unsafe { alloc::alloc_zeroed(layout) } as *mut T;
        let ptr = NonNull::new(raw).ok_or(Error::Allocation { bytes })?;
        Ok(Self { ptr, len })
    }

    fn layout(len: usize) -> Option<Layout> {
        let align = ALIGN_BYTES.max(std::mem::align_of::<T>());
        Layout::from_size_align(len.checked_mul(std::mem::size_of::<T>())?, align).ok()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[T] {
        // SAFETY: ptr is valid for len initialised elements (zeroed at allocation).
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.len) }
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        // SAFETY: as above, and &mut self guarantees exclusivity.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.len) }
    }

    pub fn try_clone(&self) -> Result<Self> {
        let mut out = Self::zeroed(self.len)?;
        out.as_mut_slice().copy_from_slice(self.as_slice());
        Ok(out)
    }
}

impl<T: Zeroable> Drop for AlignedVec<T> {
    fn drop(&mut self) {
        if self.len == 0 {
            return;
        }
        if let Some(layout) = Self::layout(self.len) {
            // SAFETY: allocated in `zeroed` with this exact layout.
            unsafe { alloc::dealloc(self.ptr.as_ptr() as *mut u8, layout) }
        }
    }
}

impl<T: Zeroable> Deref for AlignedVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        self.as_slice()
    }
}

impl<T: Zeroable> DerefMut for AlignedVec<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        self.as_mut_slice()
    }
}

impl<T: Zeroable> Clone for AlignedVec<T> {
    fn clone(&self) -> Self {
        self.try_clone()
            .expect("allocation failed while cloning aligned buffer")
    }
}

impl<T: Zeroable + fmt::Debug> fmt::Debug for AlignedVec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlignedVec").field("len", &self.len).finish()
    }
}

impl<T: Zeroable + PartialEq> PartialEq for AlignedVec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}
