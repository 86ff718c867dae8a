//! Element type abstraction for model storage.
//!
//! Training normally runs in `f32`, the type the vector file formats store.
//! The numerical tests additionally instantiate every kernel with `f64` so
//! that algorithmic differences can be separated from rounding noise - e.g.
//! bit-equality between the scalar and minibatched trainers holds exactly in
//! `f64` for the cases where the algorithms coincide.
//!
//! Model cells are plain atomics accessed with `Relaxed` ordering. That is
//! the lock-free training contract: concurrent threads may interleave their
//! read-modify-write cycles arbitrarily (lost updates are accepted), but each
//! individual load or store is atomic at element granularity, so a reader
//! never observes a torn value. On x86-64 these compile to ordinary moves.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

/// Floating-point element type usable for model storage and training math.
pub trait Scalar:
    num_traits::Float + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    /// Atomic cell holding this type's bit pattern.
    type Cell: Send + Sync;

    fn new_cell(v: Self) -> Self::Cell;
    fn load(cell: &Self::Cell) -> Self;
    fn store(cell: &Self::Cell, v: Self);

    /// Lossy conversion from `f64` (exact for `f64`, rounded for `f32`).
    #[inline]
    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).unwrap()
    }

    /// Value as `f64` for reporting and cross-type comparisons.
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }

    /// Value rounded to `f32` for serialization.
    #[inline]
    fn as_f32(self) -> f32 {
        num_traits::ToPrimitive::to_f32(&self).unwrap()
    }
}

impl Scalar for f32 {
    type Cell = AtomicU32;

    #[inline]
    fn new_cell(v: f32) -> AtomicU32 {
        AtomicU32::new(v.to_bits())
    }

    #[inline]
    fn load(cell: &AtomicU32) -> f32 {
        f32::from_bits(cell.load(Ordering::Relaxed))
    }

    #[inline]
    fn store(cell: &AtomicU32, v: f32) {
        cell.store(v.to_bits(), Ordering::Relaxed);
    }
}

impl Scalar for f64 {
    type Cell = AtomicU64;

    #[inline]
    fn new_cell(v: f64) -> AtomicU64 {
        AtomicU64::new(v.to_bits())
    }

    #[inline]
    fn load(cell: &AtomicU64) -> f64 {
        f64::from_bits(cell.load(Ordering::Relaxed))
    }

    #[inline]
    fn store(cell: &AtomicU64, v: f64) {
        cell.store(v.to_bits(), Ordering::Relaxed);
    }
}
