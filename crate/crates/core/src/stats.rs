//! Per-thread exact-arithmetic statistics (peak coordinate size).

use std::cell::Cell;

use crate::geometry::ProjectiveTuplePoint;

thread_local! {
    static PEAK_COORD_BITS: Cell<u64> = const { Cell::new(0) };
    static POINTS_EVALUATED: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn record_point(p: &ProjectiveTuplePoint) {
    let bits = p.max_coord_bits();
    PEAK_COORD_BITS.with(|c| c.set(c.get().max(bits)));
    POINTS_EVALUATED.with(|c| c.set(c.get() + 1));
}

/// Largest coordinate bit length produced by any evaluation on this thread since the last reset.
pub fn peak_coord_bits() -> u64 {
    PEAK_COORD_BITS.with(|c| c.get())
}

pub fn points_evaluated() -> u64 {
    POINTS_EVALUATED.with(|c| c.get())
}

pub fn reset() {
    PEAK_COORD_BITS.with(|c| c.set(0));
    POINTS_EVALUATED.with(|c| c.set(0));
}
