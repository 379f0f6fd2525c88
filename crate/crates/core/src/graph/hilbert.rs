//! Hilbert space-filling curve over the adjacency matrix.
//!
//! Convention: the grid side is the smallest power of two `>= n`, the source
//! id is the x coordinate and the destination id is the y coordinate. The
//! first-order curve starts in the lower-left cell and visits
//! `(0,0) -> (1,0) -> (1,1) -> (0,1)`; higher orders are the usual recursive
//! refinement of that shape.

/// Number of bits per coordinate needed to address a grid with `n` rows.
pub fn grid_order(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Position of cell `(x, y)` along the curve of the given order.
///
/// With `order <= 32` the index always fits in a `u64`.
#[inline]
pub fn hilbert_index(x: u32, y: u32, order: u32) -> u64 {
    debug_assert!(order <= 32);
    // The textbook recurrence walks (0,0),(0,1),(1,1),(1,0) for its first
    // coordinate; feeding it the transposed cell yields our convention.
    let (mut a, mut b) = (y as u64, x as u64);
    let mut d = 0u64;
    let mut s = if order == 0 { 0 } else { 1u64 << (order - 1) };
    while s > 0 {
        let ra = u64::from(a & s != 0);
        let rb = u64::from(b & s != 0);
        d += s * s * ((3 * ra) ^ rb);
        if rb == 0 {
            if ra == 1 {
                a ^= s - 1;
                b ^= s - 1;
            }
            std::mem::swap(&mut a, &mut b);
        }
        s >>= 1;
    }
    d
}

/// Inverse of [`hilbert_index`].
pub fn hilbert_cell(index: u64, order: u32) -> (u32, u32) {
    let (mut a, mut b) = (0u64, 0u64);
    let mut t = index;
    let mut s = 1u64;
    let side = if order == 0 { 1 } else { 1u64 << order };
    while s < side {
        let ra = 1 & (t / 2);
        let rb = 1 & (t ^ ra);
        if rb == 0 {
            if ra == 1 {
                a = s - 1 - a;
                b = s - 1 - b;
            }
            std::mem::swap(&mut a, &mut b);
        }
        a += s * ra;
        b += s * rb;
        t /= 4;
        s <<= 1;
    }
    (b as u32, a as u32)
}
