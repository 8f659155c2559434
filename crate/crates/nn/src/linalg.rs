//! Strided matrix views over flat buffers and a checked GEMM entry point.

use crate::real::Real;

/// Read-only `rows x cols` window into a flat buffer.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T> {
    pub data: &'a [T],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

pub(crate) struct ViewMut<'a, T> {
    pub data: &'a mut [T],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

fn last_index(offset: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    offset + (rows.max(1) - 1) * rs + (cols.max(1) - 1) * cs
}

impl<'a, T> View<'a, T> {
    /// Dense row-major matrix.
    pub fn rm(data: &'a [T], rows: usize, cols: usize) -> Self {
        View {
            data,
            offset: 0,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    /// Transposed view of a dense row-major `rows x cols` matrix.
    pub fn rm_t(data: &'a [T], rows: usize, cols: usize) -> Self {
        View {
            data,
            offset: 0,
            rows: cols,
            cols: rows,
            rs: 1,
            cs: cols,
        }
    }

    pub fn t(self) -> Self {
        View {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }
}

impl<'a, T> ViewMut<'a, T> {
    pub fn rm(data: &'a mut [T], rows: usize, cols: usize) -> Self {
        ViewMut {
            data,
            offset: 0,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }
}

/// `c = alpha * a b + beta * c`.
pub(crate) fn gemm<T: Real>(alpha: T, a: View<'_, T>, b: View<'_, T>, beta: T, c: ViewMut<'_, T>) {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert_eq!(a.rows, c.rows, "output rows");
    assert_eq!(b.cols, c.cols, "output cols");
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    assert!(last_index(a.offset, a.rows, a.cols, a.rs, a.cs) < a.data.len() || a.cols == 0);
    assert!(last_index(b.offset, b.rows, b.cols, b.rs, b.cs) < b.data.len() || b.rows == 0);
    assert!(last_index(c.offset, c.rows, c.cols, c.rs, c.cs) < c.data.len());
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        T::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

/// Dense `a (m x k) * b (k x n)`.
pub(crate) fn matmul<T: Real>(a: &[T], m: usize, k: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    gemm(
        T::one(),
        View::rm(a, m, k),
        View::rm(b, k, n),
        T::zero(),
        ViewMut::rm(&mut out, m, n),
    );
    out
}

/// `a (m x k) * b^T` where `b` is dense `n x k`.
pub(crate) fn matmul_nt<T: Real>(a: &[T], m: usize, k: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    gemm(
        T::one(),
        View::rm(a, m, k),
        View::rm_t(b, n, k),
        T::zero(),
        ViewMut::rm(&mut out, m, n),
    );
    out
}

/// `out += a^T b` with `a` dense `m x k` and `b` dense `m x n`.
pub(crate) fn matmul_tn_acc<T: Real>(
    a: &[T],
    m: usize,
    k: usize,
    b: &[T],
    n: usize,
    out: &mut [T],
) {
    gemm(
        T::one(),
        View::rm_t(a, m, k),
        View::rm(b, m, n),
        T::one(),
        ViewMut::rm(out, k, n),
    );
}

const LANES: usize = 8;

/// Sum with independent partial accumulators, so the loop is not bound by
/// add latency and can be vectorised.
#[inline(always)]
pub(crate) fn sum<T: Real>(xs: &[T]) -> T {
    let mut acc = [T::zero(); LANES];
    let chunks = xs.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for i in 0..LANES {
            acc[i] = acc[i] + c[i];
        }
    }
    tail.iter().fold(acc.iter().fold(T::zero(), |a, &b| a + b), |a, &b| a + b)
}

#[inline(always)]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail = ca.remainder().iter().zip(cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    tail.fold(acc.iter().fold(T::zero(), |s, &v| s + v), |s, (&x, &y)| s + x * y)
}

#[inline(always)]
pub(crate) fn max<T: Real>(xs: &[T]) -> T {
    let mut acc = [T::neg_infinity(); LANES];
    let chunks = xs.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for i in 0..LANES {
            acc[i] = if c[i] > acc[i] { c[i] } else { acc[i] };
        }
    }
    tail.iter()
        .chain(&acc)
        .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m })
}
