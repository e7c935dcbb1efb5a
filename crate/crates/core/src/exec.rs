//! Row-block execution. Every kernel runs row-independent work in blocks of
//! [`ROW_BLOCK`] rows and collects per-row results in row order, so the
//! output is identical whatever the number of threads.

use serde::{Deserialize, Serialize};

pub const ROW_BLOCK: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    /// Rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Runs `f` inside a pool of `threads` workers, or the global pool for `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool");
        return pool.install(f);
    }
    let _ = threads;
    f()
}

/// Calls `f(scratch, row, row_slice)` for each of `n_rows` rows of `buf`
/// (row-major, `row_len` wide). Scratch state is created once per block.
pub fn rows_mut<T, S, R, I, F>(
    par: Parallelism,
    buf: &mut [T],
    n_rows: usize,
    row_len: usize,
    init: I,
    f: F,
) -> Vec<R>
where
    T: Send,
    R: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [T]) -> R + Sync,
{
    assert_eq!(buf.len(), n_rows * row_len, "buffer shape");
    if row_len == 0 {
        return map_rows(par, n_rows, init, |s, r| f(s, r, &mut []));
    }
    let block = |(bi, chunk): (usize, &mut [T])| -> Vec<R> {
        let mut s = init();
        chunk
            .chunks_mut(row_len)
            .enumerate()
            .map(|(i, row)| f(&mut s, bi * ROW_BLOCK + i, row))
            .collect()
    };
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        let parts: Vec<Vec<R>> = buf.par_chunks_mut(ROW_BLOCK * row_len).enumerate().map(block).collect();
        return parts.into_iter().flatten().collect();
    }
    let _ = par;
    buf.chunks_mut(ROW_BLOCK * row_len).enumerate().flat_map(block).collect()
}

/// Calls `f(scratch, row)` for rows `0..n_rows`, results in row order.
pub fn map_rows<S, R, I, F>(par: Parallelism, n_rows: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> R + Sync,
{
    let n_blocks = n_rows.div_ceil(ROW_BLOCK);
    let block = |bi: usize| -> Vec<R> {
        let mut s = init();
        (bi * ROW_BLOCK..((bi + 1) * ROW_BLOCK).min(n_rows)).map(|r| f(&mut s, r)).collect()
    };
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        let parts: Vec<Vec<R>> = (0..n_blocks).into_par_iter().map(block).collect();
        return parts.into_iter().flatten().collect();
    }
    let _ = par;
    (0..n_blocks).flat_map(block).collect()
}
