//! Replica-parallel execution with scheduling-independent results.
//!
//! Replicas are cut into fixed-size chunks whose boundaries depend only on the
//! replica count. Each chunk is folded sequentially, chunk results are
//! collected in index order and combined left to right, so floating-point
//! reductions are identical for any rayon pool size.

use rayon::prelude::*;

/// Replicas per chunk.
pub const CHUNK: u64 = 512;

/// Fold replicas `0..n` chunk by chunk and combine the chunk accumulators in
/// order.
pub fn fold_replicas<A, I, F, C>(n: u64, init: I, fold: F, mut combine: C) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    C: FnMut(&mut A, A),
{
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let end = ((c + 1) * CHUNK).min(n);
            for r in c * CHUNK..end {
                fold(&mut acc, r);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in parts {
        combine(&mut total, part);
    }
    total
}

/// Map every replica index, preserving order.
pub fn map_replicas<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Same as [`map_replicas`] for fallible closures; the first error in replica
/// order wins.
pub fn try_map_replicas<T, E, F>(n: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    map_replicas(n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_pool_size_independent() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                fold_replicas(
                    5_000,
                    || 0.0f64,
                    |acc, r| *acc += (r as f64).sqrt().sin(),
                    |a, b| *a += b,
                )
            })
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }

    #[test]
    fn try_map_reports_first_error() {
        let out: Result<Vec<u64>, u64> =
            try_map_replicas(100, |r| if r % 40 == 39 { Err(r) } else { Ok(r) });
        assert_eq!(out, Err(39));
    }
}
