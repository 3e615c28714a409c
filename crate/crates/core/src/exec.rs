//! Deterministic block-parallel execution.
//!
//! Work is cut into fixed blocks independent of thread count; each block is
//! computed on its own (seeded by the block index when randomness is
//! involved), results are collected in block order and folded sequentially.
//! The `parallel` feature only changes who computes the blocks, never the
//! fold order, so parallel and sequential runs are byte-identical.

/// splitmix64 step: derives per-block seeds from a campaign seed.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Sequential block map, always available (the fallback path).
pub fn map_blocks_seq<T, F>(n_blocks: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync,
    T: Send,
{
    (0..n_blocks).map(f).collect()
}

/// Parallel block map over rayon; ordered collect keeps determinism.
#[cfg(feature = "parallel")]
pub fn map_blocks_par<T, F>(n_blocks: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
    T: Send,
{
    use rayon::prelude::*;
    (0..n_blocks).into_par_iter().map(f).collect()
}

/// Dispatching block map: parallel when the feature is on.
#[cfg(feature = "parallel")]
pub fn map_blocks<T, F>(n_blocks: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
    T: Send,
{
    map_blocks_par(n_blocks, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map_blocks<T, F>(n_blocks: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
    T: Send,
{
    map_blocks_seq(n_blocks, f)
}
