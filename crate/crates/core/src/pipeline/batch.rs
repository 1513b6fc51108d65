use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchOrder {
    /// Seeded permutation, then chunk.
    Shuffled,
    /// Chunk in the given order.
    Sequential,
}

/// Chunks `indices` into batches of `batch_size`; the last batch may be short.
/// Panics if `batch_size == 0`.
pub fn make_batches(indices: &[usize], batch_size: usize, order: BatchOrder, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut ids = indices.to_vec();
    if order == BatchOrder::Shuffled {
        Rng::new(seed).shuffle(&mut ids);
    }
    ids.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
