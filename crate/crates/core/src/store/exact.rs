use std::cmp::Ordering;

use super::rank_order;
use crate::model::dot;

/// Linear scan. Returns the true top-`k` (unsorted beyond selection).
pub(super) fn search<'a>(
    vectors: &[f32],
    dim: usize,
    q: &[f32],
    k: usize,
    id_of: impl Fn(usize) -> &'a str,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = vectors
        .chunks_exact(dim)
        .enumerate()
        .map(|(i, row)| (i, dot(row, q)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
        rank_order(a.1, id_of(a.0), b.1, id_of(b.0))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored
}
