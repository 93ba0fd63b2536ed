//! Lexicographic enumeration of `k`-subsets with ranking support.
//!
//! The tiling scan walks all `k`-subsets of the effective generator
//! indices. Unranking lets callers split the range `0..C(m,k)` into chunks
//! and process them independently (and in parallel) while keeping a single
//! global lexicographic order.

use alloc::vec::Vec;

/// `C(m, k)` if it does not exceed `cap`, else `None`. Overflow-safe.
pub fn binomial_capped(m: u64, k: u64, cap: u64) -> Option<u64> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: C(m, i+1) = C(m, i) * (m - i) / (i + 1)
        acc = acc * (m - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `C(m, k)`, panicking if the value exceeds `u64`.
pub fn binomial(m: u64, k: u64) -> u64 {
    binomial_capped(m, k, u64::MAX).expect("binomial overflow")
}

/// Write the `rank`-th `k`-subset of `{0, …, m-1}` (lexicographic order)
/// into `out`.
pub fn unrank_combination(m: usize, k: usize, mut rank: u64, out: &mut Vec<usize>) {
    out.clear();
    let mut next = 0usize;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut v = next;
        loop {
            let block = binomial((m - 1 - v) as u64, remaining as u64);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    debug_assert_eq!(rank, 0, "rank exceeds the number of combinations");
}

/// Advance `comb` to the next `k`-subset of `{0, …, m-1}` in lexicographic
/// order. Returns `false` when `comb` was the last subset.
pub fn next_combination(m: usize, comb: &mut [usize]) -> bool {
    let k = comb.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < m - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(40, 10), 847_660_528);
        assert_eq!(binomial_capped(40, 10, 10_000_000), None);
        assert_eq!(binomial_capped(36, 6, 10_000_000), Some(1_947_792));
        assert_eq!(binomial_capped(3, 5, 100), Some(0));
    }

    #[test]
    fn unrank_agrees_with_iteration() {
        let (m, k) = (7, 3);
        let total = binomial(m as u64, k as u64);
        let mut comb: Vec<usize> = (0..k).collect();
        let mut buf = Vec::new();
        for rank in 0..total {
            unrank_combination(m, k, rank, &mut buf);
            assert_eq!(buf, comb, "rank {rank}");
            let more = next_combination(m, &mut comb);
            assert_eq!(more, rank + 1 < total);
        }
    }

    #[test]
    fn empty_subset() {
        let mut buf = vec![];
        unrank_combination(5, 0, 0, &mut buf);
        assert!(buf.is_empty());
        let mut c: [usize; 0] = [];
        assert!(!next_combination(5, &mut c));
    }
}
