//! Seeded subsampling whose smaller samples nest inside larger ones.

use alloc::vec::Vec;

use crate::text::fnv1a;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Indices of a size-`k` sample of `ids`, returned in input order.
///
/// Each item gets a seeded pseudo-random priority derived from its id and the
/// `k` lowest priorities win (reservoir sampling by random keys). For a fixed
/// seed the size-`k` sample is a subset of every larger sample.
pub fn nested_sample<S: AsRef<str>>(ids: &[S], k: usize, seed: u64) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (mix(fnv1a(id.as_ref().as_bytes()) ^ mix(seed)), i))
        .collect();
    keyed.sort_unstable();
    let mut picked: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    #[test]
    fn nesting_and_sizes() {
        let ids: Vec<String> = (0..2000).map(|i| alloc::format!("q{i}")).collect();
        let s100 = nested_sample(&ids, 100, 42);
        let s1000 = nested_sample(&ids, 1000, 42);
        assert_eq!(s100.len(), 100);
        assert_eq!(s1000.len(), 1000);
        assert!(s100.iter().all(|i| s1000.binary_search(i).is_ok()));
        assert_ne!(nested_sample(&ids, 100, 43), s100);
        assert_eq!(nested_sample(&ids, 5000, 42).len(), 2000);
    }
}
