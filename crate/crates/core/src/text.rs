//! Tokenization and hashing shared by retrieval, features and metrics.

use alloc::string::String;
use alloc::vec::Vec;

/// Lowercases and splits on runs of non-alphanumeric characters.
///
/// `"The CAT's hat."` becomes `["the", "cat", "s", "hat"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `core::hash`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Keeps at most `max_tokens` whitespace-separated tokens, re-joined by single spaces.
pub fn truncate_whitespace(text: &str, max_tokens: usize) -> String {
    let mut out = String::new();
    for (i, tok) in text.split_whitespace().take(max_tokens).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The CAT's hat."), vec!["the", "cat", "s", "hat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("COVID-19 spread"), vec!["covid", "19", "spread"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_whitespace("a  b\tc d", 3), "a b c");
        assert_eq!(truncate_whitespace("a b", 10), "a b");
    }
}
