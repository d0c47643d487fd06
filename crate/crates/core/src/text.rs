//! Tokenization and stable hashing helpers.

/// Lowercase, split on non-alphanumeric characters, drop tokens shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

/// 64-bit FNV-1a, seeded by folding the seed bytes in first.
///
/// Stable across platforms and toolchains, unlike `std`'s `DefaultHasher`.
pub fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Collapse all whitespace runs (including newlines) to single spaces.
pub fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_drops_short() {
        assert_eq!(
            tokenize("What was Q3 revenue? A 10-K item"),
            vec!["what", "was", "q3", "revenue", "10", "item"]
        );
    }

    #[test]
    fn fnv_is_seed_sensitive() {
        assert_ne!(fnv1a(0, b"abc"), fnv1a(1, b"abc"));
        assert_eq!(fnv1a(7, b"abc"), fnv1a(7, b"abc"));
    }

    #[test]
    fn one_line_flattens() {
        assert_eq!(one_line(" a\n b\t\tc "), "a b c");
    }
}
