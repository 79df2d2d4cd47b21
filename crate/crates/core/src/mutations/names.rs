//! Seeded randomness: per-site RNG streams, fresh identifiers, derangements.

use std::collections::BTreeSet;

use cfprobe_syntax::is_keyword;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::analysis::is_builtin;

pub const FRESH_LEN: usize = 5;

/// An RNG stream derived from the run seed and a site label, so that
/// adding or removing other sites never perturbs this one.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}:{label}").as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Every identifier-like word in `text` (including inside strings and
/// comments, which is deliberately over-cautious).
pub fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty() && !w.as_bytes()[0].is_ascii_digit())
        .map(str::to_string)
        .collect()
}

/// Draw a lowercase name of [`FRESH_LEN`] letters not present in `taken`,
/// not a keyword or builtin; the name is added to `taken`.
pub fn fresh_name(rng: &mut impl Rng, taken: &mut BTreeSet<String>) -> String {
    loop {
        let name: String = (0..FRESH_LEN).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        if !taken.contains(&name) && !is_keyword(&name) && !is_builtin(&name) {
            taken.insert(name.clone());
            return name;
        }
    }
}

/// A uniformly random permutation of `0..n` with no fixed point, or `None`
/// when `n < 2`.
pub fn derangement(rng: &mut impl Rng, n: usize) -> Option<Vec<usize>> {
    if n < 2 {
        return None;
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Some(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: u64 = rng_for(7, "p:k:0").gen();
        let b: u64 = rng_for(7, "p:k:0").gen();
        let c: u64 = rng_for(7, "p:k:1").gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn words_skip_numbers() {
        let w = words("x1 = 2 + y_z  # 3abc 'q'");
        assert_eq!(w, ["q", "x1", "y_z"].iter().map(|s| s.to_string()).collect());
    }

    proptest! {
        #[test]
        fn fresh_names_avoid_taken(seed in any::<u64>()) {
            let mut rng = rng_for(seed, "t");
            let mut taken: BTreeSet<String> = ["abcde".to_string()].into();
            let n = fresh_name(&mut rng, &mut taken);
            prop_assert_eq!(n.len(), FRESH_LEN);
            prop_assert!(n.bytes().all(|b| b.is_ascii_lowercase()));
            prop_assert!(n != "abcde" && taken.contains(&n));
        }

        #[test]
        fn derangements_have_no_fixed_points(seed in any::<u64>(), n in 0usize..8) {
            let mut rng = rng_for(seed, "d");
            match derangement(&mut rng, n) {
                None => prop_assert!(n < 2),
                Some(p) => {
                    let mut sorted = p.clone();
                    sorted.sort_unstable();
                    prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
                    prop_assert!(p.iter().enumerate().all(|(i, &j)| i != j));
                }
            }
        }
    }
}
