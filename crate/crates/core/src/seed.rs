//! Deterministic seed derivation and content hashing.
//!
//! Every random stream in the workspace is rooted in an explicit seed and
//! derived through `derive_seed`, so re-running any command with the same
//! configuration reproduces identical bytes. There is no wall-clock seeding
//! anywhere.

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tag sequence into a master seed. Used to give each circuit,
/// run, and sweep cell its own independent stream.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x6a09_e667_f3bc_c908);
    for &t in tags {
        state = mix(state ^ mix(t));
    }
    state
}

/// The compiler stream for circuit `circuit_id` of an instance. Instance
/// generation and the dependency-agnostic re-cut both go through this, so
/// re-cutting a circuit replays the exact parameter stream the original
/// cut consumed.
pub fn circuit_seed(instance_seed: u64, circuit_id: usize) -> u64 {
    derive_seed(instance_seed, &[0xc1, circuit_id as u64])
}

/// FNV-1a over raw bytes; used for instance hashes in sweep output.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(42, &[1, 2]), derive_seed(42, &[1, 2]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[1]), derive_seed(43, &[1]));
    }

    #[test]
    fn fnv_known_value() {
        // FNV-1a of the empty string is the offset basis.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
    }
}
