use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over a sequence of byte slices, with a separator between parts
/// so that ("ab", "c") and ("a", "bc") hash differently.
pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// RNG for one sub-stream (a group, a stratum) derived from a run seed.
pub(crate) fn sub_rng(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(parts))
}
