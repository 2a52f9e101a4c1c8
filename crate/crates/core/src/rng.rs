use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) type Rng = ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a sequence of indices (SplitMix64 finalizer).
pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = mix(h ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
