//! Seeded random streams.
//!
//! Every stochastic operation draws from a ChaCha8 stream seeded with a
//! 64-bit value. Sub-streams use `base ^ mix(tag, indices)`, where `mix` is
//! FNV-1a over the tag bytes and little-endian indices followed by a
//! SplitMix64 finalizer, so derived seeds are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(base: u64, tag: &str, indices: &[u64]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let bytes = tag.bytes().chain(std::iter::once(0xff)).chain(indices.iter().flat_map(|i| i.to_le_bytes()));
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    base ^ splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
