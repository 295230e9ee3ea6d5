use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the discrete and SDE engines on independent noise.
pub const STREAM_DISCRETE: u64 = 0;
pub const STREAM_SDE: u64 = 1;

/// SplitMix64 finaliser.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of trajectory `index` on `stream`:
/// `splitmix64(splitmix64(master ^ splitmix64(stream)) + index)`.
///
/// Pure 64-bit integer arithmetic, so the value is identical on every platform.
pub fn mix(master: u64, index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

pub fn trajectory_rng(master: u64, index: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(master, index, stream))
}
