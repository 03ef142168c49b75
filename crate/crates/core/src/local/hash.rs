//! Keyed 64-bit mixing hash used by the Collision mechanism.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Full 64-bit hash of `value` under key `seed`.
pub fn keyed_hash(seed: u64, value: u64) -> u64 {
    mix64(seed ^ mix64(value.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Hash of `value` reduced to `0..range` with a multiply-high reduction.
pub fn hash_to_range(seed: u64, value: u64, range: u64) -> u64 {
    ((keyed_hash(seed, value) as u128 * range as u128) >> 64) as u64
}
