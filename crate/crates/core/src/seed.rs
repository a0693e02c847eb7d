//! Deterministic seed derivation for per-sample random streams.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under `base`. Independent of
/// evaluation order, so parallel loops stay reproducible.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}
