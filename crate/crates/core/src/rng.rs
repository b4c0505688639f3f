use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed from a root seed and a path of labels.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(seed), |acc, &label| mix64(acc ^ mix64(label)))
}

/// ChaCha8 generator keyed by `(seed, path)`. The same inputs always give the
/// same stream, regardless of which thread asks for it or in what order.
pub(crate) fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
