//! Counter-based random substreams.
//!
//! Every random draw in the workbench comes from a ChaCha8 keystream. The key
//! is derived from a master seed and a path of labels (replicate index, phase
//! tag, ...); the 64-bit stream selector is used for per-unit substreams so
//! that unit `k` always sees the same draws for a given key, independent of
//! how many other units are realized or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Phase tags used to separate the keystreams of a replicate.
pub mod tag {
    pub const POPULATION: u64 = 0x706f_7075;
    pub const CALIBRATION: u64 = 0x6361_6c69;
    pub const TRAIN_POPULATION: u64 = 0x7472_706f;
    pub const TARGET_POPULATION: u64 = 0x7467_706f;
    pub const FRAME: u64 = 0x6672_616d;
    pub const OVERCOVERAGE: u64 = 0x6f76_6572;
    pub const DESIGN: u64 = 0x6465_7367;
    pub const TRAIN_DESIGN: u64 = 0x7472_6473;
    pub const TARGET_DESIGN: u64 = 0x7467_6473;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const FEATURE_NOISE: u64 = 0x666e_6f69;
    pub const LABEL_NOISE: u64 = 0x6c6e_6f69;
    pub const NONRESPONSE: u64 = 0x6e72_6573;
    pub const ENSEMBLE: u64 = 0x656e_7362;
    pub const ENRICH: u64 = 0x656e_7263;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a label path into a child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

fn key(seed: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = seed;
    for chunk in out.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Keystream for `(seed, path)`, positioned at stream 0.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::from_seed(key(derive_seed(seed, path)))
}

/// Keystream for `(seed, path)` restricted to the substream of unit `unit`.
pub fn unit_stream(seed: u64, path: &[u64], unit: u64) -> StreamRng {
    let mut rng = stream(seed, path);
    rng.set_stream(unit);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_keys_give_identical_draws() {
        let a: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, &[1, 2]), |r, _: u64| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(stream(7, &[1, 2]), |r, _: u64| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn paths_and_units_separate_streams() {
        let x: u64 = stream(7, &[1, 2]).random();
        let y: u64 = stream(7, &[2, 1]).random();
        let z: u64 = stream(8, &[1, 2]).random();
        assert_ne!(x, y);
        assert_ne!(x, z);
        let u1: u64 = unit_stream(7, &[1], 1).random();
        let u2: u64 = unit_stream(7, &[1], 2).random();
        assert_ne!(u1, u2);
        assert_eq!(u1, unit_stream(7, &[1], 1).random::<u64>());
    }
}
