//! Seed derivation for reproducible, parallel runs.
//!
//! Every path gets independent streams derived from the master seed:
//!
//! ```text
//! seed(master, path, stream) = sm(sm(master ^ sm(path)) ^ stream)
//! ```
//!
//! where `sm` is the SplitMix64 finalizer (with its golden-ratio increment)
//! and `stream` is the [`Stream`] discriminant. The derived seed feeds
//! `ChaCha8Rng::seed_from_u64`. Price paths and agent draws use separate
//! streams, so changing the fee policy never changes the prices a path
//! sees, and agent draws stay aligned across policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Prices = 1,
    Agents = 2,
    Sweep = 3,
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream_seed(master_seed: u64, path_index: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(path_index)) ^ stream as u64)
}

pub fn substream(master_seed: u64, path_index: u64, stream: Stream) -> SimRng {
    ChaCha8Rng::seed_from_u64(substream_seed(master_seed, path_index, stream))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the SplitMix64 generator seeded with 0, which
        // calls the finalizer on 0, 0x9E37.., 2·0x9E37.., ...
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let a = substream_seed(42, 0, Stream::Prices);
        assert_eq!(a, substream_seed(42, 0, Stream::Prices));
        assert_ne!(a, substream_seed(42, 0, Stream::Agents));
        assert_ne!(a, substream_seed(42, 1, Stream::Prices));
        assert_ne!(a, substream_seed(43, 0, Stream::Prices));

        let x: Vec<u64> = (0..4).map(|_| substream(1, 2, Stream::Agents).random()).collect();
        assert!(x.windows(2).all(|w| w[0] == w[1]));
    }
}
