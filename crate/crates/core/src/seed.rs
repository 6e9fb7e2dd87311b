//! Seed tree for reproducible Monte Carlo.
//!
//! Every random consumer derives its own stream from `(master_seed, realization, stream, index)`
//! so no RNG state is ever shared between workers.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `master` with one splitmix round per word.
pub fn mix(master: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(master), |acc, &w| splitmix64(acc ^ w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Stream {
    Screen = 1,
    Wander = 2,
}

/// Derives per-realization, per-screen seeds from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    pub master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Seed for phase screen `screen` of realization `realization`.
    pub fn screen(&self, realization: u64, screen: u64) -> u64 {
        mix(self.master, &[realization, Stream::Screen as u64, screen])
    }

    /// Seed for the tilt draw that accompanies screen `screen` of realization `realization`.
    pub fn wander(&self, realization: u64, screen: u64) -> u64 {
        mix(self.master, &[realization, Stream::Wander as u64, screen])
    }
}
