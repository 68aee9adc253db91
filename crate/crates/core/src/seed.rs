//! Seed derivation and the portable fold-shuffling generator.

/// 64-bit linear congruential generator with Knuth's MMIX constants.
///
/// `state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`;
/// each draw advances once and returns the new state. The initial state
/// is the seed itself. Bounded draws use the high 64 bits of the 128-bit
/// product `state * bound`, so any implementation with 64-bit wrapping
/// arithmetic reproduces the same stream.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform integer in `[0, bound)`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle, walking from the last element down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for ensemble member `index` under `seed`.
pub fn member_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index))
}

/// Seed for one (algorithm, fold) cell of an experiment.
pub fn cell_seed(master: u64, algorithm: &str, fold: usize) -> u64 {
    mix64(master ^ mix64(fnv1a(algorithm.as_bytes()) ^ (fold as u64)))
}
