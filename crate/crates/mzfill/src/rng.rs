//! Deterministic seeded randomness.
//!
//! Seeded commands must reproduce bit-identical artifacts across runs,
//! platforms and thread counts, so every random draw is keyed by the run
//! seed plus a structural path (sample index, point label, entry indices)
//! rather than by a shared mutable generator. The mixer is SplitMix64,
//! which is the standard finalizer for this kind of keyed derivation.

/// SplitMix64 finalizer: a bijective avalanche mix of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a seed with a structural key into a fresh 64-bit word.
pub fn derive(seed: u64, key: u64) -> u64 {
    mix(mix(seed) ^ key.wrapping_mul(0xff51_afd7_ed55_8ccd))
}

/// Hash a string label into the keyed stream.
pub fn derive_label(seed: u64, index: u64, label: &str) -> u64 {
    let mut h = derive(seed, index);
    for b in label.as_bytes() {
        h = mix(h ^ u64::from(*b));
    }
    h
}

/// Map a word to the unit interval [0, 1).
pub fn unit(word: u64) -> f64 {
    // 53 mantissa bits.
    (word >> 11) as f64 / (1u64 << 53) as f64
}

/// Map a word to the symmetric interval [-1, 1).
pub fn symmetric(word: u64) -> f64 {
    2.0 * unit(word) - 1.0
}

/// Small sequential generator for places that need a stream of draws.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: mix(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix(self.state)
    }

    /// Uniform draw in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        unit(self.next_u64())
    }

    /// Uniform draw in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform index in 0..n.
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
