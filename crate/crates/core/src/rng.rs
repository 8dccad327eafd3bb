//! Seeded pseudo-random generator shared by every sampling path.
//!
//! All randomness in the toolkit (crop placement, noise synthesis, weight
//! initialization, batch order, study assignment) goes through
//! [`SplitMix64`] so that any run is reproducible from its seeds alone and
//! can be re-implemented bit-exactly elsewhere. The algorithm is:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15            (wrapping)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB      (wrapping)
//! output z ^ (z >> 31)
//! ```
//!
//! Derived quantities:
//!
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `below(n)`: the high 64 bits of `next_u64() * n` (128-bit product).
//! * `normal()`: Box-Muller, `sqrt(-2 ln(1 - u1)) * cos(2π u2)` with `u1`,
//!   `u2` two consecutive `next_f64` draws. No value is cached.
//! * `shuffle`: Fisher-Yates from the back, `j = below(i + 1)`.
//! * [`derive_seed`]: FNV-1a-64 of the tag, xor the base seed, then one
//!   SplitMix64 output step.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. Returns 0 when `n` is 0.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal deviate.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fair coin.
    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent child seed from a base seed and a label.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    mix((base ^ fnv1a(tag.as_bytes())).wrapping_add(GOLDEN))
}

/// Derives a child seed from a base seed and an integer index.
pub fn derive_seed_index(base: u64, index: u64) -> u64 {
    mix(base.wrapping_add(mix(index.wrapping_add(GOLDEN))).wrapping_add(GOLDEN))
}
