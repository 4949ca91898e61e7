//! Seeded 64-bit generator used by every stochastic component.
//!
//! SplitMix64 with the standard constants (increment 0x9E3779B97F4A7C15,
//! mixers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). The constants are
//! fixed so that identical seeds reproduce identical streams across
//! implementations and platforms.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_A: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_B: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_A);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_B);
    z ^ (z >> 31)
}

/// Derives the seed for stream `index` from a base seed. Used to give
/// every Monte Carlo run and every fit start its own reproducible stream.
pub fn derive_stream(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// SplitMix64 sequence generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Exponential draw with the given rate, by inversion. Infinite when
    /// the rate is zero.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            self.next_f64(); // keep the stream position independent of rate
            return f64::INFINITY;
        }
        let u = self.next_f64();
        -(1.0 - u).ln() / rate
    }

    /// Standard normal draw via Box-Muller (cosine branch only).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1], keeps ln finite
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
