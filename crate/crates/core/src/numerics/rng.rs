//! Counter-based pseudorandom streams.
//!
//! Every draw is a pure function of `(seed, site, sweep, draw)`, so results
//! are identical no matter how updates are scheduled across threads, and a
//! resumed chain reproduces the continuation of an uninterrupted one exactly.

/// SplitMix64 finalizer; full-period bijective mixer on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SWEEP_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// Root of a family of independent per-(site, sweep) draw streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream keyed by `(seed, site, sweep)`; draws advance a counter.
    pub fn substream(&self, site: u64, sweep: u64) -> DrawStream {
        let mut key = mix64(self.seed ^ GOLDEN);
        key = mix64(key ^ site.wrapping_mul(GOLDEN).wrapping_add(1));
        key = mix64(key ^ sweep.wrapping_mul(SWEEP_SALT).wrapping_add(1));
        DrawStream { key, counter: 0 }
    }
}

/// Counter-based stream: the n-th output is `mix(key, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DrawStream {
    key: u64,
    counter: u64,
}

impl DrawStream {
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key ^ self.counter.wrapping_mul(GOLDEN).wrapping_add(0x1D8E_4E27_C47D_124F));
        self.counter += 1;
        v
    }

    /// Uniform draw in the open interval (0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}
