//! Deterministic counter-based random streams.
//!
//! Every random draw in the crate flows through a [`CounterRng`] keyed by an
//! explicit integer path: `(seed, domain tag, iteration, ...)`. A stream is
//! O(1) to construct and positionless state never leaks between streams, so
//! the noise law of iteration `k` can be regenerated later (for Monte-Carlo
//! probes at a recorded state) without replaying the trajectory, and
//! concurrent trajectories never contend on shared generator state.
//!
//! The construction is a SplitMix64 stream whose starting key is the path
//! folded through the 64-bit finalizer. The finalizer is Stafford's "mix 13"
//! variant, the same one SplitMix64 itself uses.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, v: u64) -> u64 {
    mix64(h ^ mix64(v.wrapping_add(GOLDEN)))
}

/// Domain tags separating independent uses of the same seed.
pub mod domain {
    /// Per-iteration gradient noise inside the SGD loop.
    pub const TRAJECTORY: u64 = 0x7261_6a65;
    /// Fresh conditional draws made by diagnostics probes.
    pub const PROBE: u64 = 0x7072_6f62;
    /// Moment validators (unbiasedness, second moment).
    pub const MOMENT: u64 = 0x6d6f_6d74;
    /// Point sampling for smoothness checks and exponent fits.
    pub const SAMPLING: u64 = 0x736d_706c;
}

/// A keyed counter-based pseudo-random stream.
///
/// Draw `i` of the stream with key `key` is `mix64(key + (i + 1) * GOLDEN)`,
/// i.e. SplitMix64 seeded at `key`. Identical paths give identical draw
/// sequences on every platform and thread schedule.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Derives the stream for `seed` routed through `path`.
    pub fn from_path(seed: u64, path: &[u64]) -> Self {
        let mut key = mix64(seed ^ GOLDEN);
        for &p in path {
            key = absorb(key, p);
        }
        CounterRng { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe to feed to `ln`.
    #[inline]
    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller; consumes exactly two raw draws.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }
}

/// The noise stream of iteration `k` inside the trajectory with this seed.
pub fn trajectory_stream(seed: u64, k: u64) -> CounterRng {
    CounterRng::from_path(seed, &[domain::TRAJECTORY, k])
}

/// A probe stream regenerating the iteration-`k` law independently of the
/// trajectory draws.
pub fn probe_stream(seed: u64, k: u64) -> CounterRng {
    CounterRng::from_path(seed, &[domain::PROBE, k])
}
