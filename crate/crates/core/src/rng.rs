//! Deterministic counter-based random substreams.
//!
//! Every stochastic object in this crate draws from a stream addressed by
//! `(base_seed, role, a, b, c)`. The address is folded into a 64-bit key by
//! the fixed mixing chain
//!
//! ```text
//! key = absorb(absorb(absorb(absorb(mix64(base_seed), role), a), b), c)
//! absorb(k, w) = mix64(k.wrapping_add(GOLDEN) ^ w)
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer and `GOLDEN` is 2^64/phi. The
//! generator itself is the SplitMix64 sequence started at `key`. Because the
//! key is a pure function of the address, results are independent of thread
//! count and scheduling: a path, an inner continuation, or a mean-batch sample
//! always sees the same draws no matter which worker produces it.

use rand_core::RngCore;

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: bijective avalanche on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(k: u64, w: u64) -> u64 {
    mix64(k.wrapping_add(GOLDEN) ^ w)
}

/// What a substream is for. The tag participates in key derivation, so the
/// same indices in different roles never collide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamRole {
    /// A single directly seeded path (CLI `simulate`, ad-hoc sampling).
    Path,
    /// Outer Monte Carlo paths.
    Outer,
    /// Independent batch used to estimate the terminal mean.
    Mean,
    /// Inner conditional continuations, addressed by (outer, grid, inner).
    Inner,
    /// Paths of the derivative-moment experiment.
    Moment,
}

impl StreamRole {
    #[inline]
    fn tag(self) -> u64 {
        match self {
            StreamRole::Path => 0x50_41_54_48,
            StreamRole::Outer => 0x4F_55_54_52,
            StreamRole::Mean => 0x4D_45_41_4E,
            StreamRole::Inner => 0x49_4E_4E_52,
            StreamRole::Moment => 0x4D_4F_4D_54,
        }
    }
}

/// Derive the 64-bit stream key for `(base_seed, role, a, b, c)`.
#[inline]
pub fn stream_key(base_seed: u64, role: StreamRole, a: u64, b: u64, c: u64) -> u64 {
    absorb(absorb(absorb(absorb(mix64(base_seed), role.tag()), a), b), c)
}

/// SplitMix64 stream positioned at a derived key.
#[derive(Clone, Debug)]
pub struct SubstreamRng {
    state: u64,
}

impl SubstreamRng {
    #[inline]
    pub fn from_key(key: u64) -> Self {
        SubstreamRng { state: key }
    }

    #[inline]
    pub fn new(base_seed: u64, role: StreamRole, a: u64, b: u64, c: u64) -> Self {
        Self::from_key(stream_key(base_seed, role, a, b, c))
    }

    /// Standard normal draw (ziggurat via `rand_distr`).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, self)
    }
}

impl RngCore for SubstreamRng {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
