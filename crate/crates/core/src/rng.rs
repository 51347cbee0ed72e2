//! Random sources.
//!
//! [`XorShift32`] is the 32-bit xorshift generator the data-preparation unit
//! uses for reservoir indices and stochastic-rounding draws. Everything else
//! (weight init, feedback matrix, permutations, device variability) draws from
//! ChaCha8 streams derived from a single master seed, one stream per named
//! purpose, so that adding draws to one purpose never perturbs another.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Marsaglia xorshift with the (13, 17, 5) shift triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XorShift32 {
    state: u32,
}

impl XorShift32 {
    pub fn new(seed: u32) -> Result<Self> {
        if seed == 0 {
            return Err(Error::ZeroSeed);
        }
        Ok(Self { state: seed })
    }

    /// Seeds from an arbitrary 64-bit value, folding it to a nonzero state.
    pub fn from_u64(seed: u64) -> Self {
        let folded = (seed ^ (seed >> 32)) as u32;
        Self {
            state: if folded == 0 { 0x9E37_79B9 } else { folded },
        }
    }

    #[inline]
    pub fn state(&self) -> u32 {
        self.state
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> u32 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 17;
        x ^= x << 5;
        self.state = x;
        x
    }

    /// Uniform draw in `[0, 1)` with 32-bit resolution.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        f64::from(self.next()) / 4_294_967_296.0
    }

    /// `(next mod n) + 1`, the modulus unit's index in `[1, n]`.
    #[inline]
    pub fn next_index_1based(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        u64::from(self.next()) % n + 1
    }
}

/// Functional form of a single generator step.
pub fn xorshift32_next(s: XorShift32) -> (u32, XorShift32) {
    let mut s = s;
    let v = s.next();
    (v, s)
}

/// Named purposes that each receive an independent ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    WeightInit = 1,
    Feedback = 2,
    Permutation = 3,
    DeviceOffsets = 4,
    ReadNoise = 5,
    WriteNoise = 6,
    Dataset = 7,
    Shuffle = 8,
    Sampler = 9,
    Quantizer = 10,
}

/// ChaCha8 generator for `purpose` under `master`.
pub fn stream(master: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(purpose as u64);
    rng
}

/// 32-bit seed for one of the xorshift units, derived from the master seed.
pub fn xorshift_seed(master: u64, purpose: Stream) -> XorShift32 {
    let mut rng = stream(master, purpose);
    XorShift32::from_u64(rng.next_u64())
}

/// Uniform in `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn uniform_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn gaussian<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform integer in `[0, n)` by rejection, free of modulo bias.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// Fisher-Yates shuffle.
pub fn shuffle<T, R: RngCore + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}
