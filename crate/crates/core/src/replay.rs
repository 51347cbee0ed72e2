//! Data-preparation unit: reservoir sampler, stochastic quantizer and replay
//! buffer.
//!
//! The sampler counts presented examples and draws a replacement index from a
//! 32-bit xorshift generator reduced by a modulus unit, `j = (r mod i) + 1`.
//! Accepted examples are stochastically rounded to `n_b` bits per feature and
//! stored bit-packed.

use alloc::vec;
use alloc::vec::Vec;

use crate::miru::Example;
use crate::rng::XorShift32;
use crate::{Error, Result};

/// Largest code representable with `bits` bits.
#[inline]
fn max_code(bits: u32) -> u32 {
    (1u32 << bits) - 1
}

fn check_bits(bits: u32) -> Result<()> {
    if !(1..=16).contains(&bits) {
        return Err(Error::domain("quantizer bits", alloc::format!("{bits} not in 1..=16")));
    }
    Ok(())
}

/// Stochastic rounding of `x ∈ [0, 1]` onto the `2^n_b` grid.
///
/// With `z = x · 2^n_b` and `f = z − ⌊z⌋`, rounds up iff `r < f` and the
/// floor is below the top code. `x = 1` gives `z = 2^n_b`, which is clamped
/// to the top code.
pub fn stochastic_quantize(x: f64, bits: u32, r: f64) -> Result<u32> {
    check_bits(bits)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(
            "stochastic_quantize",
            alloc::format!("{x} not in [0, 1]"),
        ));
    }
    let top = max_code(bits);
    let z = x * f64::from(1u32 << bits);
    let floor = libm::floor(z);
    let frac = z - floor;
    let floor = floor as u32;
    let q = if r < frac && floor < top { floor + 1 } else { floor };
    Ok(q.min(top))
}

/// Plain truncation onto the same grid, the baseline stochastic rounding is
/// compared against.
pub fn truncate_quantize(x: f64, bits: u32) -> Result<u32> {
    check_bits(bits)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("truncate_quantize", alloc::format!("{x} not in [0, 1]")));
    }
    let z = x * f64::from(1u32 << bits);
    Ok((libm::floor(z) as u32).min(max_code(bits)))
}

pub fn dequantize(code: u32, bits: u32) -> Result<f64> {
    check_bits(bits)?;
    if code > max_code(bits) {
        return Err(Error::domain(
            "dequantize",
            alloc::format!("code {code} exceeds {bits} bits"),
        ));
    }
    Ok(f64::from(code) / f64::from(1u32 << bits))
}

/// Feature codes of one stored example, packed `bits` per code.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantizedExample {
    packed: Vec<u8>,
    len: usize,
    bits: u32,
    n_x: usize,
    label: usize,
}

impl QuantizedExample {
    pub fn from_codes(codes: &[u32], bits: u32, n_x: usize, label: usize) -> Result<Self> {
        check_bits(bits)?;
        if n_x == 0 || !codes.len().is_multiple_of(n_x) {
            return Err(Error::dim("QuantizedExample", n_x, codes.len()));
        }
        let top = max_code(bits);
        let mut packed = vec![0u8; (codes.len() * bits as usize).div_ceil(8)];
        for (i, &c) in codes.iter().enumerate() {
            if c > top {
                return Err(Error::domain(
                    "QuantizedExample",
                    alloc::format!("code {c} exceeds {bits} bits"),
                ));
            }
            for (b, bit) in (0..bits).zip(i * bits as usize..) {
                if (c >> b) & 1 == 1 {
                    packed[bit / 8] |= 1 << (bit % 8);
                }
            }
        }
        Ok(Self {
            packed,
            len: codes.len(),
            bits,
            n_x,
            label,
        })
    }

    pub fn code(&self, i: usize) -> u32 {
        let mut v = 0;
        let start = i * self.bits as usize;
        for b in 0..self.bits as usize {
            let bit = start + b;
            if (self.packed[bit / 8] >> (bit % 8)) & 1 == 1 {
                v |= 1 << b;
            }
        }
        v
    }

    pub fn codes(&self) -> Vec<u32> {
        (0..self.len).map(|i| self.code(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Dequantization scale `2^n_b`.
    pub fn scale(&self) -> f64 {
        f64::from(1u32 << self.bits)
    }

    /// Bytes of feature storage.
    pub fn footprint_bytes(&self) -> usize {
        self.packed.len()
    }

    pub fn to_example(&self) -> Example {
        let scale = self.scale();
        let inputs = (0..self.len).map(|i| f64::from(self.code(i)) / scale).collect();
        Example::new(inputs, self.n_x, self.label).expect("dequantized codes lie in [0, 1)")
    }
}

/// Stochastic quantizer with its own uniform source.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StochasticQuantizer {
    bits: u32,
    rng: XorShift32,
}

impl StochasticQuantizer {
    pub fn new(bits: u32, rng: XorShift32) -> Result<Self> {
        check_bits(bits)?;
        Ok(Self { bits, rng })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn quantize(&mut self, ex: &Example) -> QuantizedExample {
        let codes: Vec<u32> = ex
            .inputs()
            .iter()
            .map(|&x| {
                let r = self.rng.next_unit();
                stochastic_quantize(x, self.bits, r).expect("example features lie in [0, 1]")
            })
            .collect();
        QuantizedExample::from_codes(&codes, self.bits, ex.n_x(), ex.label())
            .expect("codes within range by construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Stored(usize),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReservoirState {
    capacity: usize,
    seen: u64,
    rng: XorShift32,
}

impl ReservoirState {
    pub fn new(capacity: usize, rng: XorShift32) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("reservoir capacity must be positive".into()));
        }
        Ok(Self { capacity, seen: 0, rng })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Counts one presented example and decides where it goes.
    pub fn decide(&mut self) -> Offer {
        self.seen += 1;
        let i = self.seen;
        let k = self.capacity as u64;
        if i <= k {
            return Offer::Stored((i - 1) as usize);
        }
        let j = self.rng.next_index_1based(i);
        if j <= k {
            Offer::Stored((j - 1) as usize)
        } else {
            Offer::Rejected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<QuantizedExample>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            slots: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, i: usize) -> Option<&QuantizedExample> {
        self.slots.get(i)
    }

    pub fn slots(&self) -> &[QuantizedExample] {
        &self.slots
    }

    pub fn footprint_bytes(&self) -> usize {
        self.slots.iter().map(QuantizedExample::footprint_bytes).sum()
    }

    fn put(&mut self, index: usize, item: QuantizedExample) {
        if index < self.slots.len() {
            self.slots[index] = item;
        } else {
            debug_assert_eq!(index, self.slots.len());
            self.slots.push(item);
        }
    }
}

/// One reservoir step against `buf`. The first `k` offers fill the buffer in
/// order; afterwards the item replaces slot `j − 1` when `j ≤ k`.
pub fn reservoir_offer(res: &mut ReservoirState, buf: &mut ReplayBuffer, ex: QuantizedExample) -> Offer {
    let offer = res.decide();
    if let Offer::Stored(idx) = offer {
        buf.put(idx, ex);
    }
    offer
}

/// Draws `n` buffer slots uniformly with replacement (xorshift mod occupancy)
/// and returns them dequantized.
pub fn sample_replay_batch(buf: &ReplayBuffer, n: usize, rng: &mut XorShift32) -> Result<Vec<Example>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let occ = buf.occupancy();
    if occ == 0 {
        return Err(Error::EmptyBuffer);
    }
    Ok((0..n)
        .map(|_| {
            let idx = (rng.next_index_1based(occ as u64) - 1) as usize;
            buf.slots[idx].to_example()
        })
        .collect())
}

/// Sampler, quantizer, buffer and the rehearsal draw source as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplayUnit {
    pub reservoir: ReservoirState,
    pub quantizer: StochasticQuantizer,
    pub buffer: ReplayBuffer,
    pub draw_rng: XorShift32,
}

impl ReplayUnit {
    pub fn new(
        capacity: usize,
        bits: u32,
        sampler: XorShift32,
        quantizer: XorShift32,
        draws: XorShift32,
    ) -> Result<Self> {
        Ok(Self {
            reservoir: ReservoirState::new(capacity, sampler)?,
            quantizer: StochasticQuantizer::new(bits, quantizer)?,
            buffer: ReplayBuffer::new(capacity),
            draw_rng: draws,
        })
    }

    /// Presents one streamed example; it is quantized only when the sampler
    /// keeps it.
    pub fn observe(&mut self, ex: &Example) -> Offer {
        let offer = self.reservoir.decide();
        if let Offer::Stored(idx) = offer {
            let q = self.quantizer.quantize(ex);
            self.buffer.put(idx, q);
        }
        offer
    }

    pub fn sample(&mut self, n: usize) -> Result<Vec<Example>> {
        sample_replay_batch(&self.buffer, n, &mut self.draw_rng)
    }
}
