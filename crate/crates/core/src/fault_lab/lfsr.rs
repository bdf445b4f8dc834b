//! Fibonacci LFSR pattern source.

use super::sim::Pattern;
use super::FaultLabError;

/// Smallest primitive polynomial of each degree 1..=64, bit `k` = coefficient of `x^k`.
const PRIMITIVE: [u128; 64] = [
    0x3,
    0x7,
    0xb,
    0x13,
    0x25,
    0x43,
    0x83,
    0x11d,
    0x211,
    0x409,
    0x805,
    0x1053,
    0x201b,
    0x402b,
    0x8003,
    0x1002d,
    0x20009,
    0x40027,
    0x80027,
    0x100009,
    0x200005,
    0x400003,
    0x800021,
    0x100001b,
    0x2000009,
    0x4000047,
    0x8000027,
    0x10000009,
    0x20000005,
    0x40000053,
    0x80000009,
    0x1000000af,
    0x200000053,
    0x4000000e7,
    0x800000005,
    0x1000000077,
    0x200000003f,
    0x4000000063,
    0x8000000011,
    0x10000000039,
    0x20000000009,
    0x4000000003f,
    0x80000000059,
    0x100000000065,
    0x20000000001b,
    0x40000000012f,
    0x800000000021,
    0x10000000000b7,
    0x2000000000071,
    0x400000000001d,
    0x800000000004b,
    0x10000000000009,
    0x20000000000047,
    0x4000000000007d,
    0x80000000000047,
    0x100000000000095,
    0x20000000000002d,
    0x400000000000063,
    0x80000000000007b,
    0x1000000000000003,
    0x2000000000000027,
    0x4000000000000069,
    0x8000000000000003,
    0x1000000000000001b,
];

pub const MAX_WIDTH: u32 = 64;

/// The built-in primitive polynomial for `width`.
pub fn primitive_polynomial(width: u32) -> Option<u128> {
    (1..=MAX_WIDTH).contains(&width).then(|| PRIMITIVE[width as usize - 1])
}

/// A Fibonacci LFSR over the characteristic polynomial `poly`.
///
/// State bit `i` holds sequence element `a[n+i]`; each step appends
/// `a[n+w] = sum(c_k * a[n+k])` at the top and shifts down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr {
    width: u32,
    poly: u128,
    state: u64,
}

impl Lfsr {
    pub fn new(poly: u128, seed: u64) -> Result<Self, FaultLabError> {
        if poly < 2 || poly & 1 == 0 {
            return Err(FaultLabError::BadPolynomial(poly));
        }
        let width = 127 - poly.leading_zeros();
        if width > MAX_WIDTH {
            return Err(FaultLabError::BadPolynomial(poly));
        }
        let mask = if width == 64 { !0 } else { (1u64 << width) - 1 };
        if seed & !mask != 0 {
            return Err(FaultLabError::SeedTooWide { seed, width });
        }
        if seed == 0 {
            return Err(FaultLabError::ZeroSeed);
        }
        Ok(Self { width, poly, state: seed })
    }

    /// LFSR of the given width using the built-in primitive polynomial.
    pub fn with_width(width: u32, seed: u64) -> Result<Self, FaultLabError> {
        let poly = primitive_polynomial(width).ok_or(FaultLabError::UnsupportedWidth(width))?;
        Self::new(poly, seed)
    }

    /// Default source for a circuit: width = input count (capped at 64),
    /// built-in polynomial, seed masked to the width (0 becomes 1).
    pub fn for_inputs(inputs: usize, seed: u64) -> Self {
        let width = (inputs as u32).clamp(1, MAX_WIDTH);
        let mask = if width == 64 { !0 } else { (1u64 << width) - 1 };
        let seed = match seed & mask {
            0 => 1,
            s => s,
        };
        Self::with_width(width, seed).expect("table covers 1..=64")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn polynomial(&self) -> u128 {
        self.poly
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn step(&mut self) {
        let taps = (self.poly as u64) & self.low_mask();
        let feedback = u64::from((self.state & taps).count_ones() & 1);
        self.state = (self.state >> 1) | (feedback << (self.width - 1));
    }

    fn low_mask(&self) -> u64 {
        if self.width == 64 {
            !0
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// The current state as a vector of `width` bits, tiled or truncated.
    pub fn vector(&self, width: usize) -> Pattern {
        let w = self.width as usize;
        Pattern((0..width).map(|j| (self.state >> (j % w)) & 1 == 1).collect())
    }
}

impl Iterator for Lfsr {
    type Item = u64;
    fn next(&mut self) -> Option<u64> {
        let s = self.state;
        self.step();
        Some(s)
    }
}

/// The first `n` states of `lfsr` as `width`-bit vectors; the seed state is
/// the first vector. The same LFSR always yields the same stream, and every
/// shorter stream is a prefix of a longer one.
pub fn lfsr_sequence(lfsr: &Lfsr, n: usize, width: usize) -> Vec<Pattern> {
    let mut l = lfsr.clone();
    (0..n)
        .map(|_| {
            let v = l.vector(width);
            l.step();
            v
        })
        .collect()
}
