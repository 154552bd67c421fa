//! The endless output stream: output `i` is bit `w_i` of `h_i · x_{v_i}`.
//!
//! Triples are a pure function of `(seed, i, N, m)`, so a receiver can
//! rebuild the metadata for any subset of collected indices without
//! replaying the stream. Each component is drawn from its own 64-bit word
//!
//! ```text
//! key_j  = fmix(seed ^ SALT_j)
//! base   = fmix(key_j ^ (i · GOLDEN))
//! word_r = fmix(base + (r + 1) · GOLDEN)        r = 0, 1, 2, …
//! ```
//!
//! where `fmix` is the SplitMix64 finalizer
//! (`z ^= z >> 30; z *= 0xbf58476d1ce4e5b9; z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31`)
//! and `GOLDEN = 0x9e3779b97f4a7c15`. Component `j = 0, 1, 2` is `v`, `w`, `h`
//! with salts [`SALTS`]. A word is accepted when it falls below the largest
//! multiple of the range size, so every component is exactly uniform.

use crate::gf::{Field, Symbol};
use crate::precode::Codeword;

pub const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
pub const SALTS: [u64; 3] = [0x243f_6a88_85a3_08d3, 0x1319_8a2e_0370_7344, 0xa409_3822_299f_31d0];

#[inline]
pub fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw from `[0, n)` by rejection over `width`-bit words.
///
/// Words are truncated to their low `width` bits; values at or above the
/// largest multiple of `n` that fits are rejected and the next word is used.
pub fn uniform_below(n: u64, width: u32, mut next_word: impl FnMut() -> u64) -> u64 {
    assert!(n > 0 && (1..=64).contains(&width));
    let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    assert!(n - 1 <= mask, "range does not fit in the word width");
    // Number of words that map evenly onto [0, n): floor(2^width / n) * n.
    let span = mask as u128 + 1;
    let limit = span - span % n as u128;
    loop {
        let w = next_word() & mask;
        if (w as u128) < limit {
            return w % n;
        }
    }
}

/// Shared stream parameters (sender and receiver must agree on all of them).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSpec {
    pub seed: u64,
    pub length: usize,
    pub m: u32,
}

/// Metadata of output `index`: symbol `symbol` (0-based), bit `bit`
/// (1-based) and coefficient `coef`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputTriple {
    pub index: u64,
    pub symbol: usize,
    pub bit: u32,
    pub coef: Symbol,
}

impl StreamSpec {
    pub fn new(seed: u64, length: usize, m: u32) -> Self {
        assert!(length > 0 && (1..=16).contains(&m));
        StreamSpec { seed, length, m }
    }

    fn component(&self, j: usize, index: u64, n: u64) -> u64 {
        let key = splitmix64_finalize(self.seed ^ SALTS[j]);
        let base = splitmix64_finalize(key ^ index.wrapping_mul(GOLDEN));
        let mut r = 0u64;
        uniform_below(n, 64, || {
            r += 1;
            splitmix64_finalize(base.wrapping_add(r.wrapping_mul(GOLDEN)))
        })
    }

    /// The triple of output `index` (`index >= 1`).
    pub fn triple_at(&self, index: u64) -> OutputTriple {
        debug_assert!(index >= 1);
        let symbol = self.component(0, index, self.length as u64) as usize;
        let bit = self.component(1, index, self.m as u64) as u32 + 1;
        let coef = Symbol(self.component(2, index, (1u64 << self.m) - 1) as u16 + 1);
        OutputTriple { index, symbol, bit, coef }
    }

    /// Triples for indices `start..start + count`.
    pub fn triples(&self, start: u64, count: usize) -> impl Iterator<Item = OutputTriple> + '_ {
        (start..start + count as u64).map(move |i| self.triple_at(i))
    }
}

/// Bit `t.bit` of `t.coef · x[t.symbol]`.
#[inline]
pub fn emit_bit(field: &Field, x: &Codeword, t: &OutputTriple) -> u8 {
    let y = field.mul(t.coef, x[t.symbol]);
    ((y.0 >> (t.bit - 1)) & 1) as u8
}
