//! Arithmetic over GF(2^m), 1 <= m <= 16, in polynomial basis.
//!
//! A [`Symbol`] stores the coordinates of a field element with respect to the
//! basis `1, α, α², …, α^{m-1}`: bit `t` of the integer value is the
//! coefficient of `α^t`. Written as a length-`m` binary tuple with the
//! coefficient of `α^0` first, GF(2^3) under `π(x) = x³ + x + 1` reads
//!
//! ```text
//! 0 = (0,0,0)   1 = (1,0,0)   α = (0,1,0)   α² = (0,0,1)
//! α³ = (1,1,0)  α⁴ = (0,1,1)  α⁵ = (1,1,1)  α⁶ = (1,0,1)
//! ```
//!
//! Bit positions exposed through [`Field::bit`] are 1-based (`w ∈ [1, m]`),
//! so position `w` is the coefficient of `α^{w-1}`.
//!
//! # Primitive polynomials
//!
//! | m  | π(x)                              | mask      |
//! |----|-----------------------------------|-----------|
//! | 1  | x + 1                             | `0x3`     |
//! | 2  | x² + x + 1                        | `0x7`     |
//! | 3  | x³ + x + 1                        | `0xb`     |
//! | 4  | x⁴ + x + 1                        | `0x13`    |
//! | 5  | x⁵ + x² + 1                       | `0x25`    |
//! | 6  | x⁶ + x + 1                        | `0x43`    |
//! | 7  | x⁷ + x³ + 1                       | `0x89`    |
//! | 8  | x⁸ + x⁴ + x³ + x² + 1             | `0x11d`   |
//! | 9  | x⁹ + x⁴ + 1                       | `0x211`   |
//! | 10 | x¹⁰ + x³ + 1                      | `0x409`   |
//! | 11 | x¹¹ + x² + 1                      | `0x805`   |
//! | 12 | x¹² + x⁶ + x⁴ + x + 1             | `0x1053`  |
//! | 13 | x¹³ + x⁴ + x³ + x + 1             | `0x201b`  |
//! | 14 | x¹⁴ + x¹⁰ + x⁶ + x + 1            | `0x4443`  |
//! | 15 | x¹⁵ + x + 1                       | `0x8003`  |
//! | 16 | x¹⁶ + x¹² + x³ + x + 1            | `0x1100b` |
//!
//! Every table is checked to generate the full multiplicative group when a
//! [`Field`] is built.

use std::fmt;
use std::ops::Add;

use thiserror::Error;

pub const MAX_DEGREE: u32 = 16;

const PRIMITIVE_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xb, 0x13, 0x25, 0x43, 0x89, 0x11d, 0x211, 0x409, 0x805, 0x1053, 0x201b, 0x4443,
    0x8003, 0x1100b,
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("unsupported extension degree m = {0} (expected 1..=16)")]
    UnsupportedDegree(u32),
    #[error("polynomial {poly:#x} does not have degree {m}")]
    WrongDegree { m: u32, poly: u32 },
    #[error("polynomial {poly:#x} is not primitive (α has order {order}, expected {expected})")]
    NotPrimitive { poly: u32, order: usize, expected: usize },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("bit position {w} out of range 1..={m}")]
    BitOutOfRange { w: u32, m: u32 },
    #[error("value {value:#x} is not an element of GF(2^{m})")]
    NotAnElement { value: u32, m: u32 },
}

/// The documented primitive polynomial for GF(2^m).
pub fn default_primitive_poly(m: u32) -> Result<u32, FieldError> {
    if m == 0 || m > MAX_DEGREE {
        return Err(FieldError::UnsupportedDegree(m));
    }
    Ok(PRIMITIVE_POLYS[m as usize])
}

/// A field element in polynomial-basis representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Symbol(pub u16);

impl Symbol {
    pub const ZERO: Symbol = Symbol(0);
    pub const ONE: Symbol = Symbol(1);

    #[inline]
    pub fn value(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add for Symbol {
    type Output = Symbol;

    #[inline]
    fn add(self, rhs: Symbol) -> Symbol {
        Symbol(self.0 ^ rhs.0)
    }
}

impl fmt::LowerHex for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

/// GF(2^m) with discrete-log tables over the primitive element α.
#[derive(Clone)]
pub struct Field {
    m: u32,
    poly: u32,
    // exp has 2(q-1) entries so that log a + log b never needs a reduction.
    exp: Vec<u16>,
    log: Vec<u32>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("m", &self.m)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.poly == other.poly
    }
}

impl Eq for Field {}

impl Field {
    /// GF(2^m) under the documented default polynomial.
    pub fn new(m: u32) -> Result<Self, FieldError> {
        Self::with_poly(m, default_primitive_poly(m)?)
    }

    /// GF(2^m) under a caller-supplied polynomial, which must be primitive.
    pub fn with_poly(m: u32, poly: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_DEGREE {
            return Err(FieldError::UnsupportedDegree(m));
        }
        if poly >> m != 1 {
            return Err(FieldError::WrongDegree { m, poly });
        }
        let q = 1usize << m;
        let order = q - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u32; q];
        let mut x: u32 = 1;
        for (e, slot) in exp.iter_mut().take(order).enumerate() {
            if e > 0 && x == 1 {
                return Err(FieldError::NotPrimitive { poly, order: e, expected: order });
            }
            *slot = x as u16;
            log[x as usize] = e as u32;
            x <<= 1;
            if x >> m != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            // α^{q-1} must close the cycle; anything else means π is reducible.
            return Err(FieldError::NotPrimitive { poly, order: 0, expected: order });
        }
        for e in order..2 * order {
            exp[e] = exp[e - order];
        }
        Ok(Field { m, poly, exp, log })
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.m
    }

    /// Number of field elements, `2^m`.
    #[inline]
    pub fn order(&self) -> usize {
        1 << self.m
    }

    #[inline]
    pub fn poly(&self) -> u32 {
        self.poly
    }

    pub fn alpha(&self) -> Symbol {
        Symbol(self.exp[1])
    }

    /// α^e for any integer exponent.
    pub fn alpha_pow(&self, e: i64) -> Symbol {
        let order = (self.order() - 1) as i64;
        Symbol(self.exp[e.rem_euclid(order) as usize])
    }

    /// Discrete logarithm base α of a nonzero element.
    #[inline]
    pub fn log(&self, a: Symbol) -> Option<u32> {
        if a.is_zero() {
            None
        } else {
            Some(self.log[a.index()])
        }
    }

    #[inline]
    pub fn symbol(&self, value: u32) -> Result<Symbol, FieldError> {
        if value as usize >= self.order() {
            return Err(FieldError::NotAnElement { value, m: self.m });
        }
        Ok(Symbol(value as u16))
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        a + b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a.is_zero() || b.is_zero() {
            return Symbol::ZERO;
        }
        Symbol(self.exp[(self.log[a.index()] + self.log[b.index()]) as usize])
    }

    pub fn inv(&self, a: Symbol) -> Result<Symbol, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        let order = (self.order() - 1) as u32;
        Ok(Symbol(self.exp[((order - self.log[a.index()]) % order) as usize]))
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// The `w`-th bit (1-based) of `a`, i.e. its coefficient of `α^{w-1}`.
    pub fn bit(&self, a: Symbol, w: u32) -> Result<u8, FieldError> {
        if w == 0 || w > self.m {
            return Err(FieldError::BitOutOfRange { w, m: self.m });
        }
        Ok(((a.0 >> (w - 1)) & 1) as u8)
    }

    /// Writes `dst[h·y] = src[y]` for every element `y`; `h` must be nonzero.
    ///
    /// This is the relabelling `p ↦ p(h⁻¹·)` applied to a probability vector.
    pub(crate) fn scatter_mul(&self, h: Symbol, src: &[f64], dst: &mut [f64]) {
        debug_assert!(!h.is_zero());
        let lh = self.log[h.index()] as usize;
        dst[0] = src[0];
        for y in 1..src.len() {
            dst[self.exp[self.log[y] as usize + lh] as usize] = src[y];
        }
    }

    /// Writes `dst[y] = src[h·y]` for every element `y`; `h` must be nonzero.
    pub(crate) fn gather_mul(&self, h: Symbol, src: &[f64], dst: &mut [f64]) {
        debug_assert!(!h.is_zero());
        let lh = self.log[h.index()] as usize;
        dst[0] = src[0];
        for y in 1..src.len() {
            dst[y] = src[self.exp[self.log[y] as usize + lh] as usize];
        }
    }

    /// Iterator over all nonzero elements in increasing integer order.
    pub fn nonzero(&self) -> impl Iterator<Item = Symbol> {
        (1..self.order()).map(|v| Symbol(v as u16))
    }

    pub fn elements(&self) -> impl Iterator<Item = Symbol> {
        (0..self.order()).map(|v| Symbol(v as u16))
    }
}
