//! Arithmetic over GF(2^8).
//!
//! Elements are bytes read as polynomials over GF(2), reduced modulo
//! x^8 + x^4 + x^3 + x + 1 (`0x11B`). Multiplication goes through
//! log/antilog tables built at compile time with generator `0x03`
//! (`0x02` is not primitive for this polynomial).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub, SubAssign};

use thiserror::Error;

/// Reduction polynomial x^8 + x^4 + x^3 + x + 1.
pub const POLYNOMIAL: u16 = 0x11B;

const GENERATOR: u8 = 0x03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("division by zero")]
    DivisionByZero,
}

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const fn xtime_mul(a: u8, b: u8) -> u8 {
    // Shift-and-add multiply, used only to seed the tables.
    let mut a = a as u16;
    let mut b = b;
    let mut acc: u16 = 0;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a <<= 1;
        if a & 0x100 != 0 {
            a ^= POLYNOMIAL;
        }
        b >>= 1;
    }
    acc as u8
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u8 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x;
        log[x as usize] = i as u8;
        x = xtime_mul(x, GENERATOR);
        i += 1;
    }
    // Doubled exp table so log[a] + log[b] never needs a modulo.
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Tables { exp, log }
}

static TABLES: Tables = build_tables();

/// An element of GF(2^8).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub const fn new(value: u8) -> Self {
        Gf256(value)
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Fails for zero.
    pub fn inv(self) -> Result<Gf256, FieldError> {
        if self.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let log = TABLES.log[self.0 as usize] as usize;
        Ok(Gf256(TABLES.exp[255 - log]))
    }

    pub fn checked_div(self, rhs: Gf256) -> Result<Gf256, FieldError> {
        if rhs.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        Ok(self * rhs.inv()?)
    }

    /// `self` raised to `exp`, with 0^0 = 1.
    pub fn pow(self, exp: u32) -> Gf256 {
        if exp == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let log = TABLES.log[self.0 as usize] as u64;
        Gf256(TABLES.exp[((log * exp as u64) % 255) as usize])
    }
}

#[inline]
pub fn add(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(a.0 ^ b.0)
}

#[inline]
pub fn mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    let idx = TABLES.log[a.0 as usize] as usize + TABLES.log[b.0 as usize] as usize;
    Gf256(TABLES.exp[idx])
}

pub fn inv(a: Gf256) -> Result<Gf256, FieldError> {
    a.inv()
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl From<Gf256> for u8 {
    fn from(v: Gf256) -> Self {
        v.0
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        add(self, rhs)
    }
}

impl AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        *self = add(*self, rhs);
    }
}

// Characteristic 2: subtraction is addition.
impl Sub for Gf256 {
    type Output = Gf256;
    #[inline]
    fn sub(self, rhs: Gf256) -> Gf256 {
        add(self, rhs)
    }
}

impl SubAssign for Gf256 {
    #[inline]
    fn sub_assign(&mut self, rhs: Gf256) {
        *self = add(*self, rhs);
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = mul(*self, rhs);
    }
}

impl Div for Gf256 {
    type Output = Gf256;

    /// Panics on division by zero, like integer division.
    fn div(self, rhs: Gf256) -> Gf256 {
        self.checked_div(rhs).expect("division by zero in GF(2^8)")
    }
}

/// `dst[i] += c * src[i]` over the common prefix of both slices.
pub fn mul_add_slice(dst: &mut [u8], src: &[u8], c: Gf256) {
    match c.0 {
        0 => {}
        1 => {
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= *s;
            }
        }
        _ => {
            let log_c = TABLES.log[c.0 as usize] as usize;
            for (d, &s) in dst.iter_mut().zip(src) {
                if s != 0 {
                    *d ^= TABLES.exp[log_c + TABLES.log[s as usize] as usize];
                }
            }
        }
    }
}

/// `buf[i] *= c` in place.
pub fn scale_slice(buf: &mut [u8], c: Gf256) {
    match c.0 {
        0 => buf.fill(0),
        1 => {}
        _ => {
            let log_c = TABLES.log[c.0 as usize] as usize;
            for b in buf.iter_mut() {
                if *b != 0 {
                    *b = TABLES.exp[log_c + TABLES.log[*b as usize] as usize];
                }
            }
        }
    }
}
