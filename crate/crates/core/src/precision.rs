//! Binary fixed-point reals backed by big integers.
//!
//! A [`Fixed`] value is `mantissa / 2^frac_bits`. Logarithms of exact integers are
//! computed to any requested precision, which is all the canonical-height code needs.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Extra working bits used inside series evaluations.
const GUARD_BITS: u32 = 32;

pub const DEFAULT_FRAC_BITS: u32 = 64;
pub const HIGH_FRAC_BITS: u32 = 256;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Fixed {
    mant: BigInt,
    frac_bits: u32,
}

impl Fixed {
    pub fn zero(frac_bits: u32) -> Self {
        Fixed {
            mant: BigInt::zero(),
            frac_bits,
        }
    }

    pub fn from_int(x: &BigInt, frac_bits: u32) -> Self {
        Fixed {
            mant: x << frac_bits,
            frac_bits,
        }
    }

    /// Rounds `q` toward negative infinity.
    pub fn from_rational(q: &BigRational, frac_bits: u32) -> Self {
        let num = q.numer() << frac_bits;
        Fixed {
            mant: num.div_floor(q.denom()),
            frac_bits,
        }
    }

    pub fn from_f64(x: f64, frac_bits: u32) -> Self {
        let q = BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        Self::from_rational(&q, frac_bits)
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Size of one unit in the last place.
    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn abs(&self) -> Self {
        Fixed {
            mant: self.mant.abs(),
            frac_bits: self.frac_bits,
        }
    }

    pub fn signum(&self) -> i32 {
        match self.mant.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.mant.bits();
        if bits <= 1000 {
            return self.mant.to_f64().unwrap_or(f64::NAN) * self.ulp();
        }
        let shift = bits - 64;
        let top = (&self.mant >> shift).to_f64().unwrap_or(f64::NAN);
        top * ((shift as f64) - self.frac_bits as f64).exp2()
    }

    /// Exact value as a rational.
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mant.clone(), BigInt::one() << self.frac_bits)
    }

    /// `self * q`, rounded toward negative infinity.
    pub fn mul_rational(&self, q: &BigRational) -> Self {
        Fixed {
            mant: (&self.mant * q.numer()).div_floor(q.denom()),
            frac_bits: self.frac_bits,
        }
    }

    pub fn mul_int(&self, x: &BigInt) -> Self {
        Fixed {
            mant: &self.mant * x,
            frac_bits: self.frac_bits,
        }
    }

    pub fn with_frac_bits(&self, frac_bits: u32) -> Self {
        let mant = match frac_bits.cmp(&self.frac_bits) {
            Ordering::Equal => self.mant.clone(),
            Ordering::Greater => &self.mant << (frac_bits - self.frac_bits),
            Ordering::Less => &self.mant >> (self.frac_bits - frac_bits),
        };
        Fixed { mant, frac_bits }
    }

    /// `ln 2` to `frac_bits` bits via `sum 1/(k 2^k)`.
    pub fn ln2(frac_bits: u32) -> Self {
        let w = frac_bits + GUARD_BITS;
        let one = BigInt::one() << w;
        let mut sum = BigInt::zero();
        for k in 1..=(w as u64 + 8) {
            let term = (&one >> k) / BigInt::from(k);
            if term.is_zero() {
                break;
            }
            sum += term;
        }
        Fixed {
            mant: sum,
            frac_bits: w,
        }
        .with_frac_bits(frac_bits)
    }

    /// Natural logarithm of a positive integer.
    ///
    /// Writes `x = 2^b m` with `m` in `[1, 2)`; exact powers of two give exactly `b ln 2`.
    pub fn ln_biguint(x: &BigUint, frac_bits: u32) -> Self {
        assert!(!x.is_zero(), "logarithm of zero");
        let w = frac_bits + GUARD_BITS;
        let b = x.bits() - 1;
        let x = BigInt::from(x.clone());
        let m = if b as u64 <= w as u64 {
            &x << (w as u64 - b)
        } else {
            &x >> (b - w as u64)
        };
        let one = BigInt::one() << w;
        let ln_m = if m == one {
            BigInt::zero()
        } else {
            // ln m = 2 atanh((m - 1) / (m + 1)), with the argument in [0, 1/3)
            let z = ((&m - &one) << w) / (&m + &one);
            let z2 = (&z * &z) >> w;
            let mut power = z;
            let mut sum = BigInt::zero();
            let mut k = 1u64;
            while !power.is_zero() {
                sum += &power / BigInt::from(k);
                power = (&power * &z2) >> w;
                k += 2;
            }
            sum << 1
        };
        let ln2 = Self::ln2(frac_bits).with_frac_bits(w);
        let total = ln2.mant * BigInt::from(b) + ln_m;
        Fixed {
            mant: total,
            frac_bits: w,
        }
        .with_frac_bits(frac_bits)
    }

    pub fn max(self, other: Fixed) -> Fixed {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Fixed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fixed {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.frac_bits == other.frac_bits {
            self.mant.cmp(&other.mant)
        } else {
            let bits = self.frac_bits.max(other.frac_bits);
            self.with_frac_bits(bits)
                .mant
                .cmp(&other.with_frac_bits(bits).mant)
        }
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, rhs: &Fixed) -> Fixed {
        debug_assert_eq!(self.frac_bits, rhs.frac_bits);
        Fixed {
            mant: &self.mant + &rhs.mant,
            frac_bits: self.frac_bits,
        }
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, rhs: &Fixed) -> Fixed {
        debug_assert_eq!(self.frac_bits, rhs.frac_bits);
        Fixed {
            mant: &self.mant - &rhs.mant,
            frac_bits: self.frac_bits,
        }
    }
}

impl Neg for &Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed {
            mant: -&self.mant,
            frac_bits: self.frac_bits,
        }
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed({:e} @{}b)", self.to_f64(), self.frac_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln2_matches_f64() {
        let v = Fixed::ln2(128).to_f64();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn ln_of_powers_of_two_is_exact_multiple() {
        let ln2 = Fixed::ln2(64);
        for k in [0u32, 1, 5, 64, 1000] {
            let x = BigUint::one() << k;
            assert_eq!(Fixed::ln_biguint(&x, 64), ln2.mul_int(&BigInt::from(k)));
        }
    }

    #[test]
    fn ln_matches_f64_for_small_integers() {
        for x in [2u64, 3, 10, 12345, 1 << 40, u64::MAX] {
            let got = Fixed::ln_biguint(&BigUint::from(x), 96).to_f64();
            let want = (x as f64).ln();
            assert!((got - want).abs() < 1e-14 * want.max(1.0), "x={x}");
        }
    }

    #[test]
    fn high_precision_distinguishes_close_logs() {
        // ln(2^200 + 1) - ln(2^200) ~ 2^-200, invisible at 64 bits, visible at 256
        let a = (BigUint::one() << 200u32) + BigUint::one();
        let b = BigUint::one() << 200u32;
        let lo = &Fixed::ln_biguint(&a, 64) - &Fixed::ln_biguint(&b, 64);
        let hi = &Fixed::ln_biguint(&a, 256) - &Fixed::ln_biguint(&b, 256);
        assert!(lo.is_zero());
        assert!(hi.signum() > 0);
    }
}
