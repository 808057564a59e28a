//! Weil heights on products of projective spaces.
//!
//! The representative is fixed once: for a normalized point the height of factor `j` is
//! `log max_i |x_{j,i}|`, and a divisor class `D = sum c_j H_j` has `h_D = sum c_j h_j`.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iterate, MorphismSpec, OrbitSegment, ProjectiveTuplePoint};
use crate::precision::Fixed;

/// Rational coefficient vector in the hyperplane-class basis `H_1, ..., H_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DivisorClass {
    coeffs: Vec<BigRational>,
}

impl DivisorClass {
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        DivisorClass { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        DivisorClass {
            coeffs: coeffs
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        }
    }

    /// `H_1 + ... + H_k`.
    pub fn ones(k: usize) -> Self {
        Self::from_ints(&vec![1; k])
    }

    pub fn zero(k: usize) -> Self {
        Self::from_ints(&vec![0; k])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Ample on a product of projective spaces iff every coefficient is positive.
    pub fn is_ample(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_positive())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: &BigRational, other: &DivisorClass, b: &BigRational) -> DivisorClass {
        DivisorClass {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn check_dim(&self, k: usize) -> Result<()> {
        if self.coeffs.len() != k {
            return Err(Error::Dimension(format!(
                "divisor class has {} coefficients, space has {k} factors",
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}

/// `ln |x|` in double precision, valid for integers of any size. Returns `-inf` for zero.
pub fn log_abs(x: &BigInt) -> f64 {
    log_biguint(x.magnitude())
}

pub fn log_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Per-factor heights `log max_i |x_{j,i}|`.
pub fn factor_heights(p: &ProjectiveTuplePoint) -> Vec<f64> {
    (0..p.factors().len())
        .map(|j| log_biguint(&p.factor_max_abs(j)))
        .collect()
}

/// Per-factor heights in fixed-point precision.
pub fn factor_heights_fixed(p: &ProjectiveTuplePoint, frac_bits: u32) -> Vec<Fixed> {
    (0..p.factors().len())
        .map(|j| Fixed::ln_biguint(&p.factor_max_abs(j), frac_bits))
        .collect()
}

/// Sum of the factor heights.
pub fn standard_height(p: &ProjectiveTuplePoint) -> f64 {
    factor_heights(p).iter().sum()
}

pub fn height_wrt(p: &ProjectiveTuplePoint, d: &DivisorClass) -> Result<f64> {
    d.check_dim(p.factors().len())?;
    Ok(dot(&d.as_f64(), &factor_heights(p)))
}

/// `h_D` evaluated from precomputed fixed-point factor heights.
pub fn divisor_height_fixed(factor_h: &[Fixed], d: &DivisorClass) -> Fixed {
    let bits = factor_h.first().map(|h| h.frac_bits()).unwrap_or(0);
    factor_h
        .iter()
        .zip(d.coeffs())
        .fold(Fixed::zero(bits), |acc, (h, c)| &acc + &h.mul_rational(c))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `h_D(f^n(P))` for `n = 0..=N`, with the exact integer data it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightSequence {
    pub divisor: DivisorClass,
    pub values: Vec<f64>,
    /// `max_i |x_{j,i}|` per orbit index and factor.
    pub maxima: Vec<Vec<BigUint>>,
}

impl HeightSequence {
    pub fn from_orbit(seg: &OrbitSegment, d: &DivisorClass) -> Result<Self> {
        let k = seg.base().factors().len();
        d.check_dim(k)?;
        let maxima: Vec<Vec<BigUint>> = seg
            .points
            .iter()
            .map(|p| (0..k).map(|j| p.factor_max_abs(j)).collect())
            .collect();
        let coeffs = d.as_f64();
        let values = maxima
            .iter()
            .map(|row| dot(&coeffs, &row.iter().map(log_biguint).collect::<Vec<_>>()))
            .collect();
        Ok(HeightSequence {
            divisor: d.clone(),
            values,
            maxima,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h_D(f^n(P))` recomputed at `frac_bits` of fixed-point precision.
    pub fn value_fixed(&self, n: usize, frac_bits: u32) -> Fixed {
        let hs: Vec<Fixed> = self.maxima[n]
            .iter()
            .map(|m| Fixed::ln_biguint(m, frac_bits))
            .collect();
        divisor_height_fixed(&hs, &self.divisor)
    }

    /// CSV with columns `n,h,residual`, the residual being
    /// `log max(1, h_n) - (n log(alpha) + t log(n) + c)` when a fitted curve is supplied.
    pub fn to_csv(&self, curve: Option<LogLinearCurve>) -> String {
        let mut out = String::from("n,h,residual\n");
        for (n, h) in self.values.iter().enumerate() {
            let residual = match curve {
                Some(c) if n > 0 => format!("{:.12e}", h.max(1.0).ln() - c.at(n as f64)),
                _ => String::new(),
            };
            let _ = writeln!(out, "{n},{h:.12e},{residual}");
        }
        out
    }
}

/// `n log(alpha) + t log(n) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearCurve {
    pub log_alpha: f64,
    pub t: f64,
    pub c: f64,
}

impl LogLinearCurve {
    pub fn at(&self, n: f64) -> f64 {
        n * self.log_alpha + self.t * n.ln() + self.c
    }
}

pub fn height_sequence(
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    d: &DivisorClass,
    n: usize,
) -> Result<HeightSequence> {
    d.check_dim(f.space().factors())?;
    let seg = iterate(f, p, n)?;
    HeightSequence::from_orbit(&seg, d)
}

/// Outcome of comparing `|h_D|` against `max(1, h_H)` along an orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub empirical_sup: f64,
    pub argmax: usize,
    /// `max_j |D_j| / min_j H_j`.
    pub a_priori: f64,
}

/// Checks `|h_D(f^n P)| <= C max(1, h_H(f^n P))` with the a-priori constant `C`.
pub fn dominance_check(seq_d: &HeightSequence, seq_h: &HeightSequence) -> Result<DominanceReport> {
    if seq_d.len() != seq_h.len() {
        return Err(Error::Dimension("sequences have different lengths".into()));
    }
    if !seq_h.divisor.is_ample() {
        return Err(Error::Invalid("reference divisor must be ample".into()));
    }
    let max_d = seq_d
        .divisor
        .as_f64()
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let min_h = seq_h
        .divisor
        .as_f64()
        .iter()
        .fold(f64::INFINITY, |m, &c| m.min(c));
    let a_priori = max_d / min_h;
    let (mut sup, mut argmax) = (0.0f64, 0usize);
    for (n, (d, h)) in seq_d.values.iter().zip(&seq_h.values).enumerate() {
        let r = d.abs() / h.max(1.0);
        if r > sup {
            sup = r;
            argmax = n;
        }
    }
    if sup > a_priori * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::AssertionFailure(format!(
            "dominance ratio {sup} at n = {argmax} exceeds a-priori constant {a_priori}"
        )));
    }
    Ok(DominanceReport {
        empirical_sup: sup,
        argmax,
        a_priori,
    })
}
