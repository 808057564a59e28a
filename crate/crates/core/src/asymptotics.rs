//! Growth of Jordan-block powers, `||Lambda^n v|| ~ n^t |lambda|^n`, and a tail-window
//! comparator for positive sequences.
//!
//! All norms are sup norms (largest absolute entry).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BlockEigenvalue {
    Exact(BigRational),
    Real(f64),
}

impl BlockEigenvalue {
    pub fn abs_f64(&self) -> f64 {
        match self {
            BlockEigenvalue::Exact(x) => x.abs().to_f64().unwrap_or(f64::INFINITY),
            BlockEigenvalue::Real(x) => x.abs(),
        }
    }
}

/// Lower bidiagonal block: `lambda` on the diagonal, `1` below it.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanBlockMatrix {
    pub lambda: BlockEigenvalue,
    /// `l + 1`.
    pub size: usize,
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn binom_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn rational_pow(x: &BigRational, e: u64) -> BigRational {
    num_traits::pow::pow(x.clone(), e as usize)
}

impl JordanBlockMatrix {
    pub fn exact(lambda: BigRational, size: usize) -> Self {
        assert!(size >= 1);
        JordanBlockMatrix {
            lambda: BlockEigenvalue::Exact(lambda),
            size,
        }
    }

    pub fn from_ratio(num: i64, den: i64, size: usize) -> Self {
        Self::exact(BigRational::new(num.into(), den.into()), size)
    }

    pub fn real(lambda: f64, size: usize) -> Self {
        assert!(size >= 1);
        JordanBlockMatrix {
            lambda: BlockEigenvalue::Real(lambda),
            size,
        }
    }

    pub fn ell(&self) -> usize {
        self.size - 1
    }

    /// Coefficient of `N^k` in `Lambda^n`, i.e. `C(n,k) lambda^(n-k)`, exactly.
    pub fn power_coefficient_exact(&self, n: u64, k: u64) -> Option<BigRational> {
        let BlockEigenvalue::Exact(l) = &self.lambda else {
            return None;
        };
        if k > n {
            return Some(BigRational::zero());
        }
        Some(BigRational::from_integer(binom(n, k)) * rational_pow(l, n - k))
    }

    fn power_coefficient_f64(&self, n: u64, k: u64) -> f64 {
        match &self.lambda {
            BlockEigenvalue::Exact(_) => self
                .power_coefficient_exact(n, k)
                .and_then(|c| c.to_f64())
                .unwrap_or(f64::NAN),
            BlockEigenvalue::Real(l) => {
                if k > n {
                    0.0
                } else {
                    binom_f64(n, k) * l.powi((n - k) as i32)
                }
            }
        }
    }

    /// `||Lambda^n||`, exact when `lambda` is rational.
    pub fn power_norm_exact(&self, n: u64) -> Option<BigRational> {
        let BlockEigenvalue::Exact(_) = &self.lambda else {
            return None;
        };
        (0..=(self.ell() as u64).min(n))
            .map(|k| self.power_coefficient_exact(n, k).unwrap().abs())
            .max()
    }

    /// `Lambda^n v` in floating point.
    pub fn apply_power(&self, n: u64, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size);
        (0..self.size)
            .map(|j| {
                (0..=j)
                    .map(|k| self.power_coefficient_f64(n, k as u64) * v[j - k])
                    .sum()
            })
            .collect()
    }

    /// `Lambda^n`, as a dense matrix of floats.
    pub fn power_matrix(&self, n: u64) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| {
                (0..self.size)
                    .map(|j| {
                        if j <= i {
                            self.power_coefficient_f64(n, (i - j) as u64)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// `||Lambda^n|| = max_k C(n,k) |lambda|^(n-k)`.
pub fn block_power_norm(block: &JordanBlockMatrix, n: u64) -> f64 {
    if let Some(x) = block.power_norm_exact(n) {
        return x.to_f64().unwrap_or(f64::INFINITY);
    }
    let l = block.lambda.abs_f64();
    (0..=(block.ell() as u64).min(n))
        .map(|k| binom_f64(n, k) * l.powi((n - k) as i32))
        .fold(0.0, f64::max)
}

/// Exponent pair of the class of sequences `~ n^t lambda^n`; `t = None` is the `-infinity`
/// marker of the zero sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthClass {
    pub t: Option<usize>,
    pub log_lambda: f64,
}

pub fn vector_growth_class<T: Zero>(block: &JordanBlockMatrix, v: &[T]) -> Result<GrowthClass> {
    let expanding = match &block.lambda {
        BlockEigenvalue::Exact(l) => l.abs() > BigRational::one(),
        BlockEigenvalue::Real(l) => l.abs() > 1.0,
    };
    if !expanding {
        return Err(Error::Domain(
            "vector growth class needs |lambda| > 1".into(),
        ));
    }
    if v.len() != block.size {
        return Err(Error::Dimension(format!(
            "vector of length {} for block of size {}",
            v.len(),
            block.size
        )));
    }
    Ok(GrowthClass {
        t: v.iter().position(|x| !x.is_zero()).map(|i| block.ell() - i),
        log_lambda: block.lambda.abs_f64().ln(),
    })
}

/// `n^l |lambda|^(n-l)`, checked against the exact power norm.
pub fn small_block_bound(block: &JordanBlockMatrix, n: u64) -> Result<f64> {
    let ell = block.ell() as u64;
    if n < ell {
        return Err(Error::Domain(format!("need n >= {ell}")));
    }
    match &block.lambda {
        BlockEigenvalue::Exact(l) => {
            if l.abs() >= BigRational::one() {
                return Err(Error::Domain("small block bound needs |lambda| < 1".into()));
            }
            let bound = rational_pow(&BigRational::from_integer(n.into()), ell)
                * rational_pow(&l.abs(), n - ell);
            let actual = block.power_norm_exact(n).unwrap();
            if actual > bound {
                return Err(Error::AssertionFailure(format!(
                    "||Lambda^{n}|| = {actual} exceeds {bound}"
                )));
            }
            Ok(bound.to_f64().unwrap_or(0.0))
        }
        BlockEigenvalue::Real(l) => {
            if l.abs() >= 1.0 {
                return Err(Error::Domain("small block bound needs |lambda| < 1".into()));
            }
            let bound = (n as f64).powi(ell as i32) * l.abs().powi((n - ell) as i32);
            let actual = block_power_norm(block, n);
            if actual > bound * (1.0 + 1e-12) {
                return Err(Error::AssertionFailure(format!(
                    "||Lambda^{n}|| = {actual} exceeds {bound}"
                )));
            }
            Ok(bound)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Ratio bounded above but leaves the band from below.
    Precedes,
    /// Ratio bounded below but leaves the band from above.
    Dominates,
    Equivalent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub verdict: Verdict,
    /// `sup a_n / b_n` over the window.
    pub sup: f64,
    pub inf: f64,
}

/// Compares `a` and `b` on indices `window` through the ratio `a_n / b_n` against the band
/// `[r_lo, r_hi]`. A heuristic with explicit constants, not a proof.
pub fn asymp_compare(
    a: &[f64],
    b: &[f64],
    window: std::ops::Range<usize>,
    band: (f64, f64),
) -> Comparison {
    let ratios: Vec<f64> = window
        .filter(|&i| i < a.len() && i < b.len())
        .map(|i| a[i] / b[i])
        .collect();
    if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Comparison {
            verdict: Verdict::Inconclusive,
            sup: f64::NAN,
            inf: f64::NAN,
        };
    }
    let sup = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let inf = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let (lo, hi) = band;
    let verdict = if inf >= lo && sup <= hi {
        Verdict::Equivalent
    } else if sup <= hi {
        Verdict::Precedes
    } else if inf >= lo {
        Verdict::Dominates
    } else {
        Verdict::Inconclusive
    };
    Comparison { verdict, sup, inf }
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Polynomial exponent of `||Lambda^n v||` estimated by regressing
/// `log ||Lambda^n v|| - n log|lambda|` on `log n`.
pub fn estimate_vector_exponent(block: &JordanBlockMatrix, v: &[f64], ns: std::ops::RangeInclusive<u64>) -> f64 {
    let ll = block.lambda.abs_f64().ln();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ns
        .map(|n| {
            let w = block.apply_power(n, v);
            let norm = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            ((n as f64).ln(), norm.ln() - n as f64 * ll)
        })
        .unzip();
    linear_fit(&xs, &ys).0
}

/// CSV with columns `n,value,reference`.
pub fn growth_csv(rows: &[(u64, f64, f64)]) -> String {
    let mut out = String::from("n,value,reference\n");
    for (n, v, r) in rows {
        out.push_str(&format!("{n},{v:.17e},{r:.17e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matpow(m: &[Vec<f64>], n: u32) -> Vec<Vec<f64>> {
        let k = m.len();
        let mut out: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..n {
            out = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| (0..k).map(|l| out[i][l] * m[l][j]).sum())
                        .collect()
                })
                .collect();
        }
        out
    }

    fn sup(m: &[Vec<f64>]) -> f64 {
        m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    #[test]
    fn power_norm_examples() {
        let b = JordanBlockMatrix::from_ratio(2, 1, 2);
        assert_eq!(block_power_norm(&b, 3), 12.0);
        assert_eq!(sup(&matpow(&b.power_matrix(1), 3)), 12.0);
        let scalar = JordanBlockMatrix::from_ratio(3, 2, 1);
        assert_eq!(block_power_norm(&scalar, 4), 1.5f64.powi(4));
        let unip = JordanBlockMatrix::from_ratio(1, 1, 3);
        assert_eq!(block_power_norm(&unip, 10), 45.0);
        assert_eq!(sup(&matpow(&unip.power_matrix(1), 10)), 45.0);
    }

    #[test]
    fn growth_class_examples() {
        let b = JordanBlockMatrix::from_ratio(2, 1, 2);
        assert_eq!(vector_growth_class(&b, &[1.0, 0.0]).unwrap().t, Some(1));
        assert_eq!(vector_growth_class(&b, &[0.0, 1.0]).unwrap().t, Some(0));
        assert_eq!(vector_growth_class(&b, &[0.0, 0.0]).unwrap().t, None);
        let small = JordanBlockMatrix::from_ratio(1, 1, 2);
        assert!(matches!(
            vector_growth_class(&small, &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn compare_examples() {
        let n: Vec<f64> = (0..=200).map(|i| i as f64).collect();
        let a: Vec<f64> = n.iter().map(|&x| x * 2f64.powf(x)).collect();
        let c = asymp_compare(&a, &a, 50..201, (0.5, 2.0));
        assert_eq!(c.verdict, Verdict::Equivalent);
        assert_eq!((c.sup, c.inf), (1.0, 1.0));
        let p: Vec<f64> = n.iter().map(|&x| 2f64.powf(x)).collect();
        let c = asymp_compare(&p, &a, 50..201, (0.1, 10.0));
        assert_eq!(c.verdict, Verdict::Precedes);
        let b = JordanBlockMatrix::from_ratio(2, 1, 3);
        let norms: Vec<f64> = (0..=200).map(|i| block_power_norm(&b, i)).collect();
        let refs: Vec<f64> = n.iter().map(|&x| x * x * 2f64.powf(x)).collect();
        let c = asymp_compare(&norms, &refs, 50..201, (0.1, 0.2));
        assert_eq!(c.verdict, Verdict::Equivalent);
        assert!((c.sup - 0.125).abs() < 0.01 && c.sup <= 0.125);
    }

    #[test]
    fn small_block_examples() {
        let b = JordanBlockMatrix::from_ratio(1, 2, 2);
        assert_eq!(small_block_bound(&b, 4).unwrap(), 0.5);
        assert_eq!(block_power_norm(&b, 4), 0.5);
        let s = JordanBlockMatrix::from_ratio(1, 2, 1);
        assert_eq!(small_block_bound(&s, 3).unwrap(), 0.125);
        assert_eq!(block_power_norm(&s, 3), 0.125);
        let b3 = JordanBlockMatrix::from_ratio(1, 2, 3);
        assert!(block_power_norm(&b3, 10) <= small_block_bound(&b3, 10).unwrap());
        assert!(matches!(
            small_block_bound(&JordanBlockMatrix::from_ratio(2, 1, 1), 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exponent_regression_on_unit_vectors() {
        for size in 1..=4usize {
            let b = JordanBlockMatrix::from_ratio(2, 1, size);
            for i in 0..size {
                let mut v = vec![0.0; size];
                v[i] = 1.0;
                let t = vector_growth_class(&b, &v).unwrap().t.unwrap() as f64;
                let est = estimate_vector_exponent(&b, &v, 50..=200);
                assert!((est - t).abs() <= 0.1, "size {size} e_{i}: {est} vs {t}");
            }
        }
    }

    #[test]
    fn binomial_envelope_with_eigenvalue_factor() {
        // n^l |lambda|^n / (2 l! |lambda|^l) <= ||Lambda^n|| <= n^l |lambda|^n from n = 2l(l+1)
        for (num, den) in [(1, 1), (3, 2), (2, 1), (3, 1)] {
            for ell in 0..=3u64 {
                let b = JordanBlockMatrix::from_ratio(num, den, ell as usize + 1);
                let l = num as f64 / den as f64;
                let fact: f64 = (1..=ell).map(|x| x as f64).product();
                let lo = 1.0 / (2.0 * fact * l.powi(ell as i32));
                for n in (2 * ell * (ell + 1)).max(1)..=300 {
                    let r = block_power_norm(&b, n) / ((n as f64).powi(ell as i32) * l.powi(n as i32));
                    assert!(r >= lo && r <= 1.0 + 1e-12, "lambda {l} l {ell} n {n}: {r}");
                }
            }
        }
    }

    #[test]
    fn real_and_exact_agree() {
        let e = JordanBlockMatrix::from_ratio(3, 2, 3);
        let r = JordanBlockMatrix::real(1.5, 3);
        for n in [0u64, 1, 7, 40] {
            let (a, b) = (block_power_norm(&e, n), block_power_norm(&r, n));
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    proptest! {
        #[test]
        fn sup_norm_is_submultiplicative_up_to_dimension(
            k in 1usize..6,
            seed in proptest::collection::vec(-100.0f64..100.0, 42),
        ) {
            let a: Vec<Vec<f64>> = (0..k).map(|i| seed[i * k..i * k + k].to_vec()).collect();
            let v: Vec<f64> = seed[36..36 + k].to_vec();
            let av: Vec<f64> = a.iter().map(|r| r.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
            let lhs = av.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let rhs = (k as f64 + 1.0) * sup(&a) * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn closed_form_power_matches_repeated_multiplication(
            num in 1i64..7, den in 1i64..4, size in 1usize..5, n in 0u32..25,
        ) {
            let b = JordanBlockMatrix::from_ratio(num, den, size);
            let direct = sup(&matpow(&b.power_matrix(1), n));
            let closed = block_power_norm(&b, n as u64);
            prop_assert!((direct - closed).abs() <= 1e-9 * closed.max(1.0));
        }
    }
}
