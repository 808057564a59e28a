//! Canonical heights: the polarized height `lim h_H(f^n P) / d^n`, the vector heights
//! `lim Lambda^{-n} h_D(f^n P)` attached to Jordan chains, and the double canonical height
//! along the orbit of a commuting map.
//!
//! All limits are computed as `Lambda^{-N} h(f^N P)` from exact orbit points and fixed-point
//! logarithms, with an explicit tail bound driven by the per-factor step defect
//! `h_i(f(Q)) - sum_j d_ij h_j(Q)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{
    verify_commutation, CommutationEvidence, MorphismSpec, Orbit, ProjectiveTuplePoint,
    DEFAULT_BIT_BUDGET,
};
use crate::heights::DivisorClass;
use crate::linalg::{self, mat_vec};
use crate::poly::SymbolicBudget;
use crate::precision::{Fixed, DEFAULT_FRAC_BITS};
use crate::profile::GrowthProfile;
use crate::spectrum::JordanSpectrum;

/// Hard cap on the truncation depth.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalOptions {
    pub tol: f64,
    pub precision_bits: u32,
    pub max_depth: usize,
    pub min_steps: usize,
    /// Per-point bit budget for orbit points.
    pub bit_budget: u64,
    /// Return a flagged partial estimate instead of failing when the budget runs out.
    pub allow_partial: bool,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions {
            tol: 1e-6,
            precision_bits: DEFAULT_FRAC_BITS,
            max_depth: MAX_DEPTH,
            min_steps: 2,
            bit_budget: DEFAULT_BIT_BUDGET,
            allow_partial: false,
        }
    }
}

impl CanonicalOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }
}

/// Factor heights along a forward orbit, in fixed point. Only the last point is kept.
#[derive(Debug, Clone)]
pub struct OrbitHeights<'a> {
    map: &'a MorphismSpec,
    frac_bits: u32,
    bit_budget: u64,
    last: ProjectiveTuplePoint,
    heights: Vec<Vec<Fixed>>,
    bits: Vec<Vec<u64>>,
    exhausted: bool,
}

impl<'a> OrbitHeights<'a> {
    pub fn new(map: &'a MorphismSpec, base: ProjectiveTuplePoint, frac_bits: u32, bit_budget: u64) -> Self {
        let mut o = OrbitHeights {
            map,
            frac_bits,
            bit_budget,
            last: base.clone(),
            heights: Vec::new(),
            bits: Vec::new(),
            exhausted: false,
        };
        o.record(&base);
        o
    }

    fn record(&mut self, p: &ProjectiveTuplePoint) {
        let k = p.factors().len();
        let maxima: Vec<_> = (0..k).map(|j| p.factor_max_abs(j)).collect();
        self.bits.push(maxima.iter().map(|m| m.bits()).collect());
        self.heights.push(
            maxima
                .iter()
                .map(|m| Fixed::ln_biguint(m, self.frac_bits))
                .collect(),
        );
    }

    pub fn map(&self) -> &MorphismSpec {
        self.map
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Number of orbit points computed so far.
    pub fn computed(&self) -> usize {
        self.heights.len()
    }

    pub fn last_point(&self) -> &ProjectiveTuplePoint {
        &self.last
    }

    /// Factor heights of `f^n(P)`, or `None` past the bit budget.
    pub fn get(&mut self, n: usize) -> Result<Option<&[Fixed]>> {
        while self.heights.len() <= n {
            if self.exhausted {
                return Ok(None);
            }
            let next = self
                .map
                .evaluate(&self.last)
                .map_err(|e| e.at_step(self.heights.len() - 1))?;
            if next.bit_size() > self.bit_budget {
                self.exhausted = true;
                return Ok(None);
            }
            self.record(&next);
            self.last = next;
        }
        Ok(Some(&self.heights[n]))
    }

    /// Bound on the rounding error of the stored logarithm of factor `j` at index `n`.
    pub fn log_error(&self, n: usize, j: usize) -> f64 {
        let w = (self.frac_bits + 32) as f64;
        let b = self.bits[n][j] as f64;
        ((b + 1.0) * (w + 9.0) * (-32f64).exp2() + 1.0) * (-(self.frac_bits as f64)).exp2()
    }

    /// `h_i(f^{n+1}P) - sum_j d_ij h_j(f^n P)`; needs index `n + 1` computed.
    pub fn step_defect(&self, n: usize, i: usize) -> f64 {
        let row = &self.map.multidegree_matrix()[i];
        let predicted = row
            .iter()
            .zip(&self.heights[n])
            .fold(Fixed::zero(self.frac_bits), |acc, (&d, h)| {
                &acc + &h.mul_int(&BigInt::from(d))
            });
        (&self.heights[n + 1][i] - &predicted).to_f64()
    }

    /// `h_D(f^n P)` and a bound on its rounding error.
    pub fn divisor_height(&self, n: usize, d: &DivisorClass) -> (Fixed, f64) {
        let h = crate::heights::divisor_height_fixed(&self.heights[n], d);
        let ulp = (-(self.frac_bits as f64)).exp2();
        let err = d
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| c.abs().to_f64().unwrap_or(f64::INFINITY) * self.log_error(n, j) + ulp)
            .sum();
        (h, err)
    }
}

/// Step-defect constants per output factor.
#[derive(Debug, Clone, PartialEq)]
pub struct StepConstants {
    /// Rigorous upper bound `log(T_i M_i)`.
    pub upper: Vec<f64>,
    /// Largest observed height loss `-defect` on the orbit segment.
    pub lower_observed: Vec<f64>,
    /// The map is a factorwise power map, so every defect is exactly zero.
    pub exact_zero: bool,
}

impl StepConstants {
    pub fn observe(orbit: &OrbitHeights<'_>, upto: usize) -> Self {
        let f = orbit.map();
        let k = f.space().factors();
        let exact_zero = f.factorwise_power_degrees().is_some();
        let mut lower_observed = vec![0.0f64; k];
        for n in 0..upto.min(orbit.computed().saturating_sub(1)) {
            for (i, lo) in lower_observed.iter_mut().enumerate() {
                *lo = lo.max(-orbit.step_defect(n, i));
            }
        }
        StepConstants {
            upper: f.upper_step_defects(),
            lower_observed,
            exact_zero,
        }
    }

    /// `B_i = max(U_i, L_i)`, or all zero for power maps.
    pub fn per_factor(&self) -> Vec<f64> {
        if self.exact_zero {
            return vec![0.0; self.upper.len()];
        }
        self.upper
            .iter()
            .zip(&self.lower_observed)
            .map(|(u, l)| u.max(*l))
            .collect()
    }

    /// Factors whose observed loss exceeds the rigorous upper constant.
    pub fn exceeded(&self) -> Vec<usize> {
        if self.exact_zero {
            return Vec::new();
        }
        (0..self.upper.len())
            .filter(|&i| self.lower_observed[i] > self.upper[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalHeightEstimate {
    pub value: f64,
    pub fixed: Fixed,
    pub error_bound: f64,
    /// Truncation depth `N`.
    pub terms_used: usize,
    /// Vector step-defect constant `C_0` used in the tail bound.
    pub step_constant: f64,
    /// The step constant rests on an empirical lower bound.
    pub heuristic: bool,
    /// Budget ran out before the tail bound met the tolerance.
    pub partial: bool,
    pub warnings: Vec<String>,
}

impl CanonicalHeightEstimate {
    pub fn to_json(&self) -> Value {
        json!({
            "value": format!("{:.17e}", self.value),
            "error_bound": format!("{:.3e}", self.error_bound),
            "terms_used": self.terms_used,
            "step_constant": format!("{:.6e}", self.step_constant + 0.0),
            "heuristic": self.heuristic,
            "partial": self.partial,
            "warnings": self.warnings,
        })
    }
}

fn binom(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Entries of `Lambda^{-n}` below the diagonal: `w_k = (-1)^k C(n+k-1, k) lambda^{-n-k}`.
fn inverse_power_weights(lambda: &BigRational, n: u64, ell: usize) -> Vec<BigRational> {
    let inv = lambda.recip();
    (0..=ell as u64)
        .map(|k| {
            if k == 0 {
                return num_traits::pow::pow(inv.clone(), n as usize);
            }
            if n == 0 {
                return BigRational::zero();
            }
            let c = BigRational::from_integer(binom(n + k - 1, k));
            let sign = if k % 2 == 1 { -BigRational::one() } else { BigRational::one() };
            sign * c * num_traits::pow::pow(inv.clone(), (n + k) as usize)
        })
        .collect()
}

/// `||Lambda^{-m}||`, with `mu = 1/|lambda|`.
fn inverse_power_norm(mu: f64, m: u64, ell: usize) -> f64 {
    (0..=ell as u64)
        .map(|k| {
            if k == 0 {
                return mu.powi(m as i32);
            }
            if m == 0 {
                return 0.0;
            }
            let c = (0..k).fold(1.0, |acc, i| acc * (m + k - 1 - i) as f64 / (i + 1) as f64);
            c * mu.powi((m + k) as i32)
        })
        .fold(0.0, f64::max)
}

/// Upper bound on `sum_{m > n} ||Lambda^{-m}||`.
fn inverse_tail_sum(mu: f64, n: u64, ell: usize) -> f64 {
    let mut sum = 0.0;
    let mut m = n + 1;
    loop {
        let rho = (m + ell as u64) as f64 / m as f64 * mu;
        // dominate the max over k by the sum over k, whose terms have ratio <= rho
        let b: f64 = (0..=ell as u64)
            .map(|k| {
                let c = (0..k).fold(1.0, |acc, i| acc * (m + k - 1 - i) as f64 / (i + 1) as f64);
                c * mu.powi((m + k) as i32)
            })
            .sum();
        if rho < 0.5 || (rho < 1.0 && b <= 1e-6 * sum) || m > n + 100_000 {
            if rho >= 1.0 {
                return f64::INFINITY;
            }
            return sum + b / (1.0 - rho);
        }
        sum += inverse_power_norm(mu, m, ell);
        m += 1;
    }
}

/// `lim Lambda^{-N} h_D(f^N P)` for the chain `D_0..D_l` of eigenvalue `lambda`.
pub fn chain_limit(
    orbit: &mut OrbitHeights<'_>,
    chain: &[DivisorClass],
    lambda: &BigRational,
    opts: &CanonicalOptions,
) -> Result<Vec<CanonicalHeightEstimate>> {
    if lambda.abs() <= BigRational::one() {
        return Err(Error::Domain("canonical heights need |lambda| > 1".into()));
    }
    if chain.is_empty() {
        return Err(Error::Invalid("empty chain".into()));
    }
    let k = orbit.map().space().factors();
    for d in chain {
        d.check_dim(k)?;
    }
    let ell = chain.len() - 1;
    let mu = lambda.abs().recip().to_f64().unwrap();
    let max_depth = opts.max_depth.min(MAX_DEPTH);
    let mut n = opts.min_steps.min(max_depth);
    let mut partial = false;
    // deepest index reached, and whether the tail bound met the tolerance there
    loop {
        let reached = orbit.get(n)?.is_some();
        if !reached {
            if orbit.computed() == 0 {
                return Err(Error::Resource("base point exceeds the bit budget".into()));
            }
            n = orbit.computed() - 1;
            partial = true;
        }
        let consts = StepConstants::observe(orbit, n);
        let b = consts.per_factor();
        let c0 = chain
            .iter()
            .map(|d| {
                d.coeffs()
                    .iter()
                    .zip(&b)
                    .map(|(c, bi)| c.abs().to_f64().unwrap_or(f64::INFINITY) * bi)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let tail = if c0 == 0.0 {
            0.0
        } else {
            (ell as f64 + 1.0) * c0 * inverse_tail_sum(mu, n as u64, ell)
        };
        let done = tail < opts.tol;
        if !done && !partial && n < max_depth {
            n += 1;
            continue;
        }
        if !done && !opts.allow_partial {
            return Err(Error::Resource(format!(
                "tail bound {tail:.3e} above tolerance {:.3e} at depth {n}{}",
                opts.tol,
                if partial { " (bit budget exhausted)" } else { "" }
            )));
        }
        let partial = !done;
        let weights = inverse_power_weights(lambda, n as u64, ell);
        let heights: Vec<(Fixed, f64)> = chain.iter().map(|d| orbit.divisor_height(n, d)).collect();
        let ulp = (-(orbit.frac_bits() as f64)).exp2();
        let mut warnings = Vec::new();
        for i in consts.exceeded() {
            warnings.push(format!(
                "observed step defect on factor {i} exceeds log(T*M); constant re-estimated from the orbit"
            ));
        }
        if partial {
            warnings.push(format!("partial estimate at depth {n}: tail bound {tail:.3e}"));
        }
        let estimates = (0..=ell)
            .map(|j| {
                let mut v = Fixed::zero(orbit.frac_bits());
                let mut rounding = (j as f64 + 1.0) * ulp;
                for (kk, w) in weights.iter().enumerate().take(j + 1) {
                    let (h, e) = &heights[j - kk];
                    v = &v + &h.mul_rational(w);
                    rounding += w.abs().to_f64().unwrap_or(f64::INFINITY) * e;
                }
                CanonicalHeightEstimate {
                    value: v.to_f64(),
                    fixed: v,
                    error_bound: tail + rounding,
                    terms_used: n,
                    step_constant: c0,
                    heuristic: !consts.exact_zero,
                    partial,
                    warnings: warnings.clone(),
                }
            })
            .collect();
        return Ok(estimates);
    }
}

/// `f` together with an ample class `H` and `d > 1` with `f^* H = d H` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedData {
    f: MorphismSpec,
    h: DivisorClass,
    d: BigRational,
}

impl PolarizedData {
    pub fn new(f: MorphismSpec, h: DivisorClass) -> Result<Self> {
        h.check_dim(f.space().factors())?;
        if !h.is_ample() {
            return Err(Error::Hypothesis("polarization needs an ample class".into()));
        }
        let image = mat_vec(&f.pullback_matrix(), h.coeffs());
        let d = &image[0] / &h.coeffs()[0];
        if image.iter().zip(h.coeffs()).any(|(a, b)| a != &(&d * b)) {
            return Err(Error::Hypothesis("f^* H is not a multiple of H".into()));
        }
        if d <= BigRational::one() {
            return Err(Error::Hypothesis(format!(
                "f^* H = {} H with d <= 1",
                linalg::format_rational(&d)
            )));
        }
        Ok(PolarizedData { f, h, d })
    }

    pub fn map(&self) -> &MorphismSpec {
        &self.f
    }

    pub fn divisor(&self) -> &DivisorClass {
        &self.h
    }

    pub fn degree(&self) -> &BigRational {
        &self.d
    }
}

pub fn polarized_canonical_height(
    pd: &PolarizedData,
    p: &ProjectiveTuplePoint,
    opts: &CanonicalOptions,
) -> Result<CanonicalHeightEstimate> {
    if opts.tol <= 0.0 {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let mut orbit = OrbitHeights::new(&pd.f, p.clone(), opts.precision_bits, opts.bit_budget);
    let mut est = chain_limit(&mut orbit, std::slice::from_ref(&pd.h), &pd.d, opts)?;
    Ok(est.remove(0))
}

/// `hat h_{D_{i,0}}, ..., hat h_{D_{i,l_i}}` for one block with `|lambda_i| > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainHeightVector {
    pub block: usize,
    pub eigenvalue: BigRational,
    pub components: Vec<CanonicalHeightEstimate>,
}

impl ChainHeightVector {
    pub fn values(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.value).collect()
    }

    pub fn error_bounds(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.error_bound).collect()
    }

    pub fn heuristic(&self) -> bool {
        self.components.iter().any(|c| c.heuristic)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "block": self.block,
            "eigenvalue": linalg::format_rational(&self.eigenvalue),
            "components": self.components.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

fn exact_big_block<'s>(
    s: &'s JordanSpectrum,
    block: usize,
) -> Result<(&'s BigRational, Vec<DivisorClass>)> {
    let b = s
        .blocks
        .get(block)
        .ok_or_else(|| Error::Invalid(format!("no block {block}")))?;
    let lambda = b.eigenvalue.as_exact().ok_or(Error::InexactSpectrum)?;
    let chain = b.chain_divisors().ok_or(Error::InexactSpectrum)?;
    Ok((lambda, chain))
}

pub fn chain_canonical_heights(
    s: &JordanSpectrum,
    block: usize,
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    opts: &CanonicalOptions,
) -> Result<ChainHeightVector> {
    let mut orbit = OrbitHeights::new(f, p.clone(), opts.precision_bits, opts.bit_budget);
    chain_heights_on(&mut orbit, s, block, opts)
}

fn chain_heights_on(
    orbit: &mut OrbitHeights<'_>,
    s: &JordanSpectrum,
    block: usize,
    opts: &CanonicalOptions,
) -> Result<ChainHeightVector> {
    let (lambda, chain) = exact_big_block(s, block)?;
    if lambda.abs() <= BigRational::one() {
        return Err(Error::Domain(format!(
            "block {block} has |lambda| <= 1; canonical heights exist only for expanding blocks"
        )));
    }
    let components = chain_limit(orbit, &chain, lambda, opts)?;
    Ok(ChainHeightVector {
        block,
        eigenvalue: lambda.clone(),
        components,
    })
}

/// Chain heights for every block with `|lambda_i| > 1`, sharing one orbit.
pub fn expanding_chain_heights(
    s: &JordanSpectrum,
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    opts: &CanonicalOptions,
) -> Result<Vec<ChainHeightVector>> {
    if !s.exact {
        return Err(Error::InexactSpectrum);
    }
    let mut orbit = OrbitHeights::new(f, p.clone(), opts.precision_bits, opts.bit_budget);
    (0..s.blocks.len())
        .filter(|&i| s.blocks[i].eigenvalue.is_expanding())
        .map(|i| chain_heights_on(&mut orbit, s, i, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallBlockReport {
    pub block: usize,
    /// `||h_D(f^n P)||` for `n = 0..=N`.
    pub norms: Vec<f64>,
    /// `sup_{1 <= n <= N} ||h_D(f^n P)|| / n^(l+1)`.
    pub sup_ratio: f64,
    pub bounded: bool,
}

pub fn small_block_growth_check(
    s: &JordanSpectrum,
    block: usize,
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    n_max: usize,
) -> Result<SmallBlockReport> {
    let (lambda, chain) = exact_big_block(s, block)?;
    if lambda.abs() > BigRational::one() {
        return Err(Error::Domain(format!("block {block} has |lambda| > 1")));
    }
    let ell = chain.len() - 1;
    let mut orbit = Orbit::new(f, p.clone(), DEFAULT_BIT_BUDGET);
    let mut norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let Some(q) = orbit.get(n)? else {
            break;
        };
        let hs = crate::heights::factor_heights(q);
        let norm = chain
            .iter()
            .map(|d| {
                d.as_f64()
                    .iter()
                    .zip(&hs)
                    .map(|(c, h)| c * h)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        norms.push(norm);
    }
    let sup_ratio = norms
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, v)| v / (n as f64).powi(ell as i32 + 1))
        .fold(0.0, f64::max);
    Ok(SmallBlockReport {
        block,
        norms,
        sup_ratio,
        bounded: sup_ratio.is_finite(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleCanonicalEstimate {
    /// Minimum of the window values.
    pub estimate: f64,
    pub error_bound: f64,
    /// `(n, hat h_{f,H}(g^n P) / (n^t alpha^n))` over the tail window.
    pub window: Vec<(usize, f64)>,
    pub commutation: CommutationEvidence,
}

/// `liminf hat h_{f,H}(g^n P) / (n^t alpha^n)`, estimated by the minimum over `[N/2, N]`.
pub fn double_canonical_height(
    pd: &PolarizedData,
    g: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    profile_g: &GrowthProfile,
    n_max: usize,
    opts: &CanonicalOptions,
) -> Result<DoubleCanonicalEstimate> {
    let alpha = profile_g
        .alpha_f64()
        .filter(|a| *a > 1.0)
        .ok_or_else(|| Error::Hypothesis("alpha_g(P) must exceed 1".into()))?;
    let t = profile_g
        .t
        .ok_or_else(|| Error::Hypothesis("t_g(P) undefined".into()))?;
    if n_max < 2 {
        return Err(Error::Invalid("window needs N >= 2".into()));
    }
    let mut orbit = Orbit::new(g, p.clone(), opts.bit_budget);
    let samples: Vec<ProjectiveTuplePoint> = (0..4)
        .map_while(|n| orbit.get(n).ok().flatten().cloned())
        .collect();
    let commutation = verify_commutation(pd.map(), g, &samples, &SymbolicBudget::default())?;
    let mut window = Vec::new();
    let mut error_bound: f64 = 0.0;
    for n in n_max / 2..=n_max {
        let r = orbit
            .get(n)?
            .ok_or_else(|| Error::Resource(format!("g^{n}(P) exceeds the bit budget")))?
            .clone();
        let est = polarized_canonical_height(pd, &r, opts)?;
        let scale = (n as f64).powi(t as i32) * alpha.powi(n as i32);
        window.push((n, est.value / scale));
        error_bound = error_bound.max(est.error_bound / scale);
    }
    let estimate = window.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    if estimate <= error_bound {
        return Err(Error::AssertionFailure(format!(
            "double canonical height estimate {estimate:e} is not positive"
        )));
    }
    Ok(DoubleCanonicalEstimate {
        estimate,
        error_bound,
        window,
        commutation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{iterate, ProductSpace};
    use crate::heights::{height_sequence, height_wrt};
    use crate::poly::Polynomial;
    use crate::spectrum::analyze;
    use std::f64::consts::LN_2;

    fn p1() -> ProductSpace {
        ProductSpace::projective_line()
    }

    fn squaring() -> PolarizedData {
        PolarizedData::new(
            MorphismSpec::power_map(&p1(), &[2]).unwrap(),
            DivisorClass::from_ints(&[1]),
        )
        .unwrap()
    }

    fn pt(c: &[i64]) -> ProjectiveTuplePoint {
        ProjectiveTuplePoint::from_i64(&p1(), &[c]).unwrap()
    }

    /// `(x0^2 + x1^2 : x1^2)`.
    fn shifted_square() -> MorphismSpec {
        let one = BigInt::one;
        let a = Polynomial::from_terms(2, vec![(one(), vec![2, 0]), (one(), vec![0, 2])]).unwrap();
        let b = Polynomial::from_terms(2, vec![(one(), vec![0, 2])]).unwrap();
        MorphismSpec::new(p1(), vec![vec![a, b]], Default::default()).unwrap()
    }

    fn monomial_jordan() -> MorphismSpec {
        let sp = ProductSpace::new(vec![1, 1]).unwrap();
        let t = |c: i64, e: [u32; 4]| Polynomial::from_terms(4, vec![(BigInt::from(c), e.to_vec())]).unwrap();
        MorphismSpec::new(
            sp,
            vec![
                vec![t(1, [2, 0, 0, 0]), t(1, [0, 2, 0, 0])],
                vec![t(1, [1, 0, 2, 0]), t(1, [0, 1, 0, 2])],
            ],
            Default::default(),
        )
        .unwrap()
    }

    #[test]
    fn squaring_is_exact() {
        let est = polarized_canonical_height(&squaring(), &pt(&[2, 1]), &CanonicalOptions::default()).unwrap();
        assert!((est.value - LN_2).abs() < 1e-15);
        assert!(est.error_bound < 1e-12);
        assert!(!est.heuristic);
        let fixed = polarized_canonical_height(&squaring(), &pt(&[1, 1]), &CanonicalOptions::default()).unwrap();
        assert_eq!(fixed.value, 0.0);
    }

    #[test]
    fn squaring_functional_equation() {
        let pd = squaring();
        let opts = CanonicalOptions::default();
        for c in [[2, 1], [3, 5], [-7, 2], [1, 0], [0, 1], [12, 1000]] {
            let p = pt(&c);
            let a = polarized_canonical_height(&pd, &p, &opts).unwrap();
            let b = polarized_canonical_height(&pd, &pd.map().evaluate(&p).unwrap(), &opts).unwrap();
            assert!((b.value - 2.0 * a.value).abs() <= 3.0 * opts.tol, "{c:?}");
        }
    }

    #[test]
    fn shifted_square_against_deeper_partial_sum() {
        let f = shifted_square();
        let pd = PolarizedData::new(f.clone(), DivisorClass::from_ints(&[1])).unwrap();
        let opts = CanonicalOptions::default().with_tol(1e-4);
        let est = polarized_canonical_height(&pd, &pt(&[1, 1]), &opts).unwrap();
        assert!(est.heuristic);
        // oracle: h(f^n P) / 2^n at a deeper index than the estimate used
        let depth = est.terms_used + 3;
        let seq = height_sequence(&f, &pt(&[1, 1]), &DivisorClass::from_ints(&[1]), depth).unwrap();
        let partial = seq.values[depth] / 2f64.powi(depth as i32);
        assert!((est.value - partial).abs() <= est.error_bound, "{est:?} vs {partial}");
    }

    #[test]
    fn positive_lambda_guard() {
        let id = MorphismSpec::identity(&p1());
        assert!(matches!(
            PolarizedData::new(id, DivisorClass::from_ints(&[1])),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn monomial_chain_heights() {
        let f = monomial_jordan();
        let s = analyze(&f.pullback_matrix(), &DivisorClass::from_ints(&[1, 1])).unwrap();
        let p = ProjectiveTuplePoint::from_i64(f.space(), &[&[2, 1], &[3, 1]]).unwrap();
        let opts = CanonicalOptions::default();
        let v = chain_canonical_heights(&s, 0, &f, &p, &opts).unwrap();
        // oracle: h_1 = 2^n log 2, h_2 = 2^n log 3 + n 2^(n-1) log 2, so Lambda^{-n} h -> (log 2, log 3)
        assert!((v.values()[0] - LN_2).abs() <= v.components[0].error_bound + 1e-12);
        assert!((v.values()[1] - 3f64.ln()).abs() <= v.components[1].error_bound + 1e-12);
        assert!(v.values()[1] > 0.0);

        let fp = f.evaluate(&p).unwrap();
        let w = chain_canonical_heights(&s, 0, &f, &fp, &opts).unwrap();
        let lam = 2.0;
        let expect = [lam * v.values()[0], v.values()[0] + lam * v.values()[1]];
        for j in 0..2 {
            assert!((w.values()[j] - expect[j]).abs() <= (1.0 + 3.0) * 2.0 * opts.tol);
        }

        let trivial = ProjectiveTuplePoint::from_i64(f.space(), &[&[1, 1], &[1, 1]]).unwrap();
        let z = chain_canonical_heights(&s, 0, &f, &trivial, &opts).unwrap();
        assert_eq!(z.values(), vec![0.0, 0.0]);
    }

    #[test]
    fn value_tracks_closed_form_partial_sums() {
        let f = monomial_jordan();
        let p = ProjectiveTuplePoint::from_i64(f.space(), &[&[2, 1], &[3, 1]]).unwrap();
        let seg = iterate(&f, &p, 14).unwrap();
        for (n, q) in seg.points.iter().enumerate() {
            let h2 = height_wrt(q, &DivisorClass::from_ints(&[0, 1])).unwrap();
            let nf = n as f64;
            let expect = 2f64.powi(n as i32) * 3f64.ln() + nf * 2f64.powi(n as i32 - 1) * LN_2;
            assert!((h2 - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }

    #[test]
    fn small_blocks() {
        // x -> x^2 on the first factor, identity on the second: blocks 2 and 1
        let sp = ProductSpace::new(vec![1, 1]).unwrap();
        let t = |e: [u32; 4]| Polynomial::from_terms(4, vec![(BigInt::one(), e.to_vec())]).unwrap();
        let f = MorphismSpec::new(
            sp.clone(),
            vec![
                vec![t([2, 0, 0, 0]), t([0, 2, 0, 0])],
                vec![t([0, 0, 1, 0]), t([0, 0, 0, 1])],
            ],
            Default::default(),
        )
        .unwrap();
        let s = analyze(&f.pullback_matrix(), &DivisorClass::from_ints(&[1, 1])).unwrap();
        assert_eq!(s.sigma, 1);
        let p = ProjectiveTuplePoint::from_i64(&sp, &[&[2, 1], &[5, 3]]).unwrap();
        let r = small_block_growth_check(&s, 1, &f, &p, 50).unwrap();
        assert!(r.bounded);
        assert!(r.norms.iter().all(|&x| (x - 5f64.ln()).abs() < 1e-12));
        assert!(matches!(
            small_block_growth_check(&s, 0, &f, &p, 5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_weights_invert_powers() {
        let lambda = BigRational::from_integer(BigInt::from(3));
        let b = crate::asymptotics::JordanBlockMatrix::exact(lambda.clone(), 3);
        for n in [0u64, 1, 4, 9] {
            let w = inverse_power_weights(&lambda, n, 2);
            // (Lambda^n Lambda^{-n})_{2,0} = sum_k c_k(n) w_{2-k} = 0
            let c: Vec<BigRational> = (0..3).map(|k| b.power_coefficient_exact(n, k).unwrap()).collect();
            let prod: BigRational = (0..3).map(|k| &c[k] * &w[2 - k]).sum();
            assert!(prod.is_zero() || n == 0 && prod.is_zero());
            assert!((&c[0] * &w[0]).is_one());
        }
    }

    #[test]
    fn tail_sum_matches_geometric_series() {
        for n in [0u64, 3, 10] {
            let t = inverse_tail_sum(0.5, n, 0);
            let exact = 0.5f64.powi(n as i32);
            assert!(t >= exact * (1.0 - 1e-12) && t <= exact * 1.01);
        }
        assert!(inverse_tail_sum(0.5, 10, 2).is_finite());
    }

    #[test]
    fn partial_estimates_on_budget() {
        let pd = PolarizedData::new(shifted_square(), DivisorClass::from_ints(&[1])).unwrap();
        let opts = CanonicalOptions {
            tol: 1e-12,
            bit_budget: 2000,
            ..Default::default()
        };
        assert!(matches!(
            polarized_canonical_height(&pd, &pt(&[1, 1]), &opts),
            Err(Error::Resource(_))
        ));
        let est = polarized_canonical_height(&pd, &pt(&[1, 1]), &CanonicalOptions { allow_partial: true, ..opts }).unwrap();
        assert!(est.partial && !est.warnings.is_empty());
    }
}
