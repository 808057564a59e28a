//! Spectral structure of the pullback `f^*` on the Krylov span `V_H = span{(f^*)^n H}`.
//!
//! Chains are exact whenever every eigenvalue of the restriction is rational. Otherwise
//! eigenvalues come from a polynomial root finder with an inclusion-radius bound and the
//! spectrum is flagged inexact.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::heights::DivisorClass;
use crate::linalg::{
    self, is_zero_vector, mat_vec, nullspace, q, rank, rref, solve_in_span, QMatrix, QVector,
};

/// Largest Picard rank handled.
pub const MAX_RANK: usize = 32;

/// Required accuracy for numerically computed eigenvalues.
pub const NUMERIC_EIGENVALUE_TOL: f64 = 1e-9;

/// Smallest `f^*`-invariant subspace containing `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSpan {
    /// Reduced row echelon basis of the span (ambient coordinates).
    pub basis: Vec<QVector>,
    pivots: Vec<usize>,
    /// The generating class.
    pub generator: QVector,
    /// Ambient pullback matrix.
    pub pullback: QMatrix,
    /// Monic characteristic (= minimal) polynomial of the restriction, low degree first,
    /// read off from the first linear dependence among `H, MH, M^2 H, ...`.
    pub charpoly: Vec<BigRational>,
}

impl KrylovSpan {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of an ambient vector of the span in the echelon basis.
    pub fn coords(&self, v: &[BigRational]) -> Option<QVector> {
        let c: QVector = self.pivots.iter().map(|&p| v[p].clone()).collect();
        let back = self.from_coords(&c);
        (back.as_slice() == v).then_some(c)
    }

    pub fn from_coords(&self, c: &[BigRational]) -> QVector {
        let mut v = linalg::zero_vector(self.generator.len());
        for (ci, b) in c.iter().zip(&self.basis) {
            linalg::add_scaled(&mut v, b, ci);
        }
        v
    }

    /// Matrix of the pullback restricted to the span, in echelon-basis coordinates.
    pub fn restricted_matrix(&self) -> QMatrix {
        let r = self.dimension();
        let images: Vec<QVector> = self
            .basis
            .iter()
            .map(|b| {
                self.coords(&mat_vec(&self.pullback, b))
                    .expect("span is invariant")
            })
            .collect();
        (0..r)
            .map(|i| (0..r).map(|j| images[j][i].clone()).collect())
            .collect()
    }
}

fn check_square(m: &QMatrix, k: usize) -> Result<()> {
    if m.len() != k || m.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension(format!("pullback matrix is not {k}x{k}")));
    }
    if k > MAX_RANK {
        return Err(Error::Resource(format!("Picard rank {k} exceeds {MAX_RANK}")));
    }
    Ok(())
}

pub fn krylov_span(m: &QMatrix, h: &DivisorClass) -> Result<KrylovSpan> {
    let k = h.dim();
    check_square(m, k)?;
    let generator: QVector = h.coeffs().to_vec();
    let mut krylov: Vec<QVector> = Vec::new();
    let mut v = generator.clone();
    let relation = loop {
        if is_zero_vector(&v) && krylov.is_empty() {
            break None;
        }
        if let Some(c) = solve_in_span(&krylov, &v) {
            break Some(c);
        }
        krylov.push(v.clone());
        v = mat_vec(m, &v);
    };
    let (basis, pivots) = rref(&krylov);
    // M^r H = sum c_i M^i H  =>  x^r - sum c_i x^i
    let charpoly = match relation {
        None => vec![q(1)],
        Some(c) => {
            let mut p: Vec<BigRational> = c.into_iter().map(|x| -x).collect();
            p.push(q(1));
            p
        }
    };
    Ok(KrylovSpan {
        basis,
        pivots,
        generator,
        pullback: m.clone(),
        charpoly,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Eigenvalue {
    Exact(BigRational),
    /// Numerical eigenvalue with a bound on the distance to the true root.
    Approx { re: f64, im: f64, error: f64 },
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        match self {
            Eigenvalue::Exact(x) => x.abs().to_f64().unwrap_or(f64::INFINITY),
            Eigenvalue::Approx { re, im, .. } => re.hypot(*im),
        }
    }

    pub fn re(&self) -> f64 {
        match self {
            Eigenvalue::Exact(x) => x.to_f64().unwrap_or(f64::NAN),
            Eigenvalue::Approx { re, .. } => *re,
        }
    }

    pub fn im(&self) -> f64 {
        match self {
            Eigenvalue::Exact(_) => 0.0,
            Eigenvalue::Approx { im, .. } => *im,
        }
    }

    pub fn error(&self) -> f64 {
        match self {
            Eigenvalue::Exact(_) => 0.0,
            Eigenvalue::Approx { error, .. } => *error,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Eigenvalue::Exact(x) => Some(x),
            Eigenvalue::Approx { .. } => None,
        }
    }

    /// `|lambda| > 1`, decided exactly for rational eigenvalues.
    pub fn is_expanding(&self) -> bool {
        match self {
            Eigenvalue::Exact(x) => x.abs() > q(1),
            Eigenvalue::Approx { .. } => self.modulus() > 1.0,
        }
    }

    fn cmp_modulus(&self, other: &Eigenvalue) -> Ordering {
        match (self, other) {
            (Eigenvalue::Exact(a), Eigenvalue::Exact(b)) => a.abs().cmp(&b.abs()),
            _ => self
                .modulus()
                .partial_cmp(&other.modulus())
                .unwrap_or(Ordering::Equal),
        }
    }

    pub fn to_display(&self) -> String {
        match self {
            Eigenvalue::Exact(x) => linalg::format_rational(x),
            Eigenvalue::Approx { re, im, error } if *im == 0.0 => {
                format!("{re:.15e} +- {error:.3e}")
            }
            Eigenvalue::Approx { re, im, error } => {
                format!("{re:.15e}{im:+.15e}i +- {error:.3e}")
            }
        }
    }
}

/// One Jordan block `Lambda_i` with its chain `D_{i,0}, ..., D_{i,l_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanBlock {
    pub eigenvalue: Eigenvalue,
    /// `l_i + 1`.
    pub size: usize,
    /// Ambient chain vectors with `M D_j = D_{j-1} + lambda D_j`; `None` when inexact.
    pub chain: Option<Vec<QVector>>,
}

impl JordanBlock {
    /// `l_i`.
    pub fn ell(&self) -> usize {
        self.size - 1
    }

    pub fn chain_divisors(&self) -> Option<Vec<DivisorClass>> {
        self.chain
            .as_ref()
            .map(|c| c.iter().map(|v| DivisorClass::new(v.clone())).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanSpectrum {
    /// Sorted by descending modulus, then descending size, real part, imaginary part.
    pub blocks: Vec<JordanBlock>,
    /// Number of blocks with `|lambda| > 1`.
    pub sigma: usize,
    pub exact: bool,
    pub span: KrylovSpan,
}

impl JordanSpectrum {
    pub fn tau(&self) -> usize {
        self.blocks.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.eigenvalue.modulus())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .map(|b| {
                json!({
                    "eigenvalue": b.eigenvalue.to_display(),
                    "exact": b.eigenvalue.as_exact().is_some(),
                    "modulus": format!("{:.15e}", b.eigenvalue.modulus()),
                    "error_bound": format!("{:.3e}", b.eigenvalue.error()),
                    "size": b.size,
                    "chain": b.chain.as_ref().map(|c| c.iter().map(|v| v.iter().map(linalg::format_rational).collect::<Vec<_>>()).collect::<Vec<_>>()),
                })
            })
            .collect();
        json!({
            "krylov_dimension": self.span.dimension(),
            "krylov_basis": self.span.basis.iter().map(|v| v.iter().map(linalg::format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "charpoly": self.span.charpoly.iter().map(linalg::format_rational).collect::<Vec<_>>(),
            "exact": self.exact,
            "sigma": self.sigma,
            "tau": self.tau(),
            "blocks": blocks,
        })
    }
}

// ---- univariate rational polynomials (coefficients low degree first) ----

fn trim(p: &mut Vec<BigRational>) {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn degree(p: &[BigRational]) -> usize {
    p.len().saturating_sub(1)
}

fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    p.iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * x + c)
}

fn derivative(p: &[BigRational]) -> Vec<BigRational> {
    if p.len() <= 1 {
        return vec![q(0)];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * q(i as i64))
        .collect()
}

/// Polynomial long division; returns `(quotient, remainder)`.
fn poly_divmod(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut r = a.to_vec();
    trim(&mut r);
    let db = degree(b);
    let lead = b[db].clone();
    if degree(&r) < db || (r.len() == 1 && r[0].is_zero()) {
        return (vec![q(0)], r);
    }
    let mut quot = vec![q(0); degree(&r) - db + 1];
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) && degree(&r) >= db {
        let dr = degree(&r);
        let c = &r[dr] / &lead;
        for (i, bc) in b.iter().enumerate() {
            r[dr - db + i] -= &c * bc;
        }
        quot[dr - db] = c;
        r.pop();
        trim(&mut r);
        if r.is_empty() {
            r.push(q(0));
        }
    }
    (quot, r)
}

fn monic(p: &[BigRational]) -> Vec<BigRational> {
    let lead = p[degree(p)].clone();
    p.iter().map(|c| c / &lead).collect()
}

fn poly_gcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    trim(&mut a);
    trim(&mut b);
    while !(b.len() == 1 && b[0].is_zero()) {
        let (_, r) = poly_divmod(&a, &b);
        a = b;
        b = r;
    }
    monic(&a)
}

/// Integer divisors of `|n|` (positive), via prime factorization.
fn positive_divisors(n: &BigInt) -> Result<Vec<u64>> {
    let n = n
        .abs()
        .to_u64()
        .ok_or_else(|| Error::Resource("characteristic polynomial coefficient exceeds 2^64".into()))?;
    let mut divs = vec![1u64];
    for (p, e) in num_prime::nt_funcs::factorize64(n) {
        let mut next = Vec::with_capacity(divs.len() * (e + 1));
        for &d in &divs {
            let mut pk = 1u64;
            for _ in 0..=e {
                next.push(d * pk);
                pk = pk.saturating_mul(p);
            }
        }
        divs = next;
    }
    divs.sort_unstable();
    Ok(divs)
}

/// Rational roots with multiplicities, and the remaining cofactor without rational roots.
pub fn rational_roots(p: &[BigRational]) -> Result<(Vec<(BigRational, usize)>, Vec<BigRational>)> {
    let mut rest = p.to_vec();
    trim(&mut rest);
    let mut roots = Vec::new();
    // zero roots
    let mut zero_mult = 0;
    while rest.len() > 1 && rest[0].is_zero() {
        rest.remove(0);
        zero_mult += 1;
    }
    if zero_mult > 0 {
        roots.push((q(0), zero_mult));
    }
    if degree(&rest) == 0 {
        return Ok((roots, rest));
    }
    // primitive integer form
    let lcm = rest.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
    let ints: Vec<BigInt> = rest
        .iter()
        .map(|c| (c * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let lead_divs = positive_divisors(ints.last().unwrap())?;
    let const_divs = positive_divisors(&ints[0])?;
    let mut candidates: Vec<BigRational> = Vec::new();
    for &num in &const_divs {
        for &den in &lead_divs {
            let c = BigRational::new(BigInt::from(num), BigInt::from(den));
            for s in [c.clone(), -c] {
                if !candidates.contains(&s) {
                    candidates.push(s);
                }
            }
        }
    }
    for c in candidates {
        let mut mult = 0;
        while degree(&rest) > 0 && poly_eval(&rest, &c).is_zero() {
            let (quot, _) = poly_divmod(&rest, &[-c.clone(), q(1)]);
            rest = quot;
            mult += 1;
        }
        if mult > 0 {
            roots.push((c, mult));
        }
    }
    Ok((roots, rest))
}

/// Square-free decomposition (Yun): factors `a_i` with `p = c prod a_i^i`.
fn squarefree_factors(p: &[BigRational]) -> Vec<(Vec<BigRational>, usize)> {
    let mut out = Vec::new();
    if degree(p) == 0 {
        return out;
    }
    let dp = derivative(p);
    let a0 = poly_gcd(p, &dp);
    let (mut b, _) = poly_divmod(p, &a0);
    let (c, _) = poly_divmod(&dp, &a0);
    let mut d: Vec<BigRational> = {
        let db = derivative(&b);
        let mut d = c;
        let len = d.len().max(db.len());
        d.resize(len, q(0));
        for (i, x) in db.into_iter().enumerate() {
            d[i] -= x;
        }
        trim(&mut d);
        d
    };
    let mut i = 1;
    while degree(&b) > 0 {
        let a = poly_gcd(&b, &d);
        let (nb, _) = poly_divmod(&b, &a);
        let (nc, _) = poly_divmod(&d, &a);
        if degree(&a) > 0 {
            out.push((a, i));
        }
        b = nb;
        let db = derivative(&b);
        let mut nd = nc;
        let len = nd.len().max(db.len());
        nd.resize(len, q(0));
        for (j, x) in db.into_iter().enumerate() {
            nd[j] -= x;
        }
        trim(&mut nd);
        d = nd;
        i += 1;
    }
    out
}

/// Roots of a square-free polynomial by Aberth iteration with Newton polishing.
/// Each root carries the inclusion radius `n |p(z)| / |p'(z)|` (inflated by the
/// evaluation round-off bound), which is guaranteed to contain a true root.
pub fn numeric_roots(p: &[BigRational]) -> Vec<(Complex64, f64)> {
    let n = degree(p);
    if n == 0 {
        return Vec::new();
    }
    let lead = p[n].to_f64().unwrap();
    let coeffs: Vec<f64> = p.iter().map(|c| c.to_f64().unwrap() / lead).collect();
    let radius = 1.0
        + coeffs[..n]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(radius * 0.7, theta)
        })
        .collect();
    let eval = |x: Complex64| -> (Complex64, Complex64, f64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for c in coeffs.iter().rev() {
            dv = dv * x + v;
            v = v * x + c;
            mag = mag * x.norm() + c.abs();
        }
        (v, dv, mag)
    };
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        let snapshot = z.clone();
        for i in 0..n {
            let (v, dv, _) = eval(snapshot[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (snapshot[i] - snapshot[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[i] = snapshot[i] - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z.into_iter()
        .map(|mut x| {
            for _ in 0..5 {
                let (v, dv, _) = eval(x);
                if dv.norm() == 0.0 {
                    break;
                }
                x -= v / dv;
            }
            let (v, dv, mag) = eval(x);
            let roundoff = 2.0 * (n as f64 + 1.0) * f64::EPSILON * mag;
            let err = n as f64 * (v.norm() + roundoff) / dv.norm();
            if x.im.abs() <= err {
                x.im = 0.0;
            }
            (x, err)
        })
        .collect()
}

pub fn jordan_decompose(span: &KrylovSpan) -> Result<JordanSpectrum> {
    if span.dimension() == 0 {
        return Err(Error::Invalid("Krylov span is zero-dimensional".into()));
    }
    let a = span.restricted_matrix();
    let r = span.dimension();
    let (roots, rest) = rational_roots(&span.charpoly)?;
    let mut blocks = Vec::new();
    for (lambda, mult) in &roots {
        for (top, len) in jordan_chains(&a, lambda, *mult) {
            let n = linalg::sub_scalar_identity(&a, lambda);
            let mut chain = vec![top];
            for _ in 1..len {
                let next = mat_vec(&n, chain.last().unwrap());
                chain.push(next);
            }
            chain.reverse();
            let chain = chain.iter().map(|c| span.from_coords(c)).collect();
            blocks.push(JordanBlock {
                eigenvalue: Eigenvalue::Exact(lambda.clone()),
                size: len,
                chain: Some(chain),
            });
        }
    }
    let exact = degree(&rest) == 0;
    if !exact {
        for (factor, mult) in squarefree_factors(&rest) {
            for (z, err) in numeric_roots(&factor) {
                // the Krylov span is cyclic: one block per eigenvalue, of full multiplicity
                blocks.push(JordanBlock {
                    eigenvalue: Eigenvalue::Approx {
                        re: z.re,
                        im: z.im,
                        error: err,
                    },
                    size: mult,
                    chain: None,
                });
            }
        }
    }
    let total: usize = blocks.iter().map(|b| b.size).sum();
    if total != r {
        return Err(Error::AssertionFailure(format!(
            "block sizes sum to {total}, span has dimension {r}"
        )));
    }
    blocks.sort_by(|x, y| {
        y.eigenvalue
            .cmp_modulus(&x.eigenvalue)
            .then(y.size.cmp(&x.size))
            .then(
                y.eigenvalue
                    .re()
                    .partial_cmp(&x.eigenvalue.re())
                    .unwrap_or(Ordering::Equal),
            )
            .then(
                y.eigenvalue
                    .im()
                    .partial_cmp(&x.eigenvalue.im())
                    .unwrap_or(Ordering::Equal),
            )
    });
    let sigma = blocks.iter().filter(|b| b.eigenvalue.is_expanding()).count();
    Ok(JordanSpectrum {
        blocks,
        sigma,
        exact,
        span: span.clone(),
    })
}

/// Chain tops (in span coordinates) and chain lengths for eigenvalue `lambda`.
fn jordan_chains(a: &QMatrix, lambda: &BigRational, mult: usize) -> Vec<(QVector, usize)> {
    let n = linalg::sub_scalar_identity(a, lambda);
    // kernels[j] = ker N^j, j = 0..=max
    let dim = a.len();
    let mut kernels: Vec<Vec<QVector>> = vec![Vec::new()];
    let mut power = linalg::identity(dim);
    loop {
        power = linalg::mat_mul(&power, &n);
        let k = nullspace(&power);
        let done = k.len() >= mult || k.len() == kernels.last().unwrap().len();
        kernels.push(k);
        if done {
            break;
        }
    }
    let max_len = kernels.len() - 1;
    let mut chains: Vec<(QVector, usize)> = Vec::new();
    for level in (1..=max_len).rev() {
        let mut spanning: Vec<QVector> = kernels[level - 1].clone();
        for (top, len) in &chains {
            let mut v = top.clone();
            for _ in 0..(len - level) {
                v = mat_vec(&n, &v);
            }
            spanning.push(v);
        }
        let mut current_rank = rank(&spanning);
        for cand in &kernels[level] {
            let mut trial = spanning.clone();
            trial.push(cand.clone());
            let rk = rank(&trial);
            if rk > current_rank {
                spanning = trial;
                current_rank = rk;
                chains.push((cand.clone(), level));
            }
        }
    }
    chains
}

/// Coefficients `c_{i,j}` of `D = sum c_{i,j} D_{i,j}`, one vector per block.
pub fn express_in_chain_basis(d: &DivisorClass, s: &JordanSpectrum) -> Result<Vec<QVector>> {
    if !s.exact {
        return Err(Error::InexactSpectrum);
    }
    let basis: Vec<QVector> = s
        .blocks
        .iter()
        .flat_map(|b| b.chain.clone().unwrap_or_default())
        .collect();
    if d.dim() != s.span.generator.len() {
        return Err(Error::Dimension("divisor dimension does not match spectrum".into()));
    }
    let flat = solve_in_span(&basis, d.coeffs()).ok_or(Error::NotInSpan)?;
    let mut out = Vec::with_capacity(s.blocks.len());
    let mut offset = 0;
    for b in &s.blocks {
        out.push(flat[offset..offset + b.size].to_vec());
        offset += b.size;
    }
    Ok(out)
}

/// Krylov span and Jordan spectrum in one step.
pub fn analyze(m: &QMatrix, h: &DivisorClass) -> Result<JordanSpectrum> {
    jordan_decompose(&krylov_span(m, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_ints, mat_mul, sub_scalar_identity};

    /// Faddeev-LeVerrier characteristic polynomial, an independent route to the Krylov relation.
    fn faddeev_charpoly(a: &QMatrix) -> Vec<BigRational> {
        let n = a.len();
        let mut coeffs = vec![q(0); n + 1];
        coeffs[n] = q(1);
        let mut m = linalg::identity(n);
        for k in 1..=n {
            let am = mat_mul(a, &m);
            let trace: BigRational = (0..n).map(|i| am[i][i].clone()).sum();
            let c = -trace / q(k as i64);
            coeffs[n - k] = c.clone();
            m = am;
            for i in 0..n {
                m[i][i] += &c;
            }
        }
        coeffs
    }

    fn chain_identity_holds(s: &JordanSpectrum) {
        for b in &s.blocks {
            let lambda = b.eigenvalue.as_exact().unwrap();
            let chain = b.chain.as_ref().unwrap();
            for j in 0..b.size {
                let lhs = mat_vec(&s.span.pullback, &chain[j]);
                let mut rhs: QVector = chain[j].iter().map(|x| x * lambda).collect();
                if j > 0 {
                    linalg::add_scaled(&mut rhs, &chain[j - 1], &q(1));
                }
                assert_eq!(lhs, rhs, "chain identity at j = {j}");
            }
        }
    }

    #[test]
    fn krylov_dimensions() {
        let two = from_ints(&[&[2, 0], &[0, 2]]);
        assert_eq!(krylov_span(&two, &DivisorClass::from_ints(&[1, 1])).unwrap().dimension(), 1);
        let jordan = from_ints(&[&[2, 0], &[1, 2]]);
        let span = krylov_span(&jordan, &DivisorClass::from_ints(&[1, 1])).unwrap();
        // oracle: rank of {H, MH} = {(1,1), (2,3)}
        assert_eq!(rank(&[vec![q(1), q(1)], vec![q(2), q(3)]]), 2);
        assert_eq!(span.dimension(), 2);
        let id = linalg::identity(3);
        assert_eq!(krylov_span(&id, &DivisorClass::from_ints(&[1, 4, 2])).unwrap().dimension(), 1);
    }

    #[test]
    fn single_jordan_block() {
        let m = from_ints(&[&[2, 0], &[1, 2]]);
        // oracle: (M - 2I)^2 = 0 while M - 2I != 0
        let n = sub_scalar_identity(&m, &q(2));
        assert!(linalg::is_zero_matrix(&mat_mul(&n, &n)));
        assert!(!linalg::is_zero_matrix(&n));
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1])).unwrap();
        assert!(s.exact);
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].eigenvalue, Eigenvalue::Exact(q(2)));
        assert_eq!(s.blocks[0].ell(), 1);
        assert_eq!(s.sigma, 1);
        assert_eq!(
            s.blocks[0].chain.as_ref().unwrap(),
            &vec![vec![q(0), q(1)], vec![q(1), q(0)]]
        );
        chain_identity_holds(&s);
    }

    #[test]
    fn diagonal_blocks_sorted() {
        let m = from_ints(&[&[2, 0], &[0, 3]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1])).unwrap();
        let eig: Vec<_> = s.blocks.iter().map(|b| (b.eigenvalue.clone(), b.size)).collect();
        assert_eq!(
            eig,
            vec![(Eigenvalue::Exact(q(3)), 1), (Eigenvalue::Exact(q(2)), 1)]
        );
        chain_identity_holds(&s);
    }

    #[test]
    fn golden_ratio_spectrum_is_flagged() {
        let m = from_ints(&[&[0, 1], &[1, 1]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1])).unwrap();
        assert!(!s.exact);
        // oracle: bisection on x^2 - x - 1 over [1, 2]
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid - mid - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let top = &s.blocks[0].eigenvalue;
        assert!(top.error() <= NUMERIC_EIGENVALUE_TOL);
        assert!((top.modulus() - lo).abs() <= 1e-9);
        assert!((top.modulus() - 1.6180339887).abs() < 1e-9);
        assert_eq!(s.sigma, 1);
        assert!(s.blocks.iter().all(|b| b.chain.is_none()));
        assert_eq!(
            express_in_chain_basis(&DivisorClass::from_ints(&[1, 1]), &s),
            Err(Error::InexactSpectrum)
        );
    }

    #[test]
    fn express_examples() {
        let m = from_ints(&[&[2, 0], &[1, 2]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1])).unwrap();
        let c = express_in_chain_basis(&DivisorClass::from_ints(&[1, 1]), &s).unwrap();
        assert_eq!(c, vec![vec![q(1), q(1)]]);
        let c = express_in_chain_basis(&DivisorClass::from_ints(&[0, 1]), &s).unwrap();
        assert_eq!(c, vec![vec![q(1), q(0)]]);
        let c = express_in_chain_basis(&DivisorClass::zero(2), &s).unwrap();
        assert_eq!(c, vec![vec![q(0), q(0)]]);
    }

    #[test]
    fn not_in_span() {
        let m = from_ints(&[&[2, 0], &[0, 3]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 0])).unwrap();
        assert_eq!(s.span.dimension(), 1);
        assert_eq!(
            express_in_chain_basis(&DivisorClass::from_ints(&[0, 1]), &s),
            Err(Error::NotInSpan)
        );
    }

    #[test]
    fn krylov_relation_matches_faddeev_leverrier() {
        let cases = [
            from_ints(&[&[2, 0], &[1, 2]]),
            from_ints(&[&[2, 1, 0], &[0, 2, 1], &[0, 0, 2]]),
            from_ints(&[&[3, 1, 0], &[0, 1, 0], &[1, 0, 2]]),
            from_ints(&[&[0, 1], &[1, 1]]),
        ];
        for m in cases {
            let h = DivisorClass::from_ints(&vec![1; m.len()]);
            let span = krylov_span(&m, &h).unwrap();
            if span.dimension() == m.len() {
                assert_eq!(span.charpoly, faddeev_charpoly(&m));
            }
            let a = span.restricted_matrix();
            assert_eq!(span.charpoly, faddeev_charpoly(&a));
        }
    }

    #[test]
    fn nilpotent_and_negative_eigenvalues() {
        // swap-like action with eigenvalues 1 and -1, plus a contracted factor
        let m = from_ints(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 0]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[2, 1, 1])).unwrap();
        assert!(s.exact);
        let eig: Vec<_> = s.blocks.iter().map(|b| b.eigenvalue.clone()).collect();
        assert_eq!(
            eig,
            vec![
                Eigenvalue::Exact(q(1)),
                Eigenvalue::Exact(q(-1)),
                Eigenvalue::Exact(q(0))
            ]
        );
        assert_eq!(s.sigma, 0);
        chain_identity_holds(&s);
    }

    #[test]
    fn three_by_three_jordan() {
        let m = from_ints(&[&[2, 1, 0], &[0, 2, 1], &[0, 0, 2]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1, 1])).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].size, 3);
        chain_identity_holds(&s);
    }

    #[test]
    fn squarefree_of_repeated_roots() {
        // (x - 1)^2 (x^2 - 2)
        let p = vec![q(-2), q(4), q(-1), q(-2), q(1)];
        let (roots, rest) = rational_roots(&p).unwrap();
        assert_eq!(roots, vec![(q(1), 2)]);
        assert_eq!(rest, vec![q(-2), q(0), q(1)]);
        let sf = squarefree_factors(&rest);
        assert_eq!(sf.len(), 1);
        let r = numeric_roots(&sf[0].0);
        assert!(r.iter().all(|(z, e)| (z.norm() - 2f64.sqrt()).abs() < 1e-12 && *e < 1e-9));
    }

    #[test]
    fn json_dump_has_blocks() {
        let m = from_ints(&[&[2, 0], &[1, 2]]);
        let s = analyze(&m, &DivisorClass::from_ints(&[1, 1])).unwrap();
        let v = s.to_json();
        assert_eq!(v["blocks"][0]["eigenvalue"], "2");
        assert_eq!(v["blocks"][0]["size"], 2);
        assert_eq!(v["exact"], true);
    }
}
