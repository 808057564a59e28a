//! Sparse multivariate polynomials with arbitrary-precision integer coefficients.
//!
//! Variables are indexed by a flat position; `geometry` lays the variables of a
//! product of projective spaces out factor by factor.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Limits applied to symbolic operations that can blow up (composition, powers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolicBudget {
    pub max_terms: usize,
    pub max_coeff_bits: u64,
}

impl Default for SymbolicBudget {
    fn default() -> Self {
        SymbolicBudget {
            max_terms: 200_000,
            max_coeff_bits: 1 << 16,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, BigInt>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigInt) -> Self {
        let mut p = Polynomial::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn variable(nvars: usize, v: usize) -> Self {
        let mut e = vec![0; nvars];
        e[v] = 1;
        let mut p = Polynomial::zero(nvars);
        p.terms.insert(e, BigInt::one());
        p
    }

    /// Builds a polynomial from `(coefficient, exponent vector)` terms, merging repeats.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BigInt, Vec<u32>)>,
    {
        let mut p = Polynomial::zero(nvars);
        for (c, e) in terms {
            if e.len() != nvars {
                return Err(Error::Dimension(format!(
                    "exponent vector of length {} for {} variables",
                    e.len(),
                    nvars
                )));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigInt)> {
        self.terms.iter()
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    /// Gcd of all coefficients (zero for the zero polynomial).
    pub fn content(&self) -> BigInt {
        self.terms
            .values()
            .fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Degree in the variable block `range` if every term has the same block degree.
    pub fn block_degree(&self, range: std::ops::Range<usize>) -> Option<u32> {
        let mut degs = self
            .terms
            .keys()
            .map(|e| e[range.clone()].iter().sum::<u32>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Exact evaluation at an integer point.
    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        debug_assert_eq!(x.len(), self.nvars);
        let mut powers = PowerCache::new(x);
        let mut acc = BigInt::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= powers.get(v, k);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn mul(&self, other: &Polynomial, budget: &SymbolicBudget) -> Result<Polynomial> {
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
            if out.terms.len() > budget.max_terms {
                return Err(Error::Resource(format!(
                    "polynomial product exceeds {} terms",
                    budget.max_terms
                )));
            }
        }
        out.check_coeffs(budget)?;
        Ok(out)
    }

    fn check_coeffs(&self, budget: &SymbolicBudget) -> Result<()> {
        if self.max_abs_coeff().bits() > budget.max_coeff_bits {
            return Err(Error::Resource(format!(
                "coefficient exceeds {} bits",
                budget.max_coeff_bits
            )));
        }
        Ok(())
    }

    /// Replaces variable `v` by `subs[v]`; all substitutes share a variable count.
    pub fn substitute(&self, subs: &[Polynomial], budget: &SymbolicBudget) -> Result<Polynomial> {
        if subs.len() != self.nvars {
            return Err(Error::Dimension(format!(
                "{} substitutes for {} variables",
                subs.len(),
                self.nvars
            )));
        }
        let target_vars = subs.first().map(|s| s.nvars).unwrap_or(0);
        let mut cache: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(target_vars, BigInt::one()), s.clone()])
            .collect();
        let mut out = Polynomial::zero(target_vars);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(target_vars, c.clone());
            for (v, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while cache[v].len() <= k as usize {
                    let next = cache[v].last().unwrap().mul(&subs[v], budget)?;
                    cache[v].push(next);
                }
                t = t.mul(&cache[v][k as usize], budget)?;
            }
            for (te, tc) in t.terms {
                out.add_term(te, tc);
            }
            if out.terms.len() > budget.max_terms {
                return Err(Error::Resource(format!(
                    "composition exceeds {} terms",
                    budget.max_terms
                )));
            }
        }
        Ok(out)
    }

    /// Multiplies every coefficient by `c / d` where `d` divides each product exactly.
    pub fn scale_exact(&self, num: &BigInt, den: &BigInt) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), c * num / den);
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (v, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*v{v}")?,
                    _ => write!(f, "*v{v}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

/// Memoized integer powers of the evaluation point's coordinates.
struct PowerCache<'a> {
    base: &'a [BigInt],
    powers: Vec<Vec<BigInt>>,
}

impl<'a> PowerCache<'a> {
    fn new(base: &'a [BigInt]) -> Self {
        PowerCache {
            base,
            powers: vec![Vec::new(); base.len()],
        }
    }

    fn get(&mut self, v: usize, k: u32) -> &BigInt {
        let row = &mut self.powers[v];
        if row.is_empty() {
            row.push(BigInt::one());
            row.push(self.base[v].clone());
        }
        while row.len() <= k as usize {
            let next = row.last().unwrap() * &self.base[v];
            row.push(next);
        }
        &row[k as usize]
    }
}
