//! Rational points and polynomial self-maps of products of projective spaces.

use std::fmt;
use std::ops::Range;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Polynomial, SymbolicBudget};
use crate::stats;

/// `P^{n_1} x ... x P^{n_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductSpace {
    factor_dims: Vec<usize>,
}

impl ProductSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::Invalid("product space needs at least one factor".into()));
        }
        if factor_dims.iter().any(|&n| n == 0) {
            return Err(Error::Invalid("every factor must have dimension >= 1".into()));
        }
        Ok(ProductSpace { factor_dims })
    }

    pub fn projective_line() -> Self {
        ProductSpace {
            factor_dims: vec![1],
        }
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    /// Number of factors `k` (the Picard rank).
    pub fn factors(&self) -> usize {
        self.factor_dims.len()
    }

    /// Total number of homogeneous coordinates.
    pub fn nvars(&self) -> usize {
        self.factor_dims.iter().map(|n| n + 1).sum()
    }

    /// Flat variable indices belonging to factor `j`.
    pub fn var_range(&self, j: usize) -> Range<usize> {
        let start: usize = self.factor_dims[..j].iter().map(|n| n + 1).sum();
        start..start + self.factor_dims[j] + 1
    }
}

/// Puts an integer vector into canonical form: coprime entries, first nonzero entry positive.
/// Returns `false` for the zero vector, which is left untouched.
pub fn normalize_vector(v: &mut [BigInt]) -> bool {
    let mut nonzero: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_zero()).collect();
    if nonzero.is_empty() {
        return false;
    }
    // smallest magnitude first so the running gcd collapses quickly
    nonzero.sort_by_key(|&i| v[i].bits());
    let mut g = v[nonzero[0]].abs();
    for &i in &nonzero[1..] {
        if g.is_one() {
            break;
        }
        let r = &v[i] % &g;
        g = g.gcd(&r);
    }
    let first = nonzero.iter().copied().min().unwrap();
    let negate = v[first].sign() == Sign::Minus;
    if !g.is_one() || negate {
        let divisor = if negate { -g } else { g };
        for x in v.iter_mut() {
            if !x.is_zero() {
                *x = &*x / &divisor;
            }
        }
    }
    true
}

/// A point of a product of projective spaces over Q, stored in normalized integer coordinates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ProjectiveTuplePoint {
    coords: Vec<Vec<BigInt>>,
}

impl ProjectiveTuplePoint {
    pub fn new(space: &ProductSpace, mut coords: Vec<Vec<BigInt>>) -> Result<Self> {
        if coords.len() != space.factors() {
            return Err(Error::Dimension(format!(
                "point has {} factors, space has {}",
                coords.len(),
                space.factors()
            )));
        }
        for (j, v) in coords.iter_mut().enumerate() {
            if v.len() != space.factor_dims()[j] + 1 {
                return Err(Error::Dimension(format!(
                    "factor {j} has {} coordinates, expected {}",
                    v.len(),
                    space.factor_dims()[j] + 1
                )));
            }
            if !normalize_vector(v) {
                return Err(Error::Invalid(format!("factor {j} is the zero vector")));
            }
        }
        Ok(ProjectiveTuplePoint { coords })
    }

    pub fn from_i64(space: &ProductSpace, coords: &[&[i64]]) -> Result<Self> {
        let coords = coords
            .iter()
            .map(|f| f.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::new(space, coords)
    }

    /// Builds a point from rational coordinates by clearing denominators per factor.
    pub fn from_rationals(space: &ProductSpace, coords: Vec<Vec<BigRational>>) -> Result<Self> {
        let ints = coords
            .into_iter()
            .map(|factor| {
                let lcm = factor
                    .iter()
                    .fold(BigInt::one(), |l, q| l.lcm(q.denom()));
                factor
                    .iter()
                    .map(|q| (q * BigRational::from_integer(lcm.clone())).to_integer())
                    .collect()
            })
            .collect();
        Self::new(space, ints)
    }

    pub fn factors(&self) -> &[Vec<BigInt>] {
        &self.coords
    }

    pub fn flat_coords(&self) -> Vec<BigInt> {
        self.coords.iter().flatten().cloned().collect()
    }

    /// `max_i |x_{j,i}|` for factor `j`.
    pub fn factor_max_abs(&self, j: usize) -> BigUint {
        self.coords[j]
            .iter()
            .map(|x| x.magnitude().clone())
            .max()
            .unwrap_or_default()
    }

    /// Total coordinate bit length.
    pub fn bit_size(&self) -> u64 {
        self.coords.iter().flatten().map(|x| x.bits()).sum()
    }

    pub fn max_coord_bits(&self) -> u64 {
        self.coords.iter().flatten().map(|x| x.bits()).max().unwrap_or(0)
    }
}

impl fmt::Debug for ProjectiveTuplePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ProjectiveTuplePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, factor) in self.coords.iter().enumerate() {
            if j > 0 {
                write!(f, " x ")?;
            }
            write!(f, "(")?;
            for (i, x) in factor.iter().enumerate() {
                if i > 0 {
                    write!(f, ":")?;
                }
                if x.bits() > 128 {
                    write!(f, "<{} bits>", x.bits())?;
                } else {
                    write!(f, "{x}")?;
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegularityMode {
    /// The map is a morphism; a vanishing factor is a hard error.
    #[default]
    Total,
    /// Regularity is only checked along the orbits actually computed.
    OrbitChecked,
}

/// A self-map given by multihomogeneous integer polynomials, one vector per output factor.
#[derive(Clone, PartialEq, Eq)]
pub struct MorphismSpec {
    space: ProductSpace,
    components: Vec<Vec<Polynomial>>,
    multidegree: Vec<Vec<u32>>,
    mode: RegularityMode,
}

impl fmt::Debug for MorphismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MorphismSpec")
            .field("space", &self.space)
            .field("multidegree", &self.multidegree)
            .field("mode", &self.mode)
            .field("components", &self.components)
            .finish()
    }
}

impl MorphismSpec {
    pub fn new(
        space: ProductSpace,
        components: Vec<Vec<Polynomial>>,
        mode: RegularityMode,
    ) -> Result<Self> {
        let k = space.factors();
        if components.len() != k {
            return Err(Error::Dimension(format!(
                "{} output factors for a space with {k} factors",
                components.len()
            )));
        }
        let mut multidegree = Vec::with_capacity(k);
        for (i, comps) in components.iter().enumerate() {
            if comps.len() != space.factor_dims()[i] + 1 {
                return Err(Error::Dimension(format!(
                    "output factor {i} has {} components, expected {}",
                    comps.len(),
                    space.factor_dims()[i] + 1
                )));
            }
            let mut row: Option<Vec<u32>> = None;
            for (r, p) in comps.iter().enumerate() {
                if p.nvars() != space.nvars() {
                    return Err(Error::Dimension(format!(
                        "component ({i},{r}) uses {} variables, expected {}",
                        p.nvars(),
                        space.nvars()
                    )));
                }
                if p.is_zero() {
                    continue;
                }
                let degs = (0..k)
                    .map(|j| {
                        p.block_degree(space.var_range(j)).ok_or_else(|| {
                            Error::Invalid(format!(
                                "component ({i},{r}) is not homogeneous in factor {j}"
                            ))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()?;
                match &row {
                    None => row = Some(degs),
                    Some(existing) if *existing != degs => {
                        return Err(Error::Invalid(format!(
                            "output factor {i} mixes multidegrees {existing:?} and {degs:?}"
                        )))
                    }
                    _ => {}
                }
            }
            let row = row.ok_or_else(|| {
                Error::Invalid(format!("output factor {i} has only zero components"))
            })?;
            multidegree.push(row);
        }
        Ok(MorphismSpec {
            space,
            components,
            multidegree,
            mode,
        })
    }

    pub fn identity(space: &ProductSpace) -> Self {
        let n = space.nvars();
        let components = (0..space.factors())
            .map(|j| space.var_range(j).map(|v| Polynomial::variable(n, v)).collect())
            .collect();
        MorphismSpec::new(space.clone(), components, RegularityMode::Total)
            .expect("identity map is well formed")
    }

    /// Factorwise power map `x_{j,r} -> x_{j,r}^{d_j}`.
    pub fn power_map(space: &ProductSpace, degrees: &[u32]) -> Result<Self> {
        if degrees.len() != space.factors() {
            return Err(Error::Dimension("one degree per factor required".into()));
        }
        let n = space.nvars();
        let components = (0..space.factors())
            .map(|j| {
                space
                    .var_range(j)
                    .map(|v| {
                        let mut e = vec![0; n];
                        e[v] = degrees[j];
                        Polynomial::from_terms(n, vec![(BigInt::one(), e)])
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MorphismSpec::new(space.clone(), components, RegularityMode::Total)
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn components(&self) -> &[Vec<Polynomial>] {
        &self.components
    }

    pub fn mode(&self) -> RegularityMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: RegularityMode) -> Self {
        self.mode = mode;
        self
    }

    /// `d[i][j]`: degree of output factor `i` in the variables of input factor `j`.
    pub fn multidegree_matrix(&self) -> &[Vec<u32>] {
        &self.multidegree
    }

    /// Matrix of `f^*` on `Pic(X)_Q` in the hyperplane basis: the transpose of the
    /// multidegree matrix, so that `h_D(f(P)) ~ h_{f^*D}(P)`.
    pub fn pullback_matrix(&self) -> Vec<Vec<BigRational>> {
        let k = self.space.factors();
        (0..k)
            .map(|r| {
                (0..k)
                    .map(|c| BigRational::from_integer(BigInt::from(self.multidegree[c][r])))
                    .collect()
            })
            .collect()
    }

    /// Per output factor: `(max term count T_i, max |coefficient| M_i)` over its components.
    pub fn coefficient_data(&self) -> Vec<(usize, BigInt)> {
        self.components
            .iter()
            .map(|comps| {
                let t = comps.iter().map(|p| p.term_count()).max().unwrap_or(0);
                let m = comps
                    .iter()
                    .map(|p| p.max_abs_coeff())
                    .max()
                    .unwrap_or_else(BigInt::zero);
                (t, m)
            })
            .collect()
    }

    /// Rigorous upper step defect per factor: `log(T_i * M_i)`.
    pub fn upper_step_defects(&self) -> Vec<f64> {
        self.coefficient_data()
            .iter()
            .map(|(t, m)| {
                let tm = BigInt::from(*t) * m;
                crate::heights::log_abs(&tm).max(0.0)
            })
            .collect()
    }

    pub fn evaluate(&self, p: &ProjectiveTuplePoint) -> Result<ProjectiveTuplePoint> {
        if p.coords.len() != self.space.factors()
            || p
                .coords
                .iter()
                .zip(self.space.factor_dims())
                .any(|(v, n)| v.len() != n + 1)
        {
            return Err(Error::Dimension("point does not lie in the map's space".into()));
        }
        let x = p.flat_coords();
        let mut out = Vec::with_capacity(self.components.len());
        for (i, comps) in self.components.iter().enumerate() {
            let mut v: Vec<BigInt> = comps.iter().map(|c| c.eval(&x)).collect();
            if !normalize_vector(&mut v) {
                return Err(match self.mode {
                    RegularityMode::Total => Error::RegularityViolation {
                        factor: i,
                        step: None,
                    },
                    RegularityMode::OrbitChecked => Error::Indeterminacy {
                        factor: i,
                        step: None,
                    },
                });
            }
            out.push(v);
        }
        let image = ProjectiveTuplePoint { coords: out };
        stats::record_point(&image);
        Ok(image)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MorphismSpec, budget: &SymbolicBudget) -> Result<MorphismSpec> {
        if self.space != inner.space {
            return Err(Error::Dimension("composing maps on different spaces".into()));
        }
        let subs: Vec<Polynomial> = inner.components.iter().flatten().cloned().collect();
        let components = self
            .components
            .iter()
            .map(|comps| {
                comps
                    .iter()
                    .map(|c| c.substitute(&subs, budget))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mode = if self.mode == RegularityMode::Total && inner.mode == RegularityMode::Total {
            RegularityMode::Total
        } else {
            RegularityMode::OrbitChecked
        };
        let components = components
            .into_iter()
            .map(|mut comps| {
                strip_content(&mut comps);
                comps
            })
            .collect();
        MorphismSpec::new(self.space.clone(), components, mode)
    }

    /// `f^p` by repeated squaring of the composition.
    pub fn compose_power(&self, p: u32, budget: &SymbolicBudget) -> Result<MorphismSpec> {
        if p == 0 {
            return Err(Error::Invalid("compose_power needs p >= 1".into()));
        }
        let mut result: Option<MorphismSpec> = None;
        let mut base = self.clone();
        let mut e = p;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.compose(&base, budget)?,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.compose(&base, budget)?;
        }
        Ok(result.unwrap())
    }

    /// Equality as rational maps up to a nonzero scalar per output factor.
    pub fn same_map_as(&self, other: &MorphismSpec) -> bool {
        if self.space != other.space {
            return false;
        }
        self.components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| {
                let (mut a, mut b) = (a.clone(), b.clone());
                strip_content(&mut a);
                strip_content(&mut b);
                a == b
            })
    }

    /// Degrees `d_j` if this is a factorwise power map `x_{j,r} -> c_j x_{j,r}^{d_j}`.
    pub fn factorwise_power_degrees(&self) -> Option<Vec<u32>> {
        let mut degrees = Vec::with_capacity(self.space.factors());
        for (j, comps) in self.components.iter().enumerate() {
            let range = self.space.var_range(j);
            let mut deg = None;
            let mut coeff: Option<&BigInt> = None;
            for (r, p) in comps.iter().enumerate() {
                if p.term_count() != 1 {
                    return None;
                }
                let (e, c) = p.terms().next()?;
                let var = range.start + r;
                let d = e[var];
                if e.iter().enumerate().any(|(v, &x)| v != var && x != 0) || d == 0 {
                    return None;
                }
                if deg.is_some_and(|x| x != d) || coeff.is_some_and(|x| x != c) {
                    return None;
                }
                deg = Some(d);
                coeff = Some(c);
            }
            degrees.push(deg?);
        }
        Some(degrees)
    }
}

/// How `f o g = g o f` was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommutationEvidence {
    Symbolic,
    /// Symbolic composition exceeded the budget; checked pointwise on this many samples.
    Orbit { points: usize },
}

/// Checks that `f` and `g` commute: symbolically when the compositions fit in `budget`,
/// otherwise pointwise on `samples`.
pub fn verify_commutation(
    f: &MorphismSpec,
    g: &MorphismSpec,
    samples: &[ProjectiveTuplePoint],
    budget: &SymbolicBudget,
) -> Result<CommutationEvidence> {
    match (f.compose(g, budget), g.compose(f, budget)) {
        (Ok(fg), Ok(gf)) => {
            if fg.same_map_as(&gf) {
                Ok(CommutationEvidence::Symbolic)
            } else {
                Err(Error::Commutativity(
                    "f o g and g o f differ as polynomial tuples".into(),
                ))
            }
        }
        (Err(Error::Resource(_)), _) | (_, Err(Error::Resource(_))) => {
            if samples.is_empty() {
                return Err(Error::Resource(
                    "symbolic composition too large and no sample points given".into(),
                ));
            }
            for (i, s) in samples.iter().enumerate() {
                if f.evaluate(&g.evaluate(s)?)? != g.evaluate(&f.evaluate(s)?)? {
                    return Err(Error::Commutativity(format!("f(g(R)) != g(f(R)) at sample {i}")));
                }
            }
            Ok(CommutationEvidence::Orbit {
                points: samples.len(),
            })
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Divides a component vector by its common content and fixes the overall sign.
fn strip_content(comps: &mut [Polynomial]) {
    let g = comps
        .iter()
        .fold(BigInt::zero(), |g, p| g.gcd(&p.content()));
    if g.is_zero() {
        return;
    }
    let lead_negative = comps
        .iter()
        .find(|p| !p.is_zero())
        .and_then(|p| p.terms().next().map(|(_, c)| c.is_negative()))
        .unwrap_or(false);
    let den = if lead_negative { -g } else { g };
    if den.is_one() {
        return;
    }
    for p in comps.iter_mut() {
        *p = p.scale_exact(&BigInt::one(), &den);
    }
}

/// `points[0] = base`, `points[n+1] = f(points[n])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSegment {
    pub points: Vec<ProjectiveTuplePoint>,
}

impl OrbitSegment {
    pub fn base(&self) -> &ProjectiveTuplePoint {
        &self.points[0]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn peak_bits(&self) -> u64 {
        self.points.iter().map(|p| p.max_coord_bits()).max().unwrap_or(0)
    }
}

/// The orbit segment `P, f(P), ..., f^N(P)`.
pub fn iterate(f: &MorphismSpec, p: &ProjectiveTuplePoint, n: usize) -> Result<OrbitSegment> {
    let mut points = Vec::with_capacity(n + 1);
    points.push(p.clone());
    for step in 0..n {
        let next = f.evaluate(&points[step]).map_err(|e| e.at_step(step))?;
        points.push(next);
    }
    Ok(OrbitSegment { points })
}

/// Default per-point coordinate budget, in total bits. Large enough for `2^(2^20)`.
pub const DEFAULT_BIT_BUDGET: u64 = 4_000_000;

/// Lazily extended forward orbit with a per-point bit budget.
#[derive(Debug, Clone)]
pub struct Orbit<'a> {
    map: &'a MorphismSpec,
    points: Vec<ProjectiveTuplePoint>,
    bit_budget: u64,
    exhausted: bool,
}

impl<'a> Orbit<'a> {
    pub fn new(map: &'a MorphismSpec, base: ProjectiveTuplePoint, bit_budget: u64) -> Self {
        Orbit {
            map,
            points: vec![base],
            bit_budget,
            exhausted: false,
        }
    }

    pub fn map(&self) -> &MorphismSpec {
        self.map
    }

    /// `f^n(P)`, or `None` once the next point would exceed the bit budget.
    pub fn get(&mut self, n: usize) -> Result<Option<&ProjectiveTuplePoint>> {
        while self.points.len() <= n {
            if self.exhausted {
                return Ok(None);
            }
            let last = self.points.last().unwrap();
            let next = self.map.evaluate(last).map_err(|e| e.at_step(self.points.len() - 1))?;
            if next.bit_size() > self.bit_budget {
                self.exhausted = true;
                return Ok(None);
            }
            self.points.push(next);
        }
        Ok(Some(&self.points[n]))
    }

    pub fn computed(&self) -> &[ProjectiveTuplePoint] {
        &self.points
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }
}

/// Integer matrix product `a * b` (used to cross-check composed multidegrees).
pub fn int_matmul(a: &[Vec<u32>], b: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let n = a.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|t| a[i][t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

/// Parses an integer given as a decimal string.
pub fn parse_bigint(s: &str) -> Result<BigInt> {
    s.trim()
        .parse::<BigInt>()
        .map_err(|e| Error::Invalid(format!("bad integer {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn p1() -> ProductSpace {
        ProductSpace::projective_line()
    }

    fn p1xp1() -> ProductSpace {
        ProductSpace::new(vec![1, 1]).unwrap()
    }

    fn mono(n: usize, e: Vec<u32>) -> Polynomial {
        Polynomial::from_terms(n, vec![(BigInt::one(), e)]).unwrap()
    }

    pub(crate) fn monomial_jordan_map() -> MorphismSpec {
        let s = p1xp1();
        MorphismSpec::new(
            s,
            vec![
                vec![mono(4, vec![2, 0, 0, 0]), mono(4, vec![0, 2, 0, 0])],
                vec![mono(4, vec![1, 0, 2, 0]), mono(4, vec![0, 1, 0, 2])],
            ],
            RegularityMode::OrbitChecked,
        )
        .unwrap()
    }

    #[test]
    fn normalization_is_canonical() {
        let s = ProductSpace::new(vec![2]).unwrap();
        let p = ProjectiveTuplePoint::from_i64(&s, &[&[0, -6, 4]]).unwrap();
        assert_eq!(p.factors()[0], vec![BigInt::from(0), BigInt::from(3), BigInt::from(-2)]);
        assert!(ProjectiveTuplePoint::from_i64(&s, &[&[0, 0, 0]]).is_err());
    }

    #[test]
    fn squaring_map_evaluates() {
        let f = MorphismSpec::power_map(&p1(), &[2]).unwrap();
        let p = ProjectiveTuplePoint::from_i64(&p1(), &[&[2, 1]]).unwrap();
        let q = f.evaluate(&p).unwrap();
        assert_eq!(q, ProjectiveTuplePoint::from_i64(&p1(), &[&[4, 1]]).unwrap());
    }

    #[test]
    fn identity_fixes_points() {
        let s = p1xp1();
        let id = MorphismSpec::identity(&s);
        let p = ProjectiveTuplePoint::from_i64(&s, &[&[5, -3], &[7, 2]]).unwrap();
        assert_eq!(id.evaluate(&p).unwrap(), p);
    }

    #[test]
    fn monomial_map_hand_evaluation() {
        let f = monomial_jordan_map();
        let p = ProjectiveTuplePoint::from_i64(f.space(), &[&[2, 1], &[3, 1]]).unwrap();
        let q = f.evaluate(&p).unwrap();
        // oracle: direct substitution x0^2, x1^2, x0 y0^2, x1 y1^2
        assert_eq!(q, ProjectiveTuplePoint::from_i64(f.space(), &[&[4, 1], &[18, 1]]).unwrap());
        assert_eq!(f.multidegree_matrix(), &[vec![2, 0], vec![1, 2]]);
    }

    #[test]
    fn iterate_squaring_orbit() {
        let f = MorphismSpec::power_map(&p1(), &[2]).unwrap();
        let p = ProjectiveTuplePoint::from_i64(&p1(), &[&[2, 1]]).unwrap();
        let seg = iterate(&f, &p, 3).unwrap();
        let firsts: Vec<i64> = seg
            .points
            .iter()
            .map(|q| q.factors()[0][0].to_i64().unwrap())
            .collect();
        assert_eq!(firsts, vec![2, 4, 16, 256]);
        assert_eq!(iterate(&f, &p, 0).unwrap().points, vec![p]);
    }

    #[test]
    fn iterate_monomial_exponent_bookkeeping() {
        let f = monomial_jordan_map();
        let p = ProjectiveTuplePoint::from_i64(f.space(), &[&[2, 1], &[3, 1]]).unwrap();
        let seg = iterate(&f, &p, 2).unwrap();
        // y_n = 2^{n 2^{n-1}} 3^{2^n}; n = 2 gives 2^4 * 3^4
        let expected = BigInt::from(2).pow(4u32) * BigInt::from(3).pow(4u32);
        assert_eq!(seg.points[2].factors()[1], vec![expected, BigInt::one()]);
    }

    #[test]
    fn compose_power_of_squaring() {
        let f = MorphismSpec::power_map(&p1(), &[2]).unwrap();
        let f2 = f.compose_power(2, &SymbolicBudget::default()).unwrap();
        assert!(f2.same_map_as(&MorphismSpec::power_map(&p1(), &[4]).unwrap()));
        let f1 = f.compose_power(1, &SymbolicBudget::default()).unwrap();
        assert_eq!(f1, f);
    }

    #[test]
    fn compose_power_multidegree() {
        let f = monomial_jordan_map();
        let f2 = f.compose_power(2, &SymbolicBudget::default()).unwrap();
        assert_eq!(f2.multidegree_matrix(), &[vec![4, 0], vec![4, 4]]);
        assert_eq!(
            f2.multidegree_matrix(),
            int_matmul(f.multidegree_matrix(), f.multidegree_matrix()).as_slice()
        );
    }

    #[test]
    fn vanishing_factor_errors_by_mode() {
        // ((x0 y0 : x1 y1), (y1 : y0)): ((1:0),(1:0)) -> ((1:0),(0:1)) -> first factor (0:0)
        let s = p1xp1();
        let comps = vec![
            vec![mono(4, vec![1, 0, 1, 0]), mono(4, vec![0, 1, 0, 1])],
            vec![mono(4, vec![0, 0, 0, 1]), mono(4, vec![0, 0, 1, 0])],
        ];
        let f = MorphismSpec::new(s.clone(), comps, RegularityMode::OrbitChecked).unwrap();
        let bad = ProjectiveTuplePoint::from_i64(&s, &[&[1, 0], &[0, 1]]).unwrap();
        assert_eq!(
            f.evaluate(&bad).unwrap_err(),
            Error::Indeterminacy {
                factor: 0,
                step: None
            }
        );
        let total = f.clone().with_mode(RegularityMode::Total);
        assert!(matches!(
            total.evaluate(&bad).unwrap_err(),
            Error::RegularityViolation { factor: 0, .. }
        ));
        let start = ProjectiveTuplePoint::from_i64(&s, &[&[1, 0], &[1, 0]]).unwrap();
        assert_eq!(
            iterate(&f, &start, 3).unwrap_err(),
            Error::Indeterminacy {
                factor: 0,
                step: Some(1)
            }
        );
    }

    #[test]
    fn rejects_mixed_multidegrees() {
        let s = p1();
        let comps = vec![vec![mono(2, vec![2, 0]), mono(2, vec![0, 3])]];
        assert!(MorphismSpec::new(s, comps, RegularityMode::Total).is_err());
    }

    #[test]
    fn power_map_detection() {
        let f = MorphismSpec::power_map(&p1xp1(), &[2, 3]).unwrap();
        assert_eq!(f.factorwise_power_degrees(), Some(vec![2, 3]));
        assert_eq!(monomial_jordan_map().factorwise_power_degrees(), None);
    }
}
