//! Orbit intersections `S_{f,g}(P,Q) = {(m,n) : f^m(P) = g^n(Q)}`.
//!
//! The search walks the diagonals `|m - n| <= B` allowed by the gap bound and tests exact
//! point equality. For factorwise power maps the factor heights have closed forms, and the
//! equations `A^(e^m) = B^(e'^n)` reduce to linear equations in prime valuations. Their
//! solution set contains every hit, which is what lets a finite search certify the whole set.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde_json::{json, Value};

use crate::canonical::{CanonicalOptions, PolarizedData};
use crate::error::{Error, Result};
use crate::geometry::{
    iterate, verify_commutation, CommutationEvidence, MorphismSpec, Orbit, ProjectiveTuplePoint,
    DEFAULT_BIT_BUDGET,
};
use crate::heights::{factor_heights, height_sequence, DivisorClass};
use crate::poly::SymbolicBudget;
use crate::profile::{
    envelope_band, regression_profile, spectral_analysis, Alpha, GrowthProfile, DEFAULT_ZERO_TOL,
};

pub const DEFAULT_HORIZON: usize = 24;
/// Largest denominator tried by the continued-fraction dependence scan.
pub const CF_MAX_DENOMINATOR: u64 = 1_000_000;

/// `{(a + b l, c + d l) : l >= 0}`; `b = d = 0` is a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct APPair {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl APPair {
    pub fn singleton(m: u64, n: u64) -> Self {
        APPair { a: m, b: 0, c: n, d: 0 }
    }

    pub fn is_singleton(&self) -> bool {
        self.b == 0 && self.d == 0
    }

    pub fn at(&self, l: u64) -> (u64, u64) {
        (self.a + self.b * l, self.c + self.d * l)
    }

    pub fn contains(&self, m: u64, n: u64) -> bool {
        if self.is_singleton() {
            return (m, n) == (self.a, self.c);
        }
        if m < self.a || n < self.c {
            return false;
        }
        let l = if self.b > 0 { (m - self.a) / self.b } else { (n - self.c) / self.d };
        self.at(l) == (m, n)
    }

    /// Members with both coordinates at most the given bounds.
    pub fn members_within(&self, m_max: u64, n_max: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut l = 0;
        loop {
            let (m, n) = self.at(l);
            if m > m_max || n > n_max {
                break;
            }
            out.push((m, n));
            if self.is_singleton() {
                break;
            }
            l += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Certified,
    HorizonLimited,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Certified => "certified",
            Status::HorizonLimited => "horizon-limited",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct APUnion {
    pub pairs: Vec<APPair>,
    /// Every hit with `m <= horizon_f`, `n <= horizon_g`, sorted.
    pub hits: Vec<(u64, u64)>,
    pub horizon_f: usize,
    pub horizon_g: usize,
    pub status: Status,
    /// Pairs in the searched region whose equality could not be decided.
    pub undecided: Vec<(u64, u64)>,
    pub notes: Vec<String>,
}

impl APUnion {
    pub fn horizon(&self) -> usize {
        self.horizon_f.max(self.horizon_g)
    }

    pub fn contains(&self, m: u64, n: u64) -> bool {
        self.pairs.iter().any(|p| p.contains(m, n))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "status": self.status.as_str(),
            "horizon": [self.horizon_f, self.horizon_g],
            "pairs": self.pairs.iter().map(|p| json!({"a": p.a, "b": p.b, "c": p.c, "d": p.d})).collect::<Vec<_>>(),
            "hits": self.hits,
            "undecided": self.undecided,
            "notes": self.notes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rigor {
    Heuristic,
    ExactClosedForm,
}

impl Rigor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rigor::Heuristic => "heuristic",
            Rigor::ExactClosedForm => "exact-closed-form",
        }
    }
}

/// `lower n^t alpha^n <= h_H(f^n P) <= upper n^t alpha^n` for `n >= n0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub t: u32,
    pub n0: usize,
    pub rigor: Rigor,
}

/// Exact envelope for factorwise power maps: `h_i(f^n P) = e_i^n h_i(P)`.
pub fn closed_form_envelope(
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    h: &DivisorClass,
) -> Result<Option<Envelope>> {
    let Some(deg) = f.factorwise_power_degrees() else {
        return Ok(None);
    };
    h.check_dim(deg.len())?;
    let hs = factor_heights(p);
    let weights = h.as_f64();
    let alpha = deg
        .iter()
        .zip(&hs)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&e, _)| e)
        .max();
    let Some(alpha) = alpha else {
        return Err(Error::Hypothesis("all factor heights vanish; alpha <= 1".into()));
    };
    let lower = deg
        .iter()
        .zip(&hs)
        .zip(&weights)
        .filter(|((&e, _), _)| e == alpha)
        .map(|((_, x), w)| x * w)
        .sum();
    let upper = hs.iter().zip(&weights).map(|(x, w)| x * w).sum();
    Ok(Some(Envelope {
        lower,
        upper,
        alpha: alpha as f64,
        t: 0,
        n0: 0,
        rigor: Rigor::ExactClosedForm,
    }))
}

/// Observed band of `h_n / (n^t alpha^n)` over `[n0, N]`.
pub fn empirical_envelope(
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    h: &DivisorClass,
    alpha: f64,
    t: u32,
    n0: usize,
    depth: usize,
) -> Result<Envelope> {
    let seq = height_sequence(f, p, h, depth)?;
    let band = envelope_band(&seq, alpha, t, n0.max(if t > 0 { 1 } else { 0 })..=depth)?;
    Ok(Envelope {
        lower: band.c0,
        upper: band.c1,
        alpha,
        t,
        n0,
        rigor: Rigor::Heuristic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    /// Bound on `|m - n|` for hits with `m, n >= n0`.
    pub b: u64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
    pub n0: usize,
    pub rigor: Rigor,
}

impl GapCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "B": self.b,
            "C0": format!("{:.12e}", self.c0),
            "C1": format!("{:.12e}", self.c1),
            "C2": format!("{:.12e}", self.c2),
            "C3": format!("{:.12e}", self.c3),
            "alpha": format!("{:.12e}", self.alpha),
            "n0": self.n0,
            "rigor": self.rigor.as_str(),
        })
    }
}

fn same_alpha(a: &GrowthProfile, b: &GrowthProfile) -> bool {
    match (&a.alpha, &b.alpha) {
        (Alpha::Exact(x), Alpha::Exact(y)) => x == y,
        (x, y) => match (x.to_f64(), y.to_f64()) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs(),
            _ => false,
        },
    }
}

/// `B = max(ceil(log(C3/C0) / log alpha), ceil(log(C1/C2) / log alpha), 0)`.
pub fn gap_bound(
    profile_f: &GrowthProfile,
    profile_g: &GrowthProfile,
    env_f: &Envelope,
    env_g: &Envelope,
) -> Result<GapCertificate> {
    if profile_f.t != profile_g.t || profile_f.t.is_none() {
        return Err(Error::Hypothesis(format!(
            "t_f(P) = {:?} and t_g(Q) = {:?} differ; use the finiteness check",
            profile_f.t, profile_g.t
        )));
    }
    if !same_alpha(profile_f, profile_g) {
        return Err(Error::Hypothesis(format!(
            "alpha_f(P) = {} and alpha_g(Q) = {} differ; use the finiteness check",
            profile_f.alpha.to_display(),
            profile_g.alpha.to_display()
        )));
    }
    let alpha = profile_f.alpha_f64().unwrap();
    if alpha <= 1.0 {
        return Err(Error::Hypothesis("alpha must exceed 1".into()));
    }
    let (c0, c1, c2, c3) = (env_f.lower, env_f.upper, env_g.lower, env_g.upper);
    if !(c0 > 0.0 && c2 > 0.0) {
        return Err(Error::Hypothesis("envelope lower constants must be positive".into()));
    }
    let la = alpha.ln();
    let side = |num: f64, den: f64| ((num / den).ln() / la - 1e-9).ceil().max(0.0) as u64;
    let rigor = if env_f.rigor == Rigor::ExactClosedForm && env_g.rigor == Rigor::ExactClosedForm {
        Rigor::ExactClosedForm
    } else {
        Rigor::Heuristic
    };
    Ok(GapCertificate {
        b: side(c3, c0).max(side(c1, c2)),
        c0,
        c1,
        c2,
        c3,
        alpha,
        n0: env_f.n0.max(env_g.n0),
        rigor,
    })
}

/// One of the `p q` pieces `S_{f^p, g^q}(f^i P, g^j Q)`, re-indexed by `(m,n) -> (i + p m, j + q n)`.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub f: MorphismSpec,
    pub g: MorphismSpec,
    pub p_point: ProjectiveTuplePoint,
    pub q_point: ProjectiveTuplePoint,
    pub i: u64,
    pub j: u64,
    pub p: u64,
    pub q: u64,
}

impl Subproblem {
    pub fn reindex(&self, m: u64, n: u64) -> (u64, u64) {
        (self.i + self.p * m, self.j + self.q * n)
    }

    pub fn reindex_pair(&self, ap: &APPair) -> APPair {
        APPair {
            a: self.i + self.p * ap.a,
            b: self.p * ap.b,
            c: self.j + self.q * ap.c,
            d: self.q * ap.d,
        }
    }
}

pub fn reduce_exponents(
    f: &MorphismSpec,
    g: &MorphismSpec,
    p_point: &ProjectiveTuplePoint,
    q_point: &ProjectiveTuplePoint,
    p: u32,
    q: u32,
) -> Result<Vec<Subproblem>> {
    if p == 0 || q == 0 {
        return Err(Error::Invalid("exponents must be at least 1".into()));
    }
    let budget = SymbolicBudget::default();
    let fp = f.compose_power(p, &budget)?;
    let gq = g.compose_power(q, &budget)?;
    let fo = iterate(f, p_point, p as usize - 1)?;
    let go = iterate(g, q_point, q as usize - 1)?;
    let mut out = Vec::with_capacity((p * q) as usize);
    for (i, pi) in fo.points.iter().enumerate() {
        for (j, qj) in go.points.iter().enumerate() {
            out.push(Subproblem {
                f: fp.clone(),
                g: gq.clone(),
                p_point: pi.clone(),
                q_point: qj.clone(),
                i: i as u64,
                j: j as u64,
                p: p as u64,
                q: q as u64,
            });
        }
    }
    Ok(out)
}

// ---- closed-form candidate sets ----

fn factorize(n: u64) -> BTreeMap<u64, i64> {
    if n <= 1 {
        return BTreeMap::new();
    }
    num_prime::nt_funcs::factorize64(n)
        .into_iter()
        .map(|(p, e)| (p, e as i64))
        .collect()
}

/// `(m, n)` with `a m - b n = c`, or a single point, or nothing, or everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidates {
    Empty,
    All,
    Point(u64, u64),
    Line { a: i64, b: i64, c: i64 },
}

impl Candidates {
    pub fn contains(&self, m: u64, n: u64) -> bool {
        match self {
            Candidates::Empty => false,
            Candidates::All => true,
            Candidates::Point(x, y) => (m, n) == (*x, *y),
            Candidates::Line { a, b, c } => {
                (*a as i128) * (m as i128) - (*b as i128) * (n as i128) == *c as i128
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Candidates::Empty => "no pair has equal factor heights".into(),
            Candidates::All => "factor heights never separate the orbits".into(),
            Candidates::Point(m, n) => format!("factor heights agree only at ({m},{n})"),
            Candidates::Line { a, b, c } => format!("factor heights agree exactly on {a} m - {b} n = {c}"),
        }
    }
}

/// Factorwise power map data: degrees and the factorizations of `max |x_{j,i}|` of the base.
#[derive(Debug, Clone, PartialEq)]
struct ClosedForm {
    degrees: Vec<u32>,
    base: Vec<BTreeMap<u64, i64>>,
}

fn closed_form(f: &MorphismSpec, p: &ProjectiveTuplePoint) -> Option<ClosedForm> {
    let degrees = f.factorwise_power_degrees()?;
    let base = (0..degrees.len())
        .map(|j| p.factor_max_abs(j).to_u64().map(factorize))
        .collect::<Option<Vec<_>>>()?;
    Some(ClosedForm { degrees, base })
}

/// Pairs whose factor heights all agree: `A_j^(e_j^m) = B_j^(e'_j^n)` for every factor `j`.
fn height_candidates(cf: &ClosedForm, cg: &ClosedForm) -> Candidates {
    let mut rows: Vec<(i64, i64, i64)> = Vec::new();
    for j in 0..cf.degrees.len() {
        let (fa, fb) = (&cf.base[j], &cg.base[j]);
        if fa.is_empty() && fb.is_empty() {
            continue;
        }
        if fa.is_empty() != fb.is_empty() {
            return Candidates::Empty;
        }
        let (e1, e2) = (factorize(cf.degrees[j] as u64), factorize(cg.degrees[j] as u64));
        let primes: BTreeSet<u64> = fa.keys().chain(fb.keys()).copied().collect();
        for p in primes {
            let (alpha, beta) = (fa.get(&p).copied().unwrap_or(0), fb.get(&p).copied().unwrap_or(0));
            if alpha == 0 || beta == 0 {
                return Candidates::Empty;
            }
            // e1^m alpha = e2^n beta, compared prime by prime
            let (va, vb) = (factorize(alpha as u64), factorize(beta as u64));
            let qs: BTreeSet<u64> = e1.keys().chain(e2.keys()).chain(va.keys()).chain(vb.keys()).copied().collect();
            for q in qs {
                let get = |m: &BTreeMap<u64, i64>| m.get(&q).copied().unwrap_or(0);
                rows.push((get(&e1), get(&e2), get(&vb) - get(&va)));
            }
        }
    }
    solve_rows(&rows)
}

fn solve_rows(rows: &[(i64, i64, i64)]) -> Candidates {
    let mut eqs = Vec::new();
    for &(a, b, c) in rows {
        if a == 0 && b == 0 {
            if c != 0 {
                return Candidates::Empty;
            }
        } else {
            eqs.push((a, b, c));
        }
    }
    let Some(&(a1, b1, c1)) = eqs.first() else {
        return Candidates::All;
    };
    for &(a2, b2, c2) in &eqs[1..] {
        let det = -a1 * b2 + a2 * b1;
        if det != 0 {
            let mn = -c1 * b2 + b1 * c2;
            let nn = a1 * c2 - a2 * c1;
            if mn % det != 0 || nn % det != 0 {
                return Candidates::Empty;
            }
            let (m, n) = (mn / det, nn / det);
            if m < 0 || n < 0 || eqs.iter().any(|&(a, b, c)| a * m - b * n != c) {
                return Candidates::Empty;
            }
            return Candidates::Point(m as u64, n as u64);
        }
        if a1 * c2 != a2 * c1 || b1 * c2 != b2 * c1 {
            return Candidates::Empty;
        }
    }
    let g = a1.gcd(&b1).gcd(&c1);
    let (mut a, mut b, mut c) = (a1 / g, b1 / g, c1 / g);
    if a < 0 || (a == 0 && b < 0) {
        (a, b, c) = (-a, -b, -c);
    }
    if a.gcd(&b) != 1 && c % a.gcd(&b) != 0 {
        return Candidates::Empty;
    }
    Candidates::Line { a, b, c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Hit,
    Miss,
    Undecided,
}

struct PairOracle<'a> {
    fo: Orbit<'a>,
    go: Orbit<'a>,
    candidates: Option<Candidates>,
    decided: BTreeMap<(u64, u64), Outcome>,
}

impl<'a> PairOracle<'a> {
    fn decide(&mut self, m: u64, n: u64) -> Result<Outcome> {
        if let Some(o) = self.decided.get(&(m, n)) {
            return Ok(*o);
        }
        let out = if self.candidates.as_ref().is_some_and(|c| !c.contains(m, n)) {
            Outcome::Miss
        } else if self.fo.get(m as usize)?.is_none() || self.go.get(n as usize)?.is_none() {
            Outcome::Undecided
        } else if self.fo.computed()[m as usize] == self.go.computed()[n as usize] {
            Outcome::Hit
        } else {
            Outcome::Miss
        };
        self.decided.insert((m, n), out);
        Ok(out)
    }

    fn point_f(&mut self, m: u64) -> Result<Option<ProjectiveTuplePoint>> {
        Ok(self.fo.get(m as usize)?.cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub horizon_f: usize,
    pub horizon_g: usize,
    /// Pairs with `min(m, n) < n0` are enumerated regardless of the gap bound.
    pub n0: usize,
    pub bit_budget: u64,
}

impl SearchOptions {
    pub fn new(horizon: usize) -> Self {
        SearchOptions {
            horizon_f: horizon,
            horizon_g: horizon,
            n0: 0,
            bit_budget: DEFAULT_BIT_BUDGET,
        }
    }
}

pub fn search(
    f: &MorphismSpec,
    g: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    q: &ProjectiveTuplePoint,
    b: u64,
    n_max: usize,
) -> Result<APUnion> {
    search_with(f, g, p, q, b, &SearchOptions::new(n_max))
}

pub fn search_with(
    f: &MorphismSpec,
    g: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    q: &ProjectiveTuplePoint,
    b: u64,
    opts: &SearchOptions,
) -> Result<APUnion> {
    if opts.horizon_f == 0 && opts.horizon_g == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    if f.space() != g.space() {
        return Err(Error::Dimension("maps live on different spaces".into()));
    }
    let candidates = match (closed_form(f, p), closed_form(g, q)) {
        (Some(cf), Some(cg)) => Some(height_candidates(&cf, &cg)),
        _ => None,
    };
    let mut oracle = PairOracle {
        fo: Orbit::new(f, p.clone(), opts.bit_budget),
        go: Orbit::new(g, q.clone(), opts.bit_budget),
        candidates: candidates.clone(),
        decided: BTreeMap::new(),
    };
    let (hf, hg) = (opts.horizon_f as u64, opts.horizon_g as u64);
    let mut notes = Vec::new();

    // walk the diagonals n = m + k, then the strip below n0
    let bi = b as i64;
    for k in -bi..=bi {
        let m_lo = (-k).max(0) as u64;
        let m_hi = (hg as i64 - k).min(hf as i64);
        if m_hi < m_lo as i64 {
            continue;
        }
        for m in m_lo..=m_hi as u64 {
            oracle.decide(m, (m as i64 + k) as u64)?;
        }
    }
    let n0 = opts.n0 as u64;
    for m in 0..=hf {
        for n in 0..=hg {
            if m.min(n) < n0 {
                oracle.decide(m, n)?;
            }
        }
    }

    let mut pairs: Vec<APPair> = Vec::new();
    let mut closed = candidates.is_some();
    let mut implied: BTreeSet<(u64, u64)> = BTreeSet::new();
    match &candidates {
        Some(Candidates::Empty) => notes.push(Candidates::Empty.describe()),
        Some(Candidates::All) => {
            notes.push(Candidates::All.describe());
            closed = false;
        }
        Some(Candidates::Point(m, n)) => {
            notes.push(candidates.as_ref().unwrap().describe());
            match oracle.decide(*m, *n)? {
                Outcome::Hit => pairs.push(APPair::singleton(*m, *n)),
                Outcome::Miss => {}
                Outcome::Undecided => closed = false,
            }
        }
        Some(line @ Candidates::Line { a, b: lb, c }) => {
            notes.push(line.describe());
            let (a, lb, c) = (*a, *lb, *c);
            if a > 0 && lb > 0 {
                // infinite: walk the line from its first point until the first hit
                let step = (lb as u64, a as u64);
                let first = (0..=(c.max(0) / a) as u64 + lb as u64)
                    .find(|&m| (a * m as i64 - c) % lb == 0 && (a * m as i64 - c) / lb >= 0);
                let mut found = None;
                if let Some(m) = first {
                    let mut pt = (m, ((a * m as i64 - c) / lb) as u64);
                    while pt.0 <= hf && pt.1 <= hg {
                        match oracle.decide(pt.0, pt.1)? {
                            Outcome::Hit => {
                                found = Some(pt);
                                break;
                            }
                            Outcome::Miss => {}
                            Outcome::Undecided => {
                                closed = false;
                                break;
                            }
                        }
                        pt = (pt.0 + step.0, pt.1 + step.1);
                    }
                }
                match found {
                    Some((m0, n0)) => {
                        let r = oracle.point_f(m0)?.expect("hit point is computed");
                        if certify_progression(f, g, &r, step)? {
                            let ap = APPair { a: m0, b: step.0, c: n0, d: step.1 };
                            implied.extend(ap.members_within(hf, hg));
                            pairs.push(ap);
                        } else {
                            notes.push(format!("progression from ({m0},{n0}) with step {step:?} not certified"));
                            closed = false;
                        }
                    }
                    None => closed = false,
                }
            } else if a > 0 && lb < 0 {
                // finitely many points with a m + |b| n = c
                for m in 0..=(c.max(0) / a) as u64 {
                    let rest = c - a * m as i64;
                    if rest % (-lb) == 0 {
                        let n = (rest / (-lb)) as u64;
                        match oracle.decide(m, n)? {
                            Outcome::Hit => pairs.push(APPair::singleton(m, n)),
                            Outcome::Miss => {}
                            Outcome::Undecided => closed = false,
                        }
                    }
                }
            } else {
                notes.push("candidate line is parallel to an axis; not certifiable".into());
                closed = false;
            }
        }
        None => notes.push("no closed form for the factor heights; search is bounded by the horizon".into()),
    }

    let mut hits: BTreeSet<(u64, u64)> = oracle
        .decided
        .iter()
        .filter(|(&(m, n), &o)| o == Outcome::Hit && m <= hf && n <= hg)
        .map(|(&k, _)| k)
        .collect();
    hits.extend(implied.iter().copied());
    let undecided: Vec<(u64, u64)> = oracle
        .decided
        .iter()
        .filter(|(k, &o)| o == Outcome::Undecided && !implied.contains(k))
        .map(|(&k, _)| k)
        .collect();

    // soundness: every observed hit lies in the candidate set, and no certified member is a miss
    if let Some(c) = &candidates {
        if let Some(h) = hits.iter().find(|h| !c.contains(h.0, h.1)) {
            return Err(Error::AssertionFailure(format!("hit {h:?} outside the height candidates")));
        }
    }
    if let Some(x) = implied
        .iter()
        .find(|k| oracle.decided.get(k) == Some(&Outcome::Miss))
    {
        return Err(Error::AssertionFailure(format!("certified progression member {x:?} is not a hit")));
    }

    if candidates.is_none() {
        pairs = progressions_from_hits(f, g, &mut oracle, &hits, &mut notes)?;
    } else {
        for &(m, n) in &hits {
            if !pairs.iter().any(|p| p.contains(m, n)) {
                pairs.push(APPair::singleton(m, n));
            }
        }
    }
    pairs.sort();
    pairs.dedup();

    let status = if closed && undecided.is_empty() {
        Status::Certified
    } else {
        Status::HorizonLimited
    };
    Ok(APUnion {
        pairs,
        hits: hits.into_iter().collect(),
        horizon_f: opts.horizon_f,
        horizon_g: opts.horizon_g,
        status,
        undecided,
        notes,
    })
}

/// Greedy progression detection from the earliest uncovered hit, with steps taken from the
/// differences to later hits.
fn progressions_from_hits(
    f: &MorphismSpec,
    g: &MorphismSpec,
    oracle: &mut PairOracle<'_>,
    hits: &BTreeSet<(u64, u64)>,
    notes: &mut Vec<String>,
) -> Result<Vec<APPair>> {
    let mut covered: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut pairs = Vec::new();
    for &(m0, n0) in hits {
        if covered.contains(&(m0, n0)) {
            continue;
        }
        let mut certified = None;
        for &(m1, n1) in hits.range((m0, n0)..).skip(1) {
            if m1 <= m0 || n1 <= n0 {
                continue;
            }
            let step = (m1 - m0, n1 - n0);
            let r = oracle.point_f(m0)?.expect("hit point is computed");
            if certify_progression(f, g, &r, step)? {
                certified = Some(step);
                break;
            }
        }
        match certified {
            Some((b, d)) => {
                let ap = APPair { a: m0, b, c: n0, d };
                covered.extend(hits.iter().filter(|h| ap.contains(h.0, h.1)));
                pairs.push(ap);
            }
            None => {
                covered.insert((m0, n0));
                pairs.push(APPair::singleton(m0, n0));
            }
        }
    }
    if !hits.is_empty() {
        notes.push("progressions certified pointwise; hits beyond the horizon are not excluded".into());
    }
    Ok(pairs)
}

/// True iff `f^b(R) = g^d(R)` and `f`, `g` commute, which together give
/// `f^(b l)(R) = g^(d l)(R)` for all `l` by induction.
pub fn certify_progression(
    f: &MorphismSpec,
    g: &MorphismSpec,
    r: &ProjectiveTuplePoint,
    step: (u64, u64),
) -> Result<bool> {
    let (b, d) = step;
    if b == 0 || d == 0 {
        return Err(Error::Invalid("progression steps must be at least 1".into()));
    }
    let fb = iterate(f, r, b as usize)?.points.pop().unwrap();
    let gd = iterate(g, r, d as usize)?.points.pop().unwrap();
    if fb != gd {
        return Ok(false);
    }
    if f == g || f.same_map_as(g) {
        return Ok(true);
    }
    match verify_commutation(f, g, &[], &SymbolicBudget::default()) {
        Ok(CommutationEvidence::Symbolic) => Ok(true),
        Ok(_) | Err(Error::Commutativity(_)) | Err(Error::Resource(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

// ---- finiteness ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinitenessKind {
    FiniteCertified,
    FiniteLikely,
    Unknown,
}

impl FinitenessKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FinitenessKind::FiniteCertified => "finite-certified",
            FinitenessKind::FiniteLikely => "finite-likely",
            FinitenessKind::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinitenessVerdict {
    pub kind: FinitenessKind,
    /// `(a, b)` with `alpha_f^a = alpha_g^b` when a dependence was found.
    pub dependency: Option<(u64, u64)>,
    pub commutation: CommutationEvidence,
    pub reason: String,
}

impl FinitenessVerdict {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.kind.as_str(),
            "dependency": self.dependency,
            "commutation": match self.commutation {
                CommutationEvidence::Symbolic => "symbolic".to_string(),
                CommutationEvidence::Orbit { points } => format!("orbit ({points} points)"),
            },
            "reason": self.reason,
        })
    }
}

fn valuations(x: &BigRational) -> Result<BTreeMap<u64, i64>> {
    let to64 = |v: &BigInt| {
        v.abs()
            .to_u64()
            .ok_or_else(|| Error::Resource("rational alpha exceeds 2^64 after clearing".into()))
    };
    let mut out = factorize(to64(x.numer())?);
    for (p, e) in factorize(to64(x.denom())?) {
        *out.entry(p).or_insert(0) -= e;
    }
    out.retain(|_, e| *e != 0);
    Ok(out)
}

/// Smallest positive `(a, b)` with `x^a = y^b`, or `None` if `x`, `y` are multiplicatively independent.
pub fn multiplicative_dependency(x: &BigRational, y: &BigRational) -> Result<Option<(u64, u64)>> {
    let (u, w) = (valuations(x)?, valuations(y)?);
    if u.is_empty() || w.is_empty() || u.keys().ne(w.keys()) {
        return Ok(None);
    }
    // a u = b w  =>  a / b = w_p / u_p for every p
    let (p0, &u0) = u.iter().next().unwrap();
    let w0 = w[p0];
    let g = u0.gcd(&w0);
    let (a, b) = (w0 / g, u0 / g);
    if a <= 0 || b <= 0 || u.iter().any(|(p, &up)| a * up != b * w[p]) {
        return Ok(None);
    }
    Ok(Some((a as u64, b as u64)))
}

/// Continued-fraction scan for `x ~ p/q` with `q <= max_den`.
fn rational_approximation(x: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a < 0.0 || a > 1e12 {
            return None;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= 1e-12 * x.abs().max(1.0) {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn finiteness_check(
    pd: &PolarizedData,
    g: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    q: &ProjectiveTuplePoint,
    profile_f: &GrowthProfile,
    profile_g: &GrowthProfile,
) -> Result<FinitenessVerdict> {
    let f = pd.map();
    let samples: Vec<ProjectiveTuplePoint> = [p, q]
        .iter()
        .flat_map(|x| iterate(g, x, 3).map(|s| s.points).unwrap_or_default())
        .collect();
    let commutation = verify_commutation(f, g, &samples, &SymbolicBudget::default())?;
    let (af, ag) = (&profile_f.alpha, &profile_g.alpha);
    if !(crate::profile::is_expanding(af) && crate::profile::is_expanding(ag)) {
        return Err(Error::Hypothesis("both arithmetic degrees must exceed 1".into()));
    }
    let t_match = profile_f.t == profile_g.t;
    match (af, ag) {
        (Alpha::Exact(x), Alpha::Exact(y)) => match multiplicative_dependency(x, y)? {
            None => Ok(FinitenessVerdict {
                kind: FinitenessKind::FiniteCertified,
                dependency: None,
                commutation,
                reason: format!(
                    "alpha_f = {} and alpha_g = {} are multiplicatively independent, so the log ratio is irrational",
                    af.to_display(),
                    ag.to_display()
                ),
            }),
            Some(dep) => Ok(FinitenessVerdict {
                kind: FinitenessKind::Unknown,
                dependency: Some(dep),
                commutation,
                reason: format!(
                    "alpha_f^{} = alpha_g^{}; reduce to f^{} and g^{}{}",
                    dep.0,
                    dep.1,
                    dep.0,
                    dep.1,
                    if t_match { "" } else { " (t differs: no algorithmic handle)" }
                ),
            }),
        },
        _ => {
            let (x, y) = (af.to_f64().unwrap(), ag.to_f64().unwrap());
            let ratio = y.ln() / x.ln();
            match rational_approximation(ratio, CF_MAX_DENOMINATOR) {
                Some((num, den)) => Ok(FinitenessVerdict {
                    kind: FinitenessKind::Unknown,
                    dependency: Some((num, den)),
                    commutation,
                    reason: format!("log ratio {ratio:.15} is close to {num}/{den}"),
                }),
                None => Ok(FinitenessVerdict {
                    kind: FinitenessKind::FiniteLikely,
                    dependency: None,
                    commutation,
                    reason: format!("no rational approximation with denominator <= {CF_MAX_DENOMINATOR}"),
                }),
            }
        }
    }
}

// ---- combined analysis ----

#[derive(Debug, Clone, PartialEq)]
pub struct DmlOptions {
    pub horizon: usize,
    pub bit_budget: u64,
    pub zero_tol: f64,
    pub canonical: CanonicalOptions,
    /// Orbit depth used for regression and empirical envelopes.
    pub profile_depth: usize,
}

impl Default for DmlOptions {
    fn default() -> Self {
        DmlOptions {
            horizon: DEFAULT_HORIZON,
            bit_budget: DEFAULT_BIT_BUDGET,
            zero_tol: DEFAULT_ZERO_TOL,
            canonical: CanonicalOptions::default(),
            profile_depth: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmlReport {
    pub profile_f: GrowthProfile,
    pub profile_g: GrowthProfile,
    pub gap: Option<GapCertificate>,
    /// `(p, q)` when the search ran on `f^p`, `g^q`.
    pub reduction: Option<(u64, u64)>,
    pub finiteness: Option<FinitenessVerdict>,
    pub union: APUnion,
    pub notes: Vec<String>,
}

impl DmlReport {
    pub fn status(&self) -> Status {
        self.union.status
    }

    pub fn to_json(&self) -> Value {
        json!({
            "status": self.union.status.as_str(),
            "profile_f": self.profile_f.to_json(),
            "profile_g": self.profile_g.to_json(),
            "gap": self.gap.as_ref().map(|g| g.to_json()),
            "reduction": self.reduction,
            "finiteness": self.finiteness.as_ref().map(|v| v.to_json()),
            "search": self.union.to_json(),
            "notes": self.notes,
        })
    }
}

fn point_profile(f: &MorphismSpec, p: &ProjectiveTuplePoint, h: &DivisorClass, opts: &DmlOptions) -> Result<GrowthProfile> {
    match spectral_analysis(f, p, h, opts.zero_tol, &opts.canonical) {
        Ok(a) => Ok(a.profile),
        Err(Error::InexactSpectrum) => {
            let seq = height_sequence(f, p, h, opts.profile_depth)?;
            regression_profile(&seq, None)
        }
        Err(e) => Err(e),
    }
}

fn envelope_for(f: &MorphismSpec, p: &ProjectiveTuplePoint, h: &DivisorClass, prof: &GrowthProfile, opts: &DmlOptions) -> Result<Envelope> {
    if let Some(env) = closed_form_envelope(f, p, h)? {
        return Ok(env);
    }
    let alpha = prof.alpha_f64().unwrap_or(1.0);
    empirical_envelope(f, p, h, alpha, prof.t.unwrap_or(0), 1, opts.profile_depth)
}

/// Search with the stated horizon after reducing to `f^p`, `g^q`; hits are mapped back.
pub fn reduced_search(
    f: &MorphismSpec,
    g: &MorphismSpec,
    p_point: &ProjectiveTuplePoint,
    q_point: &ProjectiveTuplePoint,
    p: u32,
    q: u32,
    horizon: usize,
    gap: Option<u64>,
    bit_budget: u64,
) -> Result<APUnion> {
    let subs = reduce_exponents(f, g, p_point, q_point, p, q)?;
    let mut pairs = Vec::new();
    let mut hits = BTreeSet::new();
    let mut undecided = Vec::new();
    let mut notes = Vec::new();
    let mut status = Status::Certified;
    for s in &subs {
        let hf = (horizon as u64).saturating_sub(s.i) / s.p;
        let hg = (horizon as u64).saturating_sub(s.j) / s.q;
        let opts = SearchOptions {
            horizon_f: hf as usize,
            horizon_g: hg as usize,
            n0: 0,
            bit_budget,
        };
        let b = gap.unwrap_or(hf.max(hg));
        let u = search_with(&s.f, &s.g, &s.p_point, &s.q_point, b, &opts)?;
        if u.status == Status::HorizonLimited {
            status = Status::HorizonLimited;
        }
        pairs.extend(u.pairs.iter().map(|ap| s.reindex_pair(ap)));
        hits.extend(u.hits.iter().map(|&(m, n)| s.reindex(m, n)));
        undecided.extend(u.undecided.iter().map(|&(m, n)| s.reindex(m, n)));
        notes.extend(u.notes.iter().map(|x| format!("[i={}, j={}] {x}", s.i, s.j)));
    }
    pairs.sort();
    pairs.dedup();
    undecided.sort();
    Ok(APUnion {
        pairs,
        hits: hits.into_iter().filter(|&(m, n)| m <= horizon as u64 && n <= horizon as u64).collect(),
        horizon_f: horizon,
        horizon_g: horizon,
        status,
        undecided,
        notes,
    })
}

/// Profiles, gap bound or finiteness certificate, and the matching search.
pub fn analyze_pair(
    f: &MorphismSpec,
    g: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    q: &ProjectiveTuplePoint,
    h: &DivisorClass,
    opts: &DmlOptions,
) -> Result<DmlReport> {
    let profile_f = point_profile(f, p, h, opts)?;
    let profile_g = point_profile(g, q, h, opts)?;
    let mut notes = Vec::new();
    let expanding = crate::profile::is_expanding(&profile_f.alpha) && crate::profile::is_expanding(&profile_g.alpha);
    let exhaustive = opts.horizon as u64;
    let sopts = SearchOptions {
        bit_budget: opts.bit_budget,
        ..SearchOptions::new(opts.horizon)
    };
    if expanding && profile_f.t == profile_g.t && same_alpha(&profile_f, &profile_g) {
        let gap = gap_bound(
            &profile_f,
            &profile_g,
            &envelope_for(f, p, h, &profile_f, opts)?,
            &envelope_for(g, q, h, &profile_g, opts)?,
        )?;
        let union = search_with(f, g, p, q, gap.b, &SearchOptions { n0: gap.n0, ..sopts })?;
        return Ok(DmlReport { profile_f, profile_g, gap: Some(gap), reduction: None, finiteness: None, union, notes });
    }
    if !expanding {
        notes.push("an arithmetic degree is at most 1; exhaustive search only".into());
        let union = search_with(f, g, p, q, exhaustive, &sopts)?;
        return Ok(DmlReport { profile_f, profile_g, gap: None, reduction: None, finiteness: None, union, notes });
    }
    let finiteness = match PolarizedData::new(f.clone(), h.clone()) {
        Ok(pd) => match finiteness_check(&pd, g, p, q, &profile_f, &profile_g) {
            Ok(v) => Some(v),
            Err(Error::Commutativity(msg)) => {
                notes.push(format!("finiteness check skipped: maps do not commute ({msg})"));
                None
            }
            Err(e) => return Err(e),
        },
        Err(Error::Hypothesis(msg)) => {
            notes.push(format!("finiteness check skipped: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(FinitenessVerdict { dependency: Some((a, b)), .. }) = &finiteness {
        if profile_f.t == profile_g.t && *a <= 8 && *b <= 8 {
            let union = reduced_search(f, g, p, q, *a as u32, *b as u32, opts.horizon, None, opts.bit_budget)?;
            return Ok(DmlReport {
                profile_f,
                profile_g,
                gap: None,
                reduction: Some((*a, *b)),
                finiteness,
                union,
                notes,
            });
        }
    }
    let union = search_with(f, g, p, q, exhaustive, &sopts)?;
    Ok(DmlReport { profile_f, profile_g, gap: None, reduction: None, finiteness, union, notes })
}
