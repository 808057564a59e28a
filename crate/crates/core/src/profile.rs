//! Growth profile `(alpha_f(P), t_f(P))` with `h_H(f^n P) ~ n^t alpha^n`.
//!
//! The spectral path reads the profile off the Jordan blocks whose canonical-height vector
//! is nonzero. The regression path fits `log h_n = n log(alpha) + t log(n) + c` directly and
//! serves as an independent cross-check.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde_json::{json, Value};

use crate::canonical::{expanding_chain_heights, CanonicalOptions, ChainHeightVector};
use crate::error::{Error, Result};
use crate::geometry::{MorphismSpec, ProjectiveTuplePoint};
use crate::heights::{DivisorClass, HeightSequence, LogLinearCurve};
use crate::linalg::{self, QVector};
use crate::precision::HIGH_FRAC_BITS;
use crate::spectrum::{analyze, express_in_chain_basis, JordanSpectrum};

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
pub const MIN_REGRESSION_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum Alpha {
    Exact(BigRational),
    Approx(f64),
    /// Every expanding block has vanishing canonical height, so `alpha <= 1`.
    AtMostOne,
}

impl Alpha {
    pub fn to_f64(&self) -> Option<f64> {
        match self {
            Alpha::Exact(x) => x.to_f64(),
            Alpha::Approx(x) => Some(*x),
            Alpha::AtMostOne => None,
        }
    }

    pub fn to_display(&self) -> String {
        match self {
            Alpha::Exact(x) => linalg::format_rational(x),
            Alpha::Approx(x) => format!("{x:.12e}"),
            Alpha::AtMostOne => "<=1".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Spectral,
    Regression,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Raw regression exponent before rounding.
    pub t_hat: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub residual_rms: Option<f64>,
    pub window: Option<(usize, usize)>,
    pub curve: Option<LogLinearCurve>,
    /// Blocks whose canonical-height vector was found nonzero.
    pub nonzero_blocks: Vec<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
    pub alpha: Alpha,
    /// `None` when undefined (the `alpha <= 1` branch).
    pub t: Option<u32>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl GrowthProfile {
    pub fn alpha_f64(&self) -> Option<f64> {
        self.alpha.to_f64()
    }

    pub fn to_json(&self) -> Value {
        let d = &self.diagnostics;
        json!({
            "alpha": self.alpha.to_display(),
            "t": self.t,
            "method": match self.method { Method::Spectral => "spectral", Method::Regression => "regression" },
            "t_hat": d.t_hat.map(|x| format!("{x:.6}")),
            "alpha_hat": d.alpha_hat.map(|x| format!("{x:.9}")),
            "residual_rms": d.residual_rms.map(|x| format!("{x:.3e}")),
            "window": d.window,
            "nonzero_blocks": d.nonzero_blocks,
            "notes": d.notes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroClass {
    Zero,
    Nonzero,
    Ambiguous,
}

/// Nonzero when `|v| > 2 max(zero_tol, err)`, zero when `|v| + err <= zero_tol`.
pub fn classify_zero(value: f64, error_bound: f64, zero_tol: f64) -> ZeroClass {
    if value.abs() > 2.0 * zero_tol.max(error_bound) {
        ZeroClass::Nonzero
    } else if value.abs() + error_bound <= zero_tol {
        ZeroClass::Zero
    } else {
        ZeroClass::Ambiguous
    }
}

pub fn spectral_profile(
    s: &JordanSpectrum,
    chain_heights: &[ChainHeightVector],
    c: &[QVector],
    zero_tol: f64,
) -> Result<GrowthProfile> {
    if !s.exact {
        return Err(Error::InexactSpectrum);
    }
    let mut best: Option<(BigRational, u32)> = None;
    let mut diagnostics = Diagnostics::default();
    for (i, block) in s.blocks.iter().enumerate() {
        if !block.eigenvalue.is_expanding() {
            continue;
        }
        let hv = chain_heights
            .iter()
            .find(|h| h.block == i)
            .ok_or_else(|| Error::Invalid(format!("missing canonical heights for block {i}")))?;
        let mut first_nonzero = None;
        for (j, comp) in hv.components.iter().enumerate() {
            match classify_zero(comp.value, comp.error_bound, zero_tol) {
                ZeroClass::Ambiguous => {
                    return Err(Error::AmbiguousZero {
                        block: i,
                        component: j,
                        value: comp.value,
                        error_bound: comp.error_bound,
                    })
                }
                ZeroClass::Nonzero if first_nonzero.is_none() => first_nonzero = Some(j),
                _ => {}
            }
        }
        let Some(j0) = first_nonzero else { continue };
        diagnostics.nonzero_blocks.push(i);
        if c.get(i).and_then(|ci| ci.last()).is_some_and(|x| x == &BigRational::from_integer(0.into())) {
            diagnostics
                .notes
                .push(format!("H has zero top coefficient in block {i}"));
        }
        let modulus = block.eigenvalue.as_exact().unwrap().abs();
        let t_i = (block.ell() - j0) as u32;
        best = match best {
            None => Some((modulus, t_i)),
            Some((m, _)) if modulus > m => Some((modulus, t_i)),
            Some((m, t)) if modulus == m => Some((m, t.max(t_i))),
            keep => keep,
        };
    }
    Ok(match best {
        Some((alpha, t)) => GrowthProfile {
            alpha: Alpha::Exact(alpha),
            t: Some(t),
            method: Method::Spectral,
            diagnostics,
        },
        None => GrowthProfile {
            alpha: Alpha::AtMostOne,
            t: None,
            method: Method::Spectral,
            diagnostics,
        },
    })
}

/// Default regression window: the last 60% of the available indices, never including 0.
pub fn default_window(len: usize) -> RangeInclusive<usize> {
    let last = len.saturating_sub(1);
    let take = ((len as f64) * 0.6).ceil() as usize;
    (len - take.min(len)).max(1)..=last
}

pub fn regression_profile(seq: &HeightSequence, window: Option<RangeInclusive<usize>>) -> Result<GrowthProfile> {
    let window = window.unwrap_or_else(|| default_window(seq.len()));
    let ns: Vec<usize> = window
        .clone()
        .filter(|&n| n >= 1 && n < seq.len())
        .collect();
    if ns.len() < MIN_REGRESSION_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_REGRESSION_POINTS,
            got: ns.len(),
        });
    }
    let ys: Vec<f64> = ns.iter().map(|&n| seq.values[n].max(1.0).ln()).collect();
    let win = (*ns.first().unwrap(), *ns.last().unwrap());
    if ys.iter().all(|&y| y == 0.0) {
        return Ok(GrowthProfile {
            alpha: Alpha::AtMostOne,
            t: None,
            method: Method::Regression,
            diagnostics: Diagnostics {
                window: Some(win),
                notes: vec!["heights stay below 1 on the window".into()],
                ..Default::default()
            },
        });
    }
    let a = DMatrix::from_fn(ns.len(), 3, |r, c| {
        let n = ns[r] as f64;
        match c {
            0 => n,
            1 => n.ln(),
            _ => 1.0,
        }
    });
    let b = DVector::from_vec(ys.clone());
    let beta = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::AssertionFailure(format!("least squares failed: {e}")))?;
    let fitted = &a * &beta;
    let rms = ((&b - fitted).norm_squared() / ns.len() as f64).sqrt();
    let curve = LogLinearCurve {
        log_alpha: beta[0],
        t: beta[1],
        c: beta[2],
    };
    let alpha_hat = beta[0].exp();
    let diagnostics = Diagnostics {
        t_hat: Some(beta[1]),
        alpha_hat: Some(alpha_hat),
        residual_rms: Some(rms),
        window: Some(win),
        curve: Some(curve),
        ..Default::default()
    };
    if alpha_hat < 1.001 {
        return Ok(GrowthProfile {
            alpha: Alpha::AtMostOne,
            t: None,
            method: Method::Regression,
            diagnostics,
        });
    }
    Ok(GrowthProfile {
        alpha: Alpha::Approx(alpha_hat),
        t: Some(beta[1].round().max(0.0) as u32),
        method: Method::Regression,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    pub pass: bool,
    pub report: String,
}

/// Passes iff `|alpha_spec - alpha_reg| <= 0.05 alpha_spec` and the integer `t` agree.
pub fn profile_consistency(spec: &GrowthProfile, reg: &GrowthProfile) -> Consistency {
    let fmt = |p: &GrowthProfile| format!("(alpha {}, t {:?})", p.alpha.to_display(), p.t);
    let pass = match (&spec.alpha, &reg.alpha) {
        (Alpha::AtMostOne, Alpha::AtMostOne) => true,
        (Alpha::AtMostOne, Alpha::Approx(a)) => *a <= 1.05,
        (_, Alpha::AtMostOne) => false,
        (s, r) => {
            let (s, r) = (s.to_f64().unwrap(), r.to_f64().unwrap());
            (s - r).abs() <= 0.05 * s && spec.t == reg.t
        }
    };
    Consistency {
        pass,
        report: format!(
            "{} spectral {} vs regression {}",
            if pass { "agree:" } else { "MISMATCH:" },
            fmt(spec),
            fmt(reg)
        ),
    }
}

/// Band `[C0, C1]` of `h_n / (n^t alpha^n)` over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeBand {
    pub c0: f64,
    pub c1: f64,
    pub ratios: Vec<(usize, f64)>,
}

pub fn envelope_band(seq: &HeightSequence, alpha: f64, t: u32, window: RangeInclusive<usize>) -> Result<EnvelopeBand> {
    let ratios: Vec<(usize, f64)> = window
        .filter(|&n| n < seq.len())
        .map(|n| {
            let scale = (n as f64).powi(t as i32) * alpha.powi(n as i32);
            (n, seq.values[n] / scale)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(EnvelopeBand {
        c0: ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        c1: ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        ratios,
    })
}

/// Spectrum, chain-basis coefficients, canonical heights and spectral profile of one point.
#[derive(Debug, Clone)]
pub struct SpectralAnalysis {
    pub spectrum: JordanSpectrum,
    pub coefficients: Vec<QVector>,
    pub chain_heights: Vec<ChainHeightVector>,
    pub profile: GrowthProfile,
    /// The zero test was escalated to higher precision.
    pub escalated: bool,
}

/// The full spectral recipe. An undecidable zero test is retried once with the tolerance
/// divided by `10^4` and 256 fractional bits.
pub fn spectral_analysis(
    f: &MorphismSpec,
    p: &ProjectiveTuplePoint,
    h: &DivisorClass,
    zero_tol: f64,
    opts: &CanonicalOptions,
) -> Result<SpectralAnalysis> {
    if !h.is_ample() {
        return Err(Error::Invalid("reference class must be ample".into()));
    }
    let spectrum = analyze(&f.pullback_matrix(), h)?;
    if !spectrum.exact {
        return Err(Error::InexactSpectrum);
    }
    let coefficients = express_in_chain_basis(h, &spectrum)?;
    let attempt = |opts: &CanonicalOptions| -> Result<(Vec<ChainHeightVector>, GrowthProfile)> {
        let hv = expanding_chain_heights(&spectrum, f, p, opts)?;
        let prof = spectral_profile(&spectrum, &hv, &coefficients, zero_tol)?;
        Ok((hv, prof))
    };
    let (chain_heights, profile, escalated) = match attempt(opts) {
        Ok((hv, prof)) => (hv, prof, false),
        Err(Error::AmbiguousZero { .. }) => {
            let hi = CanonicalOptions {
                tol: opts.tol * 1e-4,
                precision_bits: opts.precision_bits.max(HIGH_FRAC_BITS),
                ..opts.clone()
            };
            let (hv, prof) = attempt(&hi)?;
            (hv, prof, true)
        }
        Err(e) => return Err(e),
    };
    Ok(SpectralAnalysis {
        spectrum,
        coefficients,
        chain_heights,
        profile,
        escalated,
    })
}

/// `(alpha^p, t)` expected for `f^p` from the profile `(alpha, t)` of `f`.
pub fn iterate_profile(profile: &GrowthProfile, p: u32) -> (Alpha, Option<u32>) {
    let alpha = match &profile.alpha {
        Alpha::Exact(a) => Alpha::Exact(num_traits::pow::pow(a.clone(), p as usize)),
        Alpha::Approx(a) => Alpha::Approx(a.powi(p as i32)),
        Alpha::AtMostOne => Alpha::AtMostOne,
    };
    (alpha, profile.t)
}

/// Whether `alpha` exceeds one.
pub fn is_expanding(alpha: &Alpha) -> bool {
    match alpha {
        Alpha::Exact(a) => a > &BigRational::one(),
        Alpha::Approx(a) => *a > 1.0,
        Alpha::AtMostOne => false,
    }
}
