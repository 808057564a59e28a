//! Problem files: named maps and points plus a list of tasks, all in TOML.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use dynheight::geometry::parse_bigint;
use dynheight::poly::Polynomial;
use dynheight::{DivisorClass, MorphismSpec, ProductSpace, ProjectiveTuplePoint, RegularityMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Integer or rational literal. Large values go in strings: `"340282366920938463463374607431768211457"`, `"3/2"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Text(String),
}

impl Num {
    pub fn to_bigint(&self) -> Result<BigInt, String> {
        match self {
            Num::Int(v) => Ok(BigInt::from(*v)),
            Num::Text(s) => parse_bigint(s).map_err(|e| e.to_string()),
        }
    }

    pub fn to_rational(&self) -> Result<BigRational, String> {
        match self {
            Num::Int(v) => Ok(BigRational::from_integer((*v).into())),
            Num::Text(s) => match s.split_once('/') {
                Some((n, d)) => {
                    let (n, d) = (parse_bigint(n.trim()).map_err(|e| e.to_string())?, parse_bigint(d.trim()).map_err(|e| e.to_string())?);
                    if d == BigInt::from(0) {
                        return Err(format!("zero denominator in {s:?}"));
                    }
                    Ok(BigRational::new(n, d))
                }
                None => parse_bigint(s).map(BigRational::from_integer).map_err(|e| e.to_string()),
            },
        }
    }
}

/// `(coefficient, exponents)` over all variables of the space, factor by factor.
pub type Term = (Num, Vec<u32>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<usize>>,
    #[serde(default)]
    pub mode: RegularityMode,
    /// Shorthand for the factorwise power map with these degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<Vec<u32>>,
    /// `factors[j][i]` is the list of terms of the `i`-th coordinate of output factor `j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<Vec<Vec<Term>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<usize>>,
    /// One list of homogeneous coordinates per factor; rationals are cleared.
    pub coords: Vec<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Heights {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        map: String,
        point: String,
        divisor: Vec<Num>,
        depth: usize,
    },
    Profile {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        map: String,
        point: String,
        ample: Vec<Num>,
        depth: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zero_tol: Option<f64>,
    },
    Canonical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        map: String,
        point: String,
        ample: Vec<Num>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    Spectrum {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        map: String,
        ample: Vec<Num>,
    },
    Dml {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        f: String,
        g: String,
        p: String,
        q: String,
        ample: Vec<Num>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    JordanDemo {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        lambda: Num,
        size: usize,
        n_max: u64,
    },
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Heights { .. } => "heights",
            TaskConfig::Profile { .. } => "profile",
            TaskConfig::Canonical { .. } => "canonical",
            TaskConfig::Spectrum { .. } => "spectrum",
            TaskConfig::Dml { .. } => "dml",
            TaskConfig::JordanDemo { .. } => "jordan-demo",
        }
    }

    fn explicit_name(&self) -> Option<&str> {
        match self {
            TaskConfig::Heights { name, .. }
            | TaskConfig::Profile { name, .. }
            | TaskConfig::Canonical { name, .. }
            | TaskConfig::Spectrum { name, .. }
            | TaskConfig::Dml { name, .. }
            | TaskConfig::JordanDemo { name, .. } => name.as_deref(),
        }
    }

    /// The configured name, or `<kind>-<index>`.
    pub fn name(&self, index: usize) -> String {
        self.explicit_name()
            .map(str::to_string)
            .unwrap_or_else(|| format!("{}-{index}", self.kind()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Default factor dimensions for maps and points that do not give their own.
    pub space: Vec<usize>,
    #[serde(default)]
    pub maps: BTreeMap<String, MapConfig>,
    #[serde(default)]
    pub points: BTreeMap<String, PointConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.to_string(),
    }
}

/// Validated problem: every map and point constructed, every task reference resolved.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub maps: BTreeMap<String, MorphismSpec>,
    pub points: BTreeMap<String, ProjectiveTuplePoint>,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            err(field, e.message())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(self) -> Result<Problem, ConfigError> {
        let default_space = ProductSpace::new(self.space.clone()).map_err(|e| err("space", e))?;
        let space_of = |s: &Option<Vec<usize>>, field: &str| match s {
            Some(d) => ProductSpace::new(d.clone()).map_err(|e| err(field, e)),
            None => Ok(default_space.clone()),
        };
        let mut maps = BTreeMap::new();
        for (name, m) in &self.maps {
            let field = format!("maps.{name}");
            let space = space_of(&m.space, &format!("{field}.space"))?;
            let spec = match (&m.power, &m.factors) {
                (Some(deg), None) => MorphismSpec::power_map(&space, deg).map_err(|e| err(format!("{field}.power"), e))?,
                (None, Some(factors)) => build_map(&space, factors, &field)?,
                _ => return Err(err(&field, "give exactly one of `power` or `factors`")),
            };
            maps.insert(name.clone(), spec.with_mode(m.mode));
        }
        let mut points = BTreeMap::new();
        for (name, p) in &self.points {
            let field = format!("points.{name}");
            let space = space_of(&p.space, &format!("{field}.space"))?;
            let coords = p
                .coords
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    c.iter()
                        .enumerate()
                        .map(|(i, x)| x.to_rational().map_err(|e| err(format!("{field}.coords[{j}][{i}]"), e)))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let pt = ProjectiveTuplePoint::from_rationals(&space, coords).map_err(|e| err(&field, e))?;
            points.insert(name.clone(), pt);
        }
        let problem = Problem { config: self, maps, points };
        for (i, t) in problem.config.tasks.iter().enumerate() {
            problem.check_task(i, t)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, t) in problem.config.tasks.iter().enumerate() {
            if !seen.insert(t.name(i)) {
                return Err(err(format!("tasks[{i}].name"), format!("duplicate task name {:?}", t.name(i))));
            }
        }
        Ok(problem)
    }
}

fn build_map(space: &ProductSpace, factors: &[Vec<Vec<Term>>], field: &str) -> Result<MorphismSpec, ConfigError> {
    let nvars = space.nvars();
    let mut comps = Vec::with_capacity(factors.len());
    for (j, factor) in factors.iter().enumerate() {
        let mut row = Vec::with_capacity(factor.len());
        for (i, terms) in factor.iter().enumerate() {
            let f = format!("{field}.factors[{j}][{i}]");
            let mut parsed = Vec::with_capacity(terms.len());
            for (t, (c, e)) in terms.iter().enumerate() {
                if e.len() != nvars {
                    return Err(err(format!("{f}[{t}]"), format!("exponent tuple has {} entries, space has {nvars} variables", e.len())));
                }
                parsed.push((c.to_bigint().map_err(|m| err(format!("{f}[{t}]"), m))?, e.clone()));
            }
            row.push(Polynomial::from_terms(nvars, parsed).map_err(|e| err(&f, e))?);
        }
        comps.push(row);
    }
    MorphismSpec::new(space.clone(), comps, RegularityMode::Total).map_err(|e| err(field, e))
}

pub fn divisor_from(nums: &[Num], field: &str) -> Result<DivisorClass, ConfigError> {
    nums.iter()
        .enumerate()
        .map(|(i, x)| x.to_rational().map_err(|e| err(format!("{field}[{i}]"), e)))
        .collect::<Result<Vec<_>, _>>()
        .map(DivisorClass::new)
}

impl Problem {
    pub fn map(&self, name: &str) -> &MorphismSpec {
        &self.maps[name]
    }

    pub fn point(&self, name: &str) -> &ProjectiveTuplePoint {
        &self.points[name]
    }

    fn check_task(&self, i: usize, t: &TaskConfig) -> Result<(), ConfigError> {
        let field = format!("tasks[{i}]");
        let map = |name: &str, key: &str| {
            self.maps
                .get(name)
                .ok_or_else(|| err(format!("{field}.{key}"), format!("unknown map {name:?}")))
        };
        let point = |name: &str, key: &str| {
            self.points
                .get(name)
                .ok_or_else(|| err(format!("{field}.{key}"), format!("unknown point {name:?}")))
        };
        let same_space = |m: &MorphismSpec, p: &ProjectiveTuplePoint, key: &str| {
            if m.space().factor_dims().iter().copied().eq(p.factors().iter().map(|c| c.len() - 1)) {
                Ok(())
            } else {
                Err(err(format!("{field}.{key}"), "point and map live on different spaces"))
            }
        };
        let divisor = |nums: &[Num], key: &str, m: &MorphismSpec| -> Result<(), ConfigError> {
            let d = divisor_from(nums, &format!("{field}.{key}"))?;
            if d.dim() != m.space().factors() {
                return Err(err(format!("{field}.{key}"), format!("{} coefficients for {} factors", d.dim(), m.space().factors())));
            }
            if key == "ample" && !d.is_ample() {
                return Err(err(format!("{field}.{key}"), "class is not ample (all coefficients must be positive)"));
            }
            Ok(())
        };
        match t {
            TaskConfig::Heights { map: m, point: p, divisor: d, .. } => {
                let (m, p) = (map(m, "map")?, point(p, "point")?);
                same_space(m, p, "point")?;
                divisor(d, "divisor", m)
            }
            TaskConfig::Profile { map: m, point: p, ample, window, .. } => {
                let (m, p) = (map(m, "map")?, point(p, "point")?);
                same_space(m, p, "point")?;
                if let Some([a, b]) = window {
                    if a > b {
                        return Err(err(format!("{field}.window"), "empty window"));
                    }
                }
                divisor(ample, "ample", m)
            }
            TaskConfig::Canonical { map: m, point: p, ample, .. } => {
                let (m, p) = (map(m, "map")?, point(p, "point")?);
                same_space(m, p, "point")?;
                divisor(ample, "ample", m)
            }
            TaskConfig::Spectrum { map: m, ample, .. } => divisor(ample, "ample", map(m, "map")?),
            TaskConfig::Dml { f, g, p, q, ample, .. } => {
                let (f, g) = (map(f, "f")?, map(g, "g")?);
                if f.space() != g.space() {
                    return Err(err(format!("{field}.g"), "f and g live on different spaces"));
                }
                same_space(f, point(p, "p")?, "p")?;
                same_space(g, point(q, "q")?, "q")?;
                divisor(ample, "ample", f)
            }
            TaskConfig::JordanDemo { lambda, size, .. } => {
                lambda.to_rational().map_err(|e| err(format!("{field}.lambda"), e))?;
                if *size == 0 || *size > 8 {
                    return Err(err(format!("{field}.size"), "block size must be in 1..=8"));
                }
                Ok(())
            }
        }
    }
}
