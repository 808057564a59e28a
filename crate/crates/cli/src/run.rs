//! Task execution and report assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dynheight::asymptotics::{block_power_norm, growth_csv, vector_growth_class, JordanBlockMatrix};
use dynheight::canonical::{expanding_chain_heights, polarized_canonical_height, CanonicalOptions, PolarizedData};
use dynheight::dml::{analyze_pair, DmlOptions, Status};
use dynheight::heights::height_sequence;
use dynheight::profile::{
    default_window, envelope_band, profile_consistency, regression_profile, spectral_analysis, DEFAULT_ZERO_TOL,
};
use dynheight::spectrum::analyze;
use dynheight::{Error, HeightSequence};
use serde_json::{json, Map, Value};

use crate::config::{divisor_from, Problem, TaskConfig};

pub const SCHEMA: &str = "dynheight-report/1";
pub const PRECISION_ENV: &str = "DYNHEIGHT_PRECISION";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Task names or kinds to run; empty runs everything.
    pub select: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub precision: Option<u32>,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub name: String,
    pub kind: &'static str,
    pub body: Value,
    /// `(file name, contents)` written next to the report.
    pub csv: Vec<(String, String)>,
    pub elapsed_ms: f64,
    pub max_bits: Option<u64>,
    pub failure: Option<Error>,
    pub horizon_limited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub tasks: Vec<TaskOutcome>,
    pub elapsed_ms: f64,
}

impl RunReport {
    /// `3` if any task hit an internal assertion, else `2` if a DML search stayed horizon-limited.
    pub fn exit_code(&self) -> i32 {
        if self.tasks.iter().any(|t| matches!(t.failure, Some(Error::AssertionFailure(_)))) {
            3
        } else if self.tasks.iter().any(|t| t.horizon_limited) {
            2
        } else {
            0
        }
    }

    pub fn max_bits(&self) -> Option<u64> {
        self.tasks.iter().filter_map(|t| t.max_bits).max()
    }

    /// Everything except timing; byte-identical across runs of the same config.
    pub fn body(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "tasks": self.tasks.iter().map(|t| json!({
                "name": t.name,
                "kind": t.kind,
                "status": if t.failure.is_some() { "error" } else { "ok" },
                "max_coordinate_bits": t.max_bits,
                "result": t.body,
                "csv": t.csv.iter().map(|c| c.0.clone()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "stats": { "max_coordinate_bits": self.max_bits() },
        })
    }

    pub fn to_json(&self) -> Value {
        let mut body = self.body();
        let timing: Map<String, Value> = self
            .tasks
            .iter()
            .map(|t| (t.name.clone(), json!(format!("{:.3}", t.elapsed_ms))))
            .collect();
        body["timing_ms"] = json!({ "total": format!("{:.3}", self.elapsed_ms), "tasks": timing });
        body
    }
}

fn dec(x: f64) -> String {
    format!("{x:.12e}")
}

fn error_body(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

fn canonical_options(opts: &RunOptions, tol: Option<f64>) -> CanonicalOptions {
    let mut c = CanonicalOptions::default();
    if let Some(bits) = opts.precision {
        c = c.with_precision(bits);
    }
    if let Some(t) = opts.tol.or(tol) {
        c = c.with_tol(t);
    }
    c
}

fn seq_bits(seq: &HeightSequence) -> u64 {
    seq.maxima.iter().flatten().map(|m| m.bits()).max().unwrap_or(0)
}

fn values_json(seq: &HeightSequence) -> Vec<String> {
    seq.values.iter().map(|v| dec(*v)).collect()
}

struct Output {
    body: Value,
    csv: Vec<(String, String)>,
    max_bits: Option<u64>,
    horizon_limited: bool,
}

impl Output {
    fn new(body: Value) -> Self {
        Output { body, csv: Vec::new(), max_bits: None, horizon_limited: false }
    }
}

fn run_task(problem: &Problem, name: &str, task: &TaskConfig, opts: &RunOptions) -> Result<Output, Error> {
    match task {
        TaskConfig::Heights { map, point, divisor, depth, .. } => {
            let d = divisor_from(divisor, "divisor").map_err(|e| Error::Invalid(e.to_string()))?;
            let seq = height_sequence(problem.map(map), problem.point(point), &d, *depth)?;
            let mut out = Output::new(json!({ "values": values_json(&seq) }));
            out.max_bits = Some(seq_bits(&seq));
            out.csv.push((format!("{name}.csv"), seq.to_csv(None)));
            Ok(out)
        }
        TaskConfig::Profile { map, point, ample, depth, window, zero_tol, .. } => {
            let (f, p) = (problem.map(map), problem.point(point));
            let h = divisor_from(ample, "ample").map_err(|e| Error::Invalid(e.to_string()))?;
            let copts = canonical_options(opts, None);
            let zt = zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
            let spectral = match spectral_analysis(f, p, &h, zt, &copts) {
                Ok(a) => Some(a),
                Err(Error::InexactSpectrum) => None,
                Err(e) => return Err(e),
            };
            let seq = height_sequence(f, p, &h, *depth)?;
            let win = window.map(|[a, b]| a..=b).unwrap_or_else(|| default_window(seq.len()));
            let regression = regression_profile(&seq, Some(win.clone()));
            let mut body = json!({
                "spectral": spectral.as_ref().map(|a| a.profile.to_json()),
                "spectrum_exact": spectral.is_some(),
                "regression": match &regression { Ok(r) => r.to_json(), Err(e) => error_body(e) },
                "heights": values_json(&seq),
            });
            if let Some(a) = &spectral {
                body["chain_heights"] = json!(a.chain_heights.iter().map(|c| c.to_json()).collect::<Vec<_>>());
                body["escalated"] = json!(a.escalated);
                if let Ok(r) = &regression {
                    let c = profile_consistency(&a.profile, r);
                    body["consistency"] = json!({ "pass": c.pass, "report": c.report });
                }
                if let (Some(alpha), Some(t)) = (a.profile.alpha_f64(), a.profile.t) {
                    if alpha > 1.0 {
                        let band = envelope_band(&seq, alpha, t, win.clone())?;
                        body["envelope"] = json!({
                            "C0": dec(band.c0),
                            "C1": dec(band.c1),
                            "ratios": band.ratios.iter().map(|(n, r)| json!([n, dec(*r)])).collect::<Vec<_>>(),
                        });
                    }
                }
            }
            let curve = regression.as_ref().ok().and_then(|r| r.diagnostics.curve);
            let mut out = Output::new(body);
            out.max_bits = Some(seq_bits(&seq));
            out.csv.push((format!("{name}.csv"), seq.to_csv(curve)));
            Ok(out)
        }
        TaskConfig::Canonical { map, point, ample, tol, .. } => {
            let (f, p) = (problem.map(map), problem.point(point));
            let h = divisor_from(ample, "ample").map_err(|e| Error::Invalid(e.to_string()))?;
            let copts = canonical_options(opts, *tol);
            match PolarizedData::new(f.clone(), h.clone()) {
                Ok(pd) => {
                    let est = polarized_canonical_height(&pd, p, &copts)?;
                    Ok(Output::new(json!({
                        "polarized": true,
                        "degree": dynheight::linalg::format_rational(pd.degree()),
                        "estimate": est.to_json(),
                    })))
                }
                Err(Error::Hypothesis(msg)) => {
                    let s = analyze(&f.pullback_matrix(), &h)?;
                    let hv = expanding_chain_heights(&s, f, p, &copts)?;
                    Ok(Output::new(json!({
                        "polarized": false,
                        "reason": msg,
                        "chain_heights": hv.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                    })))
                }
                Err(e) => Err(e),
            }
        }
        TaskConfig::Spectrum { map, ample, .. } => {
            let h = divisor_from(ample, "ample").map_err(|e| Error::Invalid(e.to_string()))?;
            let s = analyze(&problem.map(map).pullback_matrix(), &h)?;
            let mut body = s.to_json();
            body["spectral_radius"] = json!(dec(s.spectral_radius()));
            Ok(Output::new(body))
        }
        TaskConfig::Dml { f, g, p, q, ample, horizon, .. } => {
            let h = divisor_from(ample, "ample").map_err(|e| Error::Invalid(e.to_string()))?;
            let mut dopts = DmlOptions {
                canonical: canonical_options(opts, None),
                ..DmlOptions::default()
            };
            if let Some(n) = opts.horizon.or(*horizon) {
                dopts.horizon = n;
            }
            let r = analyze_pair(problem.map(f), problem.map(g), problem.point(p), problem.point(q), &h, &dopts)?;
            let mut out = Output::new(r.to_json());
            out.horizon_limited = r.status() == Status::HorizonLimited;
            Ok(out)
        }
        TaskConfig::JordanDemo { lambda, size, n_max, .. } => {
            let lam = lambda.to_rational().map_err(Error::Invalid)?;
            let block = JordanBlockMatrix::exact(lam, *size);
            let ell = block.ell() as i32;
            let a = block.lambda.abs_f64();
            let rows: Vec<(u64, f64, f64)> = (0..=*n_max)
                .map(|n| (n, block_power_norm(&block, n), (n as f64).powi(ell) * a.powi(n as i32)))
                .collect();
            let classes: Vec<Value> = (0..*size)
                .map(|i| {
                    let mut v = vec![0i64; *size];
                    v[i] = 1;
                    match vector_growth_class(&block, &v) {
                        Ok(c) => json!({ "unit": i, "t": c.t, "log_lambda": dec(c.log_lambda) }),
                        Err(e) => json!({ "unit": i, "error": e.to_string() }),
                    }
                })
                .collect();
            let mut out = Output::new(json!({
                "lambda": lambda.to_rational().map(|x| dynheight::linalg::format_rational(&x)).unwrap_or_default(),
                "size": size,
                "unit_vector_classes": classes,
            }));
            out.csv.push((format!("{name}.csv"), growth_csv(&rows)));
            Ok(out)
        }
    }
}

pub fn run(problem: &Problem, opts: &RunOptions) -> RunReport {
    let start = Instant::now();
    let mut tasks = Vec::new();
    for (i, task) in problem.config.tasks.iter().enumerate() {
        let name = task.name(i);
        if !opts.select.is_empty() && !opts.select.iter().any(|s| *s == name || s == task.kind()) {
            continue;
        }
        let t0 = Instant::now();
        let (body, csv, max_bits, failure, horizon_limited) = match run_task(problem, &name, task, opts) {
            Ok(o) => (o.body, o.csv, o.max_bits, None, o.horizon_limited),
            Err(e) => (error_body(&e), Vec::new(), None, Some(e), false),
        };
        tasks.push(TaskOutcome {
            name,
            kind: task.kind(),
            body,
            csv,
            elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
            max_bits,
            failure,
            horizon_limited,
        });
    }
    RunReport { tasks, elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }
}

/// Writes `report.json` and the CSVs into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for t in &report.tasks {
        for (file, text) in &t.csv {
            std::fs::write(dir.join(file), text)?;
        }
    }
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report.to_json()).expect("reports serialize");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Precision from the command line, else from the environment.
pub fn resolve_precision(flag: Option<u32>) -> Result<Option<u32>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(PRECISION_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{PRECISION_ENV}={v:?} is not a bit count")),
        Err(_) => Ok(None),
    }
}
