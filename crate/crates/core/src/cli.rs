//! Command-line orchestration: parse, synthesize, verify, report.
//!
//! Exit codes: 0 success, 1 usage/parse/domain error, 2 the covariance fails
//! the sufficiency check, 3 the coefficient routes disagree or a requested
//! verification fails.

use std::fmt::Write as _;
use std::io::Read;

use serde_json::{json, Value};

use crate::covariance::{
    parse_spec, preset, CovarianceError, CovarianceSpec, DomainHint, SpecKind,
};
use crate::distribution::{
    moments, sample, sample_stats, variance_standard_error, y_for_mean, DistributionError,
    MomentReport, PsdModel,
};
use crate::fps::{to_f64, Rational, Series};
use crate::synthesis::{
    ode_residuals, pde_residuals_x, pde_residuals_y, synthesize, SynthesisOptions, SynthesisResult,
};
use crate::transforms::{
    transform_covariance, transform_omega, verify_transform_roundtrip, TransformSpec,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID_COVARIANCE: i32 = 2;
pub const EXIT_DISAGREEMENT: i32 = 3;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const MIN_ORACLE_SAMPLES: usize = 1_000;
/// Moments and the oracle re-synthesize at doubling orders in this range until
/// the series function has converged at the requested mean.
pub const ORACLE_MIN_ORDER: usize = 24;
pub const ORACLE_ORDER: usize = 64;
/// Allowed |sample variance − V(x)| in standard errors.
pub const ORACLE_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyLevel {
    None,
    #[default]
    Identities,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Expression text, or "-" for stdin. Ignored when `preset` is set.
    pub expression: String,
    pub preset: Option<String>,
    pub order: usize,
    pub output_format: OutputFormat,
    pub transform: Option<TransformSpec>,
    pub verify_level: VerifyLevel,
    pub oracle_samples: usize,
    pub seed: u64,
    pub x_points: Vec<Rational>,
    pub s_scale: Rational,
    pub domain: Option<DomainHint>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            expression: String::new(),
            preset: None,
            order: crate::fps::DEFAULT_ORDER,
            output_format: OutputFormat::Text,
            transform: None,
            verify_level: VerifyLevel::Identities,
            oracle_samples: DEFAULT_SAMPLES,
            seed: 0,
            x_points: Vec::new(),
            s_scale: Rational::from_integer(1.into()),
            domain: None,
        }
    }
}

impl RunConfig {
    pub fn new(expression: impl Into<String>) -> Self {
        RunConfig {
            expression: expression.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl RunOutcome {
    fn usage(message: impl std::fmt::Display) -> Self {
        RunOutcome {
            exit_code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<CovarianceSpec, CovarianceError> {
    parse_spec(text)
}

/// `{"n": "...", "d": "...", "approx": f64}`.
pub fn rational_json(q: &Rational) -> Value {
    json!({ "n": q.numer().to_string(), "d": q.denom().to_string(), "approx": to_f64(q) })
}

/// Inverse of [`rational_json`]; the float is ignored.
pub fn rational_from_json(v: &Value) -> Option<Rational> {
    let n = v.get("n")?.as_str()?.parse().ok()?;
    let d: num_bigint::BigInt = v.get("d")?.as_str()?.parse().ok()?;
    if d == 0.into() {
        return None;
    }
    Some(Rational::new(n, d))
}

fn rationals_json(c: &[Rational]) -> Value {
    Value::Array(c.iter().map(rational_json).collect())
}

#[derive(Debug, Clone, PartialEq)]
struct Identities {
    ode: bool,
    pde_y: bool,
    pde_x: bool,
}

impl Identities {
    fn ok(&self) -> bool {
        self.ode && self.pde_y && self.pde_x
    }
}

#[derive(Debug, Clone)]
struct TransformReport {
    t: TransformSpec,
    covariance: Option<CovarianceSpec>,
    covariance_error: Option<String>,
    omega: Vec<Rational>,
    roundtrip: Option<bool>,
}

#[derive(Debug, Clone)]
struct OracleReport {
    x: Rational,
    order: usize,
    samples: usize,
    empirical_mean: f64,
    empirical_variance: f64,
    v_of_x: f64,
    standard_error: f64,
    passed: bool,
}

fn check_identities(r: &SynthesisResult) -> Identities {
    let (rs, rb) = ode_residuals(&r.quadratures, &r.base_v);
    let pde_y = pde_residuals_y(&r.omega(), r.order)
        .map(|v| v.iter().all(Series::is_zero))
        .unwrap_or(false);
    let pde_x = pde_residuals_x(&r.quadratures, &r.base_v, &r.base_lagrange, r.order)
        .map(|v| v.iter().all(Series::is_zero))
        .unwrap_or(false);
    Identities {
        ode: rs.is_zero() && rb.is_zero(),
        pde_y,
        pde_x,
    }
}

fn run_oracle(
    spec: &CovarianceSpec,
    c: &[Rational],
    order: usize,
    x: &Rational,
    samples: usize,
    seed: u64,
) -> Result<OracleReport, DistributionError> {
    let y = y_for_mean(c, x)?;
    let model = PsdModel::new(c.to_vec(), y)?;
    let v = spec
        .evaluate(x)
        .map(|v| to_f64(&v))
        .ok_or_else(|| DistributionError::Domain {
            x: x.to_string(),
            reason: "V is not defined here".into(),
        })?;
    let draws = sample(&model, samples, seed)?;
    let (m, s2) = sample_stats(&draws);
    let se = variance_standard_error(&model, samples);
    Ok(OracleReport {
        x: x.clone(),
        order,
        samples,
        empirical_mean: m,
        empirical_variance: s2,
        v_of_x: v,
        standard_error: se,
        passed: (s2 - v).abs() <= ORACLE_SIGMAS * se,
    })
}

fn read_input(config: &RunConfig, stdin: &mut dyn Read) -> Result<CovarianceSpec, String> {
    let spec = match &config.preset {
        Some(name) => preset(name, config.order.max(64)).map_err(|e| e.to_string())?,
        None => {
            let text = if config.expression == "-" {
                let mut s = String::new();
                stdin
                    .read_to_string(&mut s)
                    .map_err(|e| format!("reading stdin: {e}"))?;
                s
            } else {
                config.expression.clone()
            };
            if text.trim().is_empty() {
                return Err("no covariance expression given".into());
            }
            parse_expression(&text).map_err(|e| e.to_string())?
        }
    };
    Ok(match &config.domain {
        Some(d) => spec.with_domain(d.clone()),
        None => spec,
    })
}

pub fn run(config: &RunConfig, stdin: &mut dyn Read) -> RunOutcome {
    if config.order < 2 {
        return RunOutcome::usage(format!("order must be at least 2, got {}", config.order));
    }
    if config.verify_level == VerifyLevel::Oracle && config.oracle_samples < MIN_ORACLE_SAMPLES {
        return RunOutcome::usage(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {}",
            config.oracle_samples
        ));
    }
    if let Some(t) = &config.transform {
        if let Err(e) = t.validate() {
            return RunOutcome::usage(e);
        }
    }
    let spec = match read_input(config, stdin) {
        Ok(s) => s,
        Err(e) => return RunOutcome::usage(e),
    };
    let opts = SynthesisOptions {
        order: config.order,
        s_scale: config.s_scale.clone(),
    };
    let result = match synthesize(&spec, &opts) {
        Ok(r) => r,
        Err(e) => return RunOutcome::usage(e),
    };

    let mut failures: Vec<String> = Vec::new();
    let identities = match config.verify_level {
        VerifyLevel::None => None,
        _ => Some(check_identities(&result)),
    };
    if let Some(id) = &identities {
        if !id.ok() {
            failures.push(format!("identity check failed: {id:?}"));
        }
    }

    let transform = match &config.transform {
        None => None,
        Some(t) => {
            let (covariance, covariance_error) = match transform_covariance(&spec, t) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let omega = match transform_omega(&result.omega(), t, config.order) {
                Ok(w) => w.into_coeffs(),
                Err(e) => return RunOutcome::usage(e),
            };
            let roundtrip = match config.verify_level {
                VerifyLevel::None => None,
                _ => Some(
                    verify_transform_roundtrip(&result.omega(), t, config.order).unwrap_or(false),
                ),
            };
            Some(TransformReport {
                t: t.clone(),
                covariance,
                covariance_error,
                omega,
                roundtrip,
            })
        }
    };
    if let Some(TransformReport {
        roundtrip: Some(false),
        ..
    }) = &transform
    {
        failures.push("transform round trip failed".into());
    }

    let mut domain_errors: Vec<String> = Vec::new();
    let verdict_ok = result.verdict.passed();
    let mut moment_reports: Vec<(Rational, MomentReport)> = Vec::new();
    let mut oracle_reports: Vec<OracleReport> = Vec::new();
    if verdict_ok && !config.x_points.is_empty() {
        let mut by_order: Vec<(usize, Vec<Rational>)> = vec![(result.order, result.c.clone())];
        for x in &config.x_points {
            let mut attempt = 0;
            let found = loop {
                let (order, c) = &by_order[attempt];
                let m = y_for_mean(c, x)
                    .and_then(|y| PsdModel::new(c.clone(), y))
                    .and_then(|m| moments(&m.with_covariance(spec.clone())));
                let retry = *order < ORACLE_ORDER;
                match m {
                    Ok(rep) => break Ok((attempt, rep)),
                    Err(e) if !retry => break Err(e),
                    Err(_) => {
                        attempt += 1;
                        if attempt == by_order.len() {
                            let next = (order * 2).clamp(ORACLE_MIN_ORDER, ORACLE_ORDER);
                            match synthesize(
                                &spec,
                                &SynthesisOptions {
                                    order: next,
                                    ..opts.clone()
                                },
                            ) {
                                Ok(r) => by_order.push((next, r.c)),
                                Err(e) => return RunOutcome::usage(e),
                            }
                        }
                    }
                }
            };
            let (attempt, rep) = match found {
                Ok(v) => v,
                Err(e) => {
                    domain_errors.push(format!("x = {x}: {e}"));
                    continue;
                }
            };
            if config.verify_level != VerifyLevel::None && !rep.agrees() {
                failures.push(format!("variance at x = {x} does not match V(x)"));
            }
            moment_reports.push((x.clone(), rep));
            if config.verify_level == VerifyLevel::Oracle {
                let (order, c) = &by_order[attempt];
                match run_oracle(&spec, c, *order, x, config.oracle_samples, config.seed) {
                    Ok(o) => {
                        if !o.passed {
                            failures.push(format!(
                                "oracle at x = {x}: sample variance outside {ORACLE_SIGMAS} SE"
                            ));
                        }
                        oracle_reports.push(o);
                    }
                    Err(e) => domain_errors.push(format!("x = {x}: {e}")),
                }
            }
        }
    }

    let exit_code = if !result.route_agreement || !failures.is_empty() {
        EXIT_DISAGREEMENT
    } else if !verdict_ok {
        EXIT_INVALID_COVARIANCE
    } else if !domain_errors.is_empty() {
        EXIT_USAGE
    } else {
        EXIT_OK
    };

    let mut stderr = String::new();
    if !result.route_agreement {
        stderr.push_str("error: Lagrange and recurrence coefficients disagree\n");
    }
    for f in &failures {
        let _ = writeln!(stderr, "error: {f}");
    }
    if !verdict_ok {
        let _ = writeln!(
            stderr,
            "error: V is not the covariance of a power series distribution"
        );
    }
    for d in &domain_errors {
        let _ = writeln!(stderr, "error: {d}");
    }

    let report = Report {
        spec: &spec,
        result: &result,
        identities: identities.as_ref(),
        transform: transform.as_ref(),
        moments: &moment_reports,
        oracle: &oracle_reports,
        seed: config.seed,
        exit_code,
    };
    let stdout = match config.output_format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Text => report.to_text(),
    };
    RunOutcome {
        exit_code,
        stdout,
        stderr,
    }
}

struct Report<'a> {
    spec: &'a CovarianceSpec,
    result: &'a SynthesisResult,
    identities: Option<&'a Identities>,
    transform: Option<&'a TransformReport>,
    moments: &'a [(Rational, MomentReport)],
    oracle: &'a [OracleReport],
    seed: u64,
    exit_code: i32,
}

fn kind_name(k: SpecKind) -> &'static str {
    match k {
        SpecKind::Polynomial => "polynomial",
        SpecKind::Rational => "rational",
        SpecKind::Series => "series",
    }
}

fn domain_text(d: &Option<DomainHint>) -> String {
    match d {
        Some(DomainHint::UpTo(r)) => format!("(0, {r})"),
        Some(DomainHint::Unbounded) => "(0, inf)".into(),
        None => "unspecified".into(),
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

impl Report<'_> {
    fn to_json(&self) -> Value {
        let r = self.result;
        let v = &r.verdict;
        let mut verdict = serde_json::to_value(v).expect("verdict serializes");
        verdict["passed"] = json!(v.passed());
        json!({
            "schema": SCHEMA_VERSION,
            "covariance": {
                "expression": self.spec.label,
                "kind": kind_name(self.spec.kind),
                "domain": domain_text(&self.spec.domain_hint),
            },
            "order": r.order,
            "lattice": r.lattice,
            "s_scale": rational_json(&r.s_scale),
            "c": rationals_json(&r.c),
            "u": {
                "coefficients": rationals_json(r.u.u.coeffs()),
                "absolutely_monotone": r.u.absolutely_monotone(),
            },
            "routes": {
                "agree": r.route_agreement,
                "lagrange": rationals_json(&r.base_lagrange),
                "recurrence": rationals_json(&r.base_recurrence),
            },
            "verdict": verdict,
            "identities": self.identities.map(|i| json!({ "ode": i.ode, "pde_y": i.pde_y, "pde_x": i.pde_x })),
            "transform": self.transform.map(|t| json!({
                "shift": t.t.shift_m,
                "power": t.t.power_k,
                "argpow": t.t.argpow_n,
                "covariance": t.covariance.as_ref().map(|c| c.label.clone()),
                "covariance_error": t.covariance_error,
                "omega": rationals_json(&t.omega),
                "roundtrip": t.roundtrip,
            })),
            "moments": self.moments.iter().map(|(x, m)| json!({
                "x": rational_json(x),
                "mean": rational_json(&m.mean),
                "variance": rational_json(&m.variance),
                "v_of_x": m.v_of_x.as_ref().map(rational_json),
                "tail_bound": m.tail_bound,
                "tolerance": m.tolerance,
                "agrees": m.agrees(),
            })).collect::<Vec<_>>(),
            "oracle": self.oracle.iter().map(|o| json!({
                "x": rational_json(&o.x),
                "order": o.order,
                "samples": o.samples,
                "seed": self.seed,
                "empirical_mean": o.empirical_mean,
                "empirical_variance": o.empirical_variance,
                "v_of_x": o.v_of_x,
                "standard_error": o.standard_error,
                "passed": o.passed,
            })).collect::<Vec<_>>(),
            "exit_code": self.exit_code,
        })
    }

    fn to_text(&self) -> String {
        let r = self.result;
        let v = &r.verdict;
        let mut s = String::new();
        let _ = writeln!(s, "covariance: {}", self.spec.label);
        let _ = writeln!(s, "kind: {}", kind_name(self.spec.kind));
        let _ = writeln!(s, "domain: {}", domain_text(&self.spec.domain_hint));
        let _ = writeln!(s, "order: {}", r.order);
        if r.lattice > 1 {
            let _ = writeln!(
                s,
                "lattice: {} (support on multiples of {})",
                r.lattice, r.lattice
            );
        }
        if r.s_scale != Rational::from_integer(1.into()) {
            let _ = writeln!(s, "s'(0): {}", r.s_scale);
        }
        let _ = writeln!(s, "coefficients:");
        for (k, c) in r.c.iter().enumerate() {
            let _ = writeln!(s, "  c_{k} = {c}");
        }
        let _ = writeln!(
            s,
            "U absolutely monotone: {}",
            yes(r.u.absolutely_monotone())
        );
        let _ = writeln!(s, "routes agree: {}", yes(r.route_agreement));
        let _ = writeln!(
            s,
            "sufficiency: {} (analytic {}, V > 0 up to {:.4}: {}, tau(0) > 0: {}, c_k >= 0: {})",
            if v.passed() { "passed" } else { "FAILED" },
            yes(v.analytic_proxy_ok),
            v.positivity_radius,
            yes(v.positivity_ok),
            yes(v.tau0_positive),
            yes(v.all_c_nonneg)
        );
        if let Some(k) = v.first_negative_index {
            let _ = writeln!(s, "first negative coefficient: c_{k} = {}", r.c[k]);
        }
        if let Some(i) = self.identities {
            let _ = writeln!(
                s,
                "identities: ode {}, pde in y {}, pde in x {}",
                yes(i.ode),
                yes(i.pde_y),
                yes(i.pde_x)
            );
        }
        if let Some(t) = self.transform {
            let _ = writeln!(
                s,
                "transform: m = {}, k = {}, n = {}",
                t.t.shift_m, t.t.power_k, t.t.argpow_n
            );
            match (&t.covariance, &t.covariance_error) {
                (Some(c), _) => {
                    let _ = writeln!(s, "  covariance: {}", c.label);
                }
                (None, Some(e)) => {
                    let _ = writeln!(s, "  covariance: unavailable ({e})");
                }
                _ => {}
            }
            let omega: Vec<String> = t.omega.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "  omega: [{}]", omega.join(", "));
            if let Some(ok) = t.roundtrip {
                let _ = writeln!(s, "  round trip: {}", yes(ok));
            }
        }
        for (x, m) in self.moments {
            let _ = writeln!(
                s,
                "x = {x}: variance {:.12} V(x) {} tail {:.2e} agrees {}",
                m.variance_approx,
                m.v_of_x_approx.map_or("n/a".into(), |v| format!("{v:.12}")),
                m.tail_bound,
                yes(m.agrees())
            );
        }
        for o in self.oracle {
            let _ = writeln!(
                s,
                "oracle x = {} (order {}): {} samples, seed {}, sample variance {:.6}, V(x) {:.6}, SE {:.2e}, {}",
                o.x,
                o.order,
                o.samples,
                self.seed,
                o.empirical_variance,
                o.v_of_x,
                o.standard_error,
                if o.passed { "pass" } else { "FAIL" }
            );
        }
        s
    }
}
