//! Power series distributions `p_k = a_k y^k / ω(y)` built from a truncated
//! series function, with exact moments and a Monte Carlo oracle.
//!
//! All masses are normalized by the truncated sum `ω_N(y) = Σ_{k<N} a_k y^k`,
//! so they sum to exactly 1. The mass lost by truncation is not known exactly;
//! [`tail_bound`] estimates it from the decay of the last retained terms.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covariance::CovarianceSpec;
use crate::fps::{int, to_f64, Rational};

/// Default tail tolerance for oracle operations (float view).
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;
/// Relative change allowed over the last retained terms of `ω(y)` before the
/// truncated series is considered converged at `y`.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-12;
/// Number of trailing terms inspected by the convergence heuristic.
pub const CONVERGENCE_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("coefficient a_{0} is negative")]
    NegativeCoefficient(usize),
    #[error("all coefficients vanish")]
    AllZero,
    #[error("parameter y must be nonnegative")]
    NegativeParameter,
    #[error("index {index} is outside truncation order {order}")]
    OrderExceeded { index: usize, order: usize },
    #[error("estimated tail mass {deficit:e} exceeds tolerance {tolerance:e}")]
    TailTooHeavy { deficit: f64, tolerance: f64 },
    #[error("mean {x} is outside the admissible domain: {reason}")]
    Domain { x: String, reason: String },
}

/// The member of the family `ω = Σ a_k y^k` at parameter `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdModel {
    pub a: Vec<Rational>,
    pub y: Rational,
    /// Covariance to compare against in [`moments`].
    pub covariance: Option<CovarianceSpec>,
}

impl PsdModel {
    pub fn new(a: Vec<Rational>, y: Rational) -> Result<Self, DistributionError> {
        if let Some(k) = a.iter().position(Signed::is_negative) {
            return Err(DistributionError::NegativeCoefficient(k));
        }
        if a.iter().all(Zero::is_zero) {
            return Err(DistributionError::AllZero);
        }
        if y.is_negative() {
            return Err(DistributionError::NegativeParameter);
        }
        Ok(PsdModel {
            a,
            y,
            covariance: None,
        })
    }

    pub fn with_covariance(mut self, v: CovarianceSpec) -> Self {
        self.covariance = Some(v);
        self
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// `a_k y^k` for every retained `k`.
    fn terms(&self) -> Vec<Rational> {
        let mut p = Rational::one();
        self.a
            .iter()
            .map(|a| {
                let t = a * &p;
                p *= &self.y;
                t
            })
            .collect()
    }

    /// `ω_N(y)`.
    pub fn omega(&self) -> Rational {
        self.terms()
            .into_iter()
            .fold(Rational::zero(), |s, t| s + t)
    }

    /// Exact masses `p_0 .. p_{N-1}`.
    pub fn masses(&self) -> Vec<Rational> {
        let terms = self.terms();
        let total = terms.iter().fold(Rational::zero(), |s, t| s + t);
        terms.into_iter().map(|t| t / &total).collect()
    }
}

pub fn pmf(model: &PsdModel, k: usize) -> Result<Rational, DistributionError> {
    if k >= model.order() {
        return Err(DistributionError::OrderExceeded {
            index: k,
            order: model.order(),
        });
    }
    let terms = model.terms();
    let total = terms.iter().fold(Rational::zero(), |s, t| s + t);
    Ok(&terms[k] / total)
}

/// Estimated mass beyond the truncation, relative to `ω_N(y)`.
///
/// Zero when the last [`CONVERGENCE_WINDOW`] coefficients all vanish (the
/// series is taken to terminate). Otherwise the last two nonzero terms are
/// extrapolated geometrically; a ratio of at least one gives infinity.
pub fn tail_bound(model: &PsdModel) -> f64 {
    let terms: Vec<f64> = model.terms().iter().map(to_f64).collect();
    let total: f64 = terms.iter().sum();
    let n = terms.len();
    if n >= CONVERGENCE_WINDOW && model.a[n - CONVERGENCE_WINDOW..].iter().all(Zero::is_zero) {
        return 0.0;
    }
    let nz: Vec<usize> = (0..n).filter(|&i| terms[i] > 0.0).collect();
    match nz.as_slice() {
        [.., i, j] => {
            let r = (terms[*j] / terms[*i]).powf(1.0 / (*j - *i) as f64);
            if r >= 1.0 || !r.is_finite() {
                f64::INFINITY
            } else {
                terms[*j] * r / (1.0 - r) / total
            }
        }
        [j] if *j + CONVERGENCE_WINDOW <= n || model.y.is_zero() => 0.0,
        _ => f64::INFINITY,
    }
}

/// Moments of a [`PsdModel`] and the comparison with `V(x)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MomentReport {
    #[serde(skip)]
    pub mean: Rational,
    #[serde(skip)]
    pub variance: Rational,
    /// `x = y ω'(y)/ω(y)` on the truncated series; equal to `mean`.
    #[serde(skip)]
    pub x_value: Rational,
    #[serde(skip)]
    pub v_of_x: Option<Rational>,
    pub mean_approx: f64,
    pub variance_approx: f64,
    pub v_of_x_approx: Option<f64>,
    pub tail_bound: f64,
    pub tolerance: f64,
}

impl MomentReport {
    /// `|D ξ − V(x)| ≤ tolerance`; false when `V` is unknown.
    pub fn agrees(&self) -> bool {
        match &self.v_of_x {
            Some(v) => to_f64(&(&self.variance - v)).abs() <= self.tolerance,
            None => false,
        }
    }
}

/// Allowed `|D ξ − V(x)|`: a relative rounding floor plus the tail estimate
/// weighted by the squared reach `(N + x)²` of the missing terms. Monotone in
/// the tail mass.
pub fn variance_tolerance(tail: f64, order: usize, x: f64, v: f64) -> f64 {
    1e-12 * v.abs().max(1.0) + tail * (order as f64 + x.abs()).powi(2)
}

pub fn moments(model: &PsdModel) -> Result<MomentReport, DistributionError> {
    let tail = tail_bound(model);
    if tail > DEFAULT_TAIL_TOLERANCE {
        return Err(DistributionError::TailTooHeavy {
            deficit: tail,
            tolerance: DEFAULT_TAIL_TOLERANCE,
        });
    }
    let terms = model.terms();
    let mut w = Rational::zero();
    let mut yw1 = Rational::zero(); // y ω'
    let mut y2w2 = Rational::zero(); // y² ω''
    for (k, t) in terms.iter().enumerate() {
        let k = int(k as i64);
        w += t;
        yw1 += &k * t;
        y2w2 += &k * (&k - int(1)) * t;
    }
    let mean = &yw1 / &w;
    let variance = &y2w2 / &w + &mean - &mean * &mean;
    let v_of_x = model.covariance.as_ref().and_then(|v| v.evaluate(&mean));
    let v_approx = v_of_x.as_ref().map(to_f64);
    let tolerance = variance_tolerance(tail, model.order(), to_f64(&mean), v_approx.unwrap_or(0.0));
    Ok(MomentReport {
        mean_approx: to_f64(&mean),
        variance_approx: to_f64(&variance),
        v_of_x_approx: v_approx,
        x_value: mean.clone(),
        mean,
        variance,
        v_of_x,
        tail_bound: tail,
        tolerance,
    })
}

/// Exact `r`-th central moment of the truncated distribution.
pub fn central_moment(model: &PsdModel, r: u32) -> Rational {
    let p = model.masses();
    let mean = p
        .iter()
        .enumerate()
        .fold(Rational::zero(), |s, (k, q)| s + int(k as i64) * q);
    p.iter().enumerate().fold(Rational::zero(), |s, (k, q)| {
        s + num_traits::pow(int(k as i64) - &mean, r as usize) * q
    })
}

/// `count` draws by inverse CDF, reproducible for a fixed `seed`.
pub fn sample(model: &PsdModel, count: usize, seed: u64) -> Result<Vec<usize>, DistributionError> {
    let tail = tail_bound(model);
    if tail > DEFAULT_TAIL_TOLERANCE {
        return Err(DistributionError::TailTooHeavy {
            deficit: tail,
            tolerance: DEFAULT_TAIL_TOLERANCE,
        });
    }
    let mut acc = 0.0;
    let cdf: Vec<f64> = model
        .masses()
        .iter()
        .map(|p| {
            acc += to_f64(p);
            acc
        })
        .collect();
    let last = cdf.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}

/// Sample mean and unbiased sample variance.
pub fn sample_stats(draws: &[usize]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / n;
    let ss: f64 = draws.iter().map(|&d| (d as f64 - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Standard error of the unbiased sample variance over `n` draws:
/// `sqrt(μ₄/n − σ⁴(n−3)/(n(n−1)))`.
pub fn variance_standard_error(model: &PsdModel, n: usize) -> f64 {
    let mu4 = to_f64(&central_moment(model, 4));
    let s2 = to_f64(&central_moment(model, 2));
    let n = n as f64;
    (mu4 / n - s2 * s2 * (n - 3.0) / (n * (n - 1.0)))
        .max(0.0)
        .sqrt()
}

fn mean_map_f64(c: &[f64], y: f64) -> f64 {
    let (mut w, mut w1, mut p) = (0.0, 0.0, 1.0);
    for (k, a) in c.iter().enumerate() {
        w += a * p;
        w1 += k as f64 * a * p;
        p *= y;
    }
    w1 / w
}

fn mean_exact(c: &[Rational], y: &Rational) -> Rational {
    let (mut w, mut w1, mut p) = (Rational::zero(), Rational::zero(), Rational::one());
    for (k, a) in c.iter().enumerate() {
        let t = a * &p;
        w1 += int(k as i64) * &t;
        w += t;
        p *= y;
    }
    w1 / w
}

/// Continued-fraction convergents of `v` with denominators up to `max_den`.
fn convergents(v: f64, max_den: i64) -> Vec<Rational> {
    let mut out = Vec::new();
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let h2 = a.saturating_mul(h1).saturating_add(h0);
        let k2 = a.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den || k2 <= 0 {
            break;
        }
        out.push(crate::fps::rat(h2, k2));
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = x - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    out
}

/// Parameter `y` of the family member with mean `x`, solving
/// `y ω_N'(y)/ω_N(y) = x` on the truncated series.
///
/// The mean map is increasing for nonnegative coefficients, so bisection
/// brackets the root. A small-denominator rational is returned when it hits
/// `x` exactly; otherwise the float root is converted exactly. The result is
/// rejected unless the last retained terms of `ω(y)` are negligible.
pub fn y_for_mean(c: &[Rational], x: &Rational) -> Result<Rational, DistributionError> {
    let domain = |reason: &str| DistributionError::Domain {
        x: x.to_string(),
        reason: reason.to_string(),
    };
    if let Some(k) = c.iter().position(Signed::is_negative) {
        return Err(DistributionError::NegativeCoefficient(k));
    }
    if x.is_negative() {
        return Err(domain("negative mean"));
    }
    if c.first().is_none_or(Zero::is_zero) {
        return Err(domain("omega(0) = 0; the family does not start at mean 0"));
    }
    if x.is_zero() {
        return Ok(Rational::zero());
    }
    let degree = c.iter().rposition(|a| !a.is_zero()).unwrap_or(0);
    if *x >= crate::fps::int(degree as i64) {
        return Err(domain("mean not reached by the truncated series"));
    }
    let cf: Vec<f64> = c.iter().map(to_f64).collect();
    let xf = to_f64(x);
    let mut hi = 1.0;
    while mean_map_f64(&cf, hi) < xf {
        hi *= 2.0;
        if hi > 1e18 || !mean_map_f64(&cf, hi).is_finite() {
            return Err(domain("mean not reached by the truncated series"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_map_f64(&cf, mid) < xf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let yf = 0.5 * (lo + hi);
    let y = convergents(yf, 1 << 20)
        .into_iter()
        .find(|q| !q.is_negative() && mean_exact(c, q) == *x)
        .or_else(|| Rational::from_float(yf))
        .ok_or_else(|| domain("no finite root"))?;
    // convergence heuristic on the retained terms
    let yv = to_f64(&y);
    let terms: Vec<f64> = cf
        .iter()
        .enumerate()
        .map(|(k, a)| a * yv.powi(k as i32))
        .collect();
    let total: f64 = terms.iter().sum();
    let n = terms.len();
    let window: f64 = terms[n.saturating_sub(CONVERGENCE_WINDOW)..].iter().sum();
    if window.is_nan() || window > CONVERGENCE_TOLERANCE * total {
        return Err(domain("partial sums of omega(y) have not settled"));
    }
    Ok(y)
}

/// Moments along a family for several means. Points fail independently.
pub fn variance_curve(
    c: &[Rational],
    covariance: &CovarianceSpec,
    xs: &[Rational],
) -> Vec<Result<MomentReport, DistributionError>> {
    xs.par_iter()
        .map(|x| {
            let y = y_for_mean(c, x)?;
            let model = PsdModel::new(c.to_vec(), y)?.with_covariance(covariance.clone());
            moments(&model)
        })
        .collect()
}
