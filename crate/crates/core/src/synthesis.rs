//! From a covariance `V` to the coefficients of its series function.
//!
//! With `s(z) = exp(∫ dz/V)`, `b(z) = exp(∫ z dz/V)` and `τ(z) = z/s(z)`, the
//! series function is `ω(y) = b(s⁻¹(y)) = Σ c_k y^k`. The coefficients are
//! obtained twice:
//!
//! * by Lagrange inversion, `c_k = (1/k) [z^{k-1}] b'(z) τ(z)^k` for `k ≥ 1`;
//! * by the triangular recurrence for `t_k = [z^k] b'(z) τ(z)^{a+1}` that
//!   follows from `z V g' = ((a+2)V − zV' + z² − (a+1)z) g` with
//!   `g = b' τ^{a+1}`:
//!
//!   `(k+1) t_{k+1} = t_k + (a − k) Σ_{j=1}^{k+1} a_j t_{k+1−j}`, `t_0 = 1`,
//!
//!   after which `c_{m+1} = t_m(m) / (m+1)`.
//!
//! Both antiderivatives are taken with zero constant term, which fixes
//! `b(0) = 1` and hence `c_0 = 1`. The multiplicative constant of `s` stays
//! free as [`SynthesisOptions::s_scale`]; rescaling `s` by `λ` rescales
//! `c_k` by `λ^{-k}`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::covariance::{
    u_form_of_series, CovarianceError, CovarianceSpec, DomainHint, SpecKind, UForm,
};
use crate::distribution::{self, DistributionError};
use crate::fps::{int, to_f64, FpsError, Rational, Series, DEFAULT_ORDER};

/// Number of sample points used by the positivity heuristic.
pub const POSITIVITY_SAMPLES: usize = 64;
/// Largest right end of the sampled interval.
pub const POSITIVITY_CAP: i64 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("V is not synthesizable: V(0) = {v0}, V'(0) = {v1}; need V(0) = 0 and V'(0) a positive integer (use transforms for shifted covariances)")]
    NotNormalForm {
        v0: Box<Rational>,
        v1: Box<Rational>,
    },
    #[error("tau(0) = 0")]
    TauVanishesAtZero,
    #[error("the scale of s must be nonzero")]
    InvalidScale,
    #[error("truncation order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Fps(#[from] FpsError),
    #[error(transparent)]
    Domain(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub order: usize,
    /// `s'(0)`: the free multiplicative constant of `s`.
    pub s_scale: Rational,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            order: DEFAULT_ORDER,
            s_scale: Rational::one(),
        }
    }
}

impl SynthesisOptions {
    pub fn with_order(order: usize) -> Self {
        SynthesisOptions {
            order,
            ..Default::default()
        }
    }
}

/// `s`, `b` and `τ = z/s` for a normal-form `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSeries {
    pub s: Series,
    pub b: Series,
    pub tau: Series,
    pub order: usize,
}

impl QuadratureSeries {
    /// Polynomial evaluation of the truncated `s`. Only meaningful well inside
    /// the disk of convergence of `s`.
    pub fn s_eval(&self, x: &Rational) -> Rational {
        self.s.evaluate(x)
    }
}

pub fn quadratures(v: &Series, s_scale: &Rational) -> Result<QuadratureSeries, SynthesisError> {
    let n = v.order();
    if n < 2 {
        return Err(SynthesisError::OrderTooSmall(n));
    }
    let v0 = v.coeffs()[0].clone();
    let v1 = v.coeffs()[1].clone();
    if !v0.is_zero() || !v1.is_one() {
        return Err(SynthesisError::NotNormalForm {
            v0: Box::new(v0),
            v1: Box::new(v1),
        });
    }
    if s_scale.is_zero() {
        return Err(SynthesisError::InvalidScale);
    }
    // V = z W with W(0) = 1, so z/V = 1/W and 1/V - 1/z = (1/W - 1)/z.
    let w = v.shift_down(1)?;
    let z_over_v = w.inverse()?;
    let b = z_over_v.integrate().exp()?;
    let rest = (&z_over_v - &Series::one(z_over_v.order())).shift_down(1)?;
    let e = rest.integrate().exp()?;
    let s = e.mul_z().scale(s_scale);
    let tau = e.inverse()?.scale(&s_scale.recip());
    Ok(QuadratureSeries {
        s,
        b,
        tau,
        order: n,
    })
}

/// `c_0 .. c_{order-1}` by Lagrange inversion.
pub fn coefficients_lagrange(
    q: &QuadratureSeries,
    order: usize,
) -> Result<Vec<Rational>, SynthesisError> {
    let tau0 = q
        .tau
        .coeffs()
        .first()
        .cloned()
        .unwrap_or_else(Rational::zero);
    if tau0.is_zero() {
        return Err(SynthesisError::TauVanishesAtZero);
    }
    let order = order.min(q.tau.order() + 1).min(q.b.order());
    if order == 0 {
        return Ok(Vec::new());
    }
    let b0 = q.b.coeffs()[0].clone();
    let bp = q.b.differentiate();
    let mut c = Vec::with_capacity(order);
    c.push(Rational::one());
    let mut tau_k = Series::one(q.tau.order());
    for k in 1..order {
        tau_k = tau_k.mul(&q.tau);
        let mut acc = Rational::zero();
        for j in 0..k {
            let (x, y) = (&bp.coeffs()[j], &tau_k.coeffs()[k - 1 - j]);
            if !x.is_zero() && !y.is_zero() {
                acc += x * y;
            }
        }
        c.push(acc / (int(k as i64) * &b0));
    }
    Ok(c)
}

/// `t_0(a) .. t_m(a)` for the auxiliary function `b' τ^{a+1}`, `τ(0) = 1`.
pub fn recurrence_terms(u: &UForm, a: usize, m: usize) -> Vec<Rational> {
    let a_coeff = |j: usize| u.u.get_or_zero(j - 1);
    let a = int(a as i64);
    let mut t = Vec::with_capacity(m + 1);
    t.push(Rational::one());
    for k in 0..m {
        let mut sum = Rational::zero();
        for j in 1..=k + 1 {
            let aj = a_coeff(j);
            if !aj.is_zero() {
                sum += aj * &t[k + 1 - j];
            }
        }
        let next = (&t[k] + (&a - int(k as i64)) * sum) / int(k as i64 + 1);
        t.push(next);
    }
    t
}

/// `c_0 .. c_{order-1}` by the recurrence. Each `c_{m+1}` needs its own run
/// with parameter `a = m`; runs are independent and done in parallel.
pub fn coefficients_recurrence(
    u: &UForm,
    order: usize,
    s_scale: &Rational,
) -> Result<Vec<Rational>, SynthesisError> {
    if s_scale.is_zero() {
        return Err(SynthesisError::InvalidScale);
    }
    if order == 0 {
        return Ok(Vec::new());
    }
    let inv = s_scale.recip();
    let tail: Vec<Rational> = (0..order - 1)
        .into_par_iter()
        .map(|m| {
            let t = recurrence_terms(u, m, m);
            let lam = num_traits::pow(inv.clone(), m + 1);
            &t[m] / int(m as i64 + 1) * lam
        })
        .collect();
    let mut c = Vec::with_capacity(order);
    c.push(Rational::one());
    c.extend(tail);
    Ok(c)
}

/// Outcome of the sufficiency check, clause by clause.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SufficiencyVerdict {
    /// `V` has a Taylor expansion at 0 (rational kinds: no pole at the origin).
    pub analytic_proxy_ok: bool,
    /// `V > 0` at every sample point of `(0, R)`; a heuristic.
    pub positivity_ok: bool,
    /// Right end of the interval on which positivity was observed.
    pub positivity_radius: f64,
    pub tau0_nonzero: bool,
    pub tau0_positive: bool,
    pub all_c_nonneg: bool,
    pub first_negative_index: Option<usize>,
}

impl SufficiencyVerdict {
    pub fn passed(&self) -> bool {
        self.analytic_proxy_ok && self.positivity_ok && self.tau0_positive && self.all_c_nonneg
    }
}

pub fn validate_sufficiency(
    q: &QuadratureSeries,
    c: &[Rational],
    spec: &CovarianceSpec,
) -> SufficiencyVerdict {
    let tau0 = q
        .tau
        .coeffs()
        .first()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let first_negative_index = c.iter().position(|x| x.is_negative());
    let (positivity_ok, positivity_radius) = check_positivity(spec);
    let analytic_proxy_ok = match spec.kind {
        SpecKind::Polynomial => true,
        SpecKind::Rational => !spec.denom.get_or_zero(0).is_zero(),
        SpecKind::Series => series_radius(&spec.numer) > 0.0,
    };
    SufficiencyVerdict {
        analytic_proxy_ok,
        positivity_ok,
        positivity_radius,
        tau0_nonzero: !tau0.is_zero(),
        tau0_positive: tau0.is_positive(),
        all_c_nonneg: first_negative_index.is_none(),
        first_negative_index,
    }
}

/// Root-test estimate of the radius of convergence from the upper half of
/// the retained coefficients.
fn series_radius(v: &Series) -> f64 {
    let n = v.order();
    let mut limsup: f64 = 0.0;
    for (k, c) in v.coeffs().iter().enumerate().skip((n / 2).max(1)) {
        let a = to_f64(c).abs();
        if a > 0.0 {
            limsup = limsup.max(a.powf(1.0 / k as f64));
        }
    }
    if limsup == 0.0 {
        f64::INFINITY
    } else {
        1.0 / limsup
    }
}

fn check_positivity(spec: &CovarianceSpec) -> (bool, f64) {
    let cap = int(POSITIVITY_CAP);
    let (upper, strict) = match &spec.domain_hint {
        Some(DomainHint::UpTo(r)) => (r.clone().min(cap), true),
        Some(DomainHint::Unbounded) => (cap, true),
        None => {
            let upper = match spec.kind {
                SpecKind::Series => {
                    let r = series_radius(&spec.numer).min(POSITIVITY_CAP as f64);
                    Rational::from_float(r).unwrap_or_else(|| cap.clone())
                }
                _ => cap,
            };
            (upper, false)
        }
    };
    let step = &upper / int(POSITIVITY_SAMPLES as i64 + 1);
    let mut radius = Rational::zero();
    for i in 1..=POSITIVITY_SAMPLES {
        let x = &step * int(i as i64);
        match spec.evaluate(&x) {
            Some(v) if v.is_positive() => radius = x,
            _ => {
                // Without a hint, positivity only has to hold on some (0, R).
                if strict || radius.is_zero() {
                    return (false, to_f64(&radius));
                }
                return (true, to_f64(&radius));
            }
        }
    }
    (true, to_f64(&upper))
}

/// Everything computed for one covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub order: usize,
    /// Taylor expansion of `V`.
    pub v: Series,
    /// `n = V'(0)`. For `n > 1` the series function is `ω(y) = ω₀(y^n)` where
    /// `ω₀` belongs to the normal-form covariance `V(n x)/n²`.
    pub lattice: usize,
    pub base_v: Series,
    pub quadratures: QuadratureSeries,
    pub u: UForm,
    pub base_lagrange: Vec<Rational>,
    pub base_recurrence: Vec<Rational>,
    /// Coefficients `c_0 .. c_{order-1}` of `ω` for `V` itself.
    pub c: Vec<Rational>,
    pub route_agreement: bool,
    pub verdict: SufficiencyVerdict,
    pub s_scale: Rational,
}

impl SynthesisResult {
    pub fn omega(&self) -> Series {
        Series::new(self.c.clone())
    }

    pub fn base_omega(&self) -> Series {
        Series::new(self.base_lagrange.clone())
    }
}

pub fn synthesize(
    spec: &CovarianceSpec,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult, SynthesisError> {
    let order = opts.order;
    if order < 2 {
        return Err(SynthesisError::OrderTooSmall(order));
    }
    let v = spec.to_series(order)?;
    let v0 = v.coeffs()[0].clone();
    let v1 = v.coeffs()[1].clone();
    let lattice = match v1.to_integer().to_usize() {
        Some(n) if v0.is_zero() && v1.is_integer() && n >= 1 => n,
        _ => {
            return Err(SynthesisError::NotNormalForm {
                v0: Box::new(v0),
                v1: Box::new(v1),
            })
        }
    };
    let nq = int(lattice as i64);
    let base_v = if lattice == 1 {
        v.clone()
    } else {
        v.scale_arg(&nq).scale(&(&nq * &nq).recip())
    };
    let q = quadratures(&base_v, &opts.s_scale)?;
    let u = u_form_of_series(&base_v)?;
    let base_lagrange = coefficients_lagrange(&q, order)?;
    let base_recurrence = coefficients_recurrence(&u, order, &opts.s_scale)?;
    let route_agreement = base_lagrange == base_recurrence;
    let c: Vec<Rational> = (0..order)
        .map(|i| {
            if i % lattice == 0 {
                base_lagrange[i / lattice].clone()
            } else {
                Rational::zero()
            }
        })
        .collect();
    let verdict = validate_sufficiency(&q, &c, spec);
    Ok(SynthesisResult {
        order,
        v,
        lattice,
        base_v,
        quadratures: q,
        u,
        base_lagrange,
        base_recurrence,
        c,
        route_agreement,
        verdict,
        s_scale: opts.s_scale.clone(),
    })
}

/// Generating function `P(z) = Σ c_k y^k z^k / ω(y)` of the family member with
/// mean `x`, truncated to `z_order` terms.
pub fn pgf(c: &[Rational], x: &Rational, z_order: usize) -> Result<Series, SynthesisError> {
    let y = distribution::y_for_mean(c, x)?;
    let model = distribution::PsdModel::new(c.to_vec(), y)?;
    let n = z_order.min(c.len());
    let p: Result<Vec<Rational>, _> = (0..n).map(|k| distribution::pmf(&model, k)).collect();
    Ok(Series::new(p?))
}

/// `V s' − s` and `V b' − z b`; both vanish identically.
pub fn ode_residuals(q: &QuadratureSeries, v: &Series) -> (Series, Series) {
    let rs = &v.mul(&q.s.differentiate()) - &q.s;
    let rb = &v.mul(&q.b.differentiate()) - &q.b.mul_z();
    (rs, rb)
}

/// Residuals of `y ∂P/∂y − z ∂P/∂z + x P = 0` for the `z^k` coefficients,
/// `k < k_max`, as series in `y` with `x = y ω'/ω`.
pub fn pde_residuals_y(omega: &Series, k_max: usize) -> Result<Vec<Series>, SynthesisError> {
    let n = omega.order();
    let inv = omega.inverse()?;
    let dw = omega.differentiate();
    let x_of_y = dw.div(&omega.truncate(dw.order()))?.mul_z();
    let mut out = Vec::new();
    for k in 0..k_max.min(n) {
        let p = inv.shift_up(k).scale(&omega.coeffs()[k]);
        let lhs = &(&p.differentiate().mul_z() - &p.scale(&int(k as i64))) + &x_of_y.mul(&p);
        out.push(lhs.truncate(n));
    }
    Ok(out)
}

/// Residuals of `V ∂P/∂x − z ∂P/∂z + x P = 0` for the `z^k` coefficients,
/// `P_k(x) = c_k s(x)^k / ω(s(x))`, as series in `x`.
pub fn pde_residuals_x(
    q: &QuadratureSeries,
    v: &Series,
    c: &[Rational],
    k_max: usize,
) -> Result<Vec<Series>, SynthesisError> {
    let n = q.s.order().min(v.order()).min(c.len());
    let s = q.s.truncate(n);
    let w = Series::new(c[..n].to_vec()).compose(&s)?;
    let inv = w.inverse()?;
    let mut s_k = Series::one(n);
    let mut out = Vec::new();
    for (k, ck) in c.iter().enumerate().take(k_max.min(n)) {
        if k > 0 {
            s_k = s_k.mul(&s);
        }
        let p = s_k.mul(&inv).scale(ck);
        let lhs = &(&v.mul(&p.differentiate()) - &p.scale(&int(k as i64))) + &p.mul_z();
        out.push(lhs);
    }
    Ok(out)
}

/// `binom(αk+1, k) / (αk+1)`, the closed form for `V = x(1+(α−1)x)(1+αx)`.
pub fn fuss_catalan(alpha: u64, k: u64) -> Rational {
    let top = alpha * k + 1;
    let mut b = BigInt::one();
    for i in 0..k {
        b = b * BigInt::from(top - i) / BigInt::from(i + 1);
    }
    Rational::new(b, BigInt::from(top))
}
