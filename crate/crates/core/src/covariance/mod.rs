//! Covariance characteristics `V(x)`: parsing, Taylor expansion, the normal
//! form `V(x) = x(1 + x U(x))`, and recovery of `V` from a series function.

mod parse;

pub(crate) use parse::poly_trim;
pub use parse::{poly_compose_affine, poly_scale};

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::fps::{int, FpsError, Rational, Series};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CovarianceError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("division by zero at line {line}, column {col}")]
    ZeroDenominator { line: usize, col: usize },
    #[error("denominator vanishes at x = 0")]
    PoleAtOrigin,
    #[error("V is not in normal form x(1 + ...): V(0) = {v0}, V'(0) = {v1}")]
    NotNormalForm {
        v0: Box<Rational>,
        v1: Box<Rational>,
    },
    #[error("series covariance known to order {available}, {requested} requested")]
    SeriesTooShort { available: usize, requested: usize },
    #[error("x(y) = y w'(y)/w(y) cannot be inverted as a power series: {0}")]
    NotRevertible(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Fps(#[from] FpsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Polynomial,
    Rational,
    Series,
}

/// Upper end `R` of the open interval `(0, R)` on which `V` is expected to be
/// positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainHint {
    UpTo(Rational),
    Unbounded,
}

/// User-facing description of `V(x)`.
///
/// Polynomial and rational kinds are exact: `numer` and `denom` hold every
/// coefficient. The series kind holds a truncated Taylor expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub kind: SpecKind,
    pub numer: Series,
    pub denom: Series,
    pub domain_hint: Option<DomainHint>,
    /// Source text or preset name, for reports.
    pub label: String,
}

pub const PRESET_SQRT: &str = "sqrt-example";

/// Order at which presets are generated when the caller does not ask for more.
const PRESET_MIN_ORDER: usize = 64;

impl CovarianceSpec {
    pub fn polynomial(coeffs: Vec<Rational>) -> Self {
        let c = poly_trim(coeffs);
        let n = c.len().max(1);
        CovarianceSpec {
            kind: SpecKind::Polynomial,
            numer: Series::from_poly(&c, n),
            denom: Series::one(1),
            domain_hint: None,
            label: poly_to_string(&c),
        }
    }

    /// `numer / denom`; fails if `denom(0) = 0`.
    pub fn rational(numer: Vec<Rational>, denom: Vec<Rational>) -> Result<Self, CovarianceError> {
        let num = poly_trim(numer);
        let den = poly_trim(denom);
        let d0 = den.first().cloned().unwrap_or_else(Rational::zero);
        if d0.is_zero() {
            return Err(CovarianceError::PoleAtOrigin);
        }
        let inv = d0.recip();
        let num = poly_scale(&num, &inv);
        let den = poly_scale(&den, &inv);
        if den.len() == 1 {
            return Ok(CovarianceSpec::polynomial(num));
        }
        let label = format!("({})/({})", poly_to_string(&num), poly_to_string(&den));
        Ok(CovarianceSpec {
            kind: SpecKind::Rational,
            numer: Series::from_poly(&num, num.len().max(1)),
            denom: Series::from_poly(&den, den.len()),
            domain_hint: None,
            label,
        })
    }

    pub fn series(coeffs: Series, label: impl Into<String>) -> Self {
        CovarianceSpec {
            kind: SpecKind::Series,
            numer: coeffs,
            denom: Series::one(1),
            domain_hint: None,
            label: label.into(),
        }
    }

    pub fn with_domain(mut self, hint: DomainHint) -> Self {
        self.domain_hint = Some(hint);
        self
    }

    pub fn is_exact(&self) -> bool {
        self.kind != SpecKind::Series
    }

    /// Exact value `V(x)`; `None` at a pole. Series specs are evaluated as their
    /// truncated polynomial.
    pub fn evaluate(&self, x: &Rational) -> Option<Rational> {
        let d = self.denom.evaluate(x);
        if d.is_zero() {
            return None;
        }
        Some(self.numer.evaluate(x) / d)
    }

    /// Taylor expansion of `V` at 0 to `order` coefficients.
    pub fn to_series(&self, order: usize) -> Result<Series, CovarianceError> {
        match self.kind {
            SpecKind::Series => {
                if self.numer.order() < order {
                    return Err(CovarianceError::SeriesTooShort {
                        available: self.numer.order(),
                        requested: order,
                    });
                }
                Ok(self.numer.truncate(order))
            }
            SpecKind::Polynomial => Ok(Series::from_poly(self.numer.coeffs(), order)),
            SpecKind::Rational => {
                let n = Series::from_poly(self.numer.coeffs(), order);
                let d = Series::from_poly(self.denom.coeffs(), order);
                if d.coeffs().first().is_some_and(Zero::is_zero) {
                    return Err(CovarianceError::PoleAtOrigin);
                }
                Ok(n.div(&d)?)
            }
        }
    }

    /// Whether the expansion starts as `x(1 + ...)`.
    pub fn is_normal_form(&self) -> bool {
        let v0 = self.numer.get_or_zero(0);
        let v1 = self.numer.get_or_zero(1) / self.denom.get_or_zero(0);
        v0.is_zero() && v1.is_one()
    }
}

impl fmt::Display for CovarianceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Parses an expression in `x` into a canonical spec.
pub fn parse_spec(text: &str) -> Result<CovarianceSpec, CovarianceError> {
    let r = parse::parse_ratfn(text)?;
    let (mut num, mut den) = (r.num, r.den);
    // Cancel a common power of x, e.g. "x^2/x".
    while num.first().is_some_and(Zero::is_zero) && den.first().is_some_and(Zero::is_zero) {
        num.remove(0);
        den.remove(0);
    }
    let mut spec = CovarianceSpec::rational(num, den)?;
    spec.label = text.trim().to_string();
    Ok(spec)
}

/// Built-in covariances that the expression grammar cannot express.
pub fn preset(name: &str, order: usize) -> Result<CovarianceSpec, CovarianceError> {
    match name {
        PRESET_SQRT => {
            // 2(1 - sqrt(1 - x))
            let n = order.max(PRESET_MIN_ORDER);
            let one_minus_x = Series::from_ints(&[1, -1]);
            let root = Series::from_poly(one_minus_x.coeffs(), n)
                .log()?
                .scale(&Rational::new(1.into(), 2.into()))
                .exp()?;
            let v = (&Series::one(n) - &root).scale(&int(2));
            Ok(CovarianceSpec::series(v, "2*(1-sqrt(1-x))")
                .with_domain(DomainHint::UpTo(Rational::one())))
        }
        other => Err(CovarianceError::UnknownPreset(other.to_string())),
    }
}

/// `U` in `V(x) = x(1 + x U(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct UForm {
    /// Coefficients `a_1, a_2, ...` of `U(x) = a_1 + a_2 x + ...`.
    pub u: Series,
    /// `x(1 + x U)` reproduces `V` to the truncation order.
    pub valid: bool,
}

impl UForm {
    /// Nonnegativity of every retained coefficient of `U`: absolute
    /// monotonicity verified to the truncation order only.
    pub fn absolutely_monotone(&self) -> bool {
        self.u.coeffs().iter().all(|c| !c.is_negative())
    }
}

pub fn u_form(spec: &CovarianceSpec, order: usize) -> Result<UForm, CovarianceError> {
    u_form_of_series(&spec.to_series(order)?)
}

pub fn u_form_of_series(v: &Series) -> Result<UForm, CovarianceError> {
    let v0 = v.get_or_zero(0);
    let v1 = v.get_or_zero(1);
    if !v0.is_zero() || !v1.is_one() || v.order() < 2 {
        return Err(CovarianceError::NotNormalForm {
            v0: Box::new(v0),
            v1: Box::new(v1),
        });
    }
    let w = v.shift_down(1)?;
    let u = (&w - &Series::one(w.order())).shift_down(1)?;
    let rebuilt = (&Series::one(u.order() + 1) + &u.mul_z()).mul_z();
    Ok(UForm {
        valid: rebuilt == *v,
        u,
    })
}

/// `V` recovered from a series function `omega` with `omega(0) != 0`.
///
/// Computes `x(y) = y omega'(y) / omega(y)`, inverts it to `y = f(x)` and
/// returns `f / f'`. If the support of `omega` lies on multiples of `d > 1`,
/// the computation runs in `u = y^d` and the result is `d f / f'`.
pub fn covariance_from_omega(omega: &Series) -> Result<Series, CovarianceError> {
    if omega.coeffs().first().is_none_or(Zero::is_zero) {
        return Err(CovarianceError::NotRevertible(
            "omega(0) = 0; strip the leading power of y first".into(),
        ));
    }
    let d = support_step(omega).ok_or_else(|| {
        CovarianceError::NotRevertible("omega is constant to the truncation order".into())
    })?;
    let n = omega.order();
    let reduced = Series::new(
        (0..n)
            .step_by(d)
            .map(|i| omega.coeffs()[i].clone())
            .collect(),
    );
    if reduced.order() < 3 {
        return Err(CovarianceError::NotRevertible(
            "truncation order too small".into(),
        ));
    }
    let dw = reduced.differentiate();
    let x_of_u = dw
        .div(&reduced.truncate(dw.order()))?
        .mul_z()
        .scale(&int(d as i64));
    if x_of_u.coeffs()[1].is_zero() {
        return Err(CovarianceError::NotRevertible(
            "x(y) has vanishing linear term".into(),
        ));
    }
    let f = x_of_u.revert()?;
    let g = f.shift_down(1)?;
    let v = g.div(&f.differentiate())?.mul_z().scale(&int(d as i64));
    Ok(v)
}

/// gcd of the exponents `i >= 1` carrying nonzero coefficients.
pub(crate) fn support_step(s: &Series) -> Option<usize> {
    s.coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, _)| i)
        .reduce(|a, b| a.gcd(&b))
}

pub fn poly_to_string(c: &[Rational]) -> String {
    let mut out = String::new();
    for (i, a) in c.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let neg = a.is_negative();
        let mag = a.abs();
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mono = match i {
            0 => String::new(),
            1 => "x".to_string(),
            _ => format!("x^{i}"),
        };
        match (mag.is_one(), mono.is_empty()) {
            (_, true) => out.push_str(&mag.to_string()),
            (true, false) => out.push_str(&mono),
            (false, false) => out.push_str(&format!("{mag}*{mono}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fps::rat;

    fn ints(c: &[i64]) -> Vec<Rational> {
        c.iter().map(|&v| int(v)).collect()
    }

    #[test]
    fn parse_examples() {
        let s = parse_spec("x*(1-x)").unwrap();
        assert_eq!(s.kind, SpecKind::Polynomial);
        assert_eq!(s.numer.coeffs(), &ints(&[0, 1, -1])[..]);
        let s = parse_spec("x").unwrap();
        assert_eq!(s.numer.coeffs(), &ints(&[0, 1])[..]);
        let s = parse_spec("x/(1-x)").unwrap();
        assert_eq!(s.kind, SpecKind::Rational);
        assert_eq!(s.numer.coeffs(), &ints(&[0, 1])[..]);
        assert_eq!(s.denom.coeffs(), &ints(&[1, -1])[..]);
    }

    #[test]
    fn parse_rational_coefficients() {
        let s = parse_spec("x*(1+x/2)*(1+x+x^2/2)").unwrap();
        assert_eq!(s.kind, SpecKind::Polynomial);
        // x + 3/2 x^2 + x^3 + 1/4 x^4
        assert_eq!(
            s.numer.coeffs(),
            &[int(0), int(1), rat(3, 2), int(1), rat(1, 4)][..]
        );
        let s = parse_spec("x*(1+x^3)").unwrap();
        assert_eq!(s.numer.coeffs(), &ints(&[0, 1, 0, 0, 1])[..]);
    }

    #[test]
    fn parse_rejects_pole_at_origin() {
        assert_eq!(parse_spec("1/x"), Err(CovarianceError::PoleAtOrigin));
        // common powers of x cancel first
        assert_eq!(
            parse_spec("x^2/x").unwrap().numer.coeffs(),
            &ints(&[0, 1])[..]
        );
        assert!(matches!(
            parse_spec("x/0"),
            Err(CovarianceError::ZeroDenominator { .. })
        ));
    }

    #[test]
    fn to_series_examples() {
        let s = parse_spec("x/(1-x)").unwrap();
        assert_eq!(s.to_series(5).unwrap(), Series::from_ints(&[0, 1, 1, 1, 1]));
        let p = parse_spec("x-x^2").unwrap();
        assert_eq!(
            p.to_series(5).unwrap(),
            Series::from_ints(&[0, 1, -1, 0, 0])
        );
        let q = preset(PRESET_SQRT, 5).unwrap();
        // binomial series of 2(1 - sqrt(1-x))
        assert_eq!(
            q.to_series(5).unwrap(),
            Series::new(vec![int(0), int(1), rat(1, 4), rat(1, 8), rat(5, 64)])
        );
        let short = CovarianceSpec::series(Series::from_ints(&[0, 1]), "v");
        assert!(matches!(
            short.to_series(3),
            Err(CovarianceError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn u_form_examples() {
        let v = parse_spec("x*(1+2*x)*(1+3*x)*(1+4*x)").unwrap();
        assert_eq!(v.numer.coeffs(), &ints(&[0, 1, 9, 26, 24])[..]);
        let u = u_form(&v, 6).unwrap();
        assert_eq!(u.u, Series::from_ints(&[9, 26, 24, 0]));
        assert!(u.valid && u.absolutely_monotone());
        assert!(u_form(&parse_spec("x").unwrap(), 6).unwrap().u.is_zero());
        assert_eq!(
            u_form(&parse_spec("x*(1+x)").unwrap(), 4).unwrap().u,
            Series::from_ints(&[1, 0])
        );
        assert!(matches!(
            u_form(&parse_spec("2*x*(1-x)").unwrap(), 4),
            Err(CovarianceError::NotNormalForm { .. })
        ));
        assert!(!u_form(&parse_spec("x*(1-x)").unwrap(), 4)
            .unwrap()
            .absolutely_monotone());
    }

    #[test]
    fn covariance_from_closed_forms() {
        let n = 10;
        let bern = Series::from_poly(&ints(&[1, 1]), n);
        assert_eq!(
            covariance_from_omega(&bern).unwrap(),
            Series::from_poly(&ints(&[0, 1, -1]), n)
        );
        let pois = Series::var(n).exp().unwrap();
        assert_eq!(covariance_from_omega(&pois).unwrap(), Series::var(n));
        let geo = Series::one(n)
            .div(&Series::from_poly(&ints(&[1, -1]), n))
            .unwrap();
        assert_eq!(
            covariance_from_omega(&geo).unwrap(),
            Series::from_poly(&ints(&[0, 1, 1]), n)
        );
    }

    #[test]
    fn covariance_on_a_lattice() {
        // omega(y^2) for Poisson has covariance 4 V(x/2) = 2x.
        let pois2 = Series::var(12).exp().unwrap().substitute_power(2);
        assert_eq!(
            covariance_from_omega(&pois2).unwrap(),
            Series::from_poly(&ints(&[0, 2]), 6)
        );
    }

    #[test]
    fn covariance_from_omega_errors() {
        let shifted = Series::from_ints(&[0, 1, 1, 0]);
        assert!(matches!(
            covariance_from_omega(&shifted),
            Err(CovarianceError::NotRevertible(_))
        ));
        let gap = Series::from_ints(&[1, 0, 1, 1, 0, 0]);
        assert!(matches!(
            covariance_from_omega(&gap),
            Err(CovarianceError::NotRevertible(_))
        ));
    }

    #[test]
    fn evaluate_and_display() {
        let s = parse_spec("x/(1-x)").unwrap();
        assert_eq!(s.evaluate(&rat(1, 2)), Some(int(1)));
        assert_eq!(s.evaluate(&int(1)), None);
        assert_eq!(poly_to_string(&[int(0), int(1), rat(-1, 2)]), "x - 1/2*x^2");
    }
}
