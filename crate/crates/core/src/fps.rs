//! Truncated formal power series over exact rationals.
//!
//! A [`Series`] stores the coefficients of `z^0 .. z^(N-1)` where `N` is the
//! truncation order. Binary operations produce results at the smaller of the
//! two operand orders; nothing is ever padded with unknown coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number in canonical form (positive denominator, reduced).
pub type Rational = num_rational::BigRational;

/// Default truncation order used by the CLI and helpers.
pub const DEFAULT_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FpsError {
    #[error("division by a series with zero constant term")]
    DivisionByNonUnit,
    #[error("exp requires a zero constant term")]
    NonzeroConstantTerm,
    #[error("log requires constant term 1")]
    ConstantTermNotOne,
    #[error("inner series of a composition must have zero constant term")]
    NonzeroInnerConstant,
    #[error("series is not invertible: need f[0] = 0 and f[1] != 0")]
    NotInvertible,
    #[error("coefficient index {index} is outside truncation order {order}")]
    OrderExceeded { index: usize, order: usize },
    #[error("cannot divide by z^{power}: coefficient {index} is nonzero")]
    NotDivisibleByPower { power: usize, index: usize },
}

/// Builds the rational `n/d`. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Lossy view for display and numerical oracles only.
pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Very large numerators/denominators overflow the direct conversion;
        // scale both down by the same power of two first.
        let nb = q.numer().bits() as i64;
        let db = q.denom().bits() as i64;
        let shift = (nb.max(db) - 1000).max(0) as usize;
        let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Parses `"n"`, `"n/d"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let neg = whole.trim_start().starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let q = Rational::new(n, d);
        return Some(if neg { -q } else { q });
    }
    t.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Truncated power series `sum_{i < order} coeffs[i] z^i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Series {
    coeffs: Vec<Rational>,
}

impl Series {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        Series { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Series::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    /// A polynomial given by `coeffs`, viewed as a series of the given order.
    /// Coefficients beyond `order` are dropped, missing ones are zero.
    pub fn from_poly(coeffs: &[Rational], order: usize) -> Self {
        let mut c: Vec<Rational> = coeffs.iter().take(order).cloned().collect();
        c.resize(order, Rational::zero());
        Series::new(c)
    }

    pub fn zero(order: usize) -> Self {
        Series::new(vec![Rational::zero(); order])
    }

    pub fn one(order: usize) -> Self {
        Series::constant(Rational::one(), order)
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        let mut s = Series::zero(order);
        if order > 0 {
            s.coeffs[0] = c;
        }
        s
    }

    /// The series `z`.
    pub fn var(order: usize) -> Self {
        let mut s = Series::zero(order);
        if order > 1 {
            s.coeffs[1] = Rational::one();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Rational> {
        self.coeffs
    }

    /// `[z^k] f`, failing when `k` lies beyond the truncation order.
    pub fn coefficient_of(&self, k: usize) -> Result<&Rational, FpsError> {
        self.coeffs.get(k).ok_or(FpsError::OrderExceeded {
            index: k,
            order: self.order(),
        })
    }

    /// Coefficient `k`, or zero past the end. Only for callers that know the
    /// series is a polynomial.
    pub(crate) fn get_or_zero(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn truncate(&self, order: usize) -> Series {
        Series::new(self.coeffs.iter().take(order).cloned().collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn scale(&self, c: &Rational) -> Series {
        Series::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// `f(c z)`.
    pub fn scale_arg(&self, c: &Rational) -> Series {
        let mut p = Rational::one();
        let mut out = Vec::with_capacity(self.order());
        for a in &self.coeffs {
            out.push(a * &p);
            p *= c;
        }
        Series::new(out)
    }

    /// `z^m f(z)`, keeping the order.
    pub fn shift_up(&self, m: usize) -> Series {
        let n = self.order();
        let mut out = vec![Rational::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if i + m < n {
                out[i + m] = a.clone();
            }
        }
        Series::new(out)
    }

    /// `z f(z)` with the order raised by one, so no coefficient is lost.
    pub fn mul_z(&self) -> Series {
        let mut out = Vec::with_capacity(self.order() + 1);
        out.push(Rational::zero());
        out.extend(self.coeffs.iter().cloned());
        Series::new(out)
    }

    /// `f(z) / z^m`; the order drops by `m`.
    pub fn shift_down(&self, m: usize) -> Result<Series, FpsError> {
        if let Some(i) = self.coeffs.iter().take(m).position(|c| !c.is_zero()) {
            return Err(FpsError::NotDivisibleByPower { power: m, index: i });
        }
        Ok(Series::new(self.coeffs.iter().skip(m).cloned().collect()))
    }

    /// `f(z^n)` truncated to the same order.
    pub fn substitute_power(&self, n: usize) -> Series {
        assert!(n >= 1, "substitute_power needs n >= 1");
        let len = self.order();
        let mut out = vec![Rational::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            match i.checked_mul(n) {
                Some(j) if j < len => out[j] = a.clone(),
                _ => break,
            }
        }
        Series::new(out)
    }

    pub fn mul(&self, other: &Series) -> Series {
        let n = self.order().min(other.order());
        let (a, da) = integer_form(&self.coeffs[..n]);
        let (b, db) = integer_form(&other.coeffs[..n]);
        let den = da * db;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = BigInt::zero();
            for i in 0..=k {
                if !a[i].is_zero() && !b[k - i].is_zero() {
                    acc += &a[i] * &b[k - i];
                }
            }
            out.push(Rational::new(acc, den.clone()));
        }
        Series::new(out)
    }

    pub fn inverse(&self) -> Result<Series, FpsError> {
        Series::one(self.order()).div(self)
    }

    /// Quotient `q` with `q * b = a` to the common order.
    pub fn div(&self, b: &Series) -> Result<Series, FpsError> {
        let n = self.order().min(b.order());
        if n == 0 {
            return Ok(Series::zero(0));
        }
        let b0 = &b.coeffs[0];
        if b0.is_zero() {
            return Err(FpsError::DivisionByNonUnit);
        }
        let inv_b0 = b0.recip();
        let mut q: Vec<Rational> = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = self.coeffs[k].clone();
            for j in 1..=k {
                let bj = &b.coeffs[j];
                if !bj.is_zero() {
                    acc -= bj * &q[k - j];
                }
            }
            q.push(acc * &inv_b0);
        }
        Ok(Series::new(q))
    }

    /// Non-negative integer power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> Series {
        let mut base = self.clone();
        let mut acc = Series::one(self.order());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn differentiate(&self) -> Series {
        Series::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a * int(i as i64))
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn integrate(&self) -> Series {
        let mut out = Vec::with_capacity(self.order() + 1);
        out.push(Rational::zero());
        for (i, a) in self.coeffs.iter().enumerate() {
            out.push(a / int(i as i64 + 1));
        }
        Series::new(out)
    }

    /// `exp(f)` via `n E_n = sum_{k=1}^n k f_k E_{n-k}`.
    pub fn exp(&self) -> Result<Series, FpsError> {
        let n = self.order();
        if n == 0 {
            return Ok(Series::zero(0));
        }
        if !self.coeffs[0].is_zero() {
            return Err(FpsError::NonzeroConstantTerm);
        }
        let kf: Vec<Rational> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * int(k as i64))
            .collect();
        let mut e: Vec<Rational> = Vec::with_capacity(n);
        e.push(Rational::one());
        for m in 1..n {
            let mut acc = Rational::zero();
            for k in 1..=m {
                if !kf[k].is_zero() {
                    acc += &kf[k] * &e[m - k];
                }
            }
            e.push(acc / int(m as i64));
        }
        Ok(Series::new(e))
    }

    /// `log(f)` for `f[0] = 1`, as the zero-constant antiderivative of `f'/f`.
    pub fn log(&self) -> Result<Series, FpsError> {
        let n = self.order();
        if n == 0 {
            return Ok(Series::zero(0));
        }
        if !self.coeffs[0].is_one() {
            return Err(FpsError::ConstantTermNotOne);
        }
        let q = self.differentiate().div(&self.truncate(n - 1))?;
        Ok(q.integrate())
    }

    /// `f(g(z))` by Horner's scheme; requires `g[0] = 0`.
    pub fn compose(&self, g: &Series) -> Result<Series, FpsError> {
        let n = self.order().min(g.order());
        if n == 0 {
            return Ok(Series::zero(0));
        }
        if !g.coeffs[0].is_zero() {
            return Err(FpsError::NonzeroInnerConstant);
        }
        // Horner from the top; the accumulator for a_i.. only needs n - i terms.
        let mut acc = Series::zero(1);
        for i in (0..n).rev() {
            let len = n - i;
            acc = if acc.is_zero() {
                Series::zero(len)
            } else {
                Series::from_poly(acc.coeffs(), len).mul(&g.truncate(len))
            };
            acc.coeffs[0] += &self.coeffs[i];
        }
        Ok(acc)
    }

    /// Compositional inverse `g` with `f(g(z)) = z`, by Newton iteration with
    /// doubling precision.
    pub fn revert(&self) -> Result<Series, FpsError> {
        let n = self.order();
        if n < 2 || !self.coeffs[0].is_zero() || self.coeffs[1].is_zero() {
            return Err(FpsError::NotInvertible);
        }
        let df = self.differentiate();
        let mut g = Series::new(vec![Rational::zero(), self.coeffs[1].recip()]);
        let mut prec = 2;
        while prec < n {
            prec = (2 * prec).min(n);
            let gp = Series::from_poly(g.coeffs(), prec);
            let fg = self.truncate(prec).compose(&gp)?;
            let dfg = df.truncate(prec - 1).compose(&gp.truncate(prec - 1))?;
            let resid = (&fg - &Series::var(prec)).shift_down(1)?;
            g = &gp - &resid.div(&dfg)?.mul_z();
        }
        Ok(g)
    }

    /// Exact value of the truncated polynomial at `x`.
    pub fn evaluate(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for a in self.coeffs.iter().rev() {
            acc = acc * x + a;
        }
        acc
    }

    pub fn evaluate_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc * x + to_f64(a))
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    /// Taylor shift: coefficients of `f(z + c)`, treating `self` as an exact
    /// polynomial.
    pub fn taylor_shift(&self, c: &Rational) -> Series {
        let mut out = self.coeffs.clone();
        let n = out.len();
        // Repeated synthetic division.
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let t = &out[j + 1] * c;
                out[j] += t;
            }
        }
        Series::new(out)
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            match i {
                0 => write!(f, "{mag}")?,
                _ => {
                    if !mag.is_one() {
                        write!(f, "{mag}*")?;
                    }
                    if i == 1 {
                        write!(f, "z")?;
                    } else {
                        write!(f, "z^{i}")?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.order())
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        let n = self.order().min(rhs.order());
        Series::new((0..n).map(|i| &self.coeffs[i] + &rhs.coeffs[i]).collect())
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        let n = self.order().min(rhs.order());
        Series::new((0..n).map(|i| &self.coeffs[i] - &rhs.coeffs[i]).collect())
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        Series::mul(self, rhs)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

/// Integer numerators over the least common denominator.
fn integer_form(c: &[Rational]) -> (Vec<BigInt>, BigInt) {
    use num_integer::Integer;
    let den = c.iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
    let nums = c.iter().map(|q| q.numer() * (&den / q.denom())).collect();
    (nums, den)
}
