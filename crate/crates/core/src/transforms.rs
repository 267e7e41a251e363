//! The transformation group acting on covariances and series functions:
//! `C y^m (ω(y^n))^k` has covariance `k n² V((x − m)/(k n))`.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::covariance::{
    covariance_from_omega, poly_compose_affine, poly_scale, poly_to_string, CovarianceError,
    CovarianceSpec, SpecKind,
};
use crate::fps::{int, rat, FpsError, Rational, Series};

/// Largest `|m/(k n)|` for which a series covariance is re-expanded about the
/// shifted origin.
pub const SERIES_SHIFT_BUDGET: (i64, i64) = (1, 4);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("cannot represent the transformed covariance: {0}")]
    UnrepresentableComposition(String),
    #[error("shift {shift} needs the first {need} coefficients of omega to vanish, but omega vanishes to order {vanishing}")]
    ShiftUnderflow {
        shift: i64,
        need: usize,
        vanishing: usize,
    },
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Fps(#[from] FpsError),
}

/// Parameters of `C y^m (ω(y^n))^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformSpec {
    pub shift_m: i64,
    pub power_k: u32,
    pub argpow_n: u32,
    /// Positive constant `C`; never affects the normalized coefficients.
    pub scale_c: Rational,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec {
            shift_m: 0,
            power_k: 1,
            argpow_n: 1,
            scale_c: Rational::one(),
        }
    }
}

impl TransformSpec {
    pub fn new(shift_m: i64, power_k: u32, argpow_n: u32) -> Result<Self, TransformError> {
        let t = TransformSpec {
            shift_m,
            power_k,
            argpow_n,
            scale_c: Rational::one(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_scale(mut self, c: Rational) -> Result<Self, TransformError> {
        self.scale_c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if self.power_k < 1 {
            return Err(TransformError::InvalidTransform(
                "power k must be at least 1".into(),
            ));
        }
        if self.argpow_n < 1 {
            return Err(TransformError::InvalidTransform(
                "argument power n must be at least 1".into(),
            ));
        }
        if !self.scale_c.is_positive() {
            return Err(TransformError::InvalidTransform(
                "scale C must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.shift_m == 0 && self.power_k == 1 && self.argpow_n == 1
    }

    /// `k n`.
    fn kn(&self) -> Rational {
        int(self.power_k as i64 * self.argpow_n as i64)
    }

    /// `k n²`.
    fn kn2(&self) -> Rational {
        let n = self.argpow_n as i64;
        int(self.power_k as i64 * n * n)
    }
}

/// `k n² V((x − m)/(k n))`.
pub fn transform_covariance(
    v: &CovarianceSpec,
    t: &TransformSpec,
) -> Result<CovarianceSpec, TransformError> {
    t.validate()?;
    let alpha = t.kn().recip();
    let beta = -int(t.shift_m) * &alpha;
    let kn2 = t.kn2();
    let mut out = match v.kind {
        SpecKind::Polynomial => {
            let num = poly_compose_affine(v.numer.coeffs(), &alpha, &beta);
            CovarianceSpec::polynomial(poly_scale(&num, &kn2))
        }
        SpecKind::Rational => {
            let num = poly_compose_affine(v.numer.coeffs(), &alpha, &beta);
            let den = poly_compose_affine(v.denom.coeffs(), &alpha, &beta);
            if den.first().is_none_or(Zero::is_zero) {
                return Err(TransformError::UnrepresentableComposition(
                    "the shifted denominator vanishes at x = 0".into(),
                ));
            }
            CovarianceSpec::rational(poly_scale(&num, &kn2), den)?
        }
        SpecKind::Series => {
            let (bn, bd) = SERIES_SHIFT_BUDGET;
            if beta.abs() > rat(bn, bd) {
                return Err(TransformError::UnrepresentableComposition(format!(
                    "re-expansion about x = {beta} exceeds the budget {bn}/{bd}"
                )));
            }
            let shifted = v.numer.taylor_shift(&beta).scale_arg(&alpha).scale(&kn2);
            CovarianceSpec::series(shifted, String::new())
        }
    };
    out.label = match v.kind {
        SpecKind::Series => format!(
            "{}*V((x - {})/{}) with V = {}",
            kn2,
            t.shift_m,
            t.kn(),
            v.label
        ),
        SpecKind::Polynomial => poly_to_string(out.numer.coeffs()),
        SpecKind::Rational => out.label.clone(),
    };
    Ok(out)
}

/// `y^m (ω(y^n))^k` truncated to `order` (or fewer coefficients when a
/// negative shift consumes some). `C` is not applied; see [`scaled_omega`].
pub fn transform_omega(
    omega: &Series,
    t: &TransformSpec,
    order: usize,
) -> Result<Series, TransformError> {
    t.validate()?;
    let w = omega
        .substitute_power(t.argpow_n as usize)
        .pow(t.power_k as u64);
    let shifted = if t.shift_m >= 0 {
        w.shift_up(t.shift_m as usize)
    } else {
        let need = t.shift_m.unsigned_abs() as usize;
        let vanishing = w.valuation().unwrap_or(w.order());
        if vanishing < need {
            return Err(TransformError::ShiftUnderflow {
                shift: t.shift_m,
                need,
                vanishing,
            });
        }
        w.shift_down(need)?
    };
    Ok(shifted.truncate(order))
}

/// `C y^m (ω(y^n))^k`.
pub fn scaled_omega(
    omega: &Series,
    t: &TransformSpec,
    order: usize,
) -> Result<Series, TransformError> {
    Ok(transform_omega(omega, t, order)?.scale(&t.scale_c))
}

/// Divides by the lowest nonzero coefficient.
pub fn normalize_omega(omega: &Series) -> Series {
    match omega.valuation() {
        Some(i) => omega.scale(&omega.coeffs()[i].recip()),
        None => omega.clone(),
    }
}

/// `V(x) = v(x − center)`: a covariance expanded about an integer point.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCovariance {
    pub center: i64,
    pub v: Series,
}

impl CenteredCovariance {
    pub fn transform(&self, t: &TransformSpec) -> Result<CenteredCovariance, TransformError> {
        t.validate()?;
        let kn = t.power_k as i64 * t.argpow_n as i64;
        Ok(CenteredCovariance {
            center: t.shift_m + kn * self.center,
            v: self.v.scale_arg(&t.kn().recip()).scale(&t.kn2()),
        })
    }
}

/// Covariance of `ω = y^r w(y)` with `w(0) != 0`, expanded about `x = r`.
pub fn centered_covariance_from_omega(
    omega: &Series,
) -> Result<CenteredCovariance, TransformError> {
    let r = omega.valuation().ok_or_else(|| {
        TransformError::InvalidTransform("omega vanishes to the truncation order".into())
    })?;
    let v = covariance_from_omega(&omega.shift_down(r)?)?;
    Ok(CenteredCovariance {
        center: r as i64,
        v,
    })
}

/// Compares the covariance of the transformed series function with the
/// transformed covariance of the original one.
pub fn verify_transform_roundtrip(
    omega: &Series,
    t: &TransformSpec,
    order: usize,
) -> Result<bool, TransformError> {
    let (lhs, rhs) = roundtrip_pair(omega, t, order)?;
    let len = lhs.v.order().min(rhs.v.order());
    Ok(lhs.center == rhs.center && lhs.v.truncate(len) == rhs.v.truncate(len))
}

/// Both sides of [`verify_transform_roundtrip`]: (ω path, covariance path).
pub fn roundtrip_pair(
    omega: &Series,
    t: &TransformSpec,
    order: usize,
) -> Result<(CenteredCovariance, CenteredCovariance), TransformError> {
    let via_omega = centered_covariance_from_omega(&transform_omega(omega, t, order)?)?;
    let via_cov = centered_covariance_from_omega(&omega.truncate(order))?.transform(t)?;
    Ok((via_omega, via_cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::parse_spec;

    fn t(m: i64, k: u32, n: u32) -> TransformSpec {
        TransformSpec::new(m, k, n).unwrap()
    }

    #[test]
    fn covariance_identity_and_unit_shifts() {
        let v = parse_spec("x*(1-x)").unwrap();
        assert_eq!(
            transform_covariance(&v, &TransformSpec::default())
                .unwrap()
                .numer,
            v.numer
        );

        let v6 = parse_spec("x*(1+x/2)*(1+x)^2").unwrap();
        let out = transform_covariance(&v6, &t(1, 1, 1)).unwrap();
        let want = parse_spec("x^2*(x^2-1)/2").unwrap();
        assert_eq!(out.numer, want.numer);
        assert_eq!(out.label, "-1/2*x^2 + 1/2*x^4");

        let v8 = parse_spec("x*(1+x/2)*(1+x+x^2/2)").unwrap();
        let out = transform_covariance(&v8, &t(1, 1, 1)).unwrap();
        assert_eq!(out.numer, parse_spec("(x^4-1)/4").unwrap().numer);
    }

    #[test]
    fn covariance_rational_and_series() {
        let v = parse_spec("x/(1-x)").unwrap();
        let out = transform_covariance(&v, &t(0, 2, 1)).unwrap();
        // 2 V(x/2) = x/(1 - x/2)
        for x in [rat(1, 3), rat(1, 5)] {
            assert_eq!(out.evaluate(&x).unwrap(), &x / (int(1) - &x / int(2)));
        }
        assert!(matches!(
            transform_covariance(&v, &t(-1, 1, 1)),
            Err(TransformError::UnrepresentableComposition(_))
        ));
        let s = CovarianceSpec::series(Series::from_ints(&[0, 1, 1, 1]), "v");
        let out = transform_covariance(&s, &t(0, 1, 2)).unwrap();
        assert_eq!(
            out.numer,
            Series::new(vec![int(0), int(2), int(1), rat(1, 2)])
        );
        assert!(matches!(
            transform_covariance(&s, &t(1, 1, 1)),
            Err(TransformError::UnrepresentableComposition(_))
        ));
    }

    #[test]
    fn omega_examples() {
        let e = Series::var(8).exp().unwrap();
        assert_eq!(
            transform_omega(&e, &t(2, 1, 1), 6).unwrap(),
            Series::new(vec![int(0), int(0), int(1), int(1), rat(1, 2), rat(1, 6)])
        );
        let b = Series::from_ints(&[1, 1, 0, 0]);
        assert_eq!(
            transform_omega(&b, &t(0, 2, 1), 4).unwrap(),
            Series::from_ints(&[1, 2, 1, 0])
        );
        assert_eq!(
            transform_omega(&e, &t(0, 1, 3), 8).unwrap(),
            Series::new(vec![
                int(1),
                int(0),
                int(0),
                int(1),
                int(0),
                int(0),
                rat(1, 2),
                int(0)
            ])
        );
    }

    #[test]
    fn negative_shift() {
        let e = Series::var(10).exp().unwrap();
        let up = transform_omega(&e, &t(2, 1, 1), 10).unwrap();
        assert_eq!(
            transform_omega(&up, &t(-2, 1, 1), 10).unwrap(),
            e.truncate(8)
        );
        assert_eq!(
            transform_omega(&e, &t(-1, 1, 1), 10),
            Err(TransformError::ShiftUnderflow {
                shift: -1,
                need: 1,
                vanishing: 0
            })
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(TransformSpec::new(0, 0, 1).is_err());
        assert!(TransformSpec::new(0, 1, 0).is_err());
        assert!(TransformSpec::default().with_scale(int(0)).is_err());
    }

    #[test]
    fn roundtrip_examples() {
        let n = 24;
        let pois = Series::var(n).exp().unwrap();
        let (a, b) = roundtrip_pair(&pois, &t(1, 1, 1), n).unwrap();
        assert_eq!(a.center, 1);
        assert_eq!(a.v.truncate(12), Series::var(12));
        assert_eq!(a.center, b.center);
        assert!(verify_transform_roundtrip(&pois, &t(1, 1, 1), n).unwrap());

        let geo = Series::new(vec![int(1); n]);
        let (a, _) = roundtrip_pair(&geo, &t(0, 2, 1), n).unwrap();
        assert_eq!(
            a.v.truncate(8),
            Series::from_poly(&[int(0), int(1), rat(1, 2)], 8)
        );
        assert!(verify_transform_roundtrip(&geo, &t(0, 2, 1), n).unwrap());

        let bern = Series::from_poly(&[int(1), int(1)], n);
        let (a, _) = roundtrip_pair(&bern, &t(0, 1, 2), n).unwrap();
        assert_eq!(
            a.v.truncate(8),
            Series::from_poly(&[int(0), int(2), int(-1)], 8)
        );
        assert!(verify_transform_roundtrip(&bern, &t(0, 1, 2), n).unwrap());
    }

    #[test]
    fn shifts_and_powers_compose() {
        let e = Series::var(12).exp().unwrap();
        let a = transform_omega(
            &transform_omega(&e, &t(1, 1, 1), 12).unwrap(),
            &t(2, 1, 1),
            12,
        )
        .unwrap();
        assert_eq!(a, transform_omega(&e, &t(3, 1, 1), 12).unwrap());
        let a = transform_omega(
            &transform_omega(&e, &t(0, 2, 1), 12).unwrap(),
            &t(0, 3, 1),
            12,
        )
        .unwrap();
        assert_eq!(a, transform_omega(&e, &t(0, 6, 1), 12).unwrap());

        let v = parse_spec("x*(1+x)^3").unwrap();
        let a = transform_covariance(&transform_covariance(&v, &t(1, 1, 1)).unwrap(), &t(2, 1, 1))
            .unwrap();
        assert_eq!(
            a.numer,
            transform_covariance(&v, &t(3, 1, 1)).unwrap().numer
        );
        let a = transform_covariance(&transform_covariance(&v, &t(0, 2, 1)).unwrap(), &t(0, 3, 1))
            .unwrap();
        assert_eq!(
            a.numer,
            transform_covariance(&v, &t(0, 6, 1)).unwrap().numer
        );
    }

    #[test]
    fn scale_is_normalized_away() {
        let e = Series::var(8).exp().unwrap();
        let base = transform_omega(&e, &t(1, 2, 1), 8).unwrap();
        for c in [int(1), int(2), rat(7, 3)] {
            let tc = t(1, 2, 1).with_scale(c).unwrap();
            assert_eq!(normalize_omega(&scaled_omega(&e, &tc, 8).unwrap()), base);
        }
    }

    #[test]
    fn centered_matches_symbolic() {
        // The centered representation and the symbolic composition agree at
        // sample points.
        let v = parse_spec("x*(1+x/2)*(1+x)^2").unwrap();
        let tr = t(1, 2, 2);
        let sym = transform_covariance(&v, &tr).unwrap();
        let cen = CenteredCovariance {
            center: 0,
            v: v.to_series(8).unwrap(),
        }
        .transform(&tr)
        .unwrap();
        for x in [rat(3, 2), int(2), rat(7, 3)] {
            let shifted = &x - int(cen.center);
            assert_eq!(sym.evaluate(&x).unwrap(), cen.v.evaluate(&shifted));
        }
    }
}
