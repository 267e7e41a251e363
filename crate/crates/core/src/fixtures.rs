//! Regression corpus: one line-oriented `.fixture` file per family, embedded at
//! compile time and checked against a trailing sha256.
//!
//! Format (version 1): `key: value` lines; rationals as `n/d`; the last line is
//! `checksum: <hex>` over every preceding line including its newline.

use num_traits::{One, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::covariance::{parse_spec, preset, CovarianceError, CovarianceSpec, DomainHint};
use crate::fps::{parse_rational, Rational};
use crate::synthesis::{fuss_catalan, SynthesisOptions};

pub const FORMAT_VERSION: u32 = 1;

const SOURCES: &[(&str, &str)] = &[
    ("bernoulli", include_str!("../fixtures/bernoulli.fixture")),
    ("geometric", include_str!("../fixtures/geometric.fixture")),
    ("poisson", include_str!("../fixtures/poisson.fixture")),
    (
        "fuss-catalan-2",
        include_str!("../fixtures/fuss-catalan-2.fixture"),
    ),
    (
        "fuss-catalan-3",
        include_str!("../fixtures/fuss-catalan-3.fixture"),
    ),
    (
        "fuss-catalan-4",
        include_str!("../fixtures/fuss-catalan-4.fixture"),
    ),
    ("example-5", include_str!("../fixtures/example-5.fixture")),
    ("example-6", include_str!("../fixtures/example-6.fixture")),
    ("example-7", include_str!("../fixtures/example-7.fixture")),
    ("example-8", include_str!("../fixtures/example-8.fixture")),
    ("example-9", include_str!("../fixtures/example-9.fixture")),
    ("example-10", include_str!("../fixtures/example-10.fixture")),
    ("example-11", include_str!("../fixtures/example-11.fixture")),
    (
        "negative-2x1mx",
        include_str!("../fixtures/negative-2x1mx.fixture"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("fixture {name}: checksum mismatch (stored {stored}, computed {computed})")]
    Corrupt {
        name: String,
        stored: String,
        computed: String,
    },
    #[error("fixture {name}, line {line}: {message}")]
    Malformed {
        name: String,
        line: usize,
        message: String,
    },
    #[error("no fixture named {0}")]
    Unknown(String),
}

/// How the covariance of a fixture is given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureSpec {
    Expression(String),
    Preset(String),
}

/// Families whose full coefficient sequence is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Poisson,
    Geometric,
    FussCatalan(u64),
}

impl Family {
    pub fn coefficient(&self, k: usize) -> Rational {
        match self {
            Family::Poisson => {
                let mut f = Rational::one();
                for i in 1..=k {
                    f /= Rational::from_integer(i.into());
                }
                f
            }
            Family::Geometric => Rational::one(),
            Family::FussCatalan(alpha) => fuss_catalan(*alpha, k as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub spec: FixtureSpec,
    pub s_scale: Rational,
    /// Upper end of the mean domain; `None` for unbounded.
    pub domain: Option<Rational>,
    pub expected_c: Vec<Rational>,
    /// The listed coefficients are a prefix; otherwise every later one is 0.
    pub truncated: bool,
    pub family: Option<Family>,
    pub expect_negative: bool,
    pub first_negative: Option<usize>,
    pub closed_form_note: String,
    pub source: String,
}

impl Fixture {
    pub fn covariance(&self, order: usize) -> Result<CovarianceSpec, CovarianceError> {
        let spec = match &self.spec {
            FixtureSpec::Expression(e) => parse_spec(e)?,
            FixtureSpec::Preset(p) => preset(p, order)?,
        };
        Ok(match &self.domain {
            Some(r) => spec.with_domain(DomainHint::UpTo(r.clone())),
            None => spec.with_domain(DomainHint::Unbounded),
        })
    }

    pub fn options(&self, order: usize) -> SynthesisOptions {
        SynthesisOptions {
            order,
            s_scale: self.s_scale.clone(),
        }
    }

    /// Expected `c_k`, when known: listed, implied zero, or from the family.
    pub fn expected(&self, k: usize) -> Option<Rational> {
        if let Some(c) = self.expected_c.get(k) {
            return Some(c.clone());
        }
        if let Some(f) = &self.family {
            return Some(f.coefficient(k));
        }
        (!self.truncated && !self.expect_negative).then(Rational::zero)
    }

    /// Number of checkable coefficients below `order`.
    pub fn checkable(&self, order: usize) -> usize {
        (0..order)
            .take_while(|&k| self.expected(k).is_some())
            .count()
    }
}

pub fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Parses one fixture file.
pub fn parse_fixture(name: &str, text: &str) -> Result<Fixture, FixtureError> {
    let bad = |line: usize, message: String| FixtureError::Malformed {
        name: name.to_string(),
        line,
        message,
    };
    let lines: Vec<&str> = text.lines().collect();
    let (last, body) = lines
        .split_last()
        .ok_or_else(|| bad(1, "empty file".into()))?;
    let stored = last
        .strip_prefix("checksum:")
        .map(str::trim)
        .ok_or_else(|| bad(lines.len(), "last line must be the checksum".into()))?;
    let hashed: String = body.iter().map(|l| format!("{l}\n")).collect();
    let computed = checksum(&hashed);
    if stored != computed {
        return Err(FixtureError::Corrupt {
            name: name.to_string(),
            stored: stored.to_string(),
            computed,
        });
    }

    let mut fx = Fixture {
        name: String::new(),
        spec: FixtureSpec::Expression(String::new()),
        s_scale: Rational::one(),
        domain: None,
        expected_c: Vec::new(),
        truncated: true,
        family: None,
        expect_negative: false,
        first_negative: None,
        closed_form_note: String::new(),
        source: String::new(),
    };
    let mut seen_spec = false;
    for (i, raw) in body.iter().enumerate() {
        let ln = i + 1;
        let (key, value) = raw
            .split_once(':')
            .ok_or_else(|| bad(ln, format!("expected `key: value`, got {raw:?}")))?;
        let value = value.trim();
        let rational =
            |v: &str| parse_rational(v).ok_or_else(|| bad(ln, format!("bad rational {v:?}")));
        let boolean = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad(ln, format!("bad boolean {v:?}"))),
        };
        match key.trim() {
            "format" => {
                if value != FORMAT_VERSION.to_string() {
                    return Err(bad(ln, format!("unsupported format {value}")));
                }
            }
            "name" => fx.name = value.to_string(),
            "spec" => {
                seen_spec = true;
                fx.spec = match value.strip_prefix("preset:") {
                    Some(p) => FixtureSpec::Preset(p.to_string()),
                    None => FixtureSpec::Expression(value.to_string()),
                }
            }
            "s_scale" => fx.s_scale = rational(value)?,
            "domain" => {
                fx.domain = if value == "inf" {
                    None
                } else {
                    Some(rational(value)?)
                }
            }
            "expected" => {
                fx.expected_c = value
                    .split_whitespace()
                    .map(rational)
                    .collect::<Result<_, _>>()?
            }
            "truncated" => fx.truncated = boolean(value)?,
            "family" => {
                fx.family = Some(
                    match value.split_whitespace().collect::<Vec<_>>().as_slice() {
                        ["poisson"] => Family::Poisson,
                        ["geometric"] => Family::Geometric,
                        ["fuss-catalan", a] => Family::FussCatalan(
                            a.parse().map_err(|_| bad(ln, format!("bad alpha {a:?}")))?,
                        ),
                        _ => return Err(bad(ln, format!("unknown family {value:?}"))),
                    },
                )
            }
            "expect" => match value {
                "negative" => fx.expect_negative = true,
                _ => return Err(bad(ln, format!("unknown expectation {value:?}"))),
            },
            "first_negative" => {
                fx.first_negative = Some(
                    value
                        .parse()
                        .map_err(|_| bad(ln, format!("bad index {value:?}")))?,
                )
            }
            "note" => fx.closed_form_note = value.to_string(),
            "source" => fx.source = value.to_string(),
            other => return Err(bad(ln, format!("unknown key {other:?}"))),
        }
    }
    if fx.name.is_empty() || !seen_spec {
        return Err(bad(body.len(), "name and spec are required".into()));
    }
    Ok(fx)
}

pub fn load_all() -> Result<Vec<Fixture>, FixtureError> {
    SOURCES.iter().map(|(n, t)| parse_fixture(n, t)).collect()
}

pub fn load(name: &str) -> Result<Fixture, FixtureError> {
    let (n, t) = SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| FixtureError::Unknown(name.to_string()))?;
    parse_fixture(n, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fps::{int, rat};

    #[test]
    fn loads_every_fixture() {
        let all = load_all().unwrap();
        assert!(all.len() >= 14);
        for (fx, (n, _)) in all.iter().zip(SOURCES) {
            assert_eq!(fx.name, *n);
        }
    }

    #[test]
    fn example_nine_and_eleven() {
        let e9 = load("example-9").unwrap();
        assert_eq!(e9.spec, FixtureSpec::Expression("x*(1+x)^3".into()));
        assert_eq!(e9.expected_c[5], rat(5861, 120));
        assert_eq!(e9.expected_c.len(), 7);
        let e11 = load("example-11").unwrap();
        assert_eq!(e11.spec, FixtureSpec::Preset("sqrt-example".into()));
        assert_eq!(e11.expected_c[6], rat(2731, 720));
        assert_eq!(e11.s_scale, rat(1, 2));
        assert_eq!(e11.domain, Some(int(1)));
    }

    #[test]
    fn bernoulli_is_exact() {
        let b = load("bernoulli").unwrap();
        assert!(!b.truncated);
        assert_eq!(b.expected(1), Some(int(1)));
        assert_eq!(b.expected(9), Some(int(0)));
        assert_eq!(b.checkable(16), 16);
        let e8 = load("example-8").unwrap();
        assert_eq!(e8.checkable(16), 7);
        assert_eq!(load("poisson").unwrap().expected(10), Some(rat(1, 3628800)));
    }

    #[test]
    fn negative_control_fixture() {
        let n = load("negative-2x1mx").unwrap();
        assert!(n.expect_negative);
        assert_eq!(n.first_negative, Some(4));
        assert_eq!(n.checkable(10), 0);
    }

    #[test]
    fn corruption_is_detected() {
        let text = SOURCES[0].1.replace("x*(1-x)", "x*(1+x)");
        assert!(matches!(
            parse_fixture("bernoulli", &text),
            Err(FixtureError::Corrupt { .. })
        ));
        let body = "format: 1\nname: a\nbogus line\n";
        let text = format!("{body}checksum: {}\n", checksum(body));
        assert!(matches!(
            parse_fixture("a", &text),
            Err(FixtureError::Malformed { line: 3, .. })
        ));
        assert_eq!(load("nope"), Err(FixtureError::Unknown("nope".into())));
    }

    #[test]
    fn fixtures_build_covariances() {
        for fx in load_all().unwrap() {
            let v = fx.covariance(16).unwrap();
            assert!(v.is_normal_form() || fx.expect_negative, "{}", fx.name);
        }
    }
}
