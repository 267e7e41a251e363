//! Expression grammar for covariance characteristics.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' ['-'] integer)?
//! atom    := number | 'x' | '(' expr ')'
//! number  := digits ['.' digits] | '.' digits
//! ```
//!
//! Every expression evaluates to a ratio of polynomials in `x` with exact
//! rational coefficients.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::CovarianceError;
use crate::fps::Rational;

/// A polynomial as a dense coefficient vector, lowest degree first, with no
/// trailing zeros. The zero polynomial is the empty vector.
pub(crate) type Poly = Vec<Rational>;

pub(crate) fn poly_trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

pub(crate) fn poly_add(a: &[Rational], b: &[Rational]) -> Poly {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(Rational::zero);
            let y = b.get(i).cloned().unwrap_or_else(Rational::zero);
            x + y
        })
        .collect();
    poly_trim(out)
}

pub fn poly_scale(a: &[Rational], c: &Rational) -> Poly {
    poly_trim(a.iter().map(|x| x * c).collect())
}

pub(crate) fn poly_mul(a: &[Rational], b: &[Rational]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    poly_trim(out)
}

pub(crate) fn poly_pow(a: &[Rational], e: u32) -> Poly {
    let mut acc = vec![Rational::one()];
    for _ in 0..e {
        acc = poly_mul(&acc, a);
    }
    acc
}

/// `p(alpha * x + beta)`.
pub fn poly_compose_affine(p: &[Rational], alpha: &Rational, beta: &Rational) -> Poly {
    let lin = poly_trim(vec![beta.clone(), alpha.clone()]);
    let mut acc: Poly = Vec::new();
    for c in p.iter().rev() {
        acc = poly_add(&poly_mul(&acc, &lin), std::slice::from_ref(c));
    }
    acc
}

/// Rational function `num / den` produced by the parser.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

impl RatFn {
    fn constant(c: Rational) -> Self {
        RatFn {
            num: poly_trim(vec![c]),
            den: vec![Rational::one()],
        }
    }

    fn var() -> Self {
        RatFn {
            num: vec![Rational::zero(), Rational::one()],
            den: vec![Rational::one()],
        }
    }

    fn add(&self, o: &RatFn) -> RatFn {
        if self.den == o.den {
            return RatFn {
                num: poly_add(&self.num, &o.num),
                den: self.den.clone(),
            };
        }
        RatFn {
            num: poly_add(&poly_mul(&self.num, &o.den), &poly_mul(&o.num, &self.den)),
            den: poly_mul(&self.den, &o.den),
        }
    }

    fn neg(&self) -> RatFn {
        RatFn {
            num: poly_scale(&self.num, &-Rational::one()),
            den: self.den.clone(),
        }
    }

    fn mul(&self, o: &RatFn) -> RatFn {
        RatFn {
            num: poly_mul(&self.num, &o.num),
            den: poly_mul(&self.den, &o.den),
        }
    }

    fn recip(&self) -> Option<RatFn> {
        if self.num.is_empty() {
            return None;
        }
        Some(RatFn {
            num: self.den.clone(),
            den: self.num.clone(),
        })
    }

    fn powi(&self, e: i64) -> Option<RatFn> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let k = u32::try_from(e.unsigned_abs()).ok()?;
        Some(RatFn {
            num: poly_pow(&base.num, k),
            den: poly_pow(&base.den, k),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    X,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr(line: usize, col: usize, message: impl Into<String>) -> CovarianceError {
    CovarianceError::Parse {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, CovarianceError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            'x' | 'X' => Tok::X,
            d if d.is_ascii_digit() || d == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let n = parse_number(&lit)
                    .ok_or_else(|| perr(l0, c0, format!("malformed number `{lit}`")))?;
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Num(n),
                    line: l0,
                    col: c0,
                });
                continue;
            }
            other => return Err(perr(l0, c0, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned {
            tok,
            line: l0,
            col: c0,
        });
        i += 1;
        col += 1;
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

fn parse_number(lit: &str) -> Option<Rational> {
    match lit.split_once('.') {
        None => lit.parse::<BigInt>().ok().map(Rational::from_integer),
        Some((w, f)) => {
            if f.contains('.') || (w.is_empty() && f.is_empty()) {
                return None;
            }
            let digits = format!("{w}{f}");
            let n: BigInt = digits.parse().ok()?;
            Some(Rational::new(n, num_traits::pow(BigInt::from(10), f.len())))
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<RatFn, CovarianceError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.add(&self.term()?.neg());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RatFn, CovarianceError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Tok::Slash => {
                    let at = self.bump();
                    let rhs = self.unary()?;
                    let inv = rhs.recip().ok_or(CovarianceError::ZeroDenominator {
                        line: at.line,
                        col: at.col,
                    })?;
                    acc = acc.mul(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<RatFn, CovarianceError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<RatFn, CovarianceError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        let caret = self.bump();
        let neg = if self.peek().tok == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let t = self.bump();
        let e = match &t.tok {
            Tok::Num(q) if q.is_integer() => i64::try_from(q.to_integer())
                .ok()
                .filter(|e| *e <= 4096)
                .ok_or_else(|| perr(t.line, t.col, "exponent too large"))?,
            _ => return Err(perr(t.line, t.col, "expected an integer exponent")),
        };
        let e = if neg { -e } else { e };
        base.powi(e).ok_or(CovarianceError::ZeroDenominator {
            line: caret.line,
            col: caret.col,
        })
    }

    fn atom(&mut self) -> Result<RatFn, CovarianceError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(q) => Ok(RatFn::constant(q)),
            Tok::X => Ok(RatFn::var()),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(perr(close.line, close.col, "expected `)`"));
                }
                Ok(inner)
            }
            Tok::End => Err(perr(t.line, t.col, "unexpected end of input")),
            other => Err(perr(t.line, t.col, format!("unexpected token {other:?}"))),
        }
    }
}

pub(crate) fn parse_ratfn(text: &str) -> Result<RatFn, CovarianceError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let out = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(perr(t.line, t.col, "trailing input"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fps::{int, rat};

    #[test]
    fn parses_products_and_powers() {
        let r = parse_ratfn("x*(1+x^3)").unwrap();
        assert_eq!(r.num, vec![int(0), int(1), int(0), int(0), int(1)]);
        assert_eq!(r.den, vec![int(1)]);
        let r = parse_ratfn("-x^2 + 2").unwrap();
        assert_eq!(r.num, vec![int(2), int(0), int(-1)]);
    }

    #[test]
    fn decimals_are_exact() {
        let r = parse_ratfn("0.5*x").unwrap();
        assert_eq!(r.num, vec![int(0), rat(1, 2)]);
    }

    #[test]
    fn negative_exponent_inverts() {
        let r = parse_ratfn("x*(1-x)^-1").unwrap();
        assert_eq!(r.num, vec![int(0), int(1)]);
        assert_eq!(r.den, vec![int(1), int(-1)]);
    }

    #[test]
    fn error_positions() {
        match parse_ratfn("x*(1+x") {
            Err(CovarianceError::Parse { line, col, .. }) => assert_eq!((line, col), (1, 7)),
            other => panic!("{other:?}"),
        }
        match parse_ratfn("x +\n  $") {
            Err(CovarianceError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_ratfn("x/(x-x)"),
            Err(CovarianceError::ZeroDenominator { line: 1, col: 2 })
        ));
        assert!(parse_ratfn("x^1.5").is_err());
        assert!(parse_ratfn("").is_err());
    }

    #[test]
    fn affine_composition() {
        // (x-1)^2 via p(y) = y^2 at y = x - 1
        let p = vec![int(0), int(0), int(1)];
        assert_eq!(
            poly_compose_affine(&p, &int(1), &int(-1)),
            vec![int(1), int(-2), int(1)]
        );
    }
}
