//! Recursive-descent parser for the expression grammar (see
//! `docs/expression-grammar.md`). Literal-only subexpressions are folded as
//! they are built, which keeps `parse(print(e)) == e` for every parsed `e`.

use num_traits::{CheckedMul, One, Zero};
use thiserror::Error;

use super::{Expr, Func, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(text: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_whitespace() {
                lx.pos += 1;
            }
            let start = lx.pos;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            let tok = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                b'0'..=b'9' | b'.' => {
                    let tok = lx.number()?;
                    out.push((tok, start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while lx.pos < lx.src.len()
                        && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_')
                    {
                        lx.pos += 1;
                    }
                    let name = String::from_utf8_lossy(&lx.src[start..lx.pos]).into_owned();
                    out.push((Tok::Ident(name), start));
                    continue;
                }
                _ => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{}`", c as char),
                    })
                }
            };
            lx.pos += 1;
            out.push((tok, start));
        }
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            String::from_utf8_lossy(&lx.src[s..lx.pos]).into_owned()
        };
        let int_part = digits(self);
        let mut frac_part = String::new();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_part = digits(self);
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        let mut exponent: i32 = 0;
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            match self.src.get(self.pos) {
                Some(b'-') => {
                    sign = -1;
                    self.pos += 1;
                }
                Some(b'+') => self.pos += 1,
                _ => {}
            }
            let e = digits(self);
            if e.is_empty() {
                self.pos = save;
            } else {
                exponent = sign * e.parse::<i32>().map_err(|_| out_of_range(start))?;
            }
        }
        let mantissa: i64 = format!("{int_part}{frac_part}")
            .parse::<i64>()
            .map_err(|_| out_of_range(start))?;
        let scale = exponent - frac_part.len() as i32;
        let ten = Rational::from_integer(10);
        let mut factor = Rational::one();
        for _ in 0..scale.unsigned_abs() {
            factor = factor.checked_mul(&ten).ok_or_else(|| out_of_range(start))?;
        }
        let value = if scale >= 0 {
            Rational::from_integer(mantissa)
                .checked_mul(&factor)
                .ok_or_else(|| out_of_range(start))?
        } else {
            Rational::from_integer(mantissa) / factor
        };
        Ok(Tok::Num(value))
    }
}

fn out_of_range(offset: usize) -> ParseError {
    ParseError::Syntax {
        offset,
        message: "numeric literal out of range".into(),
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

pub(super) fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected("end of input")),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(r) => format!("number {r}"),
            Tok::Ident(s) => format!("`{s}`"),
            other => format!("{other:?}"),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = fold_or(lhs, rhs, Expr::add, Expr::Add);
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = fold_or(lhs, rhs, Expr::sub, Expr::Sub);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = fold_or(lhs, rhs, Expr::mul, Expr::Mul);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = fold_or(lhs, rhs, Expr::div, Expr::Div);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Num(r) => Expr::Num(-r),
                other => Expr::Neg(other.into()),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.int_exponent()?;
        Ok(match &base {
            Expr::Num(r) if !(r.is_zero() && exponent < 0) => Expr::pow(base, exponent),
            _ => Expr::Pow(base.into(), exponent),
        })
    }

    fn int_exponent(&mut self) -> Result<i32, ParseError> {
        let offset = self.offset();
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let value = match self.bump() {
            Tok::Num(r) if r.is_integer() && r.numer().abs() <= i64::from(i32::MAX) => {
                *r.numer() as i32
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset,
                    message: "exponent must be an integer literal".into(),
                })
            }
        };
        if parenthesized {
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(if negative { -value } else { value })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Expr::Num(r))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(name, offset)
            }
            _ => Err(self.unexpected("an operand")),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if idx >= 1 && !name[1..].starts_with('0') {
                return Ok(Expr::Var(idx - 1));
            }
        }
        if let Some(func) = Func::from_name(&name) {
            let args = self.call_args(1, 1)?;
            let arg = args.into_iter().next().unwrap();
            return Ok(Expr::Call(func, arg.into()));
        }
        match name.as_str() {
            "bump" => {
                let args = self.call_args(1, 2)?;
                let mut it = args.into_iter();
                let arg = it.next().unwrap();
                let order = match it.next() {
                    None => 0,
                    Some(Expr::Num(r)) if r.is_integer() && *r.numer() >= 0 && *r.numer() <= i64::from(u32::MAX) => {
                        *r.numer() as u32
                    }
                    Some(_) => {
                        return Err(ParseError::Syntax {
                            offset,
                            message: "bump order must be a nonnegative integer literal".into(),
                        })
                    }
                };
                Ok(Expr::Bump {
                    arg: arg.into(),
                    order,
                })
            }
            "restrict" => {
                let args = self.call_args(4, 4)?;
                let mut it = args.into_iter();
                let (body, guard, lo, hi) = (
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                );
                if !lo.is_constant() || !hi.is_constant() {
                    return Err(ParseError::Syntax {
                        offset,
                        message: "restrict bounds must be constant".into(),
                    });
                }
                Ok(Expr::Restrict {
                    body: body.into(),
                    guard: guard.into(),
                    lo: lo.into(),
                    hi: hi.into(),
                })
            }
            _ => Err(ParseError::UnknownIdentifier { name, offset }),
        }
    }

    fn call_args(&mut self, min: usize, max: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        let offset = self.offset();
        self.expect(Tok::RParen, "`)`")?;
        if args.len() < min || args.len() > max {
            return Err(ParseError::Syntax {
                offset,
                message: format!("expected {min}..={max} arguments, got {}", args.len()),
            });
        }
        Ok(args)
    }
}

/// Folds literal-literal arithmetic; otherwise builds the raw node so the
/// tree mirrors the text.
fn fold_or(
    lhs: Expr,
    rhs: Expr,
    fold: fn(Expr, Expr) -> Expr,
    raw: fn(std::sync::Arc<Expr>, std::sync::Arc<Expr>) -> Expr,
) -> Expr {
    if let (Expr::Num(_), Expr::Num(_)) = (&lhs, &rhs) {
        if let folded @ Expr::Num(_) = fold(lhs.clone(), rhs.clone()) {
            return folded;
        }
    }
    raw(lhs.into(), rhs.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sum_with_function() {
        let e = parse("x1*x1 + sin(x2)").unwrap();
        assert_eq!(e.free_vars().into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse("x1 +").unwrap_err();
        assert_eq!(err.offset(), 4);
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn bump_of_affine_argument() {
        let e = parse("bump((x1-1)/2)").unwrap();
        assert!(matches!(e, Expr::Bump { order: 0, .. }));
        assert_eq!(e.eval(&[1.0]).unwrap(), (-1.0f64).exp());
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("foo(x1)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                offset: 0
            }
        );
        assert!(matches!(parse("x0").unwrap_err(), ParseError::UnknownIdentifier { .. }));
    }

    #[test]
    fn decimal_and_scientific_literals_are_exact() {
        assert_eq!(parse("0.1").unwrap(), Expr::Num(Rational::new(1, 10)));
        assert_eq!(parse("2.5e-3").unwrap(), Expr::Num(Rational::new(1, 400)));
        assert_eq!(parse("1/3").unwrap(), Expr::Num(Rational::new(1, 3)));
    }

    #[test]
    fn negative_exponent_forms() {
        assert_eq!(parse("x1^(-1)").unwrap(), parse("x1^-1").unwrap());
        assert_eq!(parse("x1^(-1)").unwrap().eval(&[4.0]).unwrap(), 0.25);
    }

    #[test]
    fn precedence() {
        assert_eq!(parse("1 + 2*x1^2").unwrap().eval(&[3.0]).unwrap(), 19.0);
        assert_eq!(parse("-x1^2").unwrap().eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(parse("x1 - x2 - x3").unwrap().eval(&[1.0, 2.0, 3.0]).unwrap(), -4.0);
        assert_eq!(parse("x1 / x2 / x3").unwrap().eval(&[8.0, 2.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn literal_division_by_zero_is_kept_for_evaluation() {
        let e = parse("1/0").unwrap();
        assert!(e.eval(&[]).is_err());
    }
}
