//! Symbolic expressions over real variables `x1..xn`.
//!
//! The language is deliberately small: rational literals, `pi`, the four
//! arithmetic operators, integer powers, `sin`, `cos`, `exp`, `log`, `sqrt`,
//! the smooth bump family and a coordinate restriction. Derivatives of every
//! node stay inside the language, so charts, coefficients and partitions of
//! unity can be differentiated to any order without leaving `Expr`.
//!
//! `bump(t, m)` denotes `exp(-1/(1-t^2)) / (1-t^2)^m` for `|t| < 1` and `0`
//! elsewhere; `bump(t)` is the `m = 0` member. The family is closed under
//! differentiation:
//!
//! ```text
//! d/dt bump(t, m) = -2 t bump(t, m + 2) + 2 m t bump(t, m + 1)
//! ```
//!
//! `restrict(body, g, lo, hi)` is `body` where `lo < g < hi` and `0` elsewhere.
//! It is the extension-by-zero used when a term only makes sense on one piece
//! of a chart overlap; it is smooth whenever `body` vanishes near the ends.

mod diff;
mod eval;
mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Zero};

pub use diff::{exponent_pairs, multi_indices, MultiIndex, OrderBudgetExceeded, MAX_DERIVATIVE_ORDER};
pub use eval::EvalError;
pub use parse::ParseError;

/// Exact literal type.
pub type Rational = Ratio<i64>;

/// Elementary functions of one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. Children are reference counted so derivatives and
/// substitutions share structure instead of copying it.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Rational),
    Pi,
    /// Zero-based variable index; `Var(0)` prints as `x1`.
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
    Bump {
        arg: Arc<Expr>,
        order: u32,
    },
    Restrict {
        body: Arc<Expr>,
        guard: Arc<Expr>,
        lo: Arc<Expr>,
        hi: Arc<Expr>,
    },
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse::parse(text)
    }

    pub fn num(n: i64) -> Expr {
        Expr::Num(Rational::from_integer(n))
    }

    pub fn rational(r: Rational) -> Expr {
        Expr::Num(r)
    }

    pub fn zero() -> Expr {
        Expr::num(0)
    }

    pub fn one() -> Expr {
        Expr::num(1)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    /// Closest rational to `value` with a bounded denominator. Used when a
    /// floating point parameter (a chart bound, a margin) has to become a
    /// literal.
    pub fn from_f64(value: f64) -> Expr {
        Expr::Num(approximate_rational(value))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_one())
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Expr::Num(r) => Some(*r),
            _ => None,
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Num(r) => Expr::Num(-r),
            Expr::Neg(inner) => (*inner).clone(),
            other => Expr::Neg(Arc::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if let Some(v) = x.checked_add(y) {
                return Expr::Num(v);
            }
        }
        if let Expr::Neg(inner) = &b {
            return Expr::Sub(Arc::new(a), inner.clone());
        }
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if let Some(v) = x.checked_sub(y) {
                return Expr::Num(v);
            }
        }
        Expr::Sub(Arc::new(a), Arc::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if let Some(v) = x.checked_mul(y) {
                return Expr::Num(v);
            }
        }
        if matches!(&a, Expr::Num(r) if *r == -Rational::one()) {
            return Expr::neg(b);
        }
        if matches!(&b, Expr::Num(r) if *r == -Rational::one()) {
            return Expr::neg(a);
        }
        Expr::Mul(Arc::new(a), Arc::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            if !y.is_zero() {
                if let Some(v) = x.checked_div(y) {
                    return Expr::Num(v);
                }
            }
        }
        Expr::Div(Arc::new(a), Arc::new(b))
    }

    pub fn pow(base: Expr, exponent: i32) -> Expr {
        match exponent {
            0 => return Expr::one(),
            1 => return base,
            _ => {}
        }
        if let Expr::Num(r) = &base {
            if let Some(v) = checked_pow(*r, exponent) {
                return Expr::Num(v);
            }
        }
        Expr::Pow(Arc::new(base), exponent)
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if arg.is_zero() {
            match func {
                Func::Sin | Func::Sqrt => return Expr::zero(),
                Func::Cos | Func::Exp => return Expr::one(),
                Func::Log => {}
            }
        }
        if arg.is_one() {
            match func {
                Func::Log => return Expr::zero(),
                Func::Sqrt => return Expr::one(),
                _ => {}
            }
        }
        Expr::Call(func, Arc::new(arg))
    }

    pub fn bump(arg: Expr, order: u32) -> Expr {
        Expr::Bump {
            arg: Arc::new(arg),
            order,
        }
    }

    /// Extension by zero outside `lo < guard < hi`. Bounds must be constant.
    pub fn restrict(body: Expr, guard: Expr, lo: Expr, hi: Expr) -> Expr {
        if body.is_zero() {
            return body;
        }
        Expr::Restrict {
            body: Arc::new(body),
            guard: Arc::new(guard),
            lo: Arc::new(lo),
            hi: Arc::new(hi),
        }
    }

    /// Sum of a sequence, folded left to right.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        factors.into_iter().fold(Expr::one(), Expr::mul)
    }

    /// Zero-based indices of the variables the expression mentions.
    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bump { arg, .. } => arg.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Restrict { body, guard, .. } => {
                guard.collect_vars(out);
                body.collect_vars(out);
            }
        }
    }

    /// Number of variables a point must provide: one past the largest index.
    pub fn arity(&self) -> usize {
        self.free_vars().iter().next_back().map_or(0, |i| i + 1)
    }

    pub fn is_constant(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Node count, shared subtrees counted once per reference.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Bump { arg, .. } => 1 + arg.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
            Expr::Restrict {
                body,
                guard,
                lo,
                hi,
            } => 1 + body.size() + guard.size() + lo.size() + hi.size(),
        }
    }

    /// Replaces `x_{i+1}` by `replacements[i]`. Variables beyond the slice are
    /// left alone.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Var(i) => replacements.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::neg(a.substitute(replacements)),
            Expr::Add(a, b) => Expr::add(a.substitute(replacements), b.substitute(replacements)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(replacements), b.substitute(replacements)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(replacements), b.substitute(replacements)),
            Expr::Div(a, b) => Expr::div(a.substitute(replacements), b.substitute(replacements)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(replacements), *n),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(replacements)),
            Expr::Bump { arg, order } => Expr::bump(arg.substitute(replacements), *order),
            Expr::Restrict {
                body,
                guard,
                lo,
                hi,
            } => Expr::restrict(
                body.substitute(replacements),
                guard.substitute(replacements),
                (**lo).clone(),
                (**hi).clone(),
            ),
        }
    }
}

fn checked_pow(base: Rational, exponent: i32) -> Option<Rational> {
    if exponent < 0 {
        if base.is_zero() {
            return None;
        }
        return checked_pow(base.recip(), exponent.checked_neg()?);
    }
    let mut acc = Rational::one();
    for _ in 0..exponent {
        acc = acc.checked_mul(&base)?;
    }
    Some(acc)
}

/// Continued-fraction approximation with denominator at most 10^9; exact for
/// every terminating decimal with up to nine fractional digits.
pub(crate) fn approximate_rational(value: f64) -> Rational {
    if !value.is_finite() {
        return Rational::zero();
    }
    let max_den: i64 = 1_000_000_000;
    let negative = value < 0.0;
    let mut x = value.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    for _ in 0..64 {
        let a = x.floor();
        if a > i64::MAX as f64 / 2.0 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = match (a.checked_mul(p1).and_then(|v| v.checked_add(p0)), a.checked_mul(q1).and_then(|v| v.checked_add(q0))) {
            (Some(p), Some(q)) => (p, q),
            _ => break,
        };
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = x - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    if q1 == 0 {
        return Rational::zero();
    }
    let r = Rational::new(p1, q1);
    if negative {
        -r
    } else {
        r
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_constructors_fold_constants() {
        assert_eq!(Expr::add(Expr::num(2), Expr::num(3)), Expr::num(5));
        assert_eq!(Expr::mul(Expr::zero(), Expr::var(0)), Expr::zero());
        assert_eq!(Expr::mul(Expr::one(), Expr::var(0)), Expr::var(0));
        assert_eq!(Expr::pow(Expr::var(1), 1), Expr::var(1));
        assert_eq!(Expr::pow(Expr::num(2), -2), Expr::rational(Rational::new(1, 4)));
        assert_eq!(Expr::neg(Expr::neg(Expr::var(0))), Expr::var(0));
    }

    #[test]
    fn free_vars_and_arity() {
        let e = Expr::parse("x1*x1 + sin(x3)").unwrap();
        assert_eq!(e.free_vars().into_iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(e.arity(), 3);
    }

    #[test]
    fn substitution_composes() {
        let e = Expr::parse("x1^2 + x2").unwrap();
        let g = e.substitute(&[Expr::parse("x2 + 1").unwrap(), Expr::num(3)]);
        assert_eq!(g.eval(&[0.0, 2.0]).unwrap(), 12.0);
    }

    #[test]
    fn approximate_rational_is_exact_for_short_decimals() {
        assert_eq!(approximate_rational(0.1), Rational::new(1, 10));
        assert_eq!(approximate_rational(-2.25), Rational::new(-9, 4));
    }
}
