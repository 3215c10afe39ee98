use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::Expr;

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Num(r) if r.is_negative() && r.denom().is_one() => UNARY,
        Expr::Pow(..) => POWER,
        _ => ATOM,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        f.write_char('(')?;
        write_expr(f, e)?;
        f.write_char(')')
    } else {
        write_expr(f, e)
    }
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(r) => {
            if r.denom().is_one() {
                write!(f, "{}", r.numer())
            } else {
                write!(f, "({}/{})", r.numer(), r.denom())
            }
        }
        Expr::Pi => f.write_str("pi"),
        Expr::Var(i) => write!(f, "x{}", i + 1),
        Expr::Neg(a) => {
            f.write_char('-')?;
            child(f, a, UNARY)
        }
        Expr::Add(a, b) => {
            child(f, a, SUM)?;
            f.write_str(" + ")?;
            child(f, b, SUM + 1)
        }
        Expr::Sub(a, b) => {
            child(f, a, SUM)?;
            f.write_str(" - ")?;
            child(f, b, SUM + 1)
        }
        Expr::Mul(a, b) => {
            child(f, a, PRODUCT)?;
            f.write_char('*')?;
            child(f, b, PRODUCT + 1)
        }
        Expr::Div(a, b) => {
            child(f, a, PRODUCT)?;
            f.write_char('/')?;
            child(f, b, PRODUCT + 1)
        }
        Expr::Pow(a, n) => {
            child(f, a, ATOM)?;
            if *n < 0 {
                write!(f, "^({n})")
            } else {
                write!(f, "^{n}")
            }
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a)?;
            f.write_char(')')
        }
        Expr::Bump { arg, order } => {
            f.write_str("bump(")?;
            write_expr(f, arg)?;
            if *order > 0 {
                write!(f, ", {order}")?;
            }
            f.write_char(')')
        }
        Expr::Restrict {
            body,
            guard,
            lo,
            hi,
        } => {
            f.write_str("restrict(")?;
            write_expr(f, body)?;
            f.write_str(", ")?;
            write_expr(f, guard)?;
            f.write_str(", ")?;
            write_expr(f, lo)?;
            f.write_str(", ")?;
            write_expr(f, hi)?;
            f.write_char(')')
        }
    }
}
