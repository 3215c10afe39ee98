use thiserror::Error;

use super::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("variable x{} not supplied (point has {} coordinates)", .0 + 1, .1)]
    MissingVariable(usize, usize),
    #[error("non-finite result")]
    NonFinite,
}

impl Expr {
    /// Pointwise value. Partial operations outside their domain are errors,
    /// never NaN; `bump` and `restrict` are exactly zero off their support.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_inner(point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_inner(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(r) => *r.numer() as f64 / *r.denom() as f64,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => *point
                .get(*i)
                .ok_or(EvalError::MissingVariable(*i, point.len()))?,
            Expr::Neg(a) => -a.eval_inner(point)?,
            Expr::Add(a, b) => a.eval_inner(point)? + b.eval_inner(point)?,
            Expr::Sub(a, b) => a.eval_inner(point)? - b.eval_inner(point)?,
            Expr::Mul(a, b) => {
                let x = a.eval_inner(point)?;
                let y = b.eval_inner(point)?;
                x * y
            }
            Expr::Div(a, b) => {
                let x = a.eval_inner(point)?;
                let y = b.eval_inner(point)?;
                if y == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                x / y
            }
            Expr::Pow(a, n) => {
                let x = a.eval_inner(point)?;
                if *n < 0 && x == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                x.powi(*n)
            }
            Expr::Call(func, a) => {
                let x = a.eval_inner(point)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogNonPositive(x));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::SqrtNegative(x));
                        }
                        x.sqrt()
                    }
                }
            }
            Expr::Bump { arg, order } => bump_value(arg.eval_inner(point)?, *order),
            Expr::Restrict {
                body,
                guard,
                lo,
                hi,
            } => {
                let g = guard.eval_inner(point)?;
                let lo = lo.eval_inner(&[])?;
                let hi = hi.eval_inner(&[])?;
                if lo < g && g < hi {
                    body.eval_inner(point)?
                } else {
                    0.0
                }
            }
        })
    }
}

/// `exp(-1/s) / s^m` with `s = 1 - t^2`, zero when `|t| >= 1`. Evaluated in
/// log space so large `m` near the edge underflows to zero instead of
/// overflowing.
pub(crate) fn bump_value(t: f64, order: u32) -> f64 {
    if !(t.abs() < 1.0) {
        return 0.0;
    }
    let s = (1.0 - t) * (1.0 + t);
    if s <= 0.0 {
        return 0.0;
    }
    (-1.0 / s - f64::from(order) * s.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn evaluates_linear() {
        assert_eq!(p("2*x1").eval(&[3.0]).unwrap(), 6.0);
    }

    #[test]
    fn bump_is_zero_outside_support() {
        assert_eq!(p("bump(x1)").eval(&[2.0]).unwrap(), 0.0);
        assert_eq!(p("bump(x1)").eval(&[1.0]).unwrap(), 0.0);
        assert!((p("bump(x1)").eval(&[0.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(p("1/x1").eval(&[0.0]), Err(EvalError::DivisionByZero));
        assert_eq!(p("x1^(-2)").eval(&[0.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn log_and_sqrt_domains() {
        assert!(matches!(p("log(x1)").eval(&[0.0]), Err(EvalError::LogNonPositive(_))));
        assert!(matches!(p("sqrt(x1)").eval(&[-1.0]), Err(EvalError::SqrtNegative(_))));
    }

    #[test]
    fn missing_variable() {
        assert_eq!(p("x2").eval(&[1.0]), Err(EvalError::MissingVariable(1, 1)));
    }

    #[test]
    fn restrict_short_circuits_body() {
        let e = p("restrict(1/x1, x1, 1, 2)");
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(&[1.5]).unwrap(), 1.0 / 1.5);
    }

    #[test]
    fn overflow_is_reported() {
        assert_eq!(p("exp(x1)").eval(&[1000.0]), Err(EvalError::NonFinite));
    }
}
