use thiserror::Error;

use super::{Expr, Func};

/// Largest total derivative order accepted by [`Expr::differentiate`].
pub const MAX_DERIVATIVE_ORDER: u32 = 12;

/// A multi-index as `(variable, order)` pairs; repeated variables add up.
pub type MultiIndex = [(usize, u32)];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("derivative order {requested} exceeds the budget of {MAX_DERIVATIVE_ORDER}")]
pub struct OrderBudgetExceeded {
    pub requested: u32,
}

impl Expr {
    /// First partial derivative with respect to `x_{var+1}`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => Expr::zero(),
            Expr::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(a) => Expr::neg(a.derivative(var)),
            Expr::Add(a, b) => Expr::add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(var), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.derivative(var);
                let db = b.derivative(var);
                if db.is_zero() {
                    return Expr::div(da, (**b).clone());
                }
                Expr::div(
                    Expr::sub(
                        Expr::mul(da, (**b).clone()),
                        Expr::mul((**a).clone(), db),
                    ),
                    Expr::pow((**b).clone(), 2),
                )
            }
            Expr::Pow(u, n) => Expr::mul(
                Expr::mul(Expr::num(i64::from(*n)), Expr::pow((**u).clone(), n - 1)),
                u.derivative(var),
            ),
            Expr::Call(func, u) => {
                let du = u.derivative(var);
                if du.is_zero() {
                    return du;
                }
                let u = (**u).clone();
                let outer = match func {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, u)),
                    Func::Exp => Expr::call(Func::Exp, u),
                    Func::Log => return Expr::div(du, u),
                    Func::Sqrt => {
                        return Expr::div(du, Expr::mul(Expr::num(2), Expr::call(Func::Sqrt, u)))
                    }
                };
                Expr::mul(outer, du)
            }
            Expr::Bump { arg, order } => {
                let du = arg.derivative(var);
                if du.is_zero() {
                    return du;
                }
                let t = (**arg).clone();
                let m = *order;
                let lead = Expr::mul(
                    Expr::mul(Expr::num(-2), t.clone()),
                    Expr::bump(t.clone(), m + 2),
                );
                let outer = if m == 0 {
                    lead
                } else {
                    Expr::add(
                        lead,
                        Expr::mul(
                            Expr::mul(Expr::num(2 * i64::from(m)), t.clone()),
                            Expr::bump(t, m + 1),
                        ),
                    )
                };
                Expr::mul(outer, du)
            }
            Expr::Restrict {
                body,
                guard,
                lo,
                hi,
            } => Expr::restrict(
                body.derivative(var),
                (**guard).clone(),
                (**lo).clone(),
                (**hi).clone(),
            ),
        }
    }

    /// Mixed partial derivative for a multi-index. An empty multi-index
    /// returns the expression unchanged.
    pub fn differentiate(&self, multi_index: &MultiIndex) -> Result<Expr, OrderBudgetExceeded> {
        let total: u32 = multi_index.iter().map(|(_, k)| *k).sum();
        if total > MAX_DERIVATIVE_ORDER {
            return Err(OrderBudgetExceeded { requested: total });
        }
        let mut out = self.clone();
        for &(var, order) in multi_index {
            for _ in 0..order {
                out = out.derivative(var);
            }
        }
        Ok(out)
    }
}

/// All multi-indices of total order `order` over `dim` variables, as
/// exponent vectors in lexicographic order.
pub fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            rec(dim, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        if order == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(dim, order, &mut Vec::new(), &mut out);
    out
}

/// Converts an exponent vector into `(variable, order)` pairs.
pub fn exponent_pairs(exponents: &[u32]) -> Vec<(usize, u32)> {
    exponents
        .iter()
        .enumerate()
        .filter(|(_, k)| **k > 0)
        .map(|(i, k)| (i, *k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn power_rule() {
        assert_eq!(p("x1^2").derivative(0), p("2*x1"));
    }

    #[test]
    fn second_derivative_of_sine() {
        let d2 = p("sin(x1)").differentiate(&[(0, 2)]).unwrap();
        assert_eq!(d2, p("-sin(x1)"));
    }

    #[test]
    fn empty_multi_index_is_identity() {
        let e = p("x1*x2 + exp(x2)");
        assert_eq!(e.differentiate(&[]).unwrap(), e);
    }

    #[test]
    fn order_budget_is_enforced() {
        let err = p("x1").differentiate(&[(0, 7), (1, 6)]).unwrap_err();
        assert_eq!(err.requested, 13);
        assert!(p("x1").differentiate(&[(0, 12)]).is_ok());
    }

    #[test]
    fn bump_derivative_vanishes_outside_support() {
        let d = p("bump(x1)").differentiate(&[(0, 3)]).unwrap();
        for x in [-3.0, -1.0, 1.0, 1.5] {
            assert_eq!(d.eval(&[x]).unwrap(), 0.0);
        }
        assert!(d.eval(&[0.3]).unwrap().abs() > 0.0);
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 0), vec![vec![0, 0, 0]]);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }
}
