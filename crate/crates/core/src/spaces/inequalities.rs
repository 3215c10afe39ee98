use serde::Serialize;

use crate::expr::Expr;
use crate::index_algebra::{idx, to_i64, DistributiveStructure};

use super::norms::{lp_norm, midpoint_cells};
use super::{eval_all, Domain, Rect, SpaceError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub i: i64,
    pub j: i64,
    pub r: i64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn product_index(ds: &DistributiveStructure, i: i64, j: i64) -> Result<i64, SpaceError> {
    let r = ds
        .eps_checked(&idx(i), &idx(j))
        .map_err(|e| SpaceError::Precondition(e.to_string()))?;
    to_i64(&r).ok_or_else(|| SpaceError::Precondition(format!("index {r} is not an integer")))
}

/// `‖f g‖_{ε(i,j)} ≤ ‖f‖_i ‖g‖_j + tol` with midpoint quadrature on `grid`
/// cells per axis.
pub fn holder_product_check(
    f: &Expr,
    g: &Expr,
    i: i64,
    j: i64,
    ds: &DistributiveStructure,
    u: &Domain,
    grid: usize,
    tol: f64,
) -> Result<InequalityCheck, SpaceError> {
    let r = product_index(ds, i, j)?;
    let lhs = lp_norm(&Expr::mul(f.clone(), g.clone()), r as u32, u, grid)?;
    let rhs = lp_norm(f, i as u32, u, grid)? * lp_norm(g, j as u32, u, grid)?;
    Ok(InequalityCheck {
        i,
        j,
        r,
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

/// `(a * b)_m = h Σ_n a_n b_{m-n}`, the Riemann-sum convolution of two
/// sampled functions on grids with spacing `h`.
pub fn discrete_convolution(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (n, x) in a.iter().enumerate() {
        for (m, y) in b.iter().enumerate() {
            out[n + m] += x * y;
        }
    }
    for v in &mut out {
        *v *= h;
    }
    out
}

fn discrete_norm(values: &[f64], p: i64, h: f64) -> f64 {
    let exp = p as i32;
    (values.iter().map(|v| v.abs().powi(exp)).sum::<f64>() * h).powf(1.0 / p as f64)
}

/// One-dimensional Young inequality for convolution,
/// `‖f * g‖_{r} ≤ ‖f‖_i ‖g‖_j + tol` with `r = ε(i,j)`, for `f, g`
/// supported in `support` and sampled at `n` midpoints.
pub fn young_convolution_check(
    f: &Expr,
    g: &Expr,
    i: i64,
    j: i64,
    ds: &DistributiveStructure,
    support: &Rect,
    n: usize,
    tol: f64,
) -> Result<InequalityCheck, SpaceError> {
    if support.dim() != 1 {
        return Err(SpaceError::Unsupported("convolution check is one-dimensional".into()));
    }
    let r = product_index(ds, i, j)?;
    let (points, h) = midpoint_cells(support, n);
    let a = eval_all(f, &points, &f.to_string())?;
    let b = eval_all(g, &points, &g.to_string())?;
    let c = discrete_convolution(&a, &b, h);
    let lhs = discrete_norm(&c, r, h);
    let rhs = discrete_norm(&a, i, h) * discrete_norm(&b, j, h);
    Ok(InequalityCheck {
        i,
        j,
        r,
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn holder_on_simple_pair() {
        let ds = DistributiveStructure::holder_lp(&[1, 2, 3, 4, 6, 12]).unwrap();
        let u = Domain::interval(0.0, 1.0).unwrap();
        let c = holder_product_check(&p("x1"), &p("1 - x1"), 2, 2, &ds, &u, 2000, 1e-9).unwrap();
        assert_eq!(c.r, 1);
        // ∫ x(1-x) = 1/6, ‖x‖_2 = ‖1-x‖_2 = 1/sqrt(3).
        assert!((c.lhs - 1.0 / 6.0).abs() < 1e-6);
        assert!((c.rhs - 1.0 / 3.0).abs() < 1e-6);
        assert!(c.holds);
        assert!(holder_product_check(&p("x1"), &p("x1"), 2, 3, &ds, &u, 10, 1e-9).is_err());
    }

    #[test]
    fn convolution_of_boxes_is_a_tent() {
        let c = discrete_convolution(&[1.0, 1.0], &[1.0, 1.0], 0.5);
        assert_eq!(c, vec![0.5, 1.0, 0.5]);
    }

    #[test]
    fn young_with_l1_factor() {
        let ds = DistributiveStructure::young_conv(&[1, 2, 3, 4]).unwrap();
        let s = Rect::interval(-1.0, 1.0).unwrap();
        let f = p("bump(x1)");
        let g = p("bump(2*x1) + bump(x1, 1)");
        for (i, j) in [(1, 1), (1, 2), (3, 1), (1, 4)] {
            let c = young_convolution_check(&f, &g, i, j, &ds, &s, 400, 1e-9).unwrap();
            assert!(c.holds, "{c:?}");
        }
        assert!(young_convolution_check(&f, &g, 2, 2, &ds, &s, 40, 1e-9).is_err());
    }
}
