use crate::expr::{exponent_pairs, multi_indices, Expr};

use super::{eval_all, Domain, Rect, SpaceError};

/// Tensor grid with `n` points per axis including both endpoints.
pub fn closed_grid(k: &Rect, n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = k
        .lo
        .iter()
        .zip(&k.hi)
        .map(|(a, b)| {
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        *b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    tensor(&axes)
}

/// Cell midpoints of an `n`-per-axis subdivision and the common cell volume.
pub fn midpoint_cells(r: &Rect, n: usize) -> (Vec<Vec<f64>>, f64) {
    let axes: Vec<Vec<f64>> = r
        .lo
        .iter()
        .zip(&r.hi)
        .map(|(a, b)| {
            let h = (b - a) / n as f64;
            (0..n).map(|i| a + (i as f64 + 0.5) * h).collect()
        })
        .collect();
    let vol = r.volume() / (n as f64).powi(r.dim() as i32);
    (tensor(&axes), vol)
}

fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for x in axis {
                let mut p = prefix.clone();
                p.push(*x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// `max_{|μ| = r} max_{grid} |∂^μ f|` over the closed box `K`.
pub fn ck_seminorm(f: &Expr, r: u32, k: &Rect, grid: usize) -> Result<f64, SpaceError> {
    if grid < 2 {
        return Err(SpaceError::GridTooSmall(grid));
    }
    let points = closed_grid(k, grid);
    let mut sup = 0.0f64;
    for mu in multi_indices(k.dim(), r) {
        let d = f.differentiate(&exponent_pairs(&mu))?;
        if d.is_zero() {
            continue;
        }
        let what = format!("derivative {mu:?} of {f}");
        for v in eval_all(&d, &points, &what)? {
            sup = sup.max(v.abs());
        }
    }
    Ok(sup)
}

/// `(∫_R |f|^p)^{1/p}` by the composite midpoint rule with `grid` cells per
/// axis. Nodes are accumulated in a fixed order so the result does not
/// depend on thread scheduling.
pub fn lp_norm_on_rect(f: &Expr, p: u32, r: &Rect, grid: usize) -> Result<f64, SpaceError> {
    Ok(lp_power_sum(f, p, r, grid)?.powf(1.0 / f64::from(p)))
}

fn lp_power_sum(f: &Expr, p: u32, r: &Rect, grid: usize) -> Result<f64, SpaceError> {
    if p == 0 {
        return Err(SpaceError::Unsupported("L^p needs p >= 1".into()));
    }
    if grid == 0 {
        return Err(SpaceError::GridTooSmall(grid));
    }
    if f.is_zero() {
        return Ok(0.0);
    }
    let (points, vol) = midpoint_cells(r, grid);
    let values = eval_all(f, &points, &f.to_string())?;
    let exp = p as i32;
    Ok(values.iter().map(|v| v.abs().powi(exp)).sum::<f64>() * vol)
}

/// `L^p(U)` norm over a union of boxes.
pub fn lp_norm(f: &Expr, p: u32, u: &Domain, grid: usize) -> Result<f64, SpaceError> {
    let mut total = 0.0;
    for b in u.boxes() {
        total += lp_power_sum(f, p, b, grid)?;
    }
    Ok(total.powf(1.0 / f64::from(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn ck_seminorm_examples() {
        let unit = Rect::interval(0.0, 1.0).unwrap();
        assert_eq!(ck_seminorm(&p("x1"), 1, &unit, 11).unwrap(), 1.0);
        assert_eq!(ck_seminorm(&Expr::zero(), 3, &unit, 11).unwrap(), 0.0);
        let half_turn = Rect::interval(0.0, std::f64::consts::PI).unwrap();
        let s = ck_seminorm(&p("sin(x1)"), 0, &half_turn, 1001).unwrap();
        assert!((s - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ck_seminorm_takes_all_multi_indices() {
        let sq = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        // ∂x∂y(x y^2) = 2y, ∂x² = 0, ∂y² = 2x: the sup is 2.
        let s = ck_seminorm(&p("x1*x2^2"), 2, &sq, 5).unwrap();
        assert_eq!(s, 2.0);
    }

    #[test]
    fn ck_seminorm_grows_under_nested_refinement() {
        let k = Rect::interval(0.1, 2.3).unwrap();
        let f = p("sin(7*x1)*exp(-x1)");
        let mut last = 0.0;
        let mut n = 3;
        for _ in 0..6 {
            let s = ck_seminorm(&f, 1, &k, n).unwrap();
            assert!(s >= last);
            last = s;
            n = 2 * n - 1;
        }
    }

    #[test]
    fn lp_norm_examples() {
        let u = Domain::interval(0.0, 1.0).unwrap();
        assert!((lp_norm(&Expr::one(), 2, &u, 16).unwrap() - 1.0).abs() < 1e-15);
        assert!((lp_norm(&p("x1"), 1, &u, 10_000).unwrap() - 0.5).abs() < 1e-4);
        let a = lp_norm(&p("1/x1"), 1, &u, 1000).unwrap();
        let b = lp_norm(&p("1/x1"), 1, &u, 2000).unwrap();
        let c = lp_norm(&p("1/x1"), 1, &u, 4000).unwrap();
        assert!(a < b && b < c);
        assert!(((c - b) - (b - a)).abs() < 1e-3);
    }

    #[test]
    fn lp_norm_matches_closed_form_in_two_dimensions() {
        // ∫∫_{(0,1)×(0,2)} (x y)^2 = (1/3)(8/3)
        let u = Domain::from_rect(Rect::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap());
        let v = lp_norm(&p("x1*x2"), 2, &u, 400).unwrap();
        assert!((v - (8.0f64 / 9.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn evaluation_errors_carry_the_point() {
        let k = Rect::interval(-1.0, 1.0).unwrap();
        match ck_seminorm(&p("1/x1"), 0, &k, 3) {
            Err(SpaceError::Eval { point, .. }) => assert_eq!(point, vec![0.0]),
            other => panic!("{other:?}"),
        }
    }
}
