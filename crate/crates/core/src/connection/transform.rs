use nalgebra::DMatrix;

use crate::atlas::{Atlas, OverlapPiece};
use crate::expr::{EvalError, Expr};
use crate::spaces::midpoint_cells;

use super::{coeff_index, ConnectionError};

/// Smallest `|det J|` accepted at a sample point.
pub const MIN_JACOBIAN_DET: f64 = 1e-8;

/// `J[l][a] = ∂T^l / ∂x^a`.
pub fn jacobian(transition: &[Expr]) -> Vec<Vec<Expr>> {
    let n = transition.len();
    transition
        .iter()
        .map(|t| (0..n).map(|a| t.derivative(a)).collect())
        .collect()
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

fn determinant(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        n => Expr::sum((0..n).map(|j| {
            let term = Expr::mul(m[0][j].clone(), determinant(&minor(m, 0, j)));
            if j % 2 == 0 {
                term
            } else {
                Expr::neg(term)
            }
        })),
    }
}

/// `J⁻¹` by cofactors, together with `det J`.
pub fn inverse_jacobian(j: &[Vec<Expr>]) -> (Vec<Vec<Expr>>, Expr) {
    let n = j.len();
    let det = determinant(j);
    let inv = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let cof = determinant(&minor(j, c, r));
                    let cof = if (r + c) % 2 == 0 { cof } else { Expr::neg(cof) };
                    Expr::div(cof, det.clone())
                })
                .collect()
        })
        .collect();
    (inv, det)
}

/// Rejects a piece whose Jacobian determinant gets below
/// [`MIN_JACOBIAN_DET`] at the midpoints of a `grid`-per-axis partition.
pub(crate) fn check_invertible(
    atlas: &Atlas,
    piece: &OverlapPiece,
    det: &Expr,
    grid: usize,
) -> Result<(), ConnectionError> {
    let (points, _) = midpoint_cells(&piece.domain, grid);
    for p in points {
        let d = det.eval(&p).unwrap_or(0.0);
        if !(d.abs() > MIN_JACOBIAN_DET) {
            return Err(ConnectionError::SingularJacobian {
                from: atlas.name(piece.from).into(),
                to: atlas.name(piece.to).into(),
                point: p,
                det: d,
            });
        }
    }
    Ok(())
}

/// Rewrites coefficients given in the coordinates `y` of `piece.to` in the
/// coordinates `x` of `piece.from`, where `y = T(x)`:
///
/// `f̃^c_{ab} = Σ (J⁻¹)^c_l J^m_a J^o_b f^l_{mo}(T(x)) + Σ (J⁻¹)^c_l ∂_a∂_b T^l`.
///
/// With `homogeneous` the second-derivative term is dropped, which is the
/// transformation rule of an `End(TM)`-valued one-form.
pub fn change_coordinates(piece: &OverlapPiece, target: &[Expr], homogeneous: bool) -> Vec<Expr> {
    let n = piece.transition.len();
    let j = jacobian(&piece.transition);
    let (inv, _) = inverse_jacobian(&j);
    let pulled: Vec<Expr> = target.iter().map(|f| f.substitute(&piece.transition)).collect();
    let mut out = Vec::with_capacity(n * n * n);
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut terms = Vec::new();
                for l in 0..n {
                    if inv[c][l].is_zero() {
                        continue;
                    }
                    for m in 0..n {
                        for o in 0..n {
                            let f = &pulled[coeff_index(n, l, m, o)];
                            if f.is_zero() {
                                continue;
                            }
                            terms.push(Expr::product([
                                inv[c][l].clone(),
                                j[m][a].clone(),
                                j[o][b].clone(),
                                f.clone(),
                            ]));
                        }
                    }
                    if !homogeneous {
                        let second = j[l][a].derivative(b);
                        terms.push(Expr::mul(second, inv[c][l].clone()));
                    }
                }
                out.push(Expr::sum(terms));
            }
        }
    }
    out
}

fn eval_transition(t: &[Expr], x: &[f64]) -> Result<Vec<f64>, EvalError> {
    t.iter().map(|e| e.eval(x)).collect()
}

/// Numeric version of [`change_coordinates`] at one point: Jacobian and
/// Hessian of the transition by central differences with step `h`, the
/// inverse by LU. `target` evaluates the coefficients at `y`.
pub fn change_coordinates_at<F>(
    piece: &OverlapPiece,
    target: F,
    x: &[f64],
    h: f64,
    homogeneous: bool,
) -> Result<Vec<f64>, ConnectionError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ConnectionError>,
{
    let n = x.len();
    let eval = |p: &[f64]| {
        eval_transition(&piece.transition, p).map_err(|source| {
            ConnectionError::Space(crate::spaces::SpaceError::Eval {
                what: "transition".into(),
                point: p.to_vec(),
                source,
            })
        })
    };
    let shifted = |steps: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for (d, s) in steps {
            p[*d] += s * h;
        }
        eval(&p)
    };
    let y = eval(x)?;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let plus = shifted(&[(a, 1.0)])?;
        let minus = shifted(&[(a, -1.0)])?;
        for l in 0..n {
            jm[(l, a)] = (plus[l] - minus[l]) / (2.0 * h);
        }
    }
    let det = jm.determinant();
    if !(det.abs() > MIN_JACOBIAN_DET) {
        return Err(ConnectionError::SingularJacobian {
            from: piece.from.to_string(),
            to: piece.to.to_string(),
            point: x.to_vec(),
            det,
        });
    }
    let inv = jm.clone().lu().try_inverse().ok_or_else(|| ConnectionError::SingularJacobian {
        from: piece.from.to_string(),
        to: piece.to.to_string(),
        point: x.to_vec(),
        det,
    })?;
    // hess[l][a][b] = ∂_a ∂_b T^l
    let mut hess = vec![vec![vec![0.0; n]; n]; n];
    if !homogeneous {
        for a in 0..n {
            for b in a..n {
                let vals: Vec<f64> = if a == b {
                    let p = shifted(&[(a, 1.0)])?;
                    let m = shifted(&[(a, -1.0)])?;
                    (0..n).map(|l| (p[l] - 2.0 * y[l] + m[l]) / (h * h)).collect()
                } else {
                    let pp = shifted(&[(a, 1.0), (b, 1.0)])?;
                    let pm = shifted(&[(a, 1.0), (b, -1.0)])?;
                    let mp = shifted(&[(a, -1.0), (b, 1.0)])?;
                    let mm = shifted(&[(a, -1.0), (b, -1.0)])?;
                    (0..n).map(|l| (pp[l] - pm[l] - mp[l] + mm[l]) / (4.0 * h * h)).collect()
                };
                for l in 0..n {
                    hess[l][a][b] = vals[l];
                    hess[l][b][a] = vals[l];
                }
            }
        }
    }
    let f = target(&y)?;
    let mut out = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    for m in 0..n {
                        for o in 0..n {
                            v += inv[(c, l)] * jm[(m, a)] * jm[(o, b)] * f[coeff_index(n, l, m, o)];
                        }
                    }
                    v += hess[l][a][b] * inv[(c, l)];
                }
                out[coeff_index(n, c, a, b)] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{s1_exp, OverlapPiece};
    use crate::spaces::Rect;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn piece(dim: usize, transition: &[&str]) -> OverlapPiece {
        OverlapPiece {
            from: 0,
            to: 1,
            domain: Rect::new(vec![0.5; dim], vec![1.5; dim]).unwrap(),
            transition: transition.iter().map(|s| e(s)).collect(),
        }
    }

    #[test]
    fn identity_transition_leaves_coefficients() {
        let p = piece(2, &["x1", "x2"]);
        let f: Vec<Expr> = (0..8).map(|i| e(&format!("x1*x2 + {}", i + 1))).collect();
        assert_eq!(change_coordinates(&p, &f, false), f);
    }

    #[test]
    fn affine_transition_is_a_similarity() {
        // y = A x + b with A = [[2, 1], [0, 3]].
        let p = piece(2, &["2*x1 + x2 + 1", "3*x2 - 4"]);
        let f: Vec<Expr> = (0..8).map(|i| e(&format!("{} + x1", i + 1))).collect();
        let out = change_coordinates(&p, &f, false);
        let homogeneous = change_coordinates(&p, &f, true);
        let x = [0.7, 1.1];
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let ainv = a.clone().try_inverse().unwrap();
        let y = [2.0 * x[0] + x[1] + 1.0, 3.0 * x[1] - 4.0];
        for c in 0..2 {
            for i in 0..2 {
                for k in 0..2 {
                    let mut want = 0.0;
                    for l in 0..2 {
                        for m in 0..2 {
                            for o in 0..2 {
                                let fv = (coeff_index(2, l, m, o) + 1) as f64 + y[0];
                                want += ainv[(c, l)] * a[(m, i)] * a[(o, k)] * fv;
                            }
                        }
                    }
                    let idx = coeff_index(2, c, i, k);
                    assert!((out[idx].eval(&x).unwrap() - want).abs() < 1e-12);
                    assert_eq!(out[idx], homogeneous[idx]);
                }
            }
        }
    }

    #[test]
    fn nonlinear_circle_change_matches_difference_oracle() {
        // In one dimension the rule is f̃(x) = f(T(x)) T'(x) + T''(x) / T'(x).
        let a = s1_exp();
        let f = vec![e("sin(x1) + x1^2")];
        for p in &a.pieces {
            let sym = change_coordinates(p, &f, false);
            let (pts, _) = midpoint_cells(&p.domain, 13);
            for x in pts {
                let t = |s: f64| p.transition[0].eval(&[s]).unwrap();
                // Richardson-extrapolated central differences.
                let d1h = |h: f64| (t(x[0] + h) - t(x[0] - h)) / (2.0 * h);
                let d2h = |h: f64| (t(x[0] + h) - 2.0 * t(x[0]) + t(x[0] - h)) / (h * h);
                let h = 1e-2;
                let d1 = (4.0 * d1h(h / 2.0) - d1h(h)) / 3.0;
                let d2 = (4.0 * d2h(h / 2.0) - d2h(h)) / 3.0;
                let y = t(x[0]);
                let oracle = (y.sin() + y * y) * d1 + d2 / d1;
                let got = sym[0].eval(&x).unwrap();
                assert!((got - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "{got} vs {oracle}");
                let grid = change_coordinates_at(p, |y| Ok(vec![f[0].eval(y).unwrap()]), &x, 1e-4, false).unwrap();
                assert!((grid[0] - got).abs() <= 1e-5 * got.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cofactor_inverse_in_three_dimensions() {
        let p = piece(3, &["x1 + x2^2", "x2 * x3", "exp(x3) + x1"]);
        let j = jacobian(&p.transition);
        let (inv, det) = inverse_jacobian(&j);
        let x = [0.9, 1.2, 0.7];
        let jm = DMatrix::from_fn(3, 3, |r, c| j[r][c].eval(&x).unwrap());
        assert!((det.eval(&x).unwrap() - jm.determinant()).abs() < 1e-12);
        let want = jm.try_inverse().unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((inv[r][c].eval(&x).unwrap() - want[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_jacobian_is_located() {
        let p = OverlapPiece {
            from: 0,
            to: 1,
            domain: Rect::interval(-1.0, 1.0).unwrap(),
            transition: vec![e("x1^3")],
        };
        let err = change_coordinates_at(&p, |_| Ok(vec![0.0]), &[0.0], 1e-6, false).unwrap_err();
        assert!(matches!(err, ConnectionError::SingularJacobian { ref point, .. } if point == &vec![0.0]));
    }
}
