use std::f64::consts::PI;

use crate::expr::Expr;
use crate::spaces::{Domain, Rect};

use super::{Atlas, Chart, OverlapPiece, Regularity};

fn p(s: &str) -> Expr {
    Expr::parse(s).expect("built-in expression")
}

fn interval(a: f64, b: f64) -> Rect {
    Rect::interval(a, b).expect("built-in interval")
}

/// One chart with no overlaps.
pub fn single_chart(image: Domain) -> Atlas {
    Atlas::new(
        vec![Chart {
            name: "U".into(),
            image,
        }],
        Vec::new(),
        Regularity::smooth(),
    )
    .expect("single chart")
}

/// The circle with two angle charts `A, B: (0, 2π)` whose angles differ by
/// `π`: `θ_B = θ_A + π` on `(0, π)` and `θ_A − π` on `(π, 2π)`.
pub fn s1_angle() -> Atlas {
    let charts = vec![
        Chart {
            name: "A".into(),
            image: Domain::interval(0.0, 2.0 * PI).unwrap(),
        },
        Chart {
            name: "B".into(),
            image: Domain::interval(0.0, 2.0 * PI).unwrap(),
        },
    ];
    let pieces = vec![
        OverlapPiece {
            from: 0,
            to: 1,
            domain: interval(0.0, PI),
            transition: vec![p("x1 + pi")],
        },
        OverlapPiece {
            from: 0,
            to: 1,
            domain: interval(PI, 2.0 * PI),
            transition: vec![p("x1 - pi")],
        },
        OverlapPiece {
            from: 1,
            to: 0,
            domain: interval(0.0, PI),
            transition: vec![p("x1 + pi")],
        },
        OverlapPiece {
            from: 1,
            to: 0,
            domain: interval(PI, 2.0 * PI),
            transition: vec![p("x1 - pi")],
        },
    ];
    Atlas::new(charts, pieces, Regularity::smooth()).unwrap()
}

/// The circle with chart `A` an angle in `(0, 2π)` and chart `B` the
/// coordinate `y = exp(θ_B / 2) ∈ (1, e^π)`, so transitions are nonlinear.
pub fn s1_exp() -> Atlas {
    let e_half = (PI / 2.0).exp();
    let e_full = PI.exp();
    let charts = vec![
        Chart {
            name: "A".into(),
            image: Domain::interval(0.0, 2.0 * PI).unwrap(),
        },
        Chart {
            name: "B".into(),
            image: Domain::interval(1.0, e_full).unwrap(),
        },
    ];
    let pieces = vec![
        OverlapPiece {
            from: 0,
            to: 1,
            domain: interval(0.0, PI),
            transition: vec![p("exp((x1 + pi)/2)")],
        },
        OverlapPiece {
            from: 0,
            to: 1,
            domain: interval(PI, 2.0 * PI),
            transition: vec![p("exp((x1 - pi)/2)")],
        },
        OverlapPiece {
            from: 1,
            to: 0,
            domain: interval(1.0, e_half),
            transition: vec![p("2*log(x1) + pi")],
        },
        OverlapPiece {
            from: 1,
            to: 0,
            domain: interval(e_half, e_full),
            transition: vec![p("2*log(x1) - pi")],
        },
    ];
    Atlas::new(charts, pieces, Regularity::smooth()).unwrap()
}

/// The torus as the product of two [`s1_angle`] atlases: charts `AA, AB,
/// BA, BB` on `(0, 2π)²`.
pub fn t2_angle() -> Atlas {
    let names = ["A", "B"];
    let mut charts = Vec::new();
    for a in names {
        for b in names {
            charts.push(Chart {
                name: format!("{a}{b}"),
                image: Domain::from_rect(
                    Rect::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI]).unwrap(),
                ),
            });
        }
    }
    // Per factor: same chart (identity on the whole interval) or the other
    // chart (two pieces shifted by ±π).
    let factor = |same: bool, var: usize| -> Vec<(Rect, Expr)> {
        let x = Expr::var(var);
        if same {
            vec![(interval(0.0, 2.0 * PI), x)]
        } else {
            vec![
                (interval(0.0, PI), Expr::add(x.clone(), Expr::Pi)),
                (interval(PI, 2.0 * PI), Expr::sub(x, Expr::Pi)),
            ]
        }
    };
    let mut pieces = Vec::new();
    for from in 0..4 {
        for to in 0..4 {
            if from == to {
                continue;
            }
            let first = factor(from / 2 == to / 2, 0);
            let second = factor(from % 2 == to % 2, 1);
            for (r1, e1) in &first {
                for (r2, e2) in &second {
                    pieces.push(OverlapPiece {
                        from,
                        to,
                        domain: Rect::new(vec![r1.lo[0], r2.lo[0]], vec![r1.hi[0], r2.hi[0]])
                            .unwrap(),
                        transition: vec![e1.clone(), e2.clone()],
                    });
                }
            }
        }
    }
    Atlas::new(charts, pieces, Regularity::smooth()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_has_the_expected_pieces() {
        let t = t2_angle();
        assert_eq!(t.charts.len(), 4);
        // Differing in one factor: 2 pieces; in both: 4.
        assert_eq!(t.pieces_between(0, 1).count(), 2);
        assert_eq!(t.pieces_between(0, 3).count(), 4);
        assert_eq!(t.pieces.len(), 4 * (2 + 2 + 4));
    }

    #[test]
    fn exp_chart_round_trips() {
        let a = s1_exp();
        for x in [0.3, 2.0, 3.5, 6.0] {
            let y = a.transfer(0, 1, &[x]).unwrap().unwrap();
            let back = a.transfer(1, 0, &y).unwrap().unwrap();
            assert!((back[0] - x).abs() < 1e-12);
        }
    }
}
