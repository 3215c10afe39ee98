use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::Expr;
use crate::spaces::{closed_grid, midpoint_cells, Rect};

use super::{Atlas, AtlasError};

/// Points sampled per chart image when checking coverage.
const COVERAGE_SAMPLES: usize = 1024;

/// `Π_d bump((2 x_d − lo_d − hi_d) / (hi_d − lo_d))`: positive exactly on
/// the open box.
pub fn box_bump(r: &Rect) -> Expr {
    Expr::product((0..r.dim()).map(|d| {
        let mid = Expr::from_f64(r.lo[d] + r.hi[d]);
        let width = Expr::from_f64(r.hi[d] - r.lo[d]);
        let t = Expr::div(Expr::sub(Expr::mul(Expr::num(2), Expr::var(d)), mid), width);
        Expr::bump(t, 0)
    }))
}

/// Extends `body` by zero outside the open box `r`.
pub(crate) fn restrict_to_rect(body: Expr, r: &Rect) -> Expr {
    (0..r.dim()).rev().fold(body, |acc, d| {
        Expr::restrict(
            acc,
            Expr::var(d),
            Expr::from_f64(r.lo[d]),
            Expr::from_f64(r.hi[d]),
        )
    })
}

/// `ψ_{s'}` written in chart-`s` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionWeight {
    pub chart: usize,
    /// The overlap piece through which `ψ_{s'}` is pulled back; `None` for
    /// `s' = s`.
    pub piece: Option<usize>,
    pub weight: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionOfUnity {
    pub margin: f64,
    /// Boxes on which each chart's bump is positive.
    pub supports: Vec<Vec<Rect>>,
    pub bumps: Vec<Expr>,
    /// `ψ_s` in chart-`s` coordinates.
    pub psi: Vec<Expr>,
    /// For each chart `s`, the functions `ψ_{s'}`, `s' ∈ N(s)`, in chart-`s`
    /// coordinates. They sum to one on `U_s` by construction.
    pub weights: Vec<Vec<PartitionWeight>>,
}

/// Builds `ψ_s = b_s / Σ_{s'} b_{s'}` with `b_s` a product of bumps on each
/// image box shrunk by `margin`.
pub fn build_partition(atlas: &Atlas, margin: f64) -> Result<PartitionOfUnity, AtlasError> {
    if !(margin > 0.0) {
        return Err(AtlasError::Invalid {
            location: "partition.margin".into(),
            message: format!("margin must be positive, got {margin}"),
        });
    }
    let mut supports = Vec::new();
    let mut bumps = Vec::new();
    for c in &atlas.charts {
        let shrunk: Vec<Rect> = c.image.boxes().iter().filter_map(|b| b.shrink(margin)).collect();
        bumps.push(Expr::sum(shrunk.iter().map(box_bump)));
        supports.push(shrunk);
    }

    let mut psi = Vec::new();
    let mut weights = Vec::new();
    for s in 0..atlas.charts.len() {
        if atlas.neighbours(s).len() == 1 {
            psi.push(Expr::one());
            weights.push(vec![PartitionWeight {
                chart: s,
                piece: None,
                weight: Expr::one(),
            }]);
            continue;
        }
        let mut numerators = vec![(s, None, bumps[s].clone())];
        for (i, piece) in atlas.pieces.iter().enumerate().filter(|(_, p)| p.from == s) {
            let pulled = bumps[piece.to].substitute(&piece.transition);
            numerators.push((piece.to, Some(i), restrict_to_rect(pulled, &piece.domain)));
        }
        let denominator = Expr::sum(numerators.iter().map(|(_, _, e)| e.clone()));
        check_coverage(atlas, s, &denominator)?;
        let ws: Vec<PartitionWeight> = numerators
            .into_iter()
            .map(|(chart, piece, num)| PartitionWeight {
                chart,
                piece,
                weight: Expr::div(num, denominator.clone()),
            })
            .collect();
        psi.push(ws[0].weight.clone());
        weights.push(ws);
    }
    Ok(PartitionOfUnity {
        margin,
        supports,
        bumps,
        psi,
        weights,
    })
}

fn check_coverage(atlas: &Atlas, s: usize, denominator: &Expr) -> Result<(), AtlasError> {
    let per_axis = (COVERAGE_SAMPLES as f64).powf(1.0 / atlas.dim as f64).ceil() as usize;
    for b in atlas.charts[s].image.boxes() {
        let (points, _) = midpoint_cells(b, per_axis);
        for p in points {
            let v = denominator.eval(&p).map_err(|source| AtlasError::Eval {
                what: format!("partition denominator of chart {}", atlas.name(s)),
                point: p.clone(),
                source,
            })?;
            if v <= 0.0 {
                return Err(AtlasError::Coverage {
                    chart: atlas.name(s).into(),
                    point: p,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub samples: usize,
    pub max_deviation: f64,
    pub worst_chart: String,
    pub worst_point: Vec<f64>,
    pub min_value: f64,
    pub support_violations: usize,
    pub passed: bool,
}

/// Re-verifies a family `(ψ_s)` as a partition of unity: `Σ_s ψ_s = 1`
/// within `tol` at `samples` random manifold points, `ψ_s ≥ 0`, and `ψ_s`
/// identically zero outside its support boxes.
pub fn check_partition(
    atlas: &Atlas,
    supports: &[Vec<Rect>],
    psi: &[Expr],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PartitionCheck, AtlasError> {
    let eval = |t: usize, q: &[f64]| {
        psi[t].eval(q).map_err(|source| AtlasError::Eval {
            what: format!("psi_{}", atlas.name(t)),
            point: q.to_vec(),
            source,
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_charts = atlas.charts.len();
    let mut report = PartitionCheck {
        samples: 0,
        max_deviation: 0.0,
        worst_chart: String::new(),
        worst_point: Vec::new(),
        min_value: f64::INFINITY,
        support_violations: 0,
        passed: false,
    };
    for n in 0..samples {
        let s = n % n_charts;
        let boxes = atlas.charts[s].image.boxes();
        let b = &boxes[rng.gen_range(0..boxes.len())];
        let p: Vec<f64> = (0..atlas.dim)
            .map(|d| {
                let x = rng.gen_range(b.lo[d]..b.hi[d]);
                if x > b.lo[d] {
                    x
                } else {
                    0.5 * (b.lo[d] + b.hi[d])
                }
            })
            .collect();
        let mut sum = 0.0;
        for t in 0..n_charts {
            if let Some(q) = atlas.transfer(s, t, &p)? {
                let v = eval(t, &q)?;
                report.min_value = report.min_value.min(v);
                sum += v;
            }
        }
        report.samples += 1;
        let dev = (sum - 1.0).abs();
        if dev > report.max_deviation || report.worst_point.is_empty() {
            report.max_deviation = dev;
            report.worst_chart = atlas.name(s).into();
            report.worst_point = p;
        }
    }
    // Outside the supports, every ψ_t must be exactly zero.
    let per_axis = if atlas.dim == 1 { 401 } else { 41 };
    for (t, c) in atlas.charts.iter().enumerate() {
        if supports[t].is_empty() && psi[t].is_one() {
            continue;
        }
        for b in c.image.boxes() {
            for q in closed_grid(b, per_axis) {
                if !b.contains(&q) || supports[t].iter().any(|r| r.contains(&q)) {
                    continue;
                }
                if eval(t, &q)? != 0.0 {
                    report.support_violations += 1;
                }
            }
        }
    }
    report.passed =
        report.max_deviation <= tol && report.min_value >= 0.0 && report.support_violations == 0;
    Ok(report)
}

impl PartitionOfUnity {
    pub fn check(&self, atlas: &Atlas, samples: usize, seed: u64) -> Result<PartitionCheck, AtlasError> {
        let supports: Vec<Vec<Rect>> = self
            .psi
            .iter()
            .zip(&self.supports)
            .map(|(p, s)| if p.is_one() { Vec::new() } else { s.clone() })
            .collect();
        check_partition(atlas, &supports, &self.psi, samples, seed, 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::spaces::Domain;

    #[test]
    fn one_chart_gives_the_constant_one() {
        let a = single_chart(Domain::interval(0.0, 1.0).unwrap());
        let pou = build_partition(&a, 0.1).unwrap();
        assert!(pou.psi[0].is_one());
        assert!(pou.check(&a, 100, 1).unwrap().passed);
    }

    #[test]
    fn circle_partition_sums_to_one() {
        for a in [s1_angle(), s1_exp()] {
            let pou = build_partition(&a, 0.1).unwrap();
            assert_eq!(pou.psi.len(), 2);
            let c = pou.check(&a, 1000, 7).unwrap();
            assert!(c.passed, "{c:?}");
            assert!(c.max_deviation <= 1e-12);
            assert_eq!(c.samples, 1000);
        }
    }

    #[test]
    fn torus_partition_sums_to_one() {
        let a = t2_angle();
        let pou = build_partition(&a, 0.2).unwrap();
        let c = pou.check(&a, 1000, 3).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn weights_sum_to_one_inside_each_chart() {
        let a = s1_angle();
        let pou = build_partition(&a, 0.1).unwrap();
        for x in [0.05, 1.0, 3.1, 3.2, 6.2] {
            let s: f64 = pou.weights[0].iter().map(|w| w.weight.eval(&[x]).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_vanishes_exactly_near_the_chart_edge() {
        let a = s1_angle();
        let pou = build_partition(&a, 0.1).unwrap();
        assert_eq!(pou.psi[0].eval(&[0.05]).unwrap(), 0.0);
        assert_eq!(pou.psi[1].eval(&[6.25]).unwrap(), 0.0);
    }

    #[test]
    fn large_margin_fails_to_cover() {
        let err = build_partition(&s1_angle(), 1.7).unwrap_err();
        match err {
            AtlasError::Coverage { chart, point } => {
                assert_eq!(chart, "A");
                assert!(point[0] > 1.0 && point[0] < 5.3);
            }
            other => panic!("{other:?}"),
        }
    }
}
