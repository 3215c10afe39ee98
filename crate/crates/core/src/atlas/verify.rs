use rayon::prelude::*;
use serde::Serialize;

use crate::index_algebra::IndexFn;
use crate::spaces::{check_membership, midpoint_cells, Budget, Domain, Family, MembershipTemplate, Verdict};

use super::{Atlas, AtlasError, OverlapPiece};

/// Inverse and cocycle residuals at or below this pass.
pub const COCYCLE_TOLERANCE: f64 = 1e-8;
/// Inverse residuals above this mean the declared inverse is wrong.
pub const INVERTIBILITY_LIMIT: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairResidual {
    pub from: String,
    pub to: String,
    pub samples: usize,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleResidual {
    pub charts: [String; 3],
    pub samples: usize,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtlasReport {
    pub pairs: Vec<PairResidual>,
    pub triples: Vec<TripleResidual>,
    pub passed: bool,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn apply(atlas: &Atlas, piece: &OverlapPiece, p: &[f64]) -> Result<Vec<f64>, AtlasError> {
    piece.apply(p).map_err(|source| AtlasError::Eval {
        what: format!("transition {} -> {}", atlas.name(piece.from), atlas.name(piece.to)),
        point: p.to_vec(),
        source,
    })
}

/// Worst inverse residual of one piece over cell-centred samples:
/// `(residual, point)`. A sample mapped outside every declared inverse
/// piece counts as an infinite residual.
fn inverse_residual(atlas: &Atlas, piece: &OverlapPiece, grid: usize) -> Result<(usize, f64, Vec<f64>), AtlasError> {
    let (samples, _) = midpoint_cells(&piece.domain, grid);
    let mut worst = (0.0, samples[0].clone());
    for p in &samples {
        let q = apply(atlas, piece, p)?;
        let r = match atlas.piece_at(piece.to, piece.from, &q) {
            Some(back) => sup_distance(&apply(atlas, back, &q)?, p),
            None => f64::INFINITY,
        };
        if r > worst.0 || r.is_nan() {
            worst = (r, p.clone());
        }
    }
    Ok((samples.len(), worst.0, worst.1))
}

/// Checks `φ_{s s'} ∘ φ_{s' s} = id` on every overlap piece and the cocycle
/// `φ_{s'' s'} ∘ φ_{s' s} = φ_{s'' s}` wherever all three are declared, on
/// a `grid`-per-axis cell-centred sample of each piece.
pub fn verify_atlas(atlas: &Atlas, grid: usize) -> Result<AtlasReport, AtlasError> {
    let grid = grid.max(1);
    let inverse: Vec<(usize, f64, Vec<f64>)> = atlas
        .pieces
        .par_iter()
        .map(|piece| inverse_residual(atlas, piece, grid))
        .collect::<Result<_, _>>()?;

    let mut pairs: Vec<PairResidual> = Vec::new();
    for (piece, (n, r, pt)) in atlas.pieces.iter().zip(&inverse) {
        if *r > INVERTIBILITY_LIMIT {
            return Err(AtlasError::NotInvertible {
                from: atlas.name(piece.from).into(),
                to: atlas.name(piece.to).into(),
                point: pt.clone(),
                residual: *r,
            });
        }
        let (from, to) = (atlas.name(piece.from), atlas.name(piece.to));
        match pairs.iter_mut().find(|e| e.from == from && e.to == to) {
            Some(e) => {
                e.samples += n;
                if *r > e.max_residual {
                    e.max_residual = *r;
                    e.worst_point = pt.clone();
                }
            }
            None => pairs.push(PairResidual {
                from: from.into(),
                to: to.into(),
                samples: *n,
                max_residual: *r,
                worst_point: pt.clone(),
            }),
        }
    }

    let combos: Vec<(usize, usize)> = atlas
        .pieces
        .iter()
        .enumerate()
        .flat_map(|(i, first)| {
            atlas
                .pieces
                .iter()
                .enumerate()
                .filter(move |(_, second)| second.from == first.to && second.to != first.from)
                .map(move |(j, _)| (i, j))
        })
        .collect();
    let per_combo: Vec<(usize, f64, Vec<f64>)> = combos
        .par_iter()
        .map(|&(i, j)| {
            let (first, second) = (&atlas.pieces[i], &atlas.pieces[j]);
            let (samples, _) = midpoint_cells(&first.domain, grid);
            let mut count = 0;
            let mut worst = (0.0f64, Vec::new());
            for p in &samples {
                let q = apply(atlas, first, p)?;
                if !second.domain.contains(&q) {
                    continue;
                }
                let Some(direct) = atlas.piece_at(first.from, second.to, p) else {
                    continue;
                };
                let r = sup_distance(&apply(atlas, second, &q)?, &apply(atlas, direct, p)?);
                count += 1;
                if r > worst.0 || worst.1.is_empty() {
                    worst = (r, p.clone());
                }
            }
            Ok((count, worst.0, worst.1))
        })
        .collect::<Result<_, AtlasError>>()?;

    let mut triples: Vec<TripleResidual> = Vec::new();
    for (&(i, j), (n, r, pt)) in combos.iter().zip(per_combo) {
        if n == 0 {
            continue;
        }
        let names = [
            atlas.name(atlas.pieces[i].from).to_string(),
            atlas.name(atlas.pieces[i].to).to_string(),
            atlas.name(atlas.pieces[j].to).to_string(),
        ];
        match triples.iter_mut().find(|t| t.charts == names) {
            Some(t) => {
                t.samples += n;
                if r > t.max_residual {
                    t.max_residual = r;
                    t.worst_point = pt;
                }
            }
            None => triples.push(TripleResidual {
                charts: names,
                samples: n,
                max_residual: r,
                worst_point: pt,
            }),
        }
    }

    let passed = pairs.iter().all(|p| p.max_residual <= COCYCLE_TOLERANCE)
        && triples.iter().all(|t| t.max_residual <= COCYCLE_TOLERANCE);
    Ok(AtlasReport {
        pairs,
        triples,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureEntry {
    pub from: String,
    pub to: String,
    pub piece: usize,
    pub coordinate: usize,
    pub i: u32,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub k: u32,
    pub entries: Vec<StructureEntry>,
    pub verdict: Verdict,
}

/// For every overlap piece, coordinate `a` and `i ∈ [0,k]`, checks
/// `∂^i φ^a ∈ B_{α(i)} ∩ C^{k-β(i)}` on the piece.
pub fn check_regular_structure(
    atlas: &Atlas,
    family: Family,
    alpha: &IndexFn,
    beta: &IndexFn,
    budget: &Budget,
) -> Result<StructureReport, AtlasError> {
    let k = atlas.regularity.order();
    let template = MembershipTemplate::new(family, alpha.clone(), beta.clone(), k, (0..=k).collect());
    let jobs: Vec<(usize, usize)> = (0..atlas.pieces.len())
        .flat_map(|i| (0..atlas.dim).map(move |a| (i, a)))
        .collect();
    let results: Vec<Vec<StructureEntry>> = jobs
        .par_iter()
        .map(|&(i, a)| {
            let piece = &atlas.pieces[i];
            let u = Domain::from_rect(piece.domain.clone());
            let claim = check_membership(&piece.transition[a], &u, &template, budget).map_err(|e| {
                AtlasError::Invalid {
                    location: format!("atlas.overlaps[{i}].transition[{a}]"),
                    message: e.to_string(),
                }
            })?;
            Ok((0..=k)
                .map(|order| StructureEntry {
                    from: atlas.name(piece.from).into(),
                    to: atlas.name(piece.to).into(),
                    piece: i,
                    coordinate: a,
                    i: order,
                    verdict: claim.verdict_at(order),
                })
                .collect())
        })
        .collect::<Result<_, AtlasError>>()?;
    let entries: Vec<StructureEntry> = results.into_iter().flatten().collect();
    let verdict = Verdict::all(entries.iter().map(|e| e.verdict));
    Ok(StructureReport { k, entries, verdict })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::expr::Expr;
    use crate::spaces::Rect;

    #[test]
    fn single_chart_passes_vacuously() {
        let a = single_chart(Domain::interval(0.0, 1.0).unwrap());
        let r = verify_atlas(&a, 10).unwrap();
        assert!(r.passed && r.pairs.is_empty() && r.triples.is_empty());
        let s = check_regular_structure(&a, Family::Lp, &IndexFn::constant(1), &IndexFn::Identity, &Budget::for_dim(1)).unwrap();
        assert!(s.entries.is_empty());
        assert_eq!(s.verdict, Verdict::Member);
    }

    #[test]
    fn circle_atlases_pass() {
        for a in [s1_angle(), s1_exp()] {
            let r = verify_atlas(&a, 200).unwrap();
            assert!(r.passed, "{r:?}");
            assert_eq!(r.pairs.len(), 2);
            assert!(r.pairs.iter().all(|p| p.samples == 400));
        }
    }

    #[test]
    fn torus_cocycle_holds() {
        let r = verify_atlas(&t2_angle(), 12).unwrap();
        assert!(r.passed);
        assert_eq!(r.pairs.len(), 12);
        // Every ordered triple of distinct charts is declared.
        assert_eq!(r.triples.len(), 4 * 3 * 2);
    }

    #[test]
    fn wrong_inverse_is_located() {
        let mut a = s1_angle();
        a.pieces[3].transition = vec![Expr::parse("x1 - pi + 0.01").unwrap()];
        match verify_atlas(&a, 50) {
            Err(AtlasError::NotInvertible { from, to, residual, .. }) => {
                assert_eq!((from.as_str(), to.as_str()), ("A", "B"));
                assert!((residual - 0.01).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cocycle_failure_without_inverse_failure() {
        // Three charts on (0,1): B = A + 1, C = A + 2, but C -> B declared off by 1e-6.
        let ch = |n: &str, a: f64| Chart {
            name: n.into(),
            image: Domain::interval(a, a + 1.0).unwrap(),
        };
        let piece = |from, to, a: f64, e: &str| OverlapPiece {
            from,
            to,
            domain: Rect::interval(a, a + 1.0).unwrap(),
            transition: vec![Expr::parse(e).unwrap()],
        };
        let atlas = Atlas::new(
            vec![ch("A", 0.0), ch("B", 1.0), ch("C", 2.0)],
            vec![
                piece(0, 1, 0.0, "x1 + 1"),
                piece(1, 0, 1.0, "x1 - 1"),
                piece(0, 2, 0.0, "x1 + 2"),
                piece(2, 0, 2.0, "x1 - 2"),
                piece(1, 2, 1.0, "x1 + 1 + 0.000001"),
                piece(2, 1, 2.0, "x1 - 1 - 0.000001"),
            ],
            Regularity::smooth(),
        )
        .unwrap();
        let r = verify_atlas(&atlas, 20).unwrap();
        assert!(!r.passed);
        let bad: Vec<_> = r.triples.iter().filter(|t| t.max_residual > COCYCLE_TOLERANCE).collect();
        assert!(!bad.is_empty());
        assert!(r.pairs.iter().all(|p| p.max_residual < 1e-12));
    }

    #[test]
    fn affine_transitions_are_regular() {
        let s = check_regular_structure(
            &s1_angle(),
            Family::Lp,
            &IndexFn::constant(2),
            &IndexFn::Identity,
            &Budget::for_dim(1),
        )
        .unwrap();
        assert_eq!(s.entries.len(), 4 * 7);
        assert_eq!(s.verdict, Verdict::Member);
    }

    #[test]
    fn log_transition_derivative_is_not_integrable() {
        // B coordinate y = log(x) on (0,1) mapped onto (-inf, 0) is not
        // allowed (unbounded), so use y = x*log(x) + 1: y' = log(x) + 1 is
        // integrable, y'' = 1/x is not.
        let atlas = Atlas::new(
            vec![
                Chart {
                    name: "A".into(),
                    image: Domain::interval(0.0, 1.0).unwrap(),
                },
                Chart {
                    name: "B".into(),
                    image: Domain::interval(0.0, 2.0).unwrap(),
                },
            ],
            vec![OverlapPiece {
                from: 0,
                to: 1,
                domain: Rect::interval(0.0, 1.0).unwrap(),
                transition: vec![Expr::parse("x1*log(x1) + 1").unwrap()],
            }],
            Regularity::Finite { k: 2 },
        )
        .unwrap();
        let s = check_regular_structure(&atlas, Family::Lp, &IndexFn::constant(1), &IndexFn::constant(0), &Budget::for_dim(1))
            .unwrap();
        let at = |i| s.entries.iter().find(|e| e.i == i).unwrap().verdict;
        assert_eq!(at(1), Verdict::Member);
        assert_eq!(at(2), Verdict::NotMember);
    }
}
