//! Witness boxes for `Ω^c_{ab} ≠ Ω̄^c_{ab}`.
//!
//! Each chart box carries a node lattice strictly inside it. A cell is a seed
//! when the difference has one strict sign at all of its corners. A seed is
//! grown one layer at a time while the new nodes keep that sign, then the
//! grown box is re-sampled on a lattice refined `REFINEMENT` times. Seeds are
//! tried in lexicographic order of their lower corner.

use rayon::prelude::*;
use serde::Serialize;

use super::{additively_different, eval_at, MultiplicityError, ThreeParamFamily, DIFFERENCE_THRESHOLD};
use crate::atlas::Atlas;
use crate::expr::Expr;
use crate::spaces::{closed_grid, Rect};

pub const REFINEMENT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchBudget {
    /// Lattice cells per axis on each chart box.
    pub grid: usize,
    /// Seeds tried per component before giving up.
    pub max_seeds: usize,
}

impl SearchBudget {
    pub fn for_dim(dim: usize) -> SearchBudget {
        SearchBudget {
            grid: if dim <= 1 { 64 } else { 16 },
            max_seeds: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessOutcome {
    /// `|Ω^c_{ab} − Ω̄^c_{ab}| > 0` at every point of the refined lattice.
    Witness {
        region: Rect,
        refined_points: usize,
        min_difference: f64,
    },
    /// The two components are the same expression.
    Identical,
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentWitness {
    pub chart: String,
    pub c: usize,
    pub a: usize,
    pub b: usize,
    pub outcome: WitnessOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Difference {
    LocallyDifferent,
    /// Some component is identical in both families.
    NotLocallyDifferent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDifference {
    pub components: Vec<ComponentWitness>,
    pub verdict: Difference,
}

/// Searches a witness box for every chart and `(a, b, c)`. Requires the
/// smooth flag and additive difference on every chart and `c`.
pub fn locally_different(
    f: &ThreeParamFamily,
    g: &ThreeParamFamily,
    atlas: &Atlas,
    budget: &SearchBudget,
) -> Result<LocalDifference, MultiplicityError> {
    if !atlas.regularity.is_smooth() {
        return Err(MultiplicityError::NotSmooth);
    }
    if budget.grid < 3 {
        return Err(MultiplicityError::GridTooSmall(budget.grid));
    }
    for v in additively_different(f, g, atlas, budget.grid)? {
        if !v.different {
            return Err(MultiplicityError::NotAdditivelyDifferent { chart: v.chart, c: v.c });
        }
    }
    let n = atlas.dim;
    let jobs: Vec<(usize, usize)> = (0..atlas.charts.len())
        .flat_map(|s| (0..n * n * n).map(move |i| (s, i)))
        .collect();
    let results: Vec<Result<ComponentWitness, MultiplicityError>> = jobs
        .par_iter()
        .map(|&(s, i)| {
            let outcome = if f.omega[s][i] == g.omega[s][i] {
                WitnessOutcome::Identical
            } else {
                search_component(&f.omega[s][i], &g.omega[s][i], atlas.charts[s].image.boxes(), budget)?
            };
            Ok(ComponentWitness {
                chart: atlas.charts[s].name.clone(),
                c: i / (n * n),
                a: (i / n) % n,
                b: i % n,
                outcome,
            })
        })
        .collect();
    let components = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let verdict = if components.iter().any(|w| w.outcome == WitnessOutcome::Identical) {
        Difference::NotLocallyDifferent
    } else if components.iter().all(|w| matches!(w.outcome, WitnessOutcome::Witness { .. })) {
        Difference::LocallyDifferent
    } else {
        Difference::Inconclusive
    };
    Ok(LocalDifference { components, verdict })
}

/// Nodes `lo + i·h`, `i = 1..grid−1`, on one box, in lexicographic order.
struct Lattice {
    dim: usize,
    nodes: usize,
    lo: Vec<f64>,
    h: Vec<f64>,
    diff: Vec<f64>,
}

impl Lattice {
    fn point(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim).map(|k| self.lo[k] + (idx[k] + 1) as f64 * self.h[k]).collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, i| acc * self.nodes + i)
    }

    fn strict(&self, idx: &[usize], sign: f64) -> bool {
        sign * self.diff[self.flat(idx)] > DIFFERENCE_THRESHOLD
    }

    /// Every node index with `lo[k] <= idx[k] <= hi[k]`.
    fn nodes_in(&self, lo: &[usize], hi: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for k in 0..self.dim {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (lo[k]..=hi[k]).map(move |i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn all_strict(&self, lo: &[usize], hi: &[usize], sign: f64) -> bool {
        self.nodes_in(lo, hi).iter().all(|i| self.strict(i, sign))
    }

    fn rect(&self, lo: &[usize], hi: &[usize]) -> Rect {
        Rect {
            lo: self.point(lo),
            hi: self.point(hi),
        }
    }
}

fn difference(f: &Expr, g: &Expr, p: &[f64]) -> Result<f64, MultiplicityError> {
    Ok(eval_at(f, p, "first family")? - eval_at(g, p, "second family")?)
}

fn search_component(
    f: &Expr,
    g: &Expr,
    boxes: &[Rect],
    budget: &SearchBudget,
) -> Result<WitnessOutcome, MultiplicityError> {
    let mut seeds_tried = 0;
    let mut any_strict = false;
    for b in boxes {
        let dim = b.dim();
        let nodes = budget.grid - 1;
        let h: Vec<f64> = b.widths().iter().map(|w| w / budget.grid as f64).collect();
        let mut lattice = Lattice {
            dim,
            nodes,
            lo: b.lo.clone(),
            h,
            diff: Vec::new(),
        };
        let all = lattice.nodes_in(&vec![0; dim], &vec![nodes - 1; dim]);
        lattice.diff = all
            .iter()
            .map(|i| difference(f, g, &lattice.point(i)))
            .collect::<Result<_, _>>()?;
        any_strict |= lattice.diff.iter().any(|d| d.abs() > DIFFERENCE_THRESHOLD);
        for corner in lattice.nodes_in(&vec![0; dim], &vec![nodes - 2; dim]) {
            let sign = lattice.diff[lattice.flat(&corner)].signum();
            let upper: Vec<usize> = corner.iter().map(|i| i + 1).collect();
            if !lattice.all_strict(&corner, &upper, sign) {
                continue;
            }
            if seeds_tried == budget.max_seeds {
                return Ok(WitnessOutcome::Inconclusive {
                    reason: format!("no seed among the first {} survived refinement", budget.max_seeds),
                });
            }
            seeds_tried += 1;
            let (lo, hi) = grow(&lattice, corner.clone(), upper.clone(), sign);
            for (lo, hi) in [(lo, hi), (corner, upper)] {
                let region = lattice.rect(&lo, &hi);
                if let Some(outcome) = verify(f, g, region, &lo, &hi, sign)? {
                    return Ok(outcome);
                }
            }
        }
    }
    let reason = if any_strict {
        "differences at isolated nodes only; no cell has a strict sign".to_string()
    } else {
        format!("no lattice node with difference above {DIFFERENCE_THRESHOLD:e}")
    };
    Ok(WitnessOutcome::Inconclusive { reason })
}

/// Adds node layers on each side, axis by axis, while the new layer keeps
/// the strict sign.
fn grow(l: &Lattice, mut lo: Vec<usize>, mut hi: Vec<usize>, sign: f64) -> (Vec<usize>, Vec<usize>) {
    loop {
        let mut changed = false;
        for k in 0..l.dim {
            if lo[k] > 0 {
                let mut layer_lo = lo.clone();
                let mut layer_hi = hi.clone();
                layer_lo[k] = lo[k] - 1;
                layer_hi[k] = lo[k] - 1;
                if l.all_strict(&layer_lo, &layer_hi, sign) {
                    lo[k] -= 1;
                    changed = true;
                }
            }
            if hi[k] + 1 < l.nodes {
                let mut layer_lo = lo.clone();
                let mut layer_hi = hi.clone();
                layer_lo[k] = hi[k] + 1;
                layer_hi[k] = hi[k] + 1;
                if l.all_strict(&layer_lo, &layer_hi, sign) {
                    hi[k] += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return (lo, hi);
        }
    }
}

fn verify(
    f: &Expr,
    g: &Expr,
    region: Rect,
    lo: &[usize],
    hi: &[usize],
    sign: f64,
) -> Result<Option<WitnessOutcome>, MultiplicityError> {
    let cells = lo.iter().zip(hi).map(|(a, b)| b - a).max().unwrap_or(1);
    let pts = closed_grid(&region, REFINEMENT * cells + 1);
    let values: Vec<Result<f64, MultiplicityError>> = pts.par_iter().map(|p| difference(f, g, p)).collect();
    let mut min_difference = f64::INFINITY;
    for v in values {
        let v = v?;
        if sign * v <= DIFFERENCE_THRESHOLD {
            return Ok(None);
        }
        min_difference = min_difference.min(v.abs());
    }
    Ok(Some(WitnessOutcome::Witness {
        region,
        refined_points: pts.len(),
        min_difference,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{s1_angle, single_chart, t2_angle, Regularity};
    use crate::spaces::Domain;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn family(a: &Atlas, per_chart: &[&[&str]]) -> ThreeParamFamily {
        ThreeParamFamily::new(a, per_chart.iter().map(|fs| fs.iter().map(|s| e(s)).collect()).collect()).unwrap()
    }

    fn region(w: &ComponentWitness) -> &Rect {
        match &w.outcome {
            WitnessOutcome::Witness { region, .. } => region,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constants_give_full_chart_witnesses() {
        let a = t2_angle();
        let f = ThreeParamFamily::constant(&a, Expr::one());
        let g = ThreeParamFamily::constant(&a, Expr::zero());
        let budget = SearchBudget::for_dim(2);
        let r = locally_different(&f, &g, &a, &budget).unwrap();
        assert_eq!(r.verdict, Difference::LocallyDifferent);
        assert_eq!(r.components.len(), 4 * 8);
        let h = 2.0 * std::f64::consts::PI / budget.grid as f64;
        for w in &r.components {
            let reg = region(w);
            for k in 0..2 {
                assert!((reg.lo[k] - h).abs() < 1e-12);
                assert!((reg.hi[k] - (2.0 * std::f64::consts::PI - h)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn witnesses_avoid_the_zero_set() {
        let a = single_chart(Domain::interval(-1.0, 1.0).unwrap());
        let f = family(&a, &[&["x1 + cos(x1)"]]);
        let g = family(&a, &[&["cos(x1)"]]);
        for grid in [8, 9, 64] {
            let budget = SearchBudget { grid, max_seeds: 8 };
            let r = locally_different(&f, &g, &a, &budget).unwrap();
            assert_eq!(r.verdict, Difference::LocallyDifferent);
            let reg = region(&r.components[0]);
            // The lexicographically first seed lies left of zero.
            assert!(reg.hi[0] < 0.0, "{reg:?}");
            // Box-search oracle: the largest node box of one sign left of 0.
            let h = 2.0 / grid as f64;
            let last_negative = (1..grid).map(|i| -1.0 + i as f64 * h).rfind(|x| *x < -1e-12).unwrap();
            assert!((reg.lo[0] - (-1.0 + h)).abs() < 1e-12);
            assert!((reg.hi[0] - last_negative).abs() < 1e-12);
        }
    }

    #[test]
    fn witnesses_are_robust_at_random_points() {
        use rand::{Rng, SeedableRng};
        let a = t2_angle();
        let f = ThreeParamFamily::constant(&a, e("sin(x1) * cos(x2) + 0.1"));
        let g = ThreeParamFamily::constant(&a, Expr::zero());
        let r = locally_different(&f, &g, &a, &SearchBudget::for_dim(2)).unwrap();
        assert_eq!(r.verdict, Difference::LocallyDifferent);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for w in &r.components {
            let reg = region(w);
            for _ in 0..200 {
                let p: Vec<f64> = (0..2).map(|k| rng.gen_range(reg.lo[k]..reg.hi[k])).collect();
                let d = p[0].sin() * p[1].cos() + 0.1;
                assert!(d.abs() > 0.0);
            }
        }
    }

    #[test]
    fn isolated_difference_is_inconclusive() {
        let a = single_chart(Domain::interval(0.0, 1.0).unwrap());
        // One spike on a lattice node, one on a midpoint for the additive check.
        let f = family(&a, &[&["exp(-((x1 - 0.5)/0.001)^2) + exp(-((x1 - 0.5625)/0.001)^2)"]]);
        let g = ThreeParamFamily::constant(&a, Expr::zero());
        let r = locally_different(&f, &g, &a, &SearchBudget { grid: 8, max_seeds: 4 }).unwrap();
        assert_eq!(r.verdict, Difference::Inconclusive);
        assert!(matches!(&r.components[0].outcome, WitnessOutcome::Inconclusive { reason } if reason.contains("isolated")));
    }

    #[test]
    fn identical_component_under_additive_difference() {
        let a = single_chart(Domain::new(vec![Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()]).unwrap());
        let f = family(&a, &[&["1", "x1", "0", "0", "1", "0", "0", "x2"]]);
        let g = family(&a, &[&["0", "x1", "0", "0", "0", "0", "0", "x2"]]);
        let r = locally_different(&f, &g, &a, &SearchBudget::for_dim(2)).unwrap();
        assert_eq!(r.verdict, Difference::NotLocallyDifferent);
        let identical = r.components.iter().filter(|w| w.outcome == WitnessOutcome::Identical).count();
        assert_eq!(identical, 6);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let a = s1_angle();
        let f = ThreeParamFamily::constant(&a, Expr::one());
        assert!(matches!(
            locally_different(&f, &f, &a, &SearchBudget::for_dim(1)),
            Err(MultiplicityError::NotAdditivelyDifferent { c: 0, .. })
        ));
        let mut finite = a.clone();
        finite.regularity = Regularity::Finite { k: 4 };
        let g = ThreeParamFamily::constant(&finite, Expr::zero());
        assert_eq!(
            locally_different(&f, &g, &finite, &SearchBudget::for_dim(1)),
            Err(MultiplicityError::NotSmooth)
        );
    }
}
