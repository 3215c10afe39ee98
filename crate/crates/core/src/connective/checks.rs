use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::{check_partition, Atlas, PartitionCheck, PartitionOfUnity};
use crate::expr::{exponent_pairs, multi_indices, Expr};
use crate::spaces::{
    check_ck, check_membership, closed_grid, is_bump_on, midpoint_cells, Budget, Domain,
    MembershipTemplate, SpaceError, Verdict,
};

use super::{CompositionTable, ConnectiveError, ConnectiveStructure, Transformer};

pub const DEGREE_TOLERANCE: f64 = 1e-10;
pub const DISTRIBUTIVITY_TOLERANCE: f64 = 1e-10;
pub const PARTITION_TOLERANCE: f64 = 1e-12;
/// Agreement required for table compositions and the unital condition.
const EQUALITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub function: String,
    pub point: Vec<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub verdict: Verdict,
    pub checked: usize,
    pub witness: Option<Witness>,
}

impl PropertyVerdict {
    fn new() -> PropertyVerdict {
        PropertyVerdict {
            verdict: Verdict::Member,
            checked: 0,
            witness: None,
        }
    }

    fn fail(&mut self, w: Witness) {
        self.verdict = Verdict::NotMember;
        if self.witness.is_none() {
            self.witness = Some(w);
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Member
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NicenessReport {
    pub transformer: String,
    pub support_preserving: PropertyVerdict,
    pub bump_preserving: PropertyVerdict,
    pub unital: PropertyVerdict,
    pub nice: bool,
}

fn eval_at(f: &Expr, p: &[f64]) -> Result<f64, SpaceError> {
    f.eval(p).map_err(|source| SpaceError::Eval {
        what: f.to_string(),
        point: p.to_vec(),
        source,
    })
}

fn grid_points(u: &Domain, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    // Each interior grid point paired with its spacing.
    let mut out = Vec::new();
    for b in u.boxes() {
        let h: Vec<f64> = b.widths().iter().map(|w| w / (n - 1) as f64).collect();
        for p in closed_grid(b, n) {
            if b.contains(&p) {
                out.push((p, h.clone()));
            }
        }
    }
    out
}

/// `f` vanishes at `p` and at the neighbouring grid points, so `p` lies
/// outside `supp f`.
fn vanishes_near(f: &Expr, p: &[f64], h: &[f64]) -> Result<bool, SpaceError> {
    if eval_at(f, p)? != 0.0 {
        return Ok(false);
    }
    for d in 0..p.len() {
        for s in [-1.0, 1.0] {
            let mut q = p.to_vec();
            q[d] += s * h[d];
            if eval_at(f, &q)? != 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Checks the three niceness conditions for `cs.xi` on sample data.
///
/// `tests` must be members of `template` on `u`; `bumps` must be bump
/// functions of class `C^k` on `u`. The unital condition is checked at
/// `points` for every input taking the value 1 there.
#[allow(clippy::too_many_arguments)]
pub fn check_nice(
    cs: &ConnectiveStructure,
    tests: &[Expr],
    bumps: &[Expr],
    points: &[Vec<f64>],
    u: &Domain,
    template: &MembershipTemplate,
    budget: &Budget,
    grid: usize,
) -> Result<NicenessReport, ConnectiveError> {
    let xi = &cs.xi;
    for f in tests {
        let claim = check_membership(f, u, template, budget)?;
        if claim.verdict != Verdict::Member {
            return Err(ConnectiveError::NonMemberInput {
                function: f.to_string(),
                verdict: claim.verdict.to_string(),
            });
        }
    }
    for g in bumps {
        if let Err(reason) = is_bump_on(g, cs.k, u, budget)? {
            return Err(ConnectiveError::NonMemberInput {
                function: g.to_string(),
                verdict: reason,
            });
        }
    }
    let inputs: Vec<&Expr> = tests.iter().chain(bumps).collect();

    let samples = grid_points(u, grid.max(3));
    let mut support = PropertyVerdict::new();
    for f in &inputs {
        let xf = xi.apply(f);
        for (p, h) in &samples {
            if !vanishes_near(f, p, h)? {
                continue;
            }
            support.checked += 1;
            let v = eval_at(&xf, p)?;
            if v != 0.0 {
                support.fail(Witness {
                    function: f.to_string(),
                    point: p.clone(),
                    detail: format!("f vanishes near the point but xi f = {v:e}"),
                });
            }
        }
    }

    let mut bump = PropertyVerdict::new();
    for g in bumps {
        bump.checked += 1;
        let xg = xi.apply(g);
        let (v, evidence) = check_ck(&xg, cs.k, u, budget)?;
        if v == Verdict::NotMember {
            let detail = evidence
                .iter()
                .find(|e| e.verdict == Verdict::NotMember)
                .map_or_else(String::new, |e| e.test.clone());
            bump.fail(Witness {
                function: g.to_string(),
                point: Vec::new(),
                detail: format!("xi g is not C^{}: {detail}", cs.k),
            });
        } else if v == Verdict::Inconclusive && bump.verdict == Verdict::Member {
            bump.verdict = Verdict::Inconclusive;
        }
    }

    let mut unital = PropertyVerdict::new();
    for f in &inputs {
        let xf = xi.apply(f);
        for p in points {
            if (eval_at(f, p)? - 1.0).abs() > EQUALITY_TOLERANCE {
                continue;
            }
            unital.checked += 1;
            let v = eval_at(&xf, p)?;
            if (v - 1.0).abs() > EQUALITY_TOLERANCE {
                unital.fail(Witness {
                    function: f.to_string(),
                    point: p.clone(),
                    detail: format!("f = 1 but xi f = {v}"),
                });
            }
        }
    }

    let nice = support.passed() && bump.passed() && unital.passed();
    Ok(NicenessReport {
        transformer: xi.name(),
        support_preserving: support,
        bump_preserving: bump,
        unital,
        nice,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeReport {
    pub r: u32,
    pub comparisons: usize,
    pub max_residual: f64,
    pub witness: Option<Witness>,
    pub passed: bool,
}

/// Degree `r`: for `l ≤ r` and target pairs `(θ, ϑ)` with `l ≤ ϑ(l)`,
/// `ξ^{α,β}_{θ,ϑ}(∂^l φ) = ∂^l φ` on every overlap piece.
pub fn check_degree(
    cs: &ConnectiveStructure,
    atlas: &Atlas,
    r: u32,
    grid: usize,
) -> Result<DegreeReport, ConnectiveError> {
    let k = atlas.regularity.order();
    if r > k {
        return Err(ConnectiveError::OrderTooHigh { r, k });
    }
    let source = format!("{},{}", cs.alpha, cs.beta);
    let mut targets: Vec<&Transformer> = Vec::new();
    for l in 0..=r {
        for t in &cs.o {
            for v in &cs.q {
                if v.map.at(l).is_some_and(|x| i64::from(l) <= x) {
                    let xi = cs.xi_between(&source, &format!("{},{}", t.name, v.name));
                    if !targets.iter().any(|x| x.name() == xi.name()) {
                        targets.push(xi);
                    }
                }
            }
        }
    }

    let mut jobs = Vec::new();
    for (i, piece) in atlas.pieces.iter().enumerate() {
        for a in 0..atlas.dim {
            for l in 0..=r {
                for mu in multi_indices(atlas.dim, l) {
                    jobs.push((i, piece, a, mu));
                }
            }
        }
    }
    let results: Vec<Result<(usize, f64, Option<Witness>), ConnectiveError>> = jobs
        .par_iter()
        .map(|(i, piece, a, mu)| {
            let d = piece.transition[*a]
                .differentiate(&exponent_pairs(mu))
                .map_err(SpaceError::from)?;
            let (points, _) = midpoint_cells(&piece.domain, grid.max(2));
            let mut worst = 0.0f64;
            let mut witness = None;
            let mut n = 0;
            for xi in &targets {
                let xd = xi.apply(&d);
                for p in &points {
                    n += 1;
                    let res = (eval_at(&xd, p)? - eval_at(&d, p)?).abs();
                    if res > worst {
                        worst = res;
                        if res > DEGREE_TOLERANCE {
                            witness = Some(Witness {
                                function: format!("d^{mu:?} of overlap piece {i} coordinate {a}"),
                                point: p.clone(),
                                detail: format!("{}: residual {res:e}", xi.name()),
                            });
                        }
                    }
                }
            }
            Ok((n, worst, witness))
        })
        .collect();
    let mut report = DegreeReport {
        r,
        comparisons: 0,
        max_residual: 0.0,
        witness: None,
        passed: true,
    };
    for res in results {
        let (n, worst, witness) = res?;
        report.comparisons += n;
        report.max_residual = report.max_residual.max(worst);
        if report.witness.is_none() {
            report.witness = witness;
        }
    }
    report.passed = report.max_residual <= DEGREE_TOLERANCE;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionPreservation {
    pub partition: PartitionCheck,
    pub class_order: u32,
    pub class_verdict: Verdict,
    pub passed: bool,
}

/// Applies `ξ` to each `ψ_s` and re-verifies the result as a partition of
/// unity subordinate to the same supports. The class condition is checked
/// up to order `min(k, 2)`.
pub fn check_partition_preservation(
    cs: &ConnectiveStructure,
    atlas: &Atlas,
    pou: &PartitionOfUnity,
    samples: usize,
    seed: u64,
    budget: &Budget,
) -> Result<PartitionPreservation, ConnectiveError> {
    let psi: Vec<Expr> = pou.psi.iter().map(|p| cs.xi.apply(p)).collect();
    let supports: Vec<_> = pou
        .psi
        .iter()
        .zip(&pou.supports)
        .enumerate()
        .map(|(s, (p, sup))| {
            if p.is_one() {
                atlas.charts[s].image.boxes().to_vec()
            } else {
                sup.clone()
            }
        })
        .collect();
    let partition = check_partition(atlas, &supports, &psi, samples, seed, PARTITION_TOLERANCE)?;
    let class_order = cs.k.min(2);
    let verdicts: Vec<Result<Verdict, SpaceError>> = psi
        .par_iter()
        .zip(&atlas.charts)
        .map(|(p, c)| check_ck(p, class_order, &c.image, budget).map(|(v, _)| v))
        .collect();
    let mut class_verdict = Verdict::Member;
    for v in verdicts {
        class_verdict = class_verdict.and(v?);
    }
    let passed = partition.passed && class_verdict == Verdict::Member;
    Ok(PartitionPreservation {
        partition,
        class_order,
        class_verdict,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionReport {
    pub table: String,
    pub triples: usize,
    pub max_residual: f64,
    pub failures: Vec<[String; 3]>,
    pub passed: bool,
}

/// `D(a, c) = D(b, c) ∘ D(a, b)` for every declared triple, compared on the
/// sample functions at the sample points.
pub fn check_composition(
    name: &str,
    table: &CompositionTable,
    functions: &[Expr],
    points: &[Vec<f64>],
) -> Result<CompositionReport, ConnectiveError> {
    let triples = table.triples();
    let mut report = CompositionReport {
        table: name.to_string(),
        triples: triples.len(),
        max_residual: 0.0,
        failures: Vec::new(),
        passed: true,
    };
    for (a, b, c) in triples {
        let ab = table.get(&a, &b).unwrap();
        let bc = table.get(&b, &c).unwrap();
        let ac = table.get(&a, &c).unwrap();
        let mut worst = 0.0f64;
        for f in functions {
            let direct = ac.apply(f);
            let composed = bc.apply(&ab.apply(f));
            for p in points {
                let x = eval_at(&direct, p)?;
                let y = eval_at(&composed, p)?;
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
        }
        report.max_residual = report.max_residual.max(worst);
        if worst > EQUALITY_TOLERANCE {
            report.failures.push([a, b, c]);
        }
    }
    report.passed = report.failures.is_empty();
    Ok(report)
}

impl ConnectiveStructure {
    /// Composition laws of `D_O`, `D_Q` and the `ξ` table on samples.
    pub fn check_laws(
        &self,
        functions: &[Expr],
        points: &[Vec<f64>],
    ) -> Result<Vec<CompositionReport>, ConnectiveError> {
        Ok(vec![
            check_composition("D_O", &self.d_o, functions, points)?,
            check_composition("D_Q", &self.d_q, functions, points)?,
            check_composition("xi", &self.xi_table, functions, points)?,
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributivityReport {
    pub transformer: String,
    pub pairs: usize,
    pub max_product_residual: f64,
    pub max_sum_residual: f64,
    pub witness: Option<Witness>,
    pub passed: bool,
}

/// `ξ(fg) = ξf·ξg` and `ξ(f+g) = ξf + ξg` on every ordered pair of sample
/// functions, relative to `max(1, |value|)`.
pub fn check_distributive(
    xi: &Transformer,
    functions: &[Expr],
    points: &[Vec<f64>],
) -> Result<DistributivityReport, ConnectiveError> {
    let mut report = DistributivityReport {
        transformer: xi.name(),
        pairs: 0,
        max_product_residual: 0.0,
        max_sum_residual: 0.0,
        witness: None,
        passed: true,
    };
    for f in functions {
        for g in functions {
            report.pairs += 1;
            let xf = xi.apply(f);
            let xg = xi.apply(g);
            let xfg = xi.apply(&Expr::mul(f.clone(), g.clone()));
            let xsum = xi.apply(&Expr::add(f.clone(), g.clone()));
            for p in points {
                let (a, b) = (eval_at(&xf, p)?, eval_at(&xg, p)?);
                let prod = eval_at(&xfg, p)?;
                let sum = eval_at(&xsum, p)?;
                let rp = (prod - a * b).abs() / prod.abs().max(1.0);
                let rs = (sum - (a + b)).abs() / sum.abs().max(1.0);
                report.max_product_residual = report.max_product_residual.max(rp);
                report.max_sum_residual = report.max_sum_residual.max(rs);
                if (rp > DISTRIBUTIVITY_TOLERANCE || rs > DISTRIBUTIVITY_TOLERANCE)
                    && report.witness.is_none()
                {
                    report.witness = Some(Witness {
                        function: format!("f = {f}, g = {g}"),
                        point: p.clone(),
                        detail: format!("product residual {rp:e}, sum residual {rs:e}"),
                    });
                }
            }
        }
    }
    report.passed = report.max_product_residual <= DISTRIBUTIVITY_TOLERANCE
        && report.max_sum_residual <= DISTRIBUTIVITY_TOLERANCE;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::{identity, minimal_identity, Xi};
    use super::*;
    use crate::atlas::{build_partition, s1_angle, s1_exp, single_chart};
    use crate::index_algebra::IndexFn;
    use crate::spaces::{Family, Rect};

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn structure(xi: Xi) -> ConnectiveStructure {
        minimal_identity(IndexFn::constant(2), IndexFn::constant(2), IndexFn::constant(2), IndexFn::constant(2), 0, 2)
            .unwrap()
            .with_xi(Arc::new(xi))
    }

    fn setup() -> (Domain, MembershipTemplate, Vec<Expr>, Vec<Expr>, Vec<Vec<f64>>) {
        let u = Domain::interval(-1.0, 1.0).unwrap();
        let t = MembershipTemplate::new(Family::Lp, IndexFn::constant(2), IndexFn::constant(0), 2, vec![0]);
        let tests = vec![p("1"), p("x1^2"), p("bump(4*x1 - 2)")];
        let bumps = vec![p("bump(2*x1)")];
        let points = vec![vec![0.0], vec![0.3], vec![-0.7]];
        (u, t, tests, bumps, points)
    }

    fn nice(xi: Xi) -> NicenessReport {
        let (u, t, tests, bumps, points) = setup();
        let cs = structure(xi);
        check_nice(&cs, &tests, &bumps, &points, &u, &t, &Budget::for_dim(1), 81).unwrap()
    }

    #[test]
    fn identity_is_nice() {
        let r = nice(Xi::Identity);
        assert!(r.nice, "{r:?}");
        assert!(r.support_preserving.checked > 0);
        assert!(r.unital.checked > 0);
    }

    #[test]
    fn adding_one_breaks_support() {
        let r = nice(Xi::AddConstant(Expr::one()));
        assert!(!r.support_preserving.passed());
        let w = r.support_preserving.witness.unwrap();
        // Oracle: bump(4x - 2) vanishes for x <= 1/4, where xi f = 1.
        assert!(w.point[0] < 0.25);
        assert!(!r.nice);
    }

    #[test]
    fn multiplying_by_a_bump_is_not_unital() {
        let r = nice(Xi::Multiply(p("bump(x1)")));
        assert!(r.support_preserving.passed());
        assert!(!r.unital.passed());
        let w = r.unital.witness.unwrap();
        // Oracle: f = 1 at x = 0 and xi f = bump(0) = e^{-1}.
        assert_eq!(w.point, vec![0.0]);
        assert!(w.detail.contains(&format!("{}", (-1.0f64).exp())));
    }

    #[test]
    fn non_member_test_input_is_rejected() {
        let (u, t, _, bumps, points) = setup();
        let cs = structure(Xi::Identity);
        let u_pos = Domain::interval(0.0, 1.0).unwrap();
        let err = check_nice(&cs, &[p("1/x1")], &[], &points, &u_pos, &t, &Budget::for_dim(1), 41).unwrap_err();
        assert!(matches!(err, ConnectiveError::NonMemberInput { .. }));
        let err = check_nice(&cs, &[], &[p("1")], &points, &u, &t, &Budget::for_dim(1), 41).unwrap_err();
        assert!(matches!(err, ConnectiveError::NonMemberInput { .. }));
        let _ = bumps;
    }

    #[test]
    fn identity_has_every_degree() {
        let cs = structure(Xi::Identity);
        let a = s1_exp();
        for r in 0..=3 {
            let d = check_degree(&cs, &a, r, 16).unwrap();
            assert!(d.passed && d.max_residual == 0.0);
        }
    }

    #[test]
    fn doubling_fails_degree_at_order_zero() {
        let cs = structure(Xi::Scale(Expr::num(2)));
        let d = check_degree(&cs, &s1_angle(), 0, 8).unwrap();
        assert!(!d.passed);
        let w = d.witness.unwrap();
        assert!(w.function.starts_with("d^[0]"));
    }

    #[test]
    fn degree_above_class_is_rejected() {
        let mut a = s1_angle();
        a.regularity = crate::atlas::Regularity::Finite { k: 2 };
        let cs = structure(Xi::Identity);
        assert_eq!(
            check_degree(&cs, &a, 3, 8).unwrap_err(),
            ConnectiveError::OrderTooHigh { r: 3, k: 2 }
        );
    }

    #[test]
    fn identity_preserves_the_circle_partition() {
        let a = s1_angle();
        let pou = build_partition(&a, 0.1).unwrap();
        let r = check_partition_preservation(&structure(Xi::Identity), &a, &pou, 1000, 5, &Budget::for_dim(1)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.partition.max_deviation < 1e-12);
    }

    #[test]
    fn support_violation_breaks_the_partition() {
        let a = s1_angle();
        let pou = build_partition(&a, 0.1).unwrap();
        let cs = structure(Xi::AddConstant(Expr::rational(num_rational::Ratio::new(1, 10))));
        let r = check_partition_preservation(&cs, &a, &pou, 200, 5, &Budget::for_dim(1)).unwrap();
        assert!(!r.passed);
        assert!(r.partition.support_violations > 0);
        // Oracle: each point sees both charts, so the sum is 1 + 2/10.
        assert!((r.partition.max_deviation - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_chart_partition_is_preserved() {
        let a = single_chart(Domain::from_rect(Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()));
        let pou = build_partition(&a, 0.1).unwrap();
        let cs = structure(Xi::Identity);
        assert!(check_partition_preservation(&cs, &a, &pou, 50, 1, &Budget::for_dim(2)).unwrap().passed);
    }

    #[test]
    fn identity_tables_compose() {
        let mut cs = structure(Xi::Identity);
        for (a, b) in [("x", "y"), ("y", "z"), ("x", "z")] {
            cs.d_o.entries.push((a.into(), b.into(), identity()));
        }
        let reports = cs.check_laws(&[p("x1"), p("sin(x1)")], &[vec![0.5], vec![1.5]]).unwrap();
        assert_eq!(reports[0].triples, 1);
        assert!(reports.iter().all(|r| r.passed));
    }

    #[test]
    fn inconsistent_table_is_caught() {
        let mut cs = structure(Xi::Identity);
        cs.d_q.entries.push(("x".into(), "y".into(), Arc::new(Xi::Scale(Expr::num(2)))));
        cs.d_q.entries.push(("y".into(), "z".into(), Arc::new(Xi::Scale(Expr::num(3)))));
        cs.d_q.entries.push(("x".into(), "z".into(), Arc::new(Xi::Scale(Expr::num(5)))));
        let r = check_composition("D_Q", &cs.d_q, &[p("x1")], &[vec![1.0]]).unwrap();
        assert_eq!(r.failures, vec![["x".to_string(), "y".to_string(), "z".to_string()]]);
        // 6x versus 5x at x = 1, relative to 5.
        assert!((r.max_residual - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distributivity_on_samples() {
        let fs = [p("x1"), p("cos(x1)"), p("x1^2 + 1")];
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.2 * f64::from(i)]).collect();
        assert!(check_distributive(&identity(), &fs, &pts).unwrap().passed);
        let scale: Transformer = Arc::new(Xi::Scale(Expr::num(2)));
        let r = check_distributive(&scale, &fs, &pts).unwrap();
        // Additive but not multiplicative: 2fg versus 4fg.
        assert_eq!(r.max_sum_residual, 0.0);
        assert!(!r.passed);
    }
}
