use serde::Serialize;

use crate::atlas::{
    box_bump, build_partition, check_regular_structure, Atlas, PartitionOfUnity,
};
use crate::connective::{
    check_degree, check_distributive, check_nice, check_partition_preservation, globalize_regularity,
    ConnectiveError, ConnectiveStructure, LevelVerdict, PartitionPreservation,
};
use crate::expr::Expr;
use crate::index_algebra::{
    format_index, gamma_z, idx, ordinary_witness, to_i64, AdditiveDegreeSet, Bound, DistributiveStructure,
    Index, IndexFn,
};
use crate::spaces::{Budget, Domain, Family, MembershipTemplate, Rect, Verdict};

use super::glue::{glue, glue_with, verify_connection_law, GlobalConnection, LawMode, LawReport};
use super::{coeff_index, glued_regularity_indices, ConnectionError, GluedIndices, LocalCoefficients};

/// Sample data for the niceness, distributivity and composition checks.
#[derive(Clone, Debug, PartialEq)]
pub struct NiceTests {
    pub domain: Domain,
    pub tests: Vec<Expr>,
    pub bumps: Vec<Expr>,
    pub points: Vec<Vec<f64>>,
}

impl NiceTests {
    /// The constant 1 and a bump on the first box shrunk by a tenth on each side, with
    /// points along its diagonal.
    pub fn standard(domain: &Domain) -> NiceTests {
        let b = domain.boxes()[0].clone();
        let inner = b.shrink_relative(0.1);
        let bump = box_bump(&inner);
        let points = [0.5, 0.1, 0.3, 0.45, 0.7, 0.9]
            .iter()
            .map(|t| b.lo.iter().zip(&b.hi).map(|(lo, hi)| lo + t * (hi - lo)).collect())
            .collect();
        NiceTests {
            domain: Domain::from_rect(b),
            tests: vec![Expr::one(), bump.clone()],
            bumps: vec![bump],
            points,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineInput {
    pub atlas: Atlas,
    pub family: Family,
    /// Regularity of the atlas transitions.
    pub alpha: IndexFn,
    pub beta: IndexFn,
    pub ds: DistributiveStructure,
    /// Regularity claimed for the local coefficients.
    pub alpha0: IndexFn,
    pub beta0: IndexFn,
    pub locals: Vec<LocalCoefficients>,
    pub margin: f64,
    pub cs: ConnectiveStructure,
    pub z: u32,
    pub theta: IndexFn,
    pub vartheta: IndexFn,
    pub nice: NiceTests,
    pub budget: Budget,
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartMembership {
    pub chart: String,
    pub coefficient: [usize; 3],
    pub domain: Vec<Rect>,
    pub gamma: String,
    pub per_level: Vec<LevelVerdict>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub glued_indices: GluedIndices,
    pub hypotheses: Vec<HypothesisCheck>,
    pub partition: PartitionPreservation,
    pub law: LawReport,
    pub membership: Vec<ChartMembership>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// `Σ ξ(ψ_{s'}) · (Γ_{s'})_ξ`.
    pub connection: GlobalConnection,
    /// The plain gluing `Σ ψ_{s'} · f_{s';s}`.
    pub glued: GlobalConnection,
    pub partition: PartitionOfUnity,
    pub report: PipelineReport,
}

/// `U_{N(s)}`: the part of chart `s` lying in every overlap `U_s ∩ U_{s'}`,
/// `s' ∈ N(s)`, as disjoint boxes in chart-`s` coordinates.
pub fn neighbourhood_domain(atlas: &Atlas, s: usize) -> Option<Domain> {
    let mut boxes: Vec<Rect> = atlas.charts[s].image.boxes().to_vec();
    for t in atlas.neighbours(s) {
        if t == s {
            continue;
        }
        let pieces: Vec<&Rect> = atlas.pieces_between(s, t).map(|p| &p.domain).collect();
        boxes = boxes
            .iter()
            .flat_map(|b| pieces.iter().filter_map(move |p| b.intersect(p)))
            .collect();
    }
    if boxes.is_empty() {
        None
    } else {
        Domain::new(boxes).ok()
    }
}

fn abort(hypothesis: &str, detail: impl Into<String>) -> ConnectionError {
    ConnectionError::Hypothesis {
        hypothesis: hypothesis.into(),
        detail: detail.into(),
    }
}

struct Ledger(Vec<HypothesisCheck>);

impl Ledger {
    fn require(&mut self, name: &str, passed: bool, detail: String) -> Result<(), ConnectionError> {
        self.0.push(HypothesisCheck {
            name: name.into(),
            passed,
            detail: detail.clone(),
        });
        if passed {
            Ok(())
        } else {
            Err(abort(name, detail))
        }
    }
}

/// Builds a connection whose coefficients are claimed to be
/// `(B, k, θ, ϑ | Γ_k[z])`-functions, checking every hypothesis on the way.
///
/// Hypotheses are checked cheapest first; the first failure aborts with its
/// name. Then: local coefficients are glued, `ξ` is applied to the partition
/// and the locals, the transformation law is verified, and the claim is
/// re-verified per chart on `U_{N(s)}`.
pub fn regular_existence_pipeline(input: &PipelineInput) -> Result<PipelineOutput, ConnectionError> {
    let a = &input.atlas;
    let cs = &input.cs;
    let k = a.regularity.order();
    let mut ledger = Ledger(Vec::new());

    ledger.require("k >= 2", k >= 2, format!("atlas class {k}"))?;
    ledger.require(
        "connective degree set matches the atlas class",
        cs.k == k,
        format!("connective structure on [0,{}], atlas class {k}", cs.k),
    )?;
    cs.validate()
        .map_err(|e| abort("connective structure is well formed", e.to_string()))?;

    let (a0p, b0p) = glued_regularity_indices(&input.ds, &input.alpha, &input.beta, &input.alpha0, &input.beta0)?;
    let a_j = idx(cs.alpha0_j()?);
    let b_j = idx(cs.beta0_j()?);
    ledger.require(
        "alpha'(j) = alpha'_0 and beta'(j) = beta'_0",
        a_j == a0p && b_j == b0p,
        format!(
            "connective structure gives ({}, {}), the glued indices are ({}, {})",
            format_index(&a_j),
            format_index(&b_j),
            format_index(&a0p),
            format_index(&b0p)
        ),
    )?;

    let z = idx(i64::from(input.z));
    let gamma = gamma_z(&AdditiveDegreeSet::standard(Bound::Finite(k)), cs.beta0_j()?, &z)?;
    let dom: Vec<Index> = (0..=i64::from(k)).map(idx).collect();
    let (o, q) = cs.tables();
    let (theta_map, vartheta_map) = match (input.theta.to_map("theta", &dom), input.vartheta.to_map("vartheta", &dom)) {
        (Some(t), Some(v)) => (t, v),
        _ => return Err(abort("ordinary in Gamma_k[z]", format!("theta or vartheta undefined on [0,{k}]"))),
    };
    match ordinary_witness(&theta_map, &vartheta_map, &z, &o, &q, &gamma)? {
        Ok(_) => ledger.require("ordinary in Gamma_k[z]", true, format!("Gamma_k[z] = {gamma}"))?,
        Err(l) => ledger.require(
            "ordinary in Gamma_k[z]",
            false,
            format!("no pair in O x Q realises l = {}", format_index(&l)),
        )?,
    }
    let levels: Vec<u32> = gamma
        .elements()
        .unwrap_or_default()
        .iter()
        .filter_map(to_i64)
        .map(|l| l as u32)
        .collect();
    let bad = levels
        .iter()
        .find(|&&l| input.vartheta.at(l).is_none_or(|v| i64::from(l) > v));
    ledger.require(
        "i <= vartheta(i)",
        bad.is_none(),
        bad.map_or_else(String::new, |l| format!("fails at i = {l}")),
    )?;

    let structure = check_regular_structure(a, input.family, &input.alpha, &input.beta, &input.budget)?;
    ledger.require(
        "regular atlas",
        structure.verdict == Verdict::Member,
        format!("transition derivatives: {}", structure.verdict),
    )?;

    let local_template = MembershipTemplate::new(input.family, input.alpha0.clone(), input.beta0.clone(), k, vec![0]);
    let mut local_verdict = Verdict::Member;
    for l in &input.locals {
        for c in l.verify_claim(a, &local_template, &input.budget)? {
            local_verdict = local_verdict.and(c.verdict);
        }
    }
    ledger.require(
        "local coefficients are (B, k, alpha0, beta0)-functions",
        local_verdict == Verdict::Member,
        format!("verdict {local_verdict}"),
    )?;

    let a0p_i = to_i64(&a0p).ok_or_else(|| abort("integral glued index", format_index(&a0p)))?;
    let b0p_i = to_i64(&b0p).ok_or_else(|| abort("integral glued index", format_index(&b0p)))?;
    let template = MembershipTemplate::new(
        input.family,
        IndexFn::constant(a0p_i),
        IndexFn::constant(b0p_i),
        k,
        vec![0],
    );
    let nt = &input.nice;
    let nice = match check_nice(cs, &nt.tests, &nt.bumps, &nt.points, &nt.domain, &template, &input.budget, input.grid) {
        Ok(r) => r,
        Err(ConnectiveError::NonMemberInput { function, verdict }) => {
            return Err(abort("niceness test data", format!("`{function}`: {verdict}")))
        }
        Err(e) => return Err(e.into()),
    };
    for (name, v) in [
        ("support preserving", &nice.support_preserving),
        ("bump preserving", &nice.bump_preserving),
        ("unital", &nice.unital),
    ] {
        ledger.require(
            name,
            v.passed(),
            v.witness
                .as_ref()
                .map_or_else(|| format!("{} checks", v.checked), |w| format!("{} at {:?}", w.detail, w.point)),
        )?;
    }

    let functions: Vec<Expr> = nt.tests.iter().chain(&nt.bumps).cloned().collect();
    let dist = check_distributive(&cs.xi, &functions, &nt.points)?;
    ledger.require(
        "distributive",
        dist.passed,
        format!(
            "product residual {:e}, sum residual {:e}",
            dist.max_product_residual, dist.max_sum_residual
        ),
    )?;
    let laws = cs.check_laws(&functions, &nt.points)?;
    let failing = laws.iter().find(|r| !r.passed);
    ledger.require(
        "composition law",
        failing.is_none(),
        failing.map_or_else(|| "all declared triples".into(), |r| format!("{}: {:?}", r.table, r.failures)),
    )?;
    let degree = check_degree(cs, a, 2, input.grid.min(32))?;
    ledger.require(
        "degree r >= 2",
        degree.passed,
        format!("max residual {:e}", degree.max_residual),
    )?;

    let pou = build_partition(a, input.margin)?;
    let partition = check_partition_preservation(cs, a, &pou, input.samples, input.seed, &input.budget)?;
    ledger.require(
        "partition preservation",
        partition.passed,
        format!(
            "sum deviation {:e}, support violations {}, class {}",
            partition.partition.max_deviation, partition.partition.support_violations, partition.class_verdict
        ),
    )?;

    let glued = glue(a, &pou, &input.locals)?;
    let connection = if cs.xi.is_identity() {
        glued.clone()
    } else {
        glue_with(a, &pou, &input.locals, cs.xi.as_ref())?
    };
    let law = verify_connection_law(&connection, a, input.grid, LawMode::Symbolic, input.tol)?;

    let n = a.dim;
    let mut membership = Vec::new();
    for s in 0..a.charts.len() {
        let Some(u) = neighbourhood_domain(a, s) else {
            continue;
        };
        for (i, f) in glued.coefficients[s].iter().enumerate() {
            let coefficient = [i / (n * n), (i / n) % n, i % n];
            debug_assert_eq!(coeff_index(n, coefficient[0], coefficient[1], coefficient[2]), i);
            let entry = match globalize_regularity(
                f,
                &u,
                input.family,
                cs,
                input.z,
                &input.theta,
                &input.vartheta,
                &input.budget,
            ) {
                Ok(g) => ChartMembership {
                    chart: a.name(s).into(),
                    coefficient,
                    domain: u.boxes().to_vec(),
                    gamma: g.gamma,
                    per_level: g.per_level,
                    verdict: g.verdict,
                },
                Err(ConnectiveError::NonMemberInput { verdict, .. }) => ChartMembership {
                    chart: a.name(s).into(),
                    coefficient,
                    domain: u.boxes().to_vec(),
                    gamma: gamma.to_string(),
                    per_level: Vec::new(),
                    verdict: if verdict == "inconclusive" {
                        Verdict::Inconclusive
                    } else {
                        Verdict::NotMember
                    },
                },
                Err(e) => return Err(e.into()),
            };
            membership.push(entry);
        }
    }

    let law_verdict = if law.passed {
        Verdict::Member
    } else {
        Verdict::NotMember
    };
    let verdict = law_verdict.and(Verdict::all(membership.iter().map(|m| m.verdict)));
    Ok(PipelineOutput {
        connection,
        glued,
        partition: pou,
        report: PipelineReport {
            glued_indices: GluedIndices::new((a0p, b0p)),
            hypotheses: ledger.0,
            partition,
            law,
            membership,
            verdict,
        },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::atlas::{s1_angle, Regularity};
    use crate::connective::{minimal_identity, Xi};
    use crate::connection::local_connection;

    // S¹ of class 4 with L^p spaces: transitions in L^12 ∩ C^{4-2}, locals in
    // L^12 ∩ C^{4-2}. Hölder arithmetic gives α'_0 = 3, β'_0 = 2.
    pub(crate) fn circle_input(xi: Xi) -> PipelineInput {
        let mut atlas = s1_angle();
        atlas.regularity = Regularity::Finite { k: 4 };
        let budget = Budget::for_dim(1);
        let locals = ["x1^2", "sin(x1)"]
            .iter()
            .enumerate()
            .map(|(s, f)| local_connection(&atlas, atlas.name(s), vec![Expr::parse(f).unwrap()], &budget).unwrap())
            .collect();
        let cs = minimal_identity(IndexFn::constant(3), IndexFn::constant(3), IndexFn::constant(2), IndexFn::constant(2), 0, 4)
            .unwrap()
            .with_xi(Arc::new(xi));
        let nice = NiceTests::standard(&atlas.charts[0].image);
        PipelineInput {
            family: Family::Lp,
            alpha: IndexFn::constant(12),
            beta: IndexFn::constant(2),
            ds: DistributiveStructure::holder_lp(&[1, 2, 3, 4, 6, 12]).unwrap(),
            alpha0: IndexFn::constant(12),
            beta0: IndexFn::constant(2),
            locals,
            margin: 0.3,
            cs,
            z: 0,
            theta: IndexFn::constant(3),
            vartheta: IndexFn::constant(2),
            nice,
            budget,
            grid: 64,
            samples: 1000,
            seed: 11,
            tol: 1e-6,
            atlas,
        }
    }

    #[test]
    fn circle_pipeline_with_identity() {
        let input = circle_input(Xi::Identity);
        let out = regular_existence_pipeline(&input).unwrap();
        let r = &out.report;
        assert_eq!(r.glued_indices, GluedIndices { alpha0_prime: "3".into(), beta0_prime: "2".into() });
        assert!(r.hypotheses.iter().all(|h| h.passed));
        assert!(r.law.passed, "{}", r.law.max_residual);
        assert_eq!(r.membership.len(), 2);
        assert_eq!(r.verdict, Verdict::Member, "{:?}", r.membership);
        assert_eq!(r.membership[0].gamma, "[0,2]");
        // Identity ξ: the output is the gluing itself.
        assert_eq!(out.connection, out.glued);
        let direct = glue(&input.atlas, &out.partition, &input.locals).unwrap();
        assert_eq!(out.connection.coefficients, direct.coefficients);
    }

    #[test]
    fn non_nice_structure_aborts_on_support() {
        let err = regular_existence_pipeline(&circle_input(Xi::AddConstant(Expr::one()))).unwrap_err();
        match err {
            ConnectionError::Hypothesis { hypothesis, .. } => assert_eq!(hypothesis, "support preserving"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_ordinary_pair_aborts() {
        let mut input = circle_input(Xi::Identity);
        input.theta = IndexFn::constant(6);
        let err = regular_existence_pipeline(&input).unwrap_err();
        match err {
            ConnectionError::Hypothesis { hypothesis, detail } => {
                assert_eq!(hypothesis, "ordinary in Gamma_k[z]");
                assert!(detail.contains("l = 0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_glued_index_aborts() {
        let mut input = circle_input(Xi::Identity);
        input.alpha = IndexFn::constant(6);
        let err = regular_existence_pipeline(&input).unwrap_err();
        assert!(matches!(err, ConnectionError::Index(_) | ConnectionError::Hypothesis { .. }));
    }

    #[test]
    fn neighbourhood_of_a_circle_chart() {
        let a = s1_angle();
        let u = neighbourhood_domain(&a, 0).unwrap();
        assert_eq!(u.boxes().len(), 2);
        let pi = std::f64::consts::PI;
        assert!(u.contains(&[1.0]) && u.contains(&[4.0]) && !u.contains(&[pi]));
    }
}
