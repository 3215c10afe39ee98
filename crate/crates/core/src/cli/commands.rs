use serde::Serialize;
use serde_json::{json, Value};

use crate::atlas::{build_partition, check_regular_structure, verify_atlas, Atlas, PartitionOfUnity};
use crate::connection::{
    glue, glued_regularity_indices, regular_existence_pipeline, verify_connection_law, ConnectionError,
    GlobalConnection, GluedIndices, LawMode, NiceTests, PipelineInput,
};
use crate::index_algebra::{gamma_z, idx, to_i64, AdditiveDegreeSet, Bound, IndexSet, LawCheck, EXHAUSTIVE_LIMIT};
use crate::multiplicity::{additively_different, locally_different, residual, Difference, MultiplicityError, SearchBudget};
use crate::spaces::{
    check_membership, holder_product_check, young_convolution_check, Budget, Domain, MembershipTemplate, Verdict,
};

use super::config::{self, section, InequalityKind, RunConfig};
use super::{Command, Outcome, RunError, Status};

pub(crate) fn dispatch(command: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    match command {
        Command::CheckAlgebra => check_algebra(cfg),
        Command::CheckSpaces => check_spaces(cfg),
        Command::CheckAtlas => check_atlas(cfg),
        Command::BuildPartition => partition(cfg),
        Command::Glue => glue_command(cfg),
        Command::Pipeline => pipeline(cfg),
        Command::Multiplicity => multiplicity(cfg),
        Command::Residual => residual_command(cfg),
    }
}

fn failed(e: impl ToString) -> RunError {
    RunError::Failed(e.to_string())
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn pass_fail(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn connection_error(e: ConnectionError) -> RunError {
    match e {
        ConnectionError::Hypothesis { hypothesis, detail } => RunError::Precondition { hypothesis, detail },
        ConnectionError::SingularJacobian { .. } => RunError::Precondition {
            hypothesis: "invertible transitions".into(),
            detail: e.to_string(),
        },
        ConnectionError::MissingLocal(chart) => RunError::Config {
            location: format!("connection.locals.{chart}"),
            message: "no local coefficients".into(),
        },
        other => failed(other),
    }
}

fn coefficient_strings(g: &GlobalConnection) -> Value {
    let map: serde_json::Map<String, Value> = g
        .charts
        .iter()
        .zip(&g.coefficients)
        .map(|(c, fs)| (c.clone(), Value::from(fs.iter().map(|f| f.to_string()).collect::<Vec<_>>())))
        .collect();
    Value::Object(map)
}

fn check_algebra(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let ds = cfg.structure()?;
    let exhaustive = ds.base.len().is_some_and(|n| n <= EXHAUSTIVE_LIMIT);
    let mode = if exhaustive {
        LawCheck::Exhaustive
    } else {
        LawCheck::Sampled {
            budget: cfg.settings.law_samples,
            seed: cfg.settings.seed,
        }
    };
    let laws = ds.check_laws(mode).map_err(failed)?;
    let mut ok = laws.passed();
    let mut summary = vec![format!(
        "{} on {}: {} triples ({}), {} law violations, {} idempotence failures",
        ds.name(),
        ds.base,
        laws.triples_checked,
        if exhaustive { "exhaustive" } else { "sampled" },
        laws.violations.len(),
        laws.idempotence_failures.len()
    )];
    let mut result = json!({
        "structure": ds.name(),
        "base": ds.base.to_string(),
        "exhaustive": exhaustive,
        "laws": value(&laws),
    });
    if let (Some(sp), Some(c)) = (&cfg.spaces, &cfg.connection) {
        let entry = match glued_regularity_indices(&ds, &sp.alpha, &sp.beta, &c.alpha0, &c.beta0) {
            Ok(pair) => {
                let g = GluedIndices::new(pair);
                summary.push(format!("glued indices alpha'_0 = {}, beta'_0 = {}", g.alpha0_prime, g.beta0_prime));
                value(&g)
            }
            Err(e) => {
                summary.push(format!("glued indices undefined: {e}"));
                json!({ "undefined": e.to_string() })
            }
        };
        result["glued_indices"] = entry;
    }
    if let Some(w) = &cfg.window {
        let ads = AdditiveDegreeSet::standard(Bound::Finite(w.k));
        let top = i64::from(w.k) - w.beta0_j;
        if top < 0 || w.beta0_j < 2 {
            return Err(RunError::Config {
                location: "window.beta0_j".into(),
                message: format!("needs 2 <= beta0(j) <= k = {}", w.k),
            });
        }
        let mut rows = Vec::new();
        let mut previous: Option<IndexSet> = None;
        let mut antitone = true;
        for z in 0..=top {
            let set = gamma_z(&ads, w.beta0_j, &idx(z)).map_err(failed)?;
            if let Some(p) = &previous {
                antitone &= set.is_subset(p);
            }
            rows.push(json!({ "z": z, "gamma": set.to_string() }));
            previous = Some(set);
        }
        ok &= antitone;
        summary.push(format!(
            "Gamma_{}[z] for beta0(j) = {}, z = 0..{top}: {}",
            w.k,
            w.beta0_j,
            if antitone { "antitone" } else { "NOT antitone" }
        ));
        result["window"] = json!({ "k": w.k, "beta0_j": w.beta0_j, "sets": rows, "antitone": antitone });
    }
    Ok(Outcome {
        status: pass_fail(ok),
        summary,
        result,
    })
}

fn composable_pairs(ds: &crate::index_algebra::DistributiveStructure) -> Result<Vec<[i64; 2]>, RunError> {
    let elems = ds.base.elements().ok_or_else(|| RunError::Config {
        location: "spaces.inequalities.pairs".into(),
        message: "the index base is infinite; list the pairs".into(),
    })?;
    let mut out = Vec::new();
    for i in &elems {
        for j in &elems {
            if ds.eps(i, j).is_ok() {
                if let (Some(a), Some(b)) = (to_i64(i), to_i64(j)) {
                    out.push([a, b]);
                }
            }
        }
    }
    Ok(out)
}

fn check_spaces(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let sp = section(&cfg.spaces, "spaces")?;
    let mut verdicts = Vec::new();
    let mut claims = Vec::new();
    let mut summary = Vec::new();
    for (n, c) in sp.claims.iter().enumerate() {
        let loc = format!("spaces.claims[{n}]");
        let f = config::expr(&c.function, &format!("{loc}.function"))?;
        let u = config::domain(&c.domain, &format!("{loc}.domain"))?;
        let t = MembershipTemplate::new(
            sp.family,
            c.alpha.clone().unwrap_or_else(|| sp.alpha.clone()),
            c.beta.clone().unwrap_or_else(|| sp.beta.clone()),
            sp.k,
            c.s.clone(),
        );
        let claim = check_membership(&f, &u, &t, &Budget::for_dim(u.dim())).map_err(|e| RunError::Config {
            location: loc.clone(),
            message: e.to_string(),
        })?;
        summary.push(format!("{}: {}", c.function, claim.verdict));
        verdicts.push(claim.verdict);
        claims.push(value(&claim));
    }
    let mut inequalities = Vec::new();
    if !sp.inequalities.is_empty() {
        let ds = cfg.structure()?;
        for (n, q) in sp.inequalities.iter().enumerate() {
            let loc = format!("spaces.inequalities[{n}]");
            let f = config::expr(&q.f, &format!("{loc}.f"))?;
            let g = config::expr(&q.g, &format!("{loc}.g"))?;
            let r = config::rect(&q.domain.lo, &q.domain.hi, &format!("{loc}.domain"))?;
            let pairs = match &q.pairs {
                Some(p) => p.clone(),
                None => composable_pairs(&ds)?,
            };
            let cells = q.cells.unwrap_or(2048);
            let mut held = 0;
            for [i, j] in &pairs {
                let check = match q.kind {
                    InequalityKind::Holder => holder_product_check(
                        &f,
                        &g,
                        *i,
                        *j,
                        &ds,
                        &Domain::from_rect(r.clone()),
                        cells,
                        cfg.settings.tol,
                    ),
                    InequalityKind::Young => young_convolution_check(&f, &g, *i, *j, &ds, &r, cells, cfg.settings.tol),
                }
                .map_err(|e| RunError::Config {
                    location: format!("{loc}.pairs"),
                    message: e.to_string(),
                })?;
                held += usize::from(check.holds);
                verdicts.push(if check.holds { Verdict::Member } else { Verdict::NotMember });
                inequalities.push(json!({ "index": n, "kind": format!("{:?}", q.kind).to_lowercase(), "check": value(&check) }));
            }
            summary.push(format!("inequality {n} ({:?}): {held}/{} pairs hold", q.kind, pairs.len()));
        }
    }
    let verdict = Verdict::all(verdicts);
    Ok(Outcome {
        status: Status::from_verdict(verdict),
        summary,
        result: json!({ "claims": claims, "inequalities": inequalities, "verdict": value(&verdict) }),
    })
}

fn check_atlas(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let report = verify_atlas(&atlas, cfg.settings.grid).map_err(failed)?;
    let worst = report
        .pairs
        .iter()
        .map(|p| p.max_residual)
        .chain(report.triples.iter().map(|t| t.max_residual))
        .fold(0.0, f64::max);
    let mut summary = vec![format!(
        "{} charts, {} overlap pieces: inverse and cocycle residual {worst:e} ({})",
        atlas.charts.len(),
        atlas.pieces.len(),
        if report.passed { "ok" } else { "FAILED" }
    )];
    let mut verdict = if report.passed { Verdict::Member } else { Verdict::NotMember };
    let mut result = json!({ "consistency": value(&report), "regularity": value(&atlas.regularity) });
    if let Some(sp) = &cfg.spaces {
        let s = check_regular_structure(&atlas, sp.family, &sp.alpha, &sp.beta, &Budget::for_dim(atlas.dim))
            .map_err(failed)?;
        summary.push(format!("transition regularity up to order {}: {}", s.k, s.verdict));
        verdict = verdict.and(s.verdict);
        result["structure"] = value(&s);
    }
    Ok(Outcome {
        status: Status::from_verdict(verdict),
        summary,
        result,
    })
}

fn partition_of(cfg: &RunConfig, atlas: &Atlas) -> Result<PartitionOfUnity, RunError> {
    build_partition(atlas, cfg.margin()?).map_err(|e| RunError::Precondition {
        hypothesis: "shrunk charts cover the manifold".into(),
        detail: e.to_string(),
    })
}

fn partition(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let pou = partition_of(cfg, &atlas)?;
    let check = pou.check(&atlas, cfg.settings.samples, cfg.settings.seed).map_err(failed)?;
    let supports: serde_json::Map<String, Value> = atlas
        .charts
        .iter()
        .zip(&pou.supports)
        .map(|(c, s)| (c.name.clone(), value(s)))
        .collect();
    let psi: serde_json::Map<String, Value> = atlas
        .charts
        .iter()
        .zip(&pou.psi)
        .map(|(c, p)| (c.name.clone(), Value::from(p.to_string())))
        .collect();
    Ok(Outcome {
        status: pass_fail(check.passed),
        summary: vec![format!(
            "sum of psi within {:e} of 1 at {} samples, min value {:e}, {} support violations",
            check.max_deviation, check.samples, check.min_value, check.support_violations
        )],
        result: json!({ "margin": pou.margin, "check": value(&check), "supports": supports, "psi": psi }),
    })
}

fn glue_command(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let pou = partition_of(cfg, &atlas)?;
    let locals = config::locals(cfg, &atlas, &Budget::for_dim(atlas.dim))?;
    let g = glue(&atlas, &pou, &locals).map_err(connection_error)?;
    let s = &cfg.settings;
    let symbolic = verify_connection_law(&g, &atlas, s.grid, LawMode::Symbolic, s.tol).map_err(connection_error)?;
    let grid = verify_connection_law(&g, &atlas, s.grid, LawMode::Grid, s.grid_tol).map_err(connection_error)?;
    Ok(Outcome {
        status: pass_fail(symbolic.passed && grid.passed),
        summary: vec![
            format!("symbolic law residual {:e} (tol {:e})", symbolic.max_residual, s.tol),
            format!("finite-difference law residual {:e} (tol {:e})", grid.max_residual, s.grid_tol),
        ],
        result: json!({
            "law_symbolic": value(&symbolic),
            "law_grid": value(&grid),
            "provenance": g.provenance,
            "coefficients": coefficient_strings(&g),
        }),
    })
}

fn glued_pair(cfg: &RunConfig) -> Result<(i64, i64), RunError> {
    let ds = cfg.structure()?;
    let sp = section(&cfg.spaces, "spaces")?;
    let c = section(&cfg.connection, "connection")?;
    let (a, b) = glued_regularity_indices(&ds, &sp.alpha, &sp.beta, &c.alpha0, &c.beta0).map_err(|e| {
        RunError::Precondition {
            hypothesis: "glued indices are defined".into(),
            detail: e.to_string(),
        }
    })?;
    match (to_i64(&a), to_i64(&b)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(RunError::Precondition {
            hypothesis: "glued indices are defined".into(),
            detail: "glued indices are not integers".into(),
        }),
    }
}

fn pipeline(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let sp = section(&cfg.spaces, "spaces")?;
    let c = section(&cfg.connection, "connection")?;
    let cc = section(&cfg.connective, "connective")?;
    let budget = Budget::for_dim(atlas.dim);
    let cs = config::connective(cfg, || glued_pair(cfg), atlas.regularity.order())?;
    let input = PipelineInput {
        nice: NiceTests::standard(&atlas.charts[0].image),
        family: sp.family,
        alpha: sp.alpha.clone(),
        beta: sp.beta.clone(),
        ds: cfg.structure()?,
        alpha0: c.alpha0.clone(),
        beta0: c.beta0.clone(),
        locals: config::locals(cfg, &atlas, &budget)?,
        margin: cfg.margin()?,
        cs,
        z: cc.z,
        theta: cc.theta.clone(),
        vartheta: cc.vartheta.clone(),
        budget,
        grid: cfg.settings.grid,
        samples: cfg.settings.samples,
        seed: cfg.settings.seed,
        tol: cfg.settings.tol,
        atlas,
    };
    let out = regular_existence_pipeline(&input).map_err(connection_error)?;
    let r = &out.report;
    let mut summary = vec![format!(
        "glued indices alpha'_0 = {}, beta'_0 = {}",
        r.glued_indices.alpha0_prime, r.glued_indices.beta0_prime
    )];
    summary.push(format!("{} hypotheses checked", r.hypotheses.len()));
    summary.push(format!("connection law residual {:e}", r.law.max_residual));
    summary.push(format!(
        "{} coefficient memberships: {}",
        r.membership.len(),
        r.verdict
    ));
    Ok(Outcome {
        status: Status::from_verdict(r.verdict),
        summary,
        result: json!({ "report": value(r), "coefficients": coefficient_strings(&out.connection) }),
    })
}

fn multiplicity_error(e: MultiplicityError) -> RunError {
    match e {
        MultiplicityError::NotSmooth => RunError::Precondition {
            hypothesis: "smooth atlas".into(),
            detail: e.to_string(),
        },
        MultiplicityError::NotAdditivelyDifferent { .. } => RunError::Precondition {
            hypothesis: "locally additively different".into(),
            detail: e.to_string(),
        },
        MultiplicityError::AtlasMismatch(_) | MultiplicityError::CoefficientCount { .. } => RunError::Config {
            location: "multiplicity".into(),
            message: e.to_string(),
        },
        other => failed(other),
    }
}

fn multiplicity(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let m = section(&cfg.multiplicity, "multiplicity")?;
    let f = config::family(&atlas, &m.first, "multiplicity.first")?;
    let g = config::family(&atlas, &m.second, "multiplicity.second")?;
    let budget = SearchBudget {
        grid: cfg.settings.grid,
        max_seeds: m.max_seeds.unwrap_or(SearchBudget::for_dim(atlas.dim).max_seeds),
    };
    let additive = additively_different(&f, &g, &atlas, budget.grid).map_err(multiplicity_error)?;
    let local = locally_different(&f, &g, &atlas, &budget).map_err(multiplicity_error)?;
    let witnesses = local
        .components
        .iter()
        .filter(|c| matches!(c.outcome, crate::multiplicity::WitnessOutcome::Witness { .. }))
        .count();
    let status = match local.verdict {
        Difference::LocallyDifferent => Status::Pass,
        Difference::NotLocallyDifferent => Status::Fail,
        Difference::Inconclusive => Status::Inconclusive,
    };
    Ok(Outcome {
        status,
        summary: vec![
            format!("additively different on all {} (chart, c) pairs", additive.len()),
            format!("{witnesses}/{} components have a witness box", local.components.len()),
        ],
        result: json!({ "additive": value(&additive), "local": value(&local), "budget": value(&budget) }),
    })
}

fn residual_command(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let atlas = cfg.atlas()?;
    let pou = partition_of(cfg, &atlas)?;
    let locals = config::locals(cfg, &atlas, &Budget::for_dim(atlas.dim))?;
    let cs = config::connective(cfg, || glued_pair(cfg), atlas.regularity.order())?;
    let r = section(&cfg.residual, "residual")?;
    let omega = config::family(&atlas, &r.omega, "residual.omega")?;
    let report = residual(&locals, &cs, &atlas, &pou, &omega, cfg.settings.grid).map_err(|e| match e {
        MultiplicityError::Connection(c) => connection_error(c),
        other => failed(other),
    })?;
    let lhs: serde_json::Map<String, Value> = atlas
        .charts
        .iter()
        .zip(&report.lhs)
        .map(|(c, fs)| (c.name.clone(), Value::from(fs.iter().map(|f| f.to_string()).collect::<Vec<_>>())))
        .collect();
    Ok(Outcome {
        status: pass_fail(report.max <= cfg.settings.tol),
        summary: vec![format!(
            "sup |F^c - Omega^c| = {:e} over {} (chart, c) pairs",
            report.max,
            report.entries.len()
        )],
        result: json!({ "residual": value(&report), "lhs": lhs }),
    })
}
