use serde::Serialize;

use crate::expr::Expr;

use super::membership::{check_membership, ck_verdict, Budget, MembershipTemplate, Verdict};
use super::norms::closed_grid;
use super::{eval_all, Domain, SpaceError};

/// Whether `g` is a `C^k` bump on `U`: it vanishes identically on the band
/// between `∂U` and the deepest exhaustion set, and its derivatives up to
/// order `k` are stable there.
pub fn is_bump_on(g: &Expr, k: u32, u: &Domain, budget: &Budget) -> Result<Result<(), String>, SpaceError> {
    let inner = u.exhaustion(budget.levels);
    let n = 4 * budget.ck_grid + 1;
    for (b, core) in u.boxes().iter().zip(&inner) {
        let band: Vec<Vec<f64>> = closed_grid(b, n)
            .into_iter()
            .filter(|p| !core.contains(p) && b.contains(p))
            .collect();
        for (p, v) in band.iter().zip(eval_all(g, &band, &g.to_string())?) {
            if v != 0.0 {
                return Ok(Err(format!(
                    "`{g}` is {v} at {p:?}, outside every compact subset used for its support"
                )));
            }
        }
    }
    let mut evidence = Vec::new();
    match ck_verdict(g, k, u, budget, "bump", &mut evidence)? {
        Verdict::Member => Ok(Ok(())),
        other => Ok(Err(format!("`{g}` is not verified C^{k} ({other})"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureFailure {
    pub bump: String,
    pub function: String,
    pub verdict: Verdict,
    pub failing_orders: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    pub pairs_checked: usize,
    pub failures: Vec<ClosureFailure>,
    pub closed: bool,
}

/// For every bump `g` and member `f`, checks that `g·f` is again in
/// `B_{α(i)} ∩ C^{k-β(i)}` for every `i` of the template.
///
/// Inputs that are not members, or bumps that are not compactly supported,
/// violate the precondition and are reported as errors, not as closure
/// failures.
pub fn check_bkab_presheaf(
    template: &MembershipTemplate,
    u: &Domain,
    tests: &[Expr],
    bumps: &[Expr],
    budget: &Budget,
) -> Result<ClosureReport, SpaceError> {
    for g in bumps {
        if let Err(why) = is_bump_on(g, template.k, u, budget)? {
            return Err(SpaceError::Precondition(format!("not a bump: {why}")));
        }
    }
    for f in tests {
        let claim = check_membership(f, u, template, budget)?;
        if claim.verdict != Verdict::Member {
            return Err(SpaceError::Precondition(format!(
                "test function `{f}` is {} rather than a member",
                claim.verdict
            )));
        }
    }
    let mut failures = Vec::new();
    let mut pairs = 0;
    for g in bumps {
        for f in tests {
            pairs += 1;
            let product = Expr::mul(g.clone(), f.clone());
            let claim = check_membership(&product, u, template, budget)?;
            if claim.verdict != Verdict::Member {
                let mut failing: Vec<u32> = claim
                    .per_derivative
                    .iter()
                    .filter(|o| o.verdict != Verdict::Member)
                    .map(|o| o.i)
                    .collect();
                failing.dedup();
                failures.push(ClosureFailure {
                    bump: g.to_string(),
                    function: f.to_string(),
                    verdict: claim.verdict,
                    failing_orders: failing,
                });
            }
        }
    }
    Ok(ClosureReport {
        pairs_checked: pairs,
        closed: failures.is_empty(),
        failures,
    })
}
