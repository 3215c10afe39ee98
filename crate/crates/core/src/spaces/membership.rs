use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{exponent_pairs, multi_indices, Expr};
use crate::index_algebra::IndexFn;

use super::norms::{ck_seminorm, lp_norm};
use super::{Domain, SpaceError, DEFAULT_LEVELS};

/// Relative change between the last two refinements below which an
/// estimate counts as stable.
pub const STABILITY_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Member,
    NotMember,
    Inconclusive,
}

impl Verdict {
    /// Conjunction: any non-member wins, then any inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (NotMember, _) | (_, NotMember) => NotMember,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Member,
        }
    }

    pub fn all<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().fold(Verdict::Member, Verdict::and)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Member => "member",
            Verdict::NotMember => "not-member",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Decides a verdict from a sequence of norm estimates on successively
/// refined grids.
///
/// Member: the last two estimates agree within [`STABILITY_TOLERANCE`].
/// Not-member: at least three strictly increasing estimates, the last
/// change above tolerance, and the increments not shrinking by more than
/// half (a convergent estimate contracts). Anything else is inconclusive.
pub fn classify_refinements(values: &[f64]) -> Verdict {
    if values.iter().any(|v| !v.is_finite()) {
        return Verdict::NotMember;
    }
    let n = values.len();
    if n < 2 {
        return Verdict::Inconclusive;
    }
    let (prev, last) = (values[n - 2], values[n - 1]);
    let scale = last.abs().max(prev.abs());
    let rel = if scale == 0.0 {
        0.0
    } else {
        (last - prev).abs() / scale
    };
    if n >= 3 && rel > STABILITY_TOLERANCE && values.windows(2).all(|w| w[1] > w[0]) {
        let d_last = values[n - 1] - values[n - 2];
        let d_prev = values[n - 2] - values[n - 3];
        if d_last > 0.5 * d_prev {
            return Verdict::NotMember;
        }
    }
    if rel <= STABILITY_TOLERANCE {
        Verdict::Member
    } else {
        Verdict::Inconclusive
    }
}

/// Which Banach family `B = (B_i)` the first factor of the intersection is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `B_i = L^i`.
    Lp,
    /// `B_i = C^{k-i}`.
    Ck,
}

/// The claim `∂^i f ∈ B_{α(i)}(U) ∩ C^{k-β(i)}(U)` for every `i ∈ S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipTemplate {
    pub family: Family,
    pub alpha: IndexFn,
    pub beta: IndexFn,
    pub k: u32,
    pub s: Vec<u32>,
}

impl MembershipTemplate {
    pub fn new(family: Family, alpha: IndexFn, beta: IndexFn, k: u32, s: Vec<u32>) -> Self {
        MembershipTemplate {
            family,
            alpha,
            beta,
            k,
            s,
        }
    }

    fn b_space(&self, i: u32) -> Result<String, SpaceError> {
        let a = self.alpha.at(i).ok_or_else(|| {
            SpaceError::Unsupported(format!("alpha({i}) = {}", self.alpha.format_at(i)))
        })?;
        match self.family {
            Family::Lp if a >= 1 => Ok(format!("L^{a}")),
            Family::Lp => Err(SpaceError::Unsupported(format!(
                "L^p family needs alpha({i}) >= 1, got {a}"
            ))),
            Family::Ck if (0..=i64::from(self.k)).contains(&a) => {
                Ok(format!("C^{}", i64::from(self.k) - a))
            }
            Family::Ck => Err(SpaceError::Unsupported(format!(
                "C^(k-i) family needs alpha({i}) in [0,{}], got {a}",
                self.k
            ))),
        }
    }

    fn c_order(&self, i: u32) -> Result<u32, SpaceError> {
        match self.beta.at(i) {
            Some(b) if (0..=i64::from(self.k)).contains(&b) => Ok(self.k - b as u32),
            _ => Err(SpaceError::Unsupported(format!(
                "beta({i}) = {} outside [0,{}]",
                self.beta.format_at(i),
                self.k
            ))),
        }
    }
}

/// Grid sizes and refinement schedule for numeric membership.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Midpoint cells per axis at the coarsest `L^p` level (doubled per level).
    pub lp_grid: usize,
    /// Closed-grid points per axis at the coarsest sup level (`n -> 2n-1`).
    pub ck_grid: usize,
    pub refinements: usize,
    /// Number of exhaustion sets `K_0, ..., K_{levels-1}` checked.
    pub levels: usize,
}

impl Budget {
    pub fn for_dim(dim: usize) -> Budget {
        match dim {
            1 => Budget {
                lp_grid: 512,
                ck_grid: 65,
                refinements: 3,
                levels: DEFAULT_LEVELS,
            },
            2 => Budget {
                lp_grid: 64,
                ck_grid: 17,
                refinements: 3,
                levels: DEFAULT_LEVELS,
            },
            _ => Budget {
                lp_grid: 16,
                ck_grid: 5,
                refinements: 3,
                levels: 2,
            },
        }
    }

    pub fn scaled(self, grid: usize) -> Budget {
        Budget {
            lp_grid: grid.max(2),
            ck_grid: (grid / 8).max(5) | 1,
            ..self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub test: String,
    pub values: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderVerdict {
    pub i: u32,
    pub derivative: Vec<u32>,
    pub b_space: String,
    pub b_verdict: Verdict,
    pub c_space: String,
    pub c_verdict: Verdict,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipClaim {
    pub function: String,
    pub per_derivative: Vec<OrderVerdict>,
    pub evidence: Vec<Evidence>,
    pub verdict: Verdict,
}

impl MembershipClaim {
    pub fn verdict_at(&self, i: u32) -> Verdict {
        Verdict::all(self.per_derivative.iter().filter(|o| o.i == i).map(|o| o.verdict))
    }
}

pub(crate) fn lp_verdict(
    g: &Expr,
    p: u32,
    u: &Domain,
    budget: &Budget,
    label: &str,
    evidence: &mut Vec<Evidence>,
) -> Result<Verdict, SpaceError> {
    let mut values = Vec::with_capacity(budget.refinements);
    let mut n = budget.lp_grid;
    for _ in 0..budget.refinements {
        values.push(lp_norm(g, p, u, n)?);
        n *= 2;
    }
    let verdict = classify_refinements(&values);
    evidence.push(Evidence {
        test: format!("L^{p} norm of {label}"),
        values,
        verdict,
    });
    Ok(verdict)
}

/// `g ∈ C^m(U)`: on every `K_l`, each seminorm of order `0..=m` is stable
/// under nested grid refinement.
pub(crate) fn ck_verdict(
    g: &Expr,
    m: u32,
    u: &Domain,
    budget: &Budget,
    label: &str,
    evidence: &mut Vec<Evidence>,
) -> Result<Verdict, SpaceError> {
    let mut verdict = Verdict::Member;
    for l in 0..budget.levels {
        let k_l = u.exhaustion(l);
        for r in 0..=m {
            let mut values = Vec::with_capacity(budget.refinements);
            let mut n = budget.ck_grid;
            for _ in 0..budget.refinements {
                let mut sup = 0.0f64;
                for b in &k_l {
                    sup = sup.max(ck_seminorm(g, r, b, n)?);
                }
                values.push(sup);
                n = 2 * n - 1;
            }
            let v = classify_refinements(&values);
            evidence.push(Evidence {
                test: format!("order-{r} seminorm of {label} on K_{l}"),
                values,
                verdict: v,
            });
            verdict = verdict.and(v);
        }
    }
    Ok(verdict)
}

/// `g ∈ C^m(U)` on its own, with the evidence gathered.
pub fn check_ck(g: &Expr, m: u32, u: &Domain, budget: &Budget) -> Result<(Verdict, Vec<Evidence>), SpaceError> {
    let mut evidence = Vec::new();
    let v = ck_verdict(g, m, u, budget, &g.to_string(), &mut evidence)?;
    Ok((v, evidence))
}

/// Checks `∂^μ f ∈ B_{α(i)}(U) ∩ C^{k-β(i)}(U)` for every `i ∈ S` and every
/// multi-index `|μ| = i`. The overall verdict is the conjunction.
pub fn check_membership(
    f: &Expr,
    u: &Domain,
    template: &MembershipTemplate,
    budget: &Budget,
) -> Result<MembershipClaim, SpaceError> {
    let mut per_derivative = Vec::new();
    let mut evidence = Vec::new();
    for &i in &template.s {
        if i > template.k {
            return Err(SpaceError::Unsupported(format!(
                "derivative order {i} outside [0,{}]",
                template.k
            )));
        }
        let b_space = template.b_space(i)?;
        let m = template.c_order(i)?;
        for mu in multi_indices(u.dim(), i) {
            let g = f.differentiate(&exponent_pairs(&mu))?;
            let label = if i == 0 {
                "f".to_string()
            } else {
                format!("d^{mu:?} f")
            };
            let b_verdict = match template.family {
                Family::Lp => {
                    let p = template.alpha.at(i).unwrap_or(1) as u32;
                    lp_verdict(&g, p, u, budget, &label, &mut evidence)?
                }
                Family::Ck => {
                    let order = template.k - template.alpha.at(i).unwrap_or(0) as u32;
                    ck_verdict(&g, order, u, budget, &label, &mut evidence)?
                }
            };
            let c_verdict = ck_verdict(&g, m, u, budget, &label, &mut evidence)?;
            per_derivative.push(OrderVerdict {
                i,
                derivative: mu,
                b_space: b_space.clone(),
                b_verdict,
                c_space: format!("C^{m}"),
                c_verdict,
                verdict: b_verdict.and(c_verdict),
            });
        }
    }
    let verdict = Verdict::all(per_derivative.iter().map(|o| o.verdict));
    Ok(MembershipClaim {
        function: f.to_string(),
        per_derivative,
        evidence,
        verdict,
    })
}
