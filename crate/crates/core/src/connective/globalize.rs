use serde::Serialize;

use crate::expr::Expr;
use crate::index_algebra::{
    format_index, gamma_z, idx, ordinary_witness, to_i64, AdditiveDegreeSet, Bound, Index, IndexFn,
};
use crate::spaces::{check_membership, Budget, Domain, Family, MembershipClaim, MembershipTemplate, Verdict};

use super::{ConnectiveError, ConnectiveStructure};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelVerdict {
    pub l: u32,
    pub b_space: String,
    pub c_space: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalizedClaim {
    pub z: String,
    pub gamma: String,
    pub transformer: String,
    /// For each `l ∈ Γ_k[z]`, the members of `O` and `Q` realising
    /// `(θ(l), ϑ(l))` at `z`.
    pub witness: Vec<(String, String, String)>,
    pub input: MembershipClaim,
    pub derived: MembershipClaim,
    pub per_level: Vec<LevelVerdict>,
    pub verdict: Verdict,
}

/// Starting from `f ∈ B_{α₀(j)} ∩ C^{k − β₀(j) − z}` on `u`, emits and
/// re-verifies the claim `∂^l (ξf) ∈ B_{θ(l)} ∩ C^{k − ϑ(l)}` for every
/// `l ∈ Γ_k[z]`.
#[allow(clippy::too_many_arguments)]
pub fn globalize_regularity(
    f: &Expr,
    u: &Domain,
    family: Family,
    cs: &ConnectiveStructure,
    z: u32,
    theta: &IndexFn,
    vartheta: &IndexFn,
    budget: &Budget,
) -> Result<GlobalizedClaim, ConnectiveError> {
    cs.validate()?;
    let a0 = cs.alpha0_j()?;
    let b0 = cs.beta0_j()?;
    let z_index = idx(i64::from(z));
    let gamma = gamma_z(&AdditiveDegreeSet::standard(Bound::Finite(cs.k)), b0, &z_index)?;

    let input_template = MembershipTemplate::new(
        family,
        IndexFn::constant(a0),
        IndexFn::constant(b0 + i64::from(z)),
        cs.k,
        vec![0],
    );
    let input = check_membership(f, u, &input_template, budget)?;
    if input.verdict != Verdict::Member {
        return Err(ConnectiveError::NonMemberInput {
            function: f.to_string(),
            verdict: input.verdict.to_string(),
        });
    }

    let dom: Vec<Index> = (0..=i64::from(cs.k)).map(idx).collect();
    let theta_map = theta
        .to_map("theta", &dom)
        .ok_or_else(|| ConnectiveError::MissingMap(format!("theta undefined on [0,{}]", cs.k)))?;
    let vartheta_map = vartheta
        .to_map("vartheta", &dom)
        .ok_or_else(|| ConnectiveError::MissingMap(format!("vartheta undefined on [0,{}]", cs.k)))?;
    let (o, q) = cs.tables();
    let witness = match ordinary_witness(&theta_map, &vartheta_map, &z_index, &o, &q, &gamma)? {
        Ok(w) => w,
        Err(l) => return Err(ConnectiveError::NotOrdinary { l: format_index(&l) }),
    };

    let levels: Vec<u32> = gamma
        .elements()
        .unwrap_or_default()
        .iter()
        .filter_map(to_i64)
        .map(|l| l as u32)
        .collect();
    let xi = cs.xi_between(&format!("{},{}", cs.alpha0, cs.beta0), "theta,vartheta");
    let g = xi.apply(f);
    let template = MembershipTemplate::new(family, theta.clone(), vartheta.clone(), cs.k, levels.clone());
    let derived = check_membership(&g, u, &template, budget)?;

    let per_level = levels
        .iter()
        .map(|&l| {
            let first = derived.per_derivative.iter().find(|o| o.i == l);
            LevelVerdict {
                l,
                b_space: first.map(|o| o.b_space.clone()).unwrap_or_default(),
                c_space: first.map(|o| o.c_space.clone()).unwrap_or_default(),
                verdict: derived.verdict_at(l),
            }
        })
        .collect();
    Ok(GlobalizedClaim {
        z: z.to_string(),
        gamma: gamma.to_string(),
        transformer: xi.name(),
        witness: witness
            .into_iter()
            .map(|(l, t, v)| (format_index(&l), t, v))
            .collect(),
        input,
        verdict: derived.verdict,
        derived,
        per_level,
    })
}
