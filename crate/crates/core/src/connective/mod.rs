//! Connective structures `ξ` between regularity claims.
//!
//! A connective structure carries the index maps `O` (for the `B` factor)
//! and `Q` (for the `C^{k-·}` factor), composition tables between them, and
//! a claim transformer `ξ` that moves a function from one claimed space to
//! another. The transformers act on function data; the identity is the
//! canonical instance and only changes the claimed labels.

mod checks;
mod globalize;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::atlas::AtlasError;
use crate::expr::{Expr, ParseError};
use crate::index_algebra::{idx, Index, IndexError, IndexFn, IndexMap};
use crate::spaces::SpaceError;

pub use checks::{
    check_composition, check_degree, check_distributive, check_nice, check_partition_preservation,
    CompositionReport, DegreeReport, DistributivityReport, NicenessReport, PartitionPreservation,
    PropertyVerdict, Witness,
    DEGREE_TOLERANCE, DISTRIBUTIVITY_TOLERANCE, PARTITION_TOLERANCE,
};
pub use globalize::{globalize_regularity, GlobalizedClaim, LevelVerdict};

/// Maps a function to a function. Implementations must be pure.
pub trait ClaimTransformer: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn apply(&self, f: &Expr) -> Expr;
    /// True only if `apply` returns its input unchanged.
    fn is_identity(&self) -> bool {
        false
    }
}

/// The transformers available from configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Xi {
    Identity,
    Scale(Expr),
    AddConstant(Expr),
    Multiply(Expr),
}

impl Xi {
    /// `identity`, `scale:<c>`, `add:<c>` or `multiply:<expr>`.
    pub fn parse(text: &str) -> Result<Xi, ConnectiveError> {
        let text = text.trim();
        if text == "identity" {
            return Ok(Xi::Identity);
        }
        let (kind, arg) = text
            .split_once(':')
            .ok_or_else(|| ConnectiveError::UnknownTransformer(text.to_string()))?;
        let e = Expr::parse(arg).map_err(|source| ConnectiveError::TransformerExpr {
            text: text.to_string(),
            source,
        })?;
        let constant = |e: Expr| {
            if e.is_constant() {
                Ok(e)
            } else {
                Err(ConnectiveError::UnknownTransformer(format!(
                    "{text}: argument must be constant"
                )))
            }
        };
        match kind.trim() {
            "scale" => Ok(Xi::Scale(constant(e)?)),
            "add" => Ok(Xi::AddConstant(constant(e)?)),
            "multiply" => Ok(Xi::Multiply(e)),
            _ => Err(ConnectiveError::UnknownTransformer(text.to_string())),
        }
    }
}

impl ClaimTransformer for Xi {
    fn name(&self) -> String {
        match self {
            Xi::Identity => "identity".into(),
            Xi::Scale(c) => format!("scale:{c}"),
            Xi::AddConstant(c) => format!("add:{c}"),
            Xi::Multiply(g) => format!("multiply:{g}"),
        }
    }

    fn apply(&self, f: &Expr) -> Expr {
        match self {
            Xi::Identity => f.clone(),
            Xi::Scale(c) => Expr::mul(c.clone(), f.clone()),
            Xi::AddConstant(c) => Expr::add(f.clone(), c.clone()),
            Xi::Multiply(g) => Expr::mul(g.clone(), f.clone()),
        }
    }

    fn is_identity(&self) -> bool {
        matches!(self, Xi::Identity)
    }
}

pub type Transformer = Arc<dyn ClaimTransformer>;

pub fn identity() -> Transformer {
    Arc::new(Xi::Identity)
}

#[derive(Clone, Debug)]
pub struct NamedMap {
    pub name: String,
    pub map: IndexFn,
}

impl NamedMap {
    pub fn new(name: &str, map: IndexFn) -> NamedMap {
        NamedMap {
            name: name.to_string(),
            map,
        }
    }
}

/// Declared entries `D(a, b)` of a composition table; pairs not declared
/// are not constrained.
#[derive(Clone, Debug, Default)]
pub struct CompositionTable {
    pub entries: Vec<(String, String, Transformer)>,
}

impl CompositionTable {
    pub fn get(&self, a: &str, b: &str) -> Option<&Transformer> {
        self.entries
            .iter()
            .find(|(x, y, _)| x == a && y == b)
            .map(|(_, _, t)| t)
    }

    /// All declared `(a, b, c)` with `D(a,b)`, `D(b,c)` and `D(a,c)` present.
    pub fn triples(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (a, b, _) in &self.entries {
            for (b2, c, _) in &self.entries {
                if b2 == b && self.get(a, c).is_some() {
                    out.push((a.clone(), b.clone(), c.clone()));
                }
            }
        }
        out
    }
}

/// An `(α₀, β₀; j)`-connective structure on `Γ_k = [0, k]`.
#[derive(Clone, Debug)]
pub struct ConnectiveStructure {
    pub k: u32,
    pub j: u32,
    pub o: Vec<NamedMap>,
    pub q: Vec<NamedMap>,
    pub alpha: String,
    pub alpha0: String,
    pub beta: String,
    pub beta0: String,
    pub d_o: CompositionTable,
    pub d_q: CompositionTable,
    /// `ξ` between pairs `((θ,ϑ), (θ',ϑ'))` written as `"θ,ϑ"` strings.
    pub xi_table: CompositionTable,
    /// `ξ` for pairs without a table entry.
    pub xi: Transformer,
    pub base_tag: String,
    pub compatible_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectiveError {
    #[error("missing required map: {0}")]
    MissingMap(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("unknown transformer `{0}`")]
    UnknownTransformer(String),
    #[error("transformer `{text}`: {source}")]
    TransformerExpr { text: String, source: ParseError },
    #[error("D_Q({beta0}, {map}) must be the canonical inclusion since {map} <= {beta0}")]
    NotInclusion { beta0: String, map: String },
    #[error("order {r} exceeds the atlas class {k}")]
    OrderTooHigh { r: u32, k: u32 },
    #[error("pair is not ordinary in Gamma_k[z]: no members of O x Q realise l = {l}")]
    NotOrdinary { l: String },
    #[error("test input `{function}` is not a member: {verdict}")]
    NonMemberInput { function: String, verdict: String },
    #[error("scISP tag `{0}` is not compatible")]
    IncompatibleTag(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

fn same_on(f: &IndexFn, g: &IndexFn, k: u32) -> bool {
    (0..=k).all(|i| f.at(i) == g.at(i))
}

impl ConnectiveStructure {
    fn find<'a>(set: &'a [NamedMap], name: &str) -> Result<&'a NamedMap, ConnectiveError> {
        set.iter()
            .find(|m| m.name == name)
            .ok_or_else(|| ConnectiveError::UnknownMap(name.to_string()))
    }

    pub fn o_map(&self, name: &str) -> Result<&IndexFn, ConnectiveError> {
        Ok(&Self::find(&self.o, name)?.map)
    }

    pub fn q_map(&self, name: &str) -> Result<&IndexFn, ConnectiveError> {
        Ok(&Self::find(&self.q, name)?.map)
    }

    pub fn alpha0_j(&self) -> Result<i64, ConnectiveError> {
        self.o_map(&self.alpha0)?
            .at(self.j)
            .ok_or_else(|| ConnectiveError::MissingMap(format!("alpha0({}) undefined", self.j)))
    }

    pub fn beta0_j(&self) -> Result<i64, ConnectiveError> {
        self.q_map(&self.beta0)?
            .at(self.j)
            .ok_or_else(|| ConnectiveError::MissingMap(format!("beta0({}) undefined", self.j)))
    }

    /// Checks the structural requirements: `α, α₀ ∈ O`, `β, β₀ ∈ Q`, the
    /// constant `α_{0,j}` in `O`, the shift `i ↦ β₀(j) − i` in `Q`, and
    /// `D_Q(β₀, ϑ)` the identity whenever `ϑ ≤ β₀`.
    pub fn validate(&self) -> Result<(), ConnectiveError> {
        self.o_map(&self.alpha)?;
        self.q_map(&self.beta)?;
        let a0 = self.alpha0_j()?;
        let b0 = self.beta0_j()?;
        let constant = IndexFn::constant(a0);
        if !self.o.iter().any(|m| same_on(&m.map, &constant, self.k)) {
            return Err(ConnectiveError::MissingMap(format!(
                "constant map alpha_(0,j) = {a0} in O"
            )));
        }
        let shift = IndexFn::shift(b0);
        if !self.q.iter().any(|m| same_on(&m.map, &shift, self.k)) {
            return Err(ConnectiveError::MissingMap(format!(
                "shift map i -> {b0} - i in Q"
            )));
        }
        let beta0 = self.q_map(&self.beta0)?.clone();
        for m in &self.q {
            if m.map.le_on(&beta0, self.k) {
                if let Some(t) = self.d_q.get(&self.beta0, &m.name) {
                    if !t.is_identity() {
                        return Err(ConnectiveError::NotInclusion {
                            beta0: self.beta0.clone(),
                            map: m.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `O` and `Q` tabulated on `[0, k]`, skipping maps undefined somewhere.
    pub fn tables(&self) -> (Vec<IndexMap>, Vec<IndexMap>) {
        let dom: Vec<Index> = (0..=i64::from(self.k)).map(idx).collect();
        let tab = |set: &[NamedMap]| {
            set.iter()
                .filter_map(|m| m.map.to_map(&m.name, &dom))
                .collect::<Vec<_>>()
        };
        (tab(&self.o), tab(&self.q))
    }

    /// `ξ^{src}_{dst}` from the table, or the default transformer.
    pub fn xi_between(&self, src: &str, dst: &str) -> &Transformer {
        self.xi_table.get(src, dst).unwrap_or(&self.xi)
    }

    pub fn is_compatible(&self, tag: &str) -> bool {
        tag == self.base_tag || self.compatible_tags.iter().any(|t| t == tag)
    }

    pub fn with_xi(mut self, xi: Transformer) -> ConnectiveStructure {
        self.xi = xi;
        self
    }
}

/// The connective structure whose `D` maps and `ξ` are all identities.
#[allow(clippy::too_many_arguments)]
pub fn identity_connective(
    o: Vec<NamedMap>,
    q: Vec<NamedMap>,
    alpha: &str,
    alpha0: &str,
    beta: &str,
    beta0: &str,
    j: u32,
    k: u32,
) -> Result<ConnectiveStructure, ConnectiveError> {
    let cs = ConnectiveStructure {
        k,
        j,
        o,
        q,
        alpha: alpha.into(),
        alpha0: alpha0.into(),
        beta: beta.into(),
        beta0: beta0.into(),
        d_o: CompositionTable::default(),
        d_q: CompositionTable::default(),
        xi_table: CompositionTable::default(),
        xi: identity(),
        base_tag: "standard".into(),
        compatible_tags: Vec::new(),
    };
    cs.validate()?;
    Ok(cs)
}

/// The smallest valid structure: `O = {α, α₀, α_{0,j}}`,
/// `Q = {β, β₀, i ↦ β₀(j) − i}` with identity `ξ`.
pub fn minimal_identity(
    alpha: IndexFn,
    alpha0: IndexFn,
    beta: IndexFn,
    beta0: IndexFn,
    j: u32,
    k: u32,
) -> Result<ConnectiveStructure, ConnectiveError> {
    let a0 = alpha0
        .at(j)
        .ok_or_else(|| ConnectiveError::MissingMap(format!("alpha0({j}) undefined")))?;
    let b0 = beta0
        .at(j)
        .ok_or_else(|| ConnectiveError::MissingMap(format!("beta0({j}) undefined")))?;
    identity_connective(
        vec![
            NamedMap::new("alpha", alpha),
            NamedMap::new("alpha0", alpha0),
            NamedMap::new("alpha0_j", IndexFn::constant(a0)),
        ],
        vec![
            NamedMap::new("beta", beta),
            NamedMap::new("beta0", beta0),
            NamedMap::new("shift", IndexFn::shift(b0)),
        ],
        "alpha",
        "alpha0",
        "beta",
        "beta0",
        j,
        k,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectiveSummary {
    pub k: u32,
    pub j: u32,
    pub o: Vec<String>,
    pub q: Vec<String>,
    pub xi: String,
}

impl ConnectiveStructure {
    pub fn summary(&self) -> ConnectiveSummary {
        ConnectiveSummary {
            k: self.k,
            j: self.j,
            o: self.o.iter().map(|m| format!("{}: {}", m.name, m.map.describe())).collect(),
            q: self.q.iter().map(|m| format!("{}: {}", m.name, m.map.describe())).collect(),
            xi: self.xi.name(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_structure_is_valid() {
        let cs = minimal_identity(IndexFn::Identity, IndexFn::constant(2), IndexFn::Identity, IndexFn::constant(2), 0, 4)
            .unwrap();
        assert_eq!(cs.beta0_j().unwrap(), 2);
        assert!(cs.xi.is_identity());
    }

    #[test]
    fn missing_constant_map_is_rejected() {
        let err = identity_connective(
            vec![NamedMap::new("alpha", IndexFn::Identity), NamedMap::new("alpha0", IndexFn::Identity)],
            vec![
                NamedMap::new("beta", IndexFn::Identity),
                NamedMap::new("beta0", IndexFn::constant(2)),
                NamedMap::new("shift", IndexFn::shift(2)),
            ],
            "alpha",
            "alpha0",
            "beta",
            "beta0",
            1,
            4,
        )
        .unwrap_err();
        assert!(matches!(err, ConnectiveError::MissingMap(ref m) if m.contains("alpha_(0,j)")));
    }

    #[test]
    fn missing_shift_is_rejected() {
        let err = identity_connective(
            vec![NamedMap::new("alpha", IndexFn::constant(1))],
            vec![NamedMap::new("beta", IndexFn::constant(3))],
            "alpha",
            "alpha",
            "beta",
            "beta",
            0,
            4,
        )
        .unwrap_err();
        assert!(matches!(err, ConnectiveError::MissingMap(ref m) if m.contains("shift")));
    }

    #[test]
    fn inclusion_must_be_identity() {
        let mut cs = minimal_identity(IndexFn::Identity, IndexFn::constant(2), IndexFn::Identity, IndexFn::constant(2), 0, 4)
            .unwrap();
        cs.q.push(NamedMap::new("one", IndexFn::constant(1)));
        cs.d_q.entries.push(("beta0".into(), "one".into(), Arc::new(Xi::Scale(Expr::num(2)))));
        assert!(matches!(cs.validate(), Err(ConnectiveError::NotInclusion { .. })));
    }

    #[test]
    fn transformer_parsing() {
        assert_eq!(Xi::parse("identity").unwrap(), Xi::Identity);
        assert_eq!(Xi::parse("scale:2").unwrap(), Xi::Scale(Expr::num(2)));
        let m = Xi::parse("multiply:bump(x1)").unwrap();
        assert_eq!(m.name(), "multiply:bump(x1)");
        assert!(Xi::parse("add:x1").is_err());
        assert!(Xi::parse("twist:1").is_err());
        let f = Expr::parse("x1").unwrap();
        assert_eq!(Xi::parse("add:1").unwrap().apply(&f).eval(&[2.0]).unwrap(), 3.0);
    }

    #[test]
    fn tags() {
        let mut cs = minimal_identity(IndexFn::Identity, IndexFn::constant(2), IndexFn::Identity, IndexFn::constant(2), 0, 4)
            .unwrap();
        cs.compatible_tags.push("other".into());
        assert!(cs.is_compatible("standard") && cs.is_compatible("other"));
        assert!(!cs.is_compatible("third"));
    }
}
