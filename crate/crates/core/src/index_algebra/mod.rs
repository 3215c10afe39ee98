//! Index algebra for families of regularity spaces.
//!
//! An index set `Γ` labels the members of a family (`L^i`, `C^{k-i}`, ...).
//! A distributive structure equips `Γ` with a product index `ε` and a sum
//! index `δ` recording where products and sums of members land. Both maps
//! are partial; an undefined application is a value of its own, never a
//! silent coercion.
//!
//! Indices are exact rationals so the Hölder and Young exponent arithmetic
//! never rounds; integrality is checked after the arithmetic.

mod additive;
mod maps;
mod ordinary;
mod structure;

use std::fmt;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use additive::{beta_window, gamma_z, AdditiveDegreeSet, PlusRule};
pub use maps::IndexFn;
pub use ordinary::{is_ordinary, ordinary_witness, IndexMap, OrdinaryVerdict};
pub use structure::{
    BinaryRule, DistributiveStructure, LawCheck, LawReport, LawSide, LawViolation, PartialMismatch,
    StructureKind, StructureSpec, DEFAULT_SAMPLE_BOUND, EXHAUSTIVE_LIMIT,
};

use crate::expr::Rational;

/// An index in `Γ`.
pub type Index = Rational;

pub fn idx(n: i64) -> Index {
    Index::from_integer(n)
}

pub fn format_index(i: &Index) -> String {
    if i.is_integer() {
        i.numer().to_string()
    } else {
        format!("{}/{}", i.numer(), i.denom())
    }
}

/// Upper end of an integer interval `[0, k]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Finite(u32),
    #[serde(with = "infinity_marker")]
    Infinite,
}

mod infinity_marker {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("infinity")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "infinity" | "inf" | "smooth" => Ok(()),
            other => Err(serde::de::Error::custom(format!(
                "expected a nonnegative integer or \"infinity\", got \"{other}\""
            ))),
        }
    }
}

impl Bound {
    pub fn finite(self) -> Option<u32> {
        match self {
            Bound::Finite(k) => Some(k),
            Bound::Infinite => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(k) => write!(f, "{k}"),
            Bound::Infinite => f.write_str("infinity"),
        }
    }
}

/// A set of indices: either an explicit finite set of rationals or the
/// integer interval `[0, k]` (possibly `[0, ∞)`).
///
/// Finite sets that are exactly `{0, 1, ..., m}` are normalized to the
/// interval form, so equality is set equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexSet {
    Finite(Vec<Index>),
    Interval(Bound),
}

impl IndexSet {
    pub fn finite<I: IntoIterator<Item = Index>>(items: I) -> IndexSet {
        let mut v: Vec<Index> = items.into_iter().collect();
        v.sort();
        v.dedup();
        let contiguous = !v.is_empty()
            && v
                .iter()
                .enumerate()
                .all(|(n, x)| x.is_integer() && *x.numer() == n as i64);
        if contiguous {
            IndexSet::Interval(Bound::Finite((v.len() - 1) as u32))
        } else {
            IndexSet::Finite(v)
        }
    }

    pub fn integers<I: IntoIterator<Item = i64>>(items: I) -> IndexSet {
        IndexSet::finite(items.into_iter().map(idx))
    }

    pub fn interval(k: u32) -> IndexSet {
        IndexSet::Interval(Bound::Finite(k))
    }

    pub fn unbounded() -> IndexSet {
        IndexSet::Interval(Bound::Infinite)
    }

    pub fn empty() -> IndexSet {
        IndexSet::Finite(Vec::new())
    }

    pub fn contains(&self, i: &Index) -> bool {
        match self {
            IndexSet::Finite(v) => v.binary_search(i).is_ok(),
            IndexSet::Interval(b) => {
                i.is_integer()
                    && !i.is_negative()
                    && match b {
                        Bound::Finite(k) => *i.numer() <= i64::from(*k),
                        Bound::Infinite => true,
                    }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, IndexSet::Interval(Bound::Infinite))
    }

    /// Elements in increasing order; `None` for `[0, ∞)`.
    pub fn elements(&self) -> Option<Vec<Index>> {
        match self {
            IndexSet::Finite(v) => Some(v.clone()),
            IndexSet::Interval(Bound::Finite(k)) => Some((0..=i64::from(*k)).map(idx).collect()),
            IndexSet::Interval(Bound::Infinite) => None,
        }
    }

    pub fn len(&self) -> Option<usize> {
        self.elements().map(|v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, IndexSet::Finite(v) if v.is_empty())
    }

    /// True when the set contains every integer of `[0, r]`.
    pub fn has_degree(&self, r: Bound) -> bool {
        match (self, r) {
            (IndexSet::Interval(Bound::Infinite), _) => true,
            (_, Bound::Infinite) => false,
            (s, Bound::Finite(r)) => (0..=i64::from(r)).all(|n| s.contains(&idx(n))),
        }
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        match self.elements() {
            Some(v) => v.iter().all(|i| other.contains(i)),
            None => matches!(other, IndexSet::Interval(Bound::Infinite)),
        }
    }

    pub fn max(&self) -> Option<Index> {
        match self {
            IndexSet::Finite(v) => v.last().copied(),
            IndexSet::Interval(Bound::Finite(k)) => Some(idx(i64::from(*k))),
            IndexSet::Interval(Bound::Infinite) => None,
        }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSet::Interval(Bound::Finite(0)) => f.write_str("{0}"),
            IndexSet::Interval(Bound::Finite(k)) => write!(f, "[0,{k}]"),
            IndexSet::Interval(Bound::Infinite) => f.write_str("[0,inf)"),
            IndexSet::Finite(v) => {
                f.write_str("{")?;
                for (n, i) in v.iter().enumerate() {
                    if n > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(&format_index(i))?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Why a partial index map has no value at a pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Undefined {
    /// The arithmetic produced a non-integer where `Γ` only has integers.
    NotIntegral { value: String },
    /// Young's exponent `ij/(i+j-ij)` needs a positive denominator.
    NonPositiveDenominator,
    /// An argument is not an element of the base set.
    ArgumentOutsideBase { value: String },
    /// The result is not an element of the base set.
    ResultOutsideBase { value: String },
    /// A custom table has no entry for the pair.
    NoTableEntry,
}

impl fmt::Display for Undefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Undefined::NotIntegral { value } => write!(f, "{value} is not an integer"),
            Undefined::NonPositiveDenominator => f.write_str("denominator is not positive"),
            Undefined::ArgumentOutsideBase { value } => write!(f, "argument {value} not in base"),
            Undefined::ResultOutsideBase { value } => write!(f, "result {value} not in base"),
            Undefined::NoTableEntry => f.write_str("no table entry"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("unknown structure name `{0}`")]
    UnknownStructure(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{map}({}, {}) is undefined: {reason}", format_index(.left), format_index(.right))]
    UndefinedApplication {
        map: &'static str,
        left: Index,
        right: Index,
        reason: Undefined,
    },
    #[error("base set has {size} elements, above the exhaustive limit; give a sample budget")]
    BaseTooLarge { size: String },
    #[error("window parameter beta0(j) = {beta0} outside [2, {k}]")]
    WindowOutOfRange { beta0: i64, k: Bound },
    #[error("z = {} is not in the window {window}", format_index(.z))]
    ZOutsideWindow { z: Index, window: IndexSet },
    #[error("additive structure invalid: {0}")]
    InvalidAdditive(String),
    #[error("maps have mismatched domains: {0}")]
    MismatchedDomains(String),
}

/// Integer value of an index, if it is an integer.
pub fn to_i64(i: &Index) -> Option<i64> {
    if i.is_integer() {
        Some(*i.numer())
    } else {
        None
    }
}

pub(crate) fn is_positive_integer(i: &Index) -> bool {
    i.is_integer() && *i.numer() > 0
}
