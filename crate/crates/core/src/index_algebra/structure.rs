use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{format_index, idx, is_positive_integer, Bound, Index, IndexError, IndexSet, Undefined};

/// Exhaustive law checking is allowed for base sets up to this many elements
/// (`[0, 64]`).
pub const EXHAUSTIVE_LIMIT: usize = 65;

/// Largest integer drawn when sampling an unbounded base.
pub const DEFAULT_SAMPLE_BOUND: i64 = 1000;

/// The built-in structure families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    /// `C^{k-i}` on `[0,k]`: `ε = δ = max`.
    PointwiseCk,
    /// `L^i`: `δ = min`, `ε(i,j) = ij/(i+j)` when integral.
    HolderLp,
    /// `L^i` under convolution: `δ = min`, `ε(i,j) = ij/(i+j-ij)` when the
    /// denominator is positive and the quotient integral.
    YoungConv,
    /// The lattice structure on `[0,k]`, `k` possibly infinite:
    /// `ε = max`, `δ = min`.
    MaxInterval,
    Custom,
}

impl StructureKind {
    pub fn name(self) -> &'static str {
        match self {
            StructureKind::PointwiseCk => "pointwise_ck",
            StructureKind::HolderLp => "holder_lp",
            StructureKind::YoungConv => "young_conv",
            StructureKind::MaxInterval => "max_interval",
            StructureKind::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Result<StructureKind, IndexError> {
        Ok(match name {
            "pointwise_ck" => StructureKind::PointwiseCk,
            "holder_lp" => StructureKind::HolderLp,
            "young_conv" => StructureKind::YoungConv,
            "max_interval" => StructureKind::MaxInterval,
            "custom" => StructureKind::Custom,
            other => return Err(IndexError::UnknownStructure(other.to_string())),
        })
    }
}

/// One of the two binary index maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BinaryRule {
    Max,
    Min,
    HolderStar,
    YoungStar,
    Table(BTreeMap<(Index, Index), Index>),
}

impl BinaryRule {
    fn raw(&self, i: &Index, j: &Index) -> Result<Index, Undefined> {
        match self {
            BinaryRule::Max => Ok(*i.max(j)),
            BinaryRule::Min => Ok(*i.min(j)),
            BinaryRule::HolderStar => {
                let den = i + j;
                if den.is_zero() {
                    return Err(Undefined::NonPositiveDenominator);
                }
                integral(i * j / den)
            }
            BinaryRule::YoungStar => {
                let den = i + j - i * j;
                if !den.is_positive() {
                    return Err(Undefined::NonPositiveDenominator);
                }
                integral(i * j / den)
            }
            BinaryRule::Table(t) => t.get(&(*i, *j)).copied().ok_or(Undefined::NoTableEntry),
        }
    }
}

fn integral(v: Index) -> Result<Index, Undefined> {
    if v.is_integer() {
        Ok(v)
    } else {
        Err(Undefined::NotIntegral {
            value: format_index(&v),
        })
    }
}

/// Config form of a structure: a built-in name with its parameters, or
/// explicit tables of `[i, j, value]` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    PointwiseCk { k: u32 },
    HolderLp { exponents: Vec<i64> },
    YoungConv { exponents: Vec<i64> },
    MaxInterval { k: Bound },
    Custom {
        base: Vec<i64>,
        eps: Vec<[i64; 3]>,
        delta: Vec<[i64; 3]>,
    },
}

impl StructureSpec {
    pub fn build(&self) -> Result<DistributiveStructure, IndexError> {
        match self {
            StructureSpec::PointwiseCk { k } => DistributiveStructure::pointwise_ck(*k),
            StructureSpec::HolderLp { exponents } => DistributiveStructure::holder_lp(exponents),
            StructureSpec::YoungConv { exponents } => DistributiveStructure::young_conv(exponents),
            StructureSpec::MaxInterval { k } => Ok(DistributiveStructure::max_interval(*k)),
            StructureSpec::Custom { base, eps, delta } => {
                let table = |rows: &[[i64; 3]]| {
                    rows.iter()
                        .map(|[i, j, v]| ((idx(*i), idx(*j)), idx(*v)))
                        .collect::<BTreeMap<_, _>>()
                };
                DistributiveStructure::custom(
                    IndexSet::integers(base.iter().copied()),
                    table(eps),
                    table(delta),
                )
            }
        }
    }
}

/// A base set with partial product (`ε`) and sum (`δ`) index maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributiveStructure {
    pub kind: StructureKind,
    pub base: IndexSet,
    pub eps: BinaryRule,
    pub delta: BinaryRule,
}

impl DistributiveStructure {
    /// Built-in structure by name. `k` is used by the interval structures,
    /// `exponents` by the `L^p` ones.
    pub fn builtin(
        name: &str,
        k: Option<Bound>,
        exponents: &[i64],
    ) -> Result<DistributiveStructure, IndexError> {
        let need_k = || k.ok_or_else(|| IndexError::InvalidParams("k is required".into()));
        match StructureKind::from_name(name)? {
            StructureKind::PointwiseCk => match need_k()? {
                Bound::Finite(k) => DistributiveStructure::pointwise_ck(k),
                Bound::Infinite => Err(IndexError::InvalidParams(
                    "pointwise_ck needs a finite k; use max_interval for infinity".into(),
                )),
            },
            StructureKind::MaxInterval => Ok(DistributiveStructure::max_interval(need_k()?)),
            StructureKind::HolderLp => DistributiveStructure::holder_lp(exponents),
            StructureKind::YoungConv => DistributiveStructure::young_conv(exponents),
            StructureKind::Custom => Err(IndexError::InvalidParams(
                "custom structures are built from tables".into(),
            )),
        }
    }

    pub fn pointwise_ck(k: u32) -> Result<DistributiveStructure, IndexError> {
        Ok(DistributiveStructure {
            kind: StructureKind::PointwiseCk,
            base: IndexSet::interval(k),
            eps: BinaryRule::Max,
            delta: BinaryRule::Max,
        })
    }

    pub fn max_interval(k: Bound) -> DistributiveStructure {
        DistributiveStructure {
            kind: StructureKind::MaxInterval,
            base: IndexSet::Interval(k),
            eps: BinaryRule::Max,
            delta: BinaryRule::Min,
        }
    }

    pub fn holder_lp(exponents: &[i64]) -> Result<DistributiveStructure, IndexError> {
        Ok(DistributiveStructure {
            kind: StructureKind::HolderLp,
            base: exponent_set(exponents)?,
            eps: BinaryRule::HolderStar,
            delta: BinaryRule::Min,
        })
    }

    pub fn young_conv(exponents: &[i64]) -> Result<DistributiveStructure, IndexError> {
        Ok(DistributiveStructure {
            kind: StructureKind::YoungConv,
            base: exponent_set(exponents)?,
            eps: BinaryRule::YoungStar,
            delta: BinaryRule::Min,
        })
    }

    pub fn custom(
        base: IndexSet,
        eps: BTreeMap<(Index, Index), Index>,
        delta: BTreeMap<(Index, Index), Index>,
    ) -> Result<DistributiveStructure, IndexError> {
        if !base.is_finite() {
            return Err(IndexError::InvalidParams(
                "custom tables need a finite base".into(),
            ));
        }
        for ((i, j), v) in eps.iter().chain(delta.iter()) {
            for x in [i, j, v] {
                if !base.contains(x) {
                    return Err(IndexError::InvalidParams(format!(
                        "table entry {} is not in the base {base}",
                        format_index(x)
                    )));
                }
            }
        }
        Ok(DistributiveStructure {
            kind: StructureKind::Custom,
            base,
            eps: BinaryRule::Table(eps),
            delta: BinaryRule::Table(delta),
        })
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Whether `i` is an index of the family. For the `L^p` structures this
    /// is every positive integer; `base` is then only the set that the law
    /// checker enumerates.
    pub fn in_domain(&self, i: &Index) -> bool {
        match self.kind {
            StructureKind::HolderLp | StructureKind::YoungConv => is_positive_integer(i),
            _ => self.base.contains(i),
        }
    }

    fn apply(&self, rule: &BinaryRule, i: &Index, j: &Index) -> Result<Index, Undefined> {
        for x in [i, j] {
            if !self.in_domain(x) {
                return Err(Undefined::ArgumentOutsideBase {
                    value: format_index(x),
                });
            }
        }
        let v = rule.raw(i, j)?;
        if !self.in_domain(&v) {
            return Err(Undefined::ResultOutsideBase {
                value: format_index(&v),
            });
        }
        Ok(v)
    }

    /// Product index `ε(i, j)`.
    pub fn eps(&self, i: &Index, j: &Index) -> Result<Index, Undefined> {
        self.apply(&self.eps, i, j)
    }

    /// Sum index `δ(i, j)`.
    pub fn delta(&self, i: &Index, j: &Index) -> Result<Index, Undefined> {
        self.apply(&self.delta, i, j)
    }

    pub fn eps_checked(&self, i: &Index, j: &Index) -> Result<Index, IndexError> {
        self.eps(i, j).map_err(|reason| IndexError::UndefinedApplication {
            map: "eps",
            left: *i,
            right: *j,
            reason,
        })
    }

    pub fn delta_checked(&self, i: &Index, j: &Index) -> Result<Index, IndexError> {
        self.delta(i, j).map_err(|reason| IndexError::UndefinedApplication {
            map: "delta",
            left: *i,
            right: *j,
            reason,
        })
    }

    /// `ε^r(l, m) = ε(l, ε(l, ... ε(l, m)))` with `r` occurrences of `l`.
    pub fn eps_power(&self, r: u32, l: &Index, m: &Index) -> Result<Index, IndexError> {
        if r == 0 {
            return Err(IndexError::InvalidParams("eps power needs r >= 1".into()));
        }
        let mut acc = *m;
        for _ in 0..r {
            acc = self.eps_checked(l, &acc)?;
        }
        Ok(acc)
    }

    /// Checks both distributivity laws and `δ(i,i) = i` over the base.
    pub fn check_laws(&self, mode: LawCheck) -> Result<LawReport, IndexError> {
        let triples: Vec<[Index; 3]> = match (self.base.elements(), mode) {
            (Some(elems), LawCheck::Exhaustive) if elems.len() <= EXHAUSTIVE_LIMIT => {
                let mut t = Vec::with_capacity(elems.len().pow(3));
                for i in &elems {
                    for j in &elems {
                        for k in &elems {
                            t.push([*i, *j, *k]);
                        }
                    }
                }
                t
            }
            (elems, LawCheck::Exhaustive) => {
                return Err(IndexError::BaseTooLarge {
                    size: elems.map_or("infinitely many".to_string(), |e| e.len().to_string()),
                })
            }
            (elems, LawCheck::Sampled { budget, seed }) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pick = |rng: &mut ChaCha8Rng| match &elems {
                    Some(e) => e[rng.gen_range(0..e.len())],
                    None => idx(rng.gen_range(0..=DEFAULT_SAMPLE_BOUND)),
                };
                (0..budget)
                    .map(|_| [pick(&mut rng), pick(&mut rng), pick(&mut rng)])
                    .collect()
            }
        };

        let mut report = LawReport {
            structure: self.name().to_string(),
            triples_checked: triples.len(),
            violations: Vec::new(),
            partial: Vec::new(),
            idempotence_failures: Vec::new(),
        };
        let mut singles: Vec<Index> = triples.iter().map(|t| t[0]).collect();
        singles.sort();
        singles.dedup();
        for i in singles {
            match self.delta(&i, &i) {
                Ok(v) if v == i => {}
                Ok(v) => report.idempotence_failures.push(IdempotenceFailure {
                    index: format_index(&i),
                    result: Some(format_index(&v)),
                }),
                Err(_) => report.idempotence_failures.push(IdempotenceFailure {
                    index: format_index(&i),
                    result: None,
                }),
            }
        }

        for [i, j, k] in triples {
            // ε(i, δ(j,k)) = δ(ε(i,j), ε(i,k))
            let lhs = self.delta(&j, &k).and_then(|d| self.eps(&i, &d));
            let rhs = self
                .eps(&i, &j)
                .and_then(|a| self.eps(&i, &k).and_then(|b| self.delta(&a, &b)));
            report.record("left", [i, j, k], lhs, rhs);
            // ε(δ(i,j), k) = δ(ε(i,k), ε(j,k))
            let lhs = self.delta(&i, &j).and_then(|d| self.eps(&d, &k));
            let rhs = self
                .eps(&i, &k)
                .and_then(|a| self.eps(&j, &k).and_then(|b| self.delta(&a, &b)));
            report.record("right", [i, j, k], lhs, rhs);
        }
        Ok(report)
    }
}

fn exponent_set(exponents: &[i64]) -> Result<IndexSet, IndexError> {
    if exponents.is_empty() {
        return Err(IndexError::InvalidParams("exponent set is empty".into()));
    }
    if let Some(bad) = exponents.iter().find(|p| **p <= 0) {
        return Err(IndexError::InvalidParams(format!(
            "exponent {bad} is not a positive integer"
        )));
    }
    Ok(IndexSet::integers(exponents.iter().copied()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawCheck {
    Exhaustive,
    Sampled { budget: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSide {
    Lhs,
    Rhs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LawViolation {
    pub law: &'static str,
    pub triple: [String; 3],
    pub lhs: String,
    pub rhs: String,
}

/// One side of a law is defined and the other is not. This is the expected
/// shape of a partial structure and does not fail the check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialMismatch {
    pub law: &'static str,
    pub triple: [String; 3],
    pub defined: LawSide,
    pub undefined_because: Undefined,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdempotenceFailure {
    pub index: String,
    pub result: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LawReport {
    pub structure: String,
    pub triples_checked: usize,
    pub violations: Vec<LawViolation>,
    pub partial: Vec<PartialMismatch>,
    pub idempotence_failures: Vec<IdempotenceFailure>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.idempotence_failures.is_empty()
    }

    fn record(
        &mut self,
        law: &'static str,
        t: [Index; 3],
        lhs: Result<Index, Undefined>,
        rhs: Result<Index, Undefined>,
    ) {
        let triple = t.map(|x| format_index(&x));
        match (lhs, rhs) {
            (Ok(a), Ok(b)) if a != b => self.violations.push(LawViolation {
                law,
                triple,
                lhs: format_index(&a),
                rhs: format_index(&b),
            }),
            (Ok(_), Err(why)) => self.partial.push(PartialMismatch {
                law,
                triple,
                defined: LawSide::Lhs,
                undefined_because: why,
            }),
            (Err(why), Ok(_)) => self.partial.push(PartialMismatch {
                law,
                triple,
                defined: LawSide::Rhs,
                undefined_because: why,
            }),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(n: i64) -> Index {
        idx(n)
    }

    #[test]
    fn holder_product_index() {
        let h = DistributiveStructure::holder_lp(&[1, 2, 3, 6]).unwrap();
        assert_eq!(h.eps(&i(3), &i(6)), Ok(i(2)));
        assert_eq!(
            h.eps(&i(2), &i(3)),
            Err(Undefined::NotIntegral {
                value: "6/5".into()
            })
        );
        assert_eq!(h.delta(&i(2), &i(6)), Ok(i(2)));
    }

    #[test]
    fn young_product_index() {
        let y = DistributiveStructure::young_conv(&[1, 2, 3]).unwrap();
        assert_eq!(y.eps(&i(1), &i(2)), Ok(i(2)));
        assert_eq!(y.eps(&i(2), &i(2)), Err(Undefined::NonPositiveDenominator));
    }

    #[test]
    fn pointwise_sum_index_is_max() {
        let c = DistributiveStructure::pointwise_ck(5).unwrap();
        assert_eq!(c.delta(&i(2), &i(4)), Ok(i(4)));
        assert!(matches!(c.eps(&i(2), &i(6)), Err(Undefined::ArgumentOutsideBase { .. })));
    }

    #[test]
    fn builtin_by_name_validates() {
        assert!(matches!(
            DistributiveStructure::builtin("sobolev", None, &[]),
            Err(IndexError::UnknownStructure(_))
        ));
        assert!(matches!(
            DistributiveStructure::builtin("holder_lp", None, &[2, 0]),
            Err(IndexError::InvalidParams(_))
        ));
        assert!(matches!(
            DistributiveStructure::builtin("pointwise_ck", None, &[]),
            Err(IndexError::InvalidParams(_))
        ));
        assert!(DistributiveStructure::builtin("max_interval", Some(Bound::Infinite), &[]).is_ok());
    }

    #[test]
    fn pointwise_laws_pass_exhaustively() {
        let r = DistributiveStructure::pointwise_ck(4)
            .unwrap()
            .check_laws(LawCheck::Exhaustive)
            .unwrap();
        assert_eq!(r.triples_checked, 125);
        assert!(r.passed());
        assert!(r.violations.is_empty() && r.partial.is_empty());
    }

    #[test]
    fn holder_partiality_is_reported_not_failed() {
        let r = DistributiveStructure::holder_lp(&[2, 3, 6])
            .unwrap()
            .check_laws(LawCheck::Exhaustive)
            .unwrap();
        assert!(r.passed());
        // Independent enumeration: a left-law mismatch needs ε(i, min(j,k))
        // defined while ε(i,j) or ε(i,k) is not.
        let e = |i: i64, j: i64| (i * j % (i + j) == 0).then(|| i * j / (i + j));
        let set = [2, 3, 6];
        let mut expected = 0;
        for i in set {
            for j in set {
                for k in set {
                    let lhs = e(i, j.min(k)).is_some();
                    let rhs = e(i, j).zip(e(i, k)).is_some();
                    expected += usize::from(lhs != rhs);
                    let lhs = e(i.min(j), k).is_some();
                    let rhs = e(i, k).zip(e(j, k)).is_some();
                    expected += usize::from(lhs != rhs);
                }
            }
        }
        assert!(expected > 0);
        assert_eq!(r.partial.len(), expected);
        assert!(r
            .partial
            .iter()
            .any(|p| p.triple == ["2".to_string(), "2".into(), "3".into()] && p.law == "left"));
    }

    #[test]
    fn custom_table_with_a_single_violation() {
        // Found by brute-force enumeration of partial tables on {0,1,2}:
        // exactly one violation, at the left law for (0,0,1).
        let eps = [
            [0, 0, 2],
            [0, 1, 2],
            [0, 2, 1],
            [1, 1, 0],
            [2, 0, 2],
            [2, 2, 1],
        ];
        let delta = [
            [0, 0, 0],
            [0, 1, 2],
            [1, 0, 0],
            [1, 1, 1],
            [2, 0, 1],
            [2, 1, 0],
            [2, 2, 2],
        ];
        let spec = StructureSpec::Custom {
            base: vec![0, 1, 2],
            eps: eps.to_vec(),
            delta: delta.to_vec(),
        };
        let r = spec.build().unwrap().check_laws(LawCheck::Exhaustive).unwrap();
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(v.law, "left");
        assert_eq!(v.triple, ["0".to_string(), "0".into(), "1".into()]);
        assert_eq!((v.lhs.as_str(), v.rhs.as_str()), ("1", "2"));
        assert!(!r.passed());
    }

    #[test]
    fn idempotence_failure_is_a_failure() {
        let mut delta = BTreeMap::new();
        delta.insert((i(0), i(0)), i(1));
        delta.insert((i(1), i(1)), i(1));
        let s = DistributiveStructure::custom(IndexSet::integers([0, 1]), BTreeMap::new(), delta)
            .unwrap();
        let r = s.check_laws(LawCheck::Exhaustive).unwrap();
        assert_eq!(r.idempotence_failures.len(), 1);
        assert!(!r.passed());
    }

    #[test]
    fn large_or_infinite_bases_need_sampling() {
        let inf = DistributiveStructure::max_interval(Bound::Infinite);
        assert!(matches!(
            inf.check_laws(LawCheck::Exhaustive),
            Err(IndexError::BaseTooLarge { .. })
        ));
        let r = inf
            .check_laws(LawCheck::Sampled {
                budget: 500,
                seed: 3,
            })
            .unwrap();
        assert_eq!(r.triples_checked, 500);
        assert!(r.passed());
        assert!(DistributiveStructure::pointwise_ck(64)
            .unwrap()
            .check_laws(LawCheck::Exhaustive)
            .is_ok());
        assert!(DistributiveStructure::pointwise_ck(65)
            .unwrap()
            .check_laws(LawCheck::Exhaustive)
            .is_err());
    }

    #[test]
    fn eps_power_nests_to_the_right() {
        let c = DistributiveStructure::pointwise_ck(4).unwrap();
        assert_eq!(c.eps_power(3, &i(1), &i(2)), Ok(i(2)));
        assert_eq!(c.eps_power(1, &i(3), &i(1)), c.eps_checked(&i(3), &i(1)));
        let h = DistributiveStructure::holder_lp(&[1, 2, 3, 4, 6, 12]).unwrap();
        let err = h.eps_power(2, &i(2), &i(2)).unwrap_err();
        match err {
            IndexError::UndefinedApplication { map, left, right, .. } => {
                assert_eq!((map, left, right), ("eps", i(2), i(1)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = StructureSpec::HolderLp {
            exponents: vec![1, 2, 4],
        };
        let text = toml::to_string(&spec).unwrap();
        let back: StructureSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let ck: StructureSpec = toml::from_str("structure = \"pointwise_ck\"\nk = 4").unwrap();
        assert_eq!(ck, StructureSpec::PointwiseCk { k: 4 });
    }
}
