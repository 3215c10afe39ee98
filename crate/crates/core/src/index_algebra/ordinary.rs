use std::collections::BTreeMap;

use serde::Serialize;

use super::{format_index, Index, IndexError, IndexSet};

/// A map between index sets given by its table on a finite domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub name: String,
    pub table: BTreeMap<Index, Index>,
}

impl IndexMap {
    pub fn new<I: IntoIterator<Item = (Index, Index)>>(name: &str, entries: I) -> IndexMap {
        IndexMap {
            name: name.to_string(),
            table: entries.into_iter().collect(),
        }
    }

    pub fn from_fn<F: Fn(&Index) -> Index>(name: &str, domain: &[Index], f: F) -> IndexMap {
        IndexMap::new(name, domain.iter().map(|i| (*i, f(i))))
    }

    pub fn get(&self, i: &Index) -> Option<Index> {
        self.table.get(i).copied()
    }

    pub fn domain(&self) -> Vec<Index> {
        self.table.keys().copied().collect()
    }

    fn agrees_on(&self, other: &IndexMap, points: &[Index]) -> bool {
        points.iter().all(|p| self.get(p) == other.get(p))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrdinaryVerdict {
    pub ordinary: bool,
    /// Names of the members of `O` and `Q` matching the induced pair.
    pub induced: Option<(String, String)>,
    pub reasons: Vec<String>,
}

fn check_domains(maps: &[&IndexMap], needed: &[Index]) -> Result<(), IndexError> {
    let Some(first) = maps.first() else {
        return Ok(());
    };
    let dom = first.domain();
    for m in maps {
        if m.domain() != dom {
            return Err(IndexError::MismatchedDomains(format!(
                "`{}` and `{}` are defined on different sets",
                first.name, m.name
            )));
        }
    }
    for p in needed {
        if first.get(p).is_none() {
            return Err(IndexError::MismatchedDomains(format!(
                "index {} is outside the common domain",
                format_index(p)
            )));
        }
    }
    Ok(())
}

fn find_in<'a>(family: &'a [IndexMap], m: &IndexMap, points: &[Index]) -> Option<&'a IndexMap> {
    family.iter().find(|o| o.agrees_on(m, points))
}

/// Decides whether the sequence `(θ_l, ϑ_l)_{l ∈ X}` is ordinary in `X` at
/// `z`: every pair lies in `O × Q` and so does the induced pair
/// `θ*(l) = θ_l(z)`, `ϑ*(l) = ϑ_l(z)`.
///
/// Members of `O` and `Q` are compared as tables on the common domain; the
/// induced pair is only defined on `X`, so it is matched on `X`.
pub fn is_ordinary(
    pairs: &[(Index, IndexMap, IndexMap)],
    z: &Index,
    o: &[IndexMap],
    q: &[IndexMap],
    x: &IndexSet,
) -> Result<OrdinaryVerdict, IndexError> {
    let mut all: Vec<&IndexMap> = Vec::new();
    for (_, t, v) in pairs {
        all.push(t);
        all.push(v);
    }
    all.extend(o.iter());
    all.extend(q.iter());
    let xs = x.elements().ok_or_else(|| {
        IndexError::MismatchedDomains("X must be finite to compare tables".into())
    })?;
    let mut needed = xs.clone();
    needed.push(*z);
    check_domains(&all, &needed)?;

    let full = all.first().map(|m| m.domain()).unwrap_or_default();
    let mut reasons = Vec::new();
    let seq: BTreeMap<Index, (&IndexMap, &IndexMap)> =
        pairs.iter().map(|(l, t, v)| (*l, (t, v))).collect();
    for l in &xs {
        let Some((t, v)) = seq.get(l) else {
            reasons.push(format!("no pair given for l = {}", format_index(l)));
            continue;
        };
        if find_in(o, t, &full).is_none() {
            reasons.push(format!("theta_{} = `{}` is not in O", format_index(l), t.name));
        }
        if find_in(q, v, &full).is_none() {
            reasons.push(format!("vartheta_{} = `{}` is not in Q", format_index(l), v.name));
        }
    }
    for l in seq.keys() {
        if !x.contains(l) {
            reasons.push(format!("pair index {} is not in X", format_index(l)));
        }
    }
    if !reasons.is_empty() {
        return Ok(OrdinaryVerdict {
            ordinary: false,
            induced: None,
            reasons,
        });
    }

    let theta_star = IndexMap::new("theta*", xs.iter().map(|l| (*l, seq[l].0.get(z).unwrap())));
    let vartheta_star =
        IndexMap::new("vartheta*", xs.iter().map(|l| (*l, seq[l].1.get(z).unwrap())));
    let ot = find_in(o, &theta_star, &xs);
    let qv = find_in(q, &vartheta_star, &xs);
    if ot.is_none() {
        reasons.push("induced theta* is not in O".into());
    }
    if qv.is_none() {
        reasons.push("induced vartheta* is not in Q".into());
    }
    Ok(match (ot, qv) {
        (Some(a), Some(b)) => OrdinaryVerdict {
            ordinary: true,
            induced: Some((a.name.clone(), b.name.clone())),
            reasons,
        },
        _ => OrdinaryVerdict {
            ordinary: false,
            induced: None,
            reasons,
        },
    })
}

/// Searches for a sequence of pairs in `O × Q` whose induced pair at `z` is
/// `(θ, ϑ)` on `X`. Returns the names chosen for each `l ∈ X`, or the first
/// `l` for which no member of `O` or `Q` takes the required value at `z`.
pub fn ordinary_witness(
    theta: &IndexMap,
    vartheta: &IndexMap,
    z: &Index,
    o: &[IndexMap],
    q: &[IndexMap],
    x: &IndexSet,
) -> Result<Result<Vec<(Index, String, String)>, Index>, IndexError> {
    let xs = x.elements().ok_or_else(|| {
        IndexError::MismatchedDomains("X must be finite to compare tables".into())
    })?;
    let mut all: Vec<&IndexMap> = vec![theta, vartheta];
    all.extend(o.iter());
    all.extend(q.iter());
    let mut needed = xs.clone();
    needed.push(*z);
    check_domains(&all, &needed)?;
    let mut out = Vec::with_capacity(xs.len());
    for l in &xs {
        let want_t = theta.get(l);
        let want_v = vartheta.get(l);
        let t = o.iter().find(|m| m.get(z) == want_t);
        let v = q.iter().find(|m| m.get(z) == want_v);
        match (t, v) {
            (Some(t), Some(v)) => out.push((*l, t.name.clone(), v.name.clone())),
            _ => return Ok(Err(*l)),
        }
    }
    Ok(Ok(out))
}

#[cfg(test)]
mod tests {
    use super::super::idx;
    use super::*;

    fn dom() -> Vec<Index> {
        (0..=4).map(idx).collect()
    }

    fn constant(name: &str, c: i64) -> IndexMap {
        IndexMap::from_fn(name, &dom(), |_| idx(c))
    }

    #[test]
    fn constant_sequence_is_ordinary() {
        let theta = constant("two", 2);
        let vartheta = constant("three", 3);
        let o = vec![theta.clone(), IndexMap::from_fn("id", &dom(), |i| *i)];
        let q = vec![vartheta.clone()];
        let x = IndexSet::interval(2);
        let pairs: Vec<_> = (0..=2)
            .map(|l| (idx(l), theta.clone(), vartheta.clone()))
            .collect();
        let v = is_ordinary(&pairs, &idx(1), &o, &q, &x).unwrap();
        assert!(v.ordinary, "{:?}", v.reasons);
        assert_eq!(v.induced, Some(("two".into(), "three".into())));
    }

    #[test]
    fn member_outside_o_is_not_ordinary() {
        let o = vec![constant("two", 2)];
        let q = vec![constant("one", 1)];
        let pairs = vec![
            (idx(0), constant("two", 2), constant("one", 1)),
            (idx(1), constant("four", 4), constant("one", 1)),
        ];
        let v = is_ordinary(&pairs, &idx(0), &o, &q, &IndexSet::interval(1)).unwrap();
        assert!(!v.ordinary);
        assert!(v.reasons[0].contains("theta_1"));
    }

    #[test]
    fn mixed_sequence_decided_by_tables() {
        // O holds the identity and the constants 0..4; a sequence of
        // constants c_l = l induces the identity, a sequence with a repeated
        // constant induces a map that is neither.
        let d = dom();
        let mut o: Vec<IndexMap> = (0..=4).map(|c| constant(&format!("c{c}"), c)).collect();
        o.push(IndexMap::from_fn("id", &d, |i| *i));
        let q = vec![constant("c0", 0)];
        let x = IndexSet::interval(4);
        let good: Vec<_> = (0..=4)
            .map(|l| (idx(l), constant(&format!("c{l}"), l), constant("c0", 0)))
            .collect();
        let v = is_ordinary(&good, &idx(2), &o, &q, &x).unwrap();
        assert!(v.ordinary);
        assert_eq!(v.induced.unwrap().0, "id");

        let mut bad = good.clone();
        bad[3].1 = constant("c1", 1);
        let v = is_ordinary(&bad, &idx(2), &o, &q, &x).unwrap();
        assert!(!v.ordinary);
        assert_eq!(v.reasons, vec!["induced theta* is not in O".to_string()]);

        // Independent check: the induced map of `bad` is l -> [0,1,2,1,4][l].
        let induced: Vec<i64> = bad.iter().map(|(_, t, _)| *t.get(&idx(2)).unwrap().numer()).collect();
        assert_eq!(induced, vec![0, 1, 2, 1, 4]);
        assert!(!o.iter().any(|m| (0..=4).all(|l| m.get(&idx(l)) == Some(idx(induced[l as usize])))));
    }

    #[test]
    fn witness_for_identity() {
        let d = dom();
        let o: Vec<IndexMap> = (0..=4).map(|c| constant(&format!("c{c}"), c)).collect();
        let q = vec![constant("c0", 0)];
        let id = IndexMap::from_fn("id", &d, |i| *i);
        let w = ordinary_witness(&id, &constant("c0", 0), &idx(3), &o, &q, &IndexSet::interval(4))
            .unwrap()
            .unwrap();
        assert_eq!(w[2], (idx(2), "c2".to_string(), "c0".to_string()));
        let q_missing: Vec<IndexMap> = vec![constant("c1", 1)];
        assert!(ordinary_witness(&id, &constant("c0", 0), &idx(3), &o, &q_missing, &IndexSet::interval(4))
            .unwrap()
            == Err(idx(0)));
    }

    #[test]
    fn mismatched_domains_are_errors() {
        let short = IndexMap::new("short", [(idx(0), idx(0))]);
        let r = is_ordinary(
            &[(idx(0), short, constant("c0", 0))],
            &idx(0),
            &[],
            &[],
            &IndexSet::interval(0),
        );
        assert!(matches!(r, Err(IndexError::MismatchedDomains(_))));
    }
}
