use serde::{Deserialize, Serialize};

use super::{format_index, idx, Index, IndexMap};

/// A map `Γ_k → Γ` used for the regularity assignments `α, β, θ, ϑ, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexFn {
    Identity,
    Constant { value: i64 },
    /// `i ↦ scale·i + offset`; `scale = -1` gives the shift `i ↦ c − i`.
    Affine { scale: i64, offset: i64 },
    /// Explicit `[i, value]` entries; undefined elsewhere.
    Table { entries: Vec<[i64; 2]> },
}

impl IndexFn {
    pub fn constant(value: i64) -> IndexFn {
        IndexFn::Constant { value }
    }

    pub fn shift(c: i64) -> IndexFn {
        IndexFn::Affine {
            scale: -1,
            offset: c,
        }
    }

    pub fn table<I: IntoIterator<Item = (i64, i64)>>(entries: I) -> IndexFn {
        IndexFn::Table {
            entries: entries.into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn apply(&self, i: &Index) -> Option<Index> {
        match self {
            IndexFn::Identity => Some(*i),
            IndexFn::Constant { value } => Some(idx(*value)),
            IndexFn::Affine { scale, offset } => Some(idx(*scale) * i + idx(*offset)),
            IndexFn::Table { entries } => entries
                .iter()
                .find(|[a, _]| idx(*a) == *i)
                .map(|[_, b]| idx(*b)),
        }
    }

    /// Integer value at an integer argument.
    pub fn at(&self, i: u32) -> Option<i64> {
        self.apply(&idx(i64::from(i))).and_then(|v| super::to_i64(&v))
    }

    pub fn describe(&self) -> String {
        match self {
            IndexFn::Identity => "id".into(),
            IndexFn::Constant { value } => format!("const {value}"),
            IndexFn::Affine { scale, offset } => format!("i -> {scale}*i + {offset}"),
            IndexFn::Table { entries } => {
                let parts: Vec<String> = entries.iter().map(|[a, b]| format!("{a}:{b}")).collect();
                format!("table {{{}}}", parts.join(", "))
            }
        }
    }

    /// Tabulates the map on a finite domain; `None` if undefined somewhere.
    pub fn to_map(&self, name: &str, domain: &[Index]) -> Option<IndexMap> {
        let mut entries = Vec::with_capacity(domain.len());
        for i in domain {
            entries.push((*i, self.apply(i)?));
        }
        Some(IndexMap::new(name, entries))
    }

    /// Pointwise `self ≤ other` on the integers `[0, k]`.
    pub fn le_on(&self, other: &IndexFn, k: u32) -> bool {
        (0..=k).all(|i| match (self.at(i), other.at(i)) {
            (Some(a), Some(b)) => a <= b,
            _ => false,
        })
    }

    pub fn format_at(&self, i: u32) -> String {
        self.apply(&idx(i64::from(i)))
            .map_or_else(|| "undefined".to_string(), |v| format_index(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_each_form() {
        assert_eq!(IndexFn::Identity.at(3), Some(3));
        assert_eq!(IndexFn::constant(2).at(7), Some(2));
        assert_eq!(IndexFn::shift(5).at(2), Some(3));
        let t = IndexFn::table([(0, 4), (1, 2)]);
        assert_eq!(t.at(1), Some(2));
        assert_eq!(t.at(2), None);
    }

    #[test]
    fn parses_from_toml() {
        let f: IndexFn = toml::from_str("kind = \"affine\"\nscale = -1\noffset = 4").unwrap();
        assert_eq!(f, IndexFn::shift(4));
        let f: IndexFn = toml::from_str("kind = \"table\"\nentries = [[0, 1], [1, 1]]").unwrap();
        assert_eq!(f.at(0), Some(1));
    }

    #[test]
    fn tabulation_requires_totality() {
        let d: Vec<Index> = (0..3).map(idx).collect();
        assert!(IndexFn::table([(0, 1)]).to_map("t", &d).is_none());
        assert_eq!(IndexFn::Identity.to_map("id", &d).unwrap().get(&idx(2)), Some(idx(2)));
    }
}
