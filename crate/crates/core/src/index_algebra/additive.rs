use std::collections::BTreeMap;

use super::{format_index, idx, to_i64, Bound, Index, IndexError, IndexSet};

/// How `z + l` is computed in an additive set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlusRule {
    /// Ordinary addition of rationals.
    Sum,
    /// Explicit table; must agree with integer addition on `[0,k]`.
    Table(BTreeMap<(Index, Index), Index>),
}

/// A set `Γ_k` of degree `k` with `Γ_2k ⊇ Γ_k` of degree `2k` and a sum
/// `Γ_k × Γ_k → Γ_2k` extending the sum of nonnegative integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditiveDegreeSet {
    pub k: Bound,
    pub gamma_k: IndexSet,
    pub gamma_2k: IndexSet,
    pub plus: PlusRule,
}

impl AdditiveDegreeSet {
    /// `Γ_k = [0,k]`, `Γ_2k = [0,2k]` with integer sum.
    pub fn standard(k: Bound) -> AdditiveDegreeSet {
        let double = match k {
            Bound::Finite(k) => Bound::Finite(2 * k),
            Bound::Infinite => Bound::Infinite,
        };
        AdditiveDegreeSet {
            k,
            gamma_k: IndexSet::Interval(k),
            gamma_2k: IndexSet::Interval(double),
            plus: PlusRule::Sum,
        }
    }

    pub fn new(
        k: Bound,
        gamma_k: IndexSet,
        gamma_2k: IndexSet,
        plus: PlusRule,
    ) -> Result<AdditiveDegreeSet, IndexError> {
        let bad = |m: String| Err(IndexError::InvalidAdditive(m));
        if !gamma_k.has_degree(k) {
            return bad(format!("{gamma_k} does not contain [0,{k}]"));
        }
        let double = match k {
            Bound::Finite(k) => Bound::Finite(2 * k),
            Bound::Infinite => Bound::Infinite,
        };
        if !gamma_2k.has_degree(double) {
            return bad(format!("{gamma_2k} does not contain [0,{double}]"));
        }
        if !gamma_k.is_subset(&gamma_2k) {
            return bad(format!("{gamma_k} is not contained in {gamma_2k}"));
        }
        let ads = AdditiveDegreeSet {
            k,
            gamma_k,
            gamma_2k,
            plus,
        };
        if let PlusRule::Table(t) = &ads.plus {
            let Some(elems) = ads.gamma_k.elements() else {
                return bad("a plus table needs a finite Γ_k".into());
            };
            for z in &elems {
                for l in &elems {
                    let Some(v) = t.get(&(*z, *l)) else {
                        return bad(format!(
                            "plus table has no entry for ({}, {})",
                            format_index(z),
                            format_index(l)
                        ));
                    };
                    if !ads.gamma_2k.contains(v) {
                        return bad(format!("plus value {} outside Γ_2k", format_index(v)));
                    }
                    if let (Some(a), Some(b)) = (to_i64(z), to_i64(l)) {
                        let within = |x: i64| match k {
                            Bound::Finite(k) => (0..=i64::from(k)).contains(&x),
                            Bound::Infinite => x >= 0,
                        };
                        if within(a) && within(b) && *v != idx(a + b) {
                            return bad(format!(
                                "plus({a}, {b}) = {} does not extend integer sum",
                                format_index(v)
                            ));
                        }
                    }
                }
            }
        }
        Ok(ads)
    }

    pub fn plus(&self, z: &Index, l: &Index) -> Option<Index> {
        match &self.plus {
            PlusRule::Sum => Some(z + l),
            PlusRule::Table(t) => t.get(&(*z, *l)).copied(),
        }
    }
}

/// The window `[β₀;j]_k = [0, k − β₀(j)]`; `[0,∞)` when `k` is infinite.
pub fn beta_window(k: Bound, beta0_j: i64) -> Result<IndexSet, IndexError> {
    match k {
        Bound::Finite(kk) if (2..=i64::from(kk)).contains(&beta0_j) => {
            Ok(IndexSet::interval((i64::from(kk) - beta0_j) as u32))
        }
        Bound::Infinite if beta0_j >= 2 => Ok(IndexSet::unbounded()),
        _ => Err(IndexError::WindowOutOfRange { beta0: beta0_j, k }),
    }
}

/// `Γ_k[z] = { l ∈ Γ_k : z + l ∈ [β₀;j]_k }`.
pub fn gamma_z(ads: &AdditiveDegreeSet, beta0_j: i64, z: &Index) -> Result<IndexSet, IndexError> {
    let window = beta_window(ads.k, beta0_j)?;
    if !window.contains(z) {
        return Err(IndexError::ZOutsideWindow { z: *z, window });
    }
    match ads.gamma_k.elements() {
        Some(elems) => Ok(IndexSet::finite(elems.into_iter().filter(|l| {
            ads.plus(z, l).is_some_and(|v| window.contains(&v))
        }))),
        // Γ_∞ = [0,∞) with integer sum and window [0,∞).
        None => Ok(IndexSet::unbounded()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(beta_window(Bound::Finite(10), 2).unwrap(), IndexSet::interval(8));
        assert_eq!(beta_window(Bound::Finite(2), 2).unwrap(), IndexSet::interval(0));
        assert_eq!(beta_window(Bound::Infinite, 5).unwrap(), IndexSet::unbounded());
        assert!(beta_window(Bound::Finite(10), 1).is_err());
        assert!(beta_window(Bound::Finite(10), 11).is_err());
    }

    #[test]
    fn gamma_z_examples() {
        let ads = AdditiveDegreeSet::standard(Bound::Finite(10));
        assert_eq!(gamma_z(&ads, 2, &idx(0)).unwrap(), IndexSet::interval(8));
        assert_eq!(gamma_z(&ads, 2, &idx(8)).unwrap(), IndexSet::interval(0));
        assert_eq!(gamma_z(&ads, 2, &idx(3)).unwrap(), IndexSet::interval(5));
        assert!(matches!(
            gamma_z(&ads, 2, &idx(9)),
            Err(IndexError::ZOutsideWindow { .. })
        ));
    }

    #[test]
    fn gamma_z_in_the_smooth_case_is_everything() {
        let ads = AdditiveDegreeSet::standard(Bound::Infinite);
        let s = gamma_z(&ads, 3, &idx(1000)).unwrap();
        assert!(IndexSet::unbounded().is_subset(&s));
    }

    #[test]
    fn larger_gamma_keeps_more_indices() {
        // Γ_4 = [0,4] ∪ {1/2}, with 1/2 absorbing so that z + 1/2 = z.
        let mut gk: Vec<Index> = (0..=4).map(idx).collect();
        gk.push(Index::new(1, 2));
        let gamma_k = IndexSet::finite(gk.clone());
        let mut g2: Vec<Index> = (0..=8).map(idx).collect();
        g2.push(Index::new(1, 2));
        let mut table = BTreeMap::new();
        for z in &gk {
            for l in &gk {
                let half = Index::new(1, 2);
                let v = if *l == half {
                    *z
                } else if *z == half {
                    *l
                } else {
                    z + l
                };
                table.insert((*z, *l), v);
            }
        }
        let ads = AdditiveDegreeSet::new(
            Bound::Finite(4),
            gamma_k,
            IndexSet::finite(g2),
            PlusRule::Table(table),
        )
        .unwrap();
        let s = gamma_z(&ads, 2, &idx(2)).unwrap();
        assert_eq!(s, IndexSet::finite([idx(0), Index::new(1, 2)]));
    }

    #[test]
    fn plus_table_must_extend_integer_sum() {
        let mut table = BTreeMap::new();
        for z in 0..=1 {
            for l in 0..=1 {
                table.insert((idx(z), idx(l)), idx((z + l).min(1)));
            }
        }
        let err = AdditiveDegreeSet::new(
            Bound::Finite(1),
            IndexSet::interval(1),
            IndexSet::interval(2),
            PlusRule::Table(table),
        )
        .unwrap_err();
        assert!(err.to_string().contains("does not extend integer sum"));
    }
}
