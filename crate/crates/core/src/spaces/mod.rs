//! Regularity spaces over finite unions of open boxes.
//!
//! `C^r` seminorms are sups of derivatives over closed grids on the compact
//! exhaustion sets `K_l`; `L^p` norms use composite midpoint quadrature.
//! Membership is a three-valued numeric verdict decided by how these
//! estimates behave under grid refinement.

mod inequalities;
mod membership;
mod norms;
mod presheaf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr, OrderBudgetExceeded};

pub use inequalities::{
    discrete_convolution, holder_product_check, young_convolution_check, InequalityCheck,
};
pub use membership::{
    check_ck, check_membership, classify_refinements, Budget, Evidence, Family, MembershipClaim,
    MembershipTemplate, OrderVerdict, Verdict, STABILITY_TOLERANCE,
};
pub use norms::{ck_seminorm, closed_grid, lp_norm, lp_norm_on_rect, midpoint_cells};
pub use presheaf::{check_bkab_presheaf, is_bump_on, ClosureFailure, ClosureReport};

/// An open axis-aligned box `(lo_1, hi_1) × ... × (lo_n, hi_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Rect, SpaceError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(SpaceError::InvalidDomain(format!(
                "box corners have dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(SpaceError::InvalidDomain(format!(
                    "degenerate or unbounded side ({a}, {b})"
                )));
            }
        }
        Ok(Rect { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Rect, SpaceError> {
        Rect::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Open containment.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| a < x && x < b)
    }

    /// Shrinks each side by `margin` (absolute); `None` if nothing is left.
    pub fn shrink(&self, margin: f64) -> Option<Rect> {
        let lo: Vec<f64> = self.lo.iter().map(|a| a + margin).collect();
        let hi: Vec<f64> = self.hi.iter().map(|b| b - margin).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(Rect { lo, hi })
        } else {
            None
        }
    }

    /// Shrinks each side by the fraction `t` of its width.
    pub fn shrink_relative(&self, t: f64) -> Rect {
        let w = self.widths();
        Rect {
            lo: self.lo.iter().zip(&w).map(|(a, w)| a + t * w).collect(),
            hi: self.hi.iter().zip(&w).map(|(b, w)| b - t * w).collect(),
        }
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        if self.dim() != other.dim() {
            return None;
        }
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(Rect { lo, hi })
        } else {
            None
        }
    }

    pub fn is_within(&self, other: &Rect) -> bool {
        self.dim() == other.dim()
            && self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(a, b)| a >= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a <= b)
    }
}

/// Number of exhaustion levels used by membership checks by default.
pub const DEFAULT_LEVELS: usize = 3;

/// A bounded open set given as a finite union of pairwise disjoint boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    boxes: Vec<Rect>,
}

impl Domain {
    pub fn new(boxes: Vec<Rect>) -> Result<Domain, SpaceError> {
        let Some(first) = boxes.first() else {
            return Err(SpaceError::InvalidDomain("no boxes".into()));
        };
        let n = first.dim();
        for (i, b) in boxes.iter().enumerate() {
            if b.dim() != n {
                return Err(SpaceError::InvalidDomain(format!(
                    "box {i} has dimension {} instead of {n}",
                    b.dim()
                )));
            }
            Rect::new(b.lo.clone(), b.hi.clone())?;
            for (j, c) in boxes.iter().enumerate().skip(i + 1) {
                if b.intersect(c).is_some() {
                    return Err(SpaceError::InvalidDomain(format!("boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(Domain { boxes })
    }

    pub fn from_rect(r: Rect) -> Domain {
        Domain { boxes: vec![r] }
    }

    pub fn interval(a: f64, b: f64) -> Result<Domain, SpaceError> {
        Ok(Domain::from_rect(Rect::interval(a, b)?))
    }

    pub fn boxes(&self) -> &[Rect] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(Rect::volume).sum()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// `K_l`: every box shrunk by `2^{-(l+2)}` of its width on each side, so
    /// `K_0` is the middle half and `K_l ⊂ K_{l+1} ⊂ U`.
    pub fn exhaustion(&self, l: usize) -> Vec<Rect> {
        let t = 0.5f64.powi(l as i32 + 2);
        self.boxes.iter().map(|b| b.shrink_relative(t)).collect()
    }

    /// `U ∩ V` for a box `V`.
    pub fn restrict(&self, v: &Rect) -> Option<Domain> {
        let boxes: Vec<Rect> = self.boxes.iter().filter_map(|b| b.intersect(v)).collect();
        if boxes.is_empty() {
            None
        } else {
            Some(Domain { boxes })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("evaluating {what} at {point:?}: {source}")]
    Eval {
        what: String,
        point: Vec<f64>,
        source: EvalError,
    },
    #[error(transparent)]
    Order(#[from] OrderBudgetExceeded),
    #[error("unsupported specification: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("grid resolution {0} is too small")]
    GridTooSmall(usize),
}

/// Evaluates `f` at every point, in parallel, returning values in input
/// order. The first failing point (in input order) is reported.
pub(crate) fn eval_all(f: &Expr, points: &[Vec<f64>], what: &str) -> Result<Vec<f64>, SpaceError> {
    let results: Vec<Result<f64, EvalError>> = points.par_iter().map(|p| f.eval(p)).collect();
    let mut out = Vec::with_capacity(results.len());
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(v) => out.push(v),
            Err(source) => {
                return Err(SpaceError::Eval {
                    what: what.to_string(),
                    point: p.clone(),
                    source,
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustion_is_nested_inside_the_domain() {
        let u = Domain::new(vec![
            Rect::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
            Rect::new(vec![2.0, 0.0], vec![3.0, 1.0]).unwrap(),
        ])
        .unwrap();
        for l in 0..5 {
            let k = u.exhaustion(l);
            let k_next = u.exhaustion(l + 1);
            for ((a, b), outer) in k.iter().zip(&k_next).zip(u.boxes()) {
                assert!(a.is_within(b));
                assert!(b.is_within(outer));
                assert!(b.lo.iter().zip(&outer.lo).all(|(x, y)| x > y));
            }
        }
        assert_eq!(u.exhaustion(0)[0].lo, vec![0.25, 0.5]);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Rect::interval(1.0, 1.0).is_err());
        assert!(Rect::interval(0.0, f64::INFINITY).is_err());
        assert!(Domain::new(vec![]).is_err());
        let overlapping = Domain::new(vec![
            Rect::interval(0.0, 2.0).unwrap(),
            Rect::interval(1.0, 3.0).unwrap(),
        ]);
        assert!(matches!(overlapping, Err(SpaceError::InvalidDomain(_))));
    }

    #[test]
    fn restriction_intersects_boxes() {
        let u = Domain::interval(0.0, 1.0).unwrap();
        let v = u.restrict(&Rect::interval(0.5, 2.0).unwrap()).unwrap();
        assert_eq!(v.boxes()[0], Rect::interval(0.5, 1.0).unwrap());
        assert!(u.restrict(&Rect::interval(1.0, 2.0).unwrap()).is_none());
    }
}
