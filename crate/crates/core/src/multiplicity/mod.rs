//! Three-parameter families `Ω^c_{ab}`, the two difference predicates
//! between them, and the residual of the nonhomogeneous system
//! `F^c_ξ(f; φ, Ω) = Ω^c`.

mod witness;

use serde::Serialize;
use thiserror::Error;

use crate::atlas::{Atlas, PartitionOfUnity};
use crate::connection::{coeff_index, glue_with, ConnectionError, GlobalConnection, LocalCoefficients};
use crate::connective::ConnectiveStructure;
use crate::expr::Expr;
use crate::spaces::{check_membership, midpoint_cells, Budget, MembershipClaim, MembershipTemplate, SpaceError};

pub use witness::{
    locally_different, ComponentWitness, Difference, LocalDifference, SearchBudget, WitnessOutcome, REFINEMENT,
};

/// Values at or below this are treated as zero when comparing functions.
pub const DIFFERENCE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiplicityError {
    #[error("families live on different atlases: {0}")]
    AtlasMismatch(String),
    #[error("chart `{chart}`: expected {expected} functions, got {got}")]
    CoefficientCount {
        chart: String,
        expected: usize,
        got: usize,
    },
    #[error("the atlas is not flagged smooth; the multiplicity check needs k = infinity")]
    NotSmooth,
    #[error("families are not additively different on chart `{chart}` for c = {c}")]
    NotAdditivelyDifferent { chart: String, c: usize },
    #[error("grid resolution {0} is too small")]
    GridTooSmall(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
}

/// `n³` functions `Ω^c_{ab}` per chart, stored at `c·n² + a·n + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeParamFamily {
    pub dim: usize,
    pub charts: Vec<String>,
    pub omega: Vec<Vec<Expr>>,
    pub claim: Option<MembershipTemplate>,
}

impl ThreeParamFamily {
    pub fn new(atlas: &Atlas, omega: Vec<Vec<Expr>>) -> Result<ThreeParamFamily, MultiplicityError> {
        let n = atlas.dim;
        if omega.len() != atlas.charts.len() {
            return Err(MultiplicityError::AtlasMismatch(format!(
                "{} charts in the atlas, {} in the family",
                atlas.charts.len(),
                omega.len()
            )));
        }
        for (chart, fs) in atlas.charts.iter().zip(&omega) {
            if fs.len() != n * n * n {
                return Err(MultiplicityError::CoefficientCount {
                    chart: chart.name.clone(),
                    expected: n * n * n,
                    got: fs.len(),
                });
            }
        }
        Ok(ThreeParamFamily {
            dim: n,
            charts: atlas.charts.iter().map(|c| c.name.clone()).collect(),
            omega,
            claim: None,
        })
    }

    /// Every function equal to `value`.
    pub fn constant(atlas: &Atlas, value: Expr) -> ThreeParamFamily {
        let m = atlas.dim.pow(3);
        ThreeParamFamily::new(atlas, vec![vec![value; m]; atlas.charts.len()]).expect("sized by the atlas")
    }

    pub fn from_connection(g: &GlobalConnection) -> ThreeParamFamily {
        ThreeParamFamily {
            dim: g.dim,
            charts: g.charts.clone(),
            omega: g.coefficients.clone(),
            claim: None,
        }
    }

    pub fn with_claim(mut self, claim: MembershipTemplate) -> ThreeParamFamily {
        self.claim = Some(claim);
        self
    }

    pub fn get(&self, chart: usize, c: usize, a: usize, b: usize) -> &Expr {
        &self.omega[chart][coeff_index(self.dim, c, a, b)]
    }

    /// `Ω^c = Σ_{a,b} Ω^c_{ab}` on `chart`, one entry per `c`.
    pub fn sums(&self, chart: usize) -> Vec<Expr> {
        let n = self.dim;
        (0..n)
            .map(|c| Expr::sum((0..n * n).map(|ab| self.omega[chart][c * n * n + ab].clone())))
            .collect()
    }

    pub fn add(&self, other: &ThreeParamFamily) -> Result<ThreeParamFamily, MultiplicityError> {
        self.same_atlas(other)?;
        let omega = self
            .omega
            .iter()
            .zip(&other.omega)
            .map(|(f, g)| f.iter().zip(g).map(|(x, y)| Expr::add(x.clone(), y.clone())).collect())
            .collect();
        Ok(ThreeParamFamily {
            dim: self.dim,
            charts: self.charts.clone(),
            omega,
            claim: None,
        })
    }

    /// Checks the claimed regularity of every function on its chart image.
    /// Without a claim there is nothing to check.
    pub fn verify_claim(&self, atlas: &Atlas, budget: &Budget) -> Result<Vec<Vec<MembershipClaim>>, MultiplicityError> {
        let Some(t) = &self.claim else {
            return Ok(Vec::new());
        };
        self.check_atlas(atlas)?;
        let mut out = Vec::with_capacity(self.omega.len());
        for (s, fs) in self.omega.iter().enumerate() {
            let image = &atlas.charts[s].image;
            let mut row = Vec::with_capacity(fs.len());
            for f in fs {
                row.push(check_membership(f, image, t, budget)?);
            }
            out.push(row);
        }
        Ok(out)
    }

    fn same_atlas(&self, other: &ThreeParamFamily) -> Result<(), MultiplicityError> {
        if self.dim != other.dim || self.charts != other.charts {
            return Err(MultiplicityError::AtlasMismatch(format!(
                "charts {:?} (n = {}) vs {:?} (n = {})",
                self.charts, self.dim, other.charts, other.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn check_atlas(&self, atlas: &Atlas) -> Result<(), MultiplicityError> {
        let names: Vec<&str> = atlas.charts.iter().map(|c| c.name.as_str()).collect();
        if self.dim != atlas.dim || self.charts.iter().map(String::as_str).ne(names.iter().copied()) {
            return Err(MultiplicityError::AtlasMismatch(format!(
                "family on {:?} (n = {}), atlas has {:?} (n = {})",
                self.charts, self.dim, names, atlas.dim
            )));
        }
        Ok(())
    }
}

/// Sample points on every box of the chart image.
pub(crate) fn chart_samples(atlas: &Atlas, chart: usize, grid: usize) -> Vec<Vec<f64>> {
    atlas.charts[chart]
        .image
        .boxes()
        .iter()
        .flat_map(|b| midpoint_cells(b, grid).0)
        .collect()
}

fn eval_at(f: &Expr, p: &[f64], what: &str) -> Result<f64, MultiplicityError> {
    f.eval(p).map_err(|source| {
        MultiplicityError::Space(SpaceError::Eval {
            what: what.to_string(),
            point: p.to_vec(),
            source,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditiveVerdict {
    pub chart: String,
    pub c: usize,
    pub different: bool,
    /// First grid point where the sums differ.
    pub witness: Option<Vec<f64>>,
    pub max_difference: f64,
}

/// For each chart and `c`, whether `Ω^c` and `Ω̄^c` differ at some grid point.
pub fn additively_different(
    f: &ThreeParamFamily,
    g: &ThreeParamFamily,
    atlas: &Atlas,
    grid: usize,
) -> Result<Vec<AdditiveVerdict>, MultiplicityError> {
    f.check_atlas(atlas)?;
    g.check_atlas(atlas)?;
    if grid == 0 {
        return Err(MultiplicityError::GridTooSmall(grid));
    }
    let n = atlas.dim;
    let mut out = Vec::new();
    for (s, chart) in atlas.charts.iter().enumerate() {
        let pts = chart_samples(atlas, s, grid);
        for c in 0..n {
            let mut witness = None;
            let mut max_difference = 0.0f64;
            for p in &pts {
                let mut d = 0.0;
                for ab in 0..n * n {
                    let i = c * n * n + ab;
                    d += eval_at(&f.omega[s][i], p, "first family")? - eval_at(&g.omega[s][i], p, "second family")?;
                }
                let d = d.abs();
                if d > DIFFERENCE_THRESHOLD && witness.is_none() {
                    witness = Some(p.clone());
                }
                max_difference = max_difference.max(d);
            }
            out.push(AdditiveVerdict {
                chart: chart.name.clone(),
                c,
                different: witness.is_some(),
                witness,
                max_difference,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub chart: String,
    pub c: usize,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub max: f64,
    /// `F^c_ξ` per chart and `c`.
    #[serde(skip)]
    pub lhs: Vec<Vec<Expr>>,
}

/// Sup-norm on the grid of `F^c_ξ − Ω^c`, where
/// `F^c_ξ = Σ_{a,b} ξ(Γ^f_ξ)^c_{ab}` and `Γ^f_ξ` is the connection glued
/// from `locals` with `ξ` applied to the locals and the partition.
pub fn residual(
    locals: &[LocalCoefficients],
    cs: &ConnectiveStructure,
    atlas: &Atlas,
    pou: &PartitionOfUnity,
    omega: &ThreeParamFamily,
    grid: usize,
) -> Result<ResidualReport, MultiplicityError> {
    omega.check_atlas(atlas)?;
    if grid == 0 {
        return Err(MultiplicityError::GridTooSmall(grid));
    }
    let xi = cs.xi.as_ref();
    let glued = glue_with(atlas, pou, locals, xi)?;
    let n = atlas.dim;
    let lhs: Vec<Vec<Expr>> = glued
        .coefficients
        .iter()
        .map(|gs| {
            (0..n)
                .map(|c| Expr::sum((0..n * n).map(|ab| xi.apply(&gs[c * n * n + ab]))))
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    let mut max = 0.0f64;
    for (s, chart) in atlas.charts.iter().enumerate() {
        let pts = chart_samples(atlas, s, grid);
        let targets = omega.sums(s);
        for c in 0..n {
            let mut sup = 0.0f64;
            for p in &pts {
                let d = eval_at(&lhs[s][c], p, "F^c")? - eval_at(&targets[c], p, "Omega^c")?;
                sup = sup.max(d.abs());
            }
            max = max.max(sup);
            entries.push(ResidualEntry {
                chart: chart.name.clone(),
                c,
                sup,
            });
        }
    }
    Ok(ResidualReport { entries, max, lhs })
}
