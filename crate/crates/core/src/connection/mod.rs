//! Affine connections given by local coefficients `Γ^c_{ab}` on each chart.
//!
//! Coefficients are stored flat, `n³` per chart, at position
//! `c·n² + a·n + b`. Local families are glued with a partition of unity
//! after being moved to a common chart by the coordinate-change formula.

mod glue;
mod pipeline;
mod transform;

use serde::Serialize;
use thiserror::Error;

use crate::atlas::{Atlas, AtlasError};
use crate::connective::ConnectiveError;
use crate::expr::{Expr, ParseError};
use crate::index_algebra::{format_index, idx, DistributiveStructure, Index, IndexError, IndexFn};
use crate::spaces::{
    check_ck, check_membership, Budget, MembershipClaim, MembershipTemplate, SpaceError, Verdict,
};

pub use glue::{
    add, difference, glue, glue_with, verify_connection_law, verify_tensoriality, EndValuedOneForm,
    GlobalConnection, LawMode, LawReport, PieceResidual, GRID_LAW_TOLERANCE, SYMBOLIC_LAW_TOLERANCE,
};
pub use pipeline::{
    neighbourhood_domain, regular_existence_pipeline, ChartMembership, HypothesisCheck, NiceTests,
    PipelineInput, PipelineOutput, PipelineReport,
};
pub use transform::{
    change_coordinates, change_coordinates_at, inverse_jacobian, jacobian, MIN_JACOBIAN_DET,
};

pub fn coeff_index(n: usize, c: usize, a: usize, b: usize) -> usize {
    c * n * n + a * n + b
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error("chart `{chart}`: expected {expected} coefficients, got {got}")]
    CoefficientCount {
        chart: String,
        expected: usize,
        got: usize,
    },
    #[error("chart `{chart}`, coefficient {index}: {source}")]
    Parse {
        chart: String,
        index: usize,
        source: ParseError,
    },
    #[error("chart `{chart}`, coefficient {index} is not C^2 on the chart image: {reason}")]
    NotC2 {
        chart: String,
        index: usize,
        reason: String,
    },
    #[error("no local coefficients for chart `{0}`")]
    MissingLocal(String),
    #[error("transition {from} -> {to} has a singular Jacobian at {point:?} (det {det:e})")]
    SingularJacobian {
        from: String,
        to: String,
        point: Vec<f64>,
        det: f64,
    },
    #[error("connections live on different atlases: {0}")]
    AtlasMismatch(String),
    #[error("hypothesis `{hypothesis}` fails: {detail}")]
    Hypothesis { hypothesis: String, detail: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Connective(#[from] ConnectiveError),
}

/// Coefficients `f^c_{ab}` of a connection on one chart image.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCoefficients {
    pub chart: usize,
    pub coefficients: Vec<Expr>,
    /// Verdict of the `C^2` check per coefficient.
    pub c2: Vec<Verdict>,
}

/// Validates `n³` coefficient expressions on the image of `chart`: each must
/// evaluate on the image and be `C^2` there.
pub fn local_connection(
    atlas: &Atlas,
    chart: &str,
    coefficients: Vec<Expr>,
    budget: &Budget,
) -> Result<LocalCoefficients, ConnectionError> {
    let s = atlas.chart_index(chart).ok_or_else(|| {
        ConnectionError::Atlas(AtlasError::UnknownChart {
            name: chart.into(),
            location: "locals".into(),
        })
    })?;
    let n = atlas.dim;
    if coefficients.len() != n * n * n {
        return Err(ConnectionError::CoefficientCount {
            chart: chart.into(),
            expected: n * n * n,
            got: coefficients.len(),
        });
    }
    let image = &atlas.charts[s].image;
    let mut c2 = Vec::with_capacity(coefficients.len());
    for (index, f) in coefficients.iter().enumerate() {
        if let Some(v) = f.free_vars().into_iter().find(|v| *v >= n) {
            return Err(ConnectionError::NotC2 {
                chart: chart.into(),
                index,
                reason: format!("uses x{} in dimension {n}", v + 1),
            });
        }
        let verdict = match check_ck(f, 2, image, budget) {
            Ok((v, _)) => v,
            Err(e) => {
                return Err(ConnectionError::NotC2 {
                    chart: chart.into(),
                    index,
                    reason: e.to_string(),
                })
            }
        };
        match verdict {
            Verdict::Member => {}
            Verdict::NotMember => {
                return Err(ConnectionError::NotC2 {
                    chart: chart.into(),
                    index,
                    reason: "derivative seminorms grow under refinement".into(),
                })
            }
            Verdict::Inconclusive => {
                return Err(ConnectionError::NotC2 {
                    chart: chart.into(),
                    index,
                    reason: "derivative seminorms do not settle within the budget".into(),
                })
            }
        }
        c2.push(verdict);
    }
    Ok(LocalCoefficients {
        chart: s,
        coefficients,
        c2,
    })
}

/// Parses and validates coefficient strings.
pub fn parse_local(
    atlas: &Atlas,
    chart: &str,
    texts: &[String],
    budget: &Budget,
) -> Result<LocalCoefficients, ConnectionError> {
    let mut coefficients = Vec::with_capacity(texts.len());
    for (index, t) in texts.iter().enumerate() {
        coefficients.push(Expr::parse(t).map_err(|source| ConnectionError::Parse {
            chart: chart.into(),
            index,
            source,
        })?);
    }
    local_connection(atlas, chart, coefficients, budget)
}

impl LocalCoefficients {
    /// The all-zero (flat) local connection.
    pub fn zero(atlas: &Atlas, chart: usize) -> LocalCoefficients {
        let m = atlas.dim.pow(3);
        LocalCoefficients {
            chart,
            coefficients: vec![Expr::zero(); m],
            c2: vec![Verdict::Member; m],
        }
    }

    /// Checks the claimed regularity of every coefficient on the chart image.
    pub fn verify_claim(
        &self,
        atlas: &Atlas,
        template: &MembershipTemplate,
        budget: &Budget,
    ) -> Result<Vec<MembershipClaim>, ConnectionError> {
        let image = &atlas.charts[self.chart].image;
        self.coefficients
            .iter()
            .map(|f| Ok(check_membership(f, image, template, budget)?))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GluedIndices {
    pub alpha0_prime: String,
    pub beta0_prime: String,
}

/// `α'₀ = δ(ε³(α(1), α₀(0)), ε(α(2), α(1)))` and
/// `β'₀ = max(β(1), β(2), β₀(0))`.
pub fn glued_regularity_indices(
    ds: &DistributiveStructure,
    alpha: &IndexFn,
    beta: &IndexFn,
    alpha0: &IndexFn,
    beta0: &IndexFn,
) -> Result<(Index, Index), ConnectionError> {
    let at = |f: &IndexFn, name: &str, i: i64| {
        f.apply(&idx(i)).ok_or_else(|| {
            ConnectionError::Index(IndexError::InvalidParams(format!("{name}({i}) is undefined")))
        })
    };
    let a1 = at(alpha, "alpha", 1)?;
    let a2 = at(alpha, "alpha", 2)?;
    let a00 = at(alpha0, "alpha0", 0)?;
    let first = ds.eps_power(3, &a1, &a00)?;
    let second = ds.eps_checked(&a2, &a1)?;
    let alpha0_prime = ds.delta_checked(&first, &second)?;
    let beta0_prime = [at(beta, "beta", 1)?, at(beta, "beta", 2)?, at(beta0, "beta0", 0)?]
        .into_iter()
        .max()
        .unwrap();
    Ok((alpha0_prime, beta0_prime))
}

impl GluedIndices {
    pub fn new(pair: (Index, Index)) -> GluedIndices {
        GluedIndices {
            alpha0_prime: format_index(&pair.0),
            beta0_prime: format_index(&pair.1),
        }
    }
}
