use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::{restrict_to_rect, Atlas, PartitionOfUnity};
use crate::connective::ClaimTransformer;
use crate::expr::Expr;
use crate::spaces::{midpoint_cells, SpaceError};

use super::transform::{change_coordinates, change_coordinates_at, check_invertible, inverse_jacobian, jacobian};
use super::{ConnectionError, LocalCoefficients};

pub const SYMBOLIC_LAW_TOLERANCE: f64 = 1e-6;
pub const GRID_LAW_TOLERANCE: f64 = 1e-3;
/// Finite-difference step used by the grid mode.
const GRID_STEP: f64 = 1e-4;

/// Coefficients `Γ^c_{ab}` on every chart, in that chart's coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalConnection {
    pub dim: usize,
    pub charts: Vec<String>,
    pub coefficients: Vec<Vec<Expr>>,
    pub provenance: String,
}

/// Coefficients `ω^c_{ab}` of an `End(TM)`-valued one-form.
#[derive(Clone, Debug, PartialEq)]
pub struct EndValuedOneForm {
    pub dim: usize,
    pub charts: Vec<String>,
    pub coefficients: Vec<Vec<Expr>>,
}

fn locals_by_chart<'a>(
    atlas: &Atlas,
    locals: &'a [LocalCoefficients],
) -> Result<Vec<&'a LocalCoefficients>, ConnectionError> {
    (0..atlas.charts.len())
        .map(|s| {
            locals
                .iter()
                .find(|l| l.chart == s)
                .ok_or_else(|| ConnectionError::MissingLocal(atlas.name(s).into()))
        })
        .collect()
}

/// `Γ_s = Σ_{s' ∈ N(s)} ψ_{s'} · f_{s';s}`, with `ψ_{s'}` and `f_{s'}`
/// rewritten in chart `s` through the overlap pieces.
pub fn glue(
    atlas: &Atlas,
    pou: &PartitionOfUnity,
    locals: &[LocalCoefficients],
) -> Result<GlobalConnection, ConnectionError> {
    glue_with(atlas, pou, locals, &crate::connective::Xi::Identity)
}

/// [`glue`] after applying `xi` to every partition function and every local
/// coefficient: `Σ ξ(ψ_{s'}) · (Γ_{s'})_ξ` with `(Γ_{s'})_ξ` the connection
/// defined by `ξ(f_{s'})`.
pub fn glue_with(
    atlas: &Atlas,
    pou: &PartitionOfUnity,
    locals: &[LocalCoefficients],
    xi: &dyn ClaimTransformer,
) -> Result<GlobalConnection, ConnectionError> {
    let by_chart = locals_by_chart(atlas, locals)?;
    let n = atlas.dim;
    let transformed: Vec<Vec<Expr>> = by_chart
        .iter()
        .map(|l| l.coefficients.iter().map(|f| xi.apply(f)).collect())
        .collect();
    for piece in &atlas.pieces {
        let (_, det) = inverse_jacobian(&jacobian(&piece.transition));
        check_invertible(atlas, piece, &det, 16)?;
    }
    let coefficients: Vec<Vec<Expr>> = (0..atlas.charts.len())
        .into_par_iter()
        .map(|s| {
            let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); n * n * n];
            for w in &pou.weights[s] {
                let weight = xi.apply(&w.weight);
                let local: Vec<Expr> = match w.piece {
                    None => transformed[s].clone(),
                    Some(i) => {
                        let piece = &atlas.pieces[i];
                        change_coordinates(piece, &transformed[w.chart], false)
                            .into_iter()
                            .map(|f| restrict_to_rect(f, &piece.domain))
                            .collect()
                    }
                };
                for (t, f) in terms.iter_mut().zip(local) {
                    t.push(Expr::mul(weight.clone(), f));
                }
            }
            terms.into_iter().map(Expr::sum).collect()
        })
        .collect();
    Ok(GlobalConnection {
        dim: n,
        charts: atlas.charts.iter().map(|c| c.name.clone()).collect(),
        coefficients,
        provenance: format!(
            "partition margin {}, transformer {}, locals on {}",
            pou.margin,
            xi.name(),
            atlas.charts.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
        ),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawMode {
    /// Symbolic derivatives of the transitions.
    Symbolic,
    /// Central differences of the transitions and LU inverses.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PieceResidual {
    pub from: String,
    pub to: String,
    pub piece: usize,
    pub samples: usize,
    pub max_residual: f64,
    /// `[c, a, b]` of the worst coefficient.
    pub coefficient: [usize; 3],
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawReport {
    pub mode: LawMode,
    pub tolerance: f64,
    pub pieces: Vec<PieceResidual>,
    pub max_residual: f64,
    pub passed: bool,
}

fn eval_all(fs: &[Expr], p: &[f64]) -> Result<Vec<f64>, ConnectionError> {
    fs.iter()
        .map(|f| {
            f.eval(p).map_err(|source| {
                ConnectionError::Space(SpaceError::Eval {
                    what: "connection coefficient".into(),
                    point: p.to_vec(),
                    source,
                })
            })
        })
        .collect()
}

fn split_index(n: usize, i: usize) -> [usize; 3] {
    [i / (n * n), (i / n) % n, i % n]
}

/// On every overlap piece `s → s'`, compares `Γ_s` with `Γ_{s'}` moved to
/// chart `s` at the midpoints of a `grid`-per-axis partition of the piece.
/// `homogeneous` drops the second-derivative term (one-forms).
fn law_residuals(
    atlas: &Atlas,
    coefficients: &[Vec<Expr>],
    grid: usize,
    mode: LawMode,
    tol: f64,
    homogeneous: bool,
) -> Result<LawReport, ConnectionError> {
    let n = atlas.dim;
    let results: Vec<Result<PieceResidual, ConnectionError>> = atlas
        .pieces
        .par_iter()
        .enumerate()
        .map(|(i, piece)| {
            let (points, _) = midpoint_cells(&piece.domain, grid.max(1));
            let moved = match mode {
                LawMode::Symbolic => Some(change_coordinates(piece, &coefficients[piece.to], homogeneous)),
                LawMode::Grid => None,
            };
            let mut r = PieceResidual {
                from: atlas.name(piece.from).into(),
                to: atlas.name(piece.to).into(),
                piece: i,
                samples: points.len(),
                max_residual: 0.0,
                coefficient: [0, 0, 0],
                worst_point: Vec::new(),
            };
            for x in points {
                let here = eval_all(&coefficients[piece.from], &x)?;
                let there = match &moved {
                    Some(m) => eval_all(m, &x)?,
                    None => change_coordinates_at(
                        piece,
                        |y| eval_all(&coefficients[piece.to], y),
                        &x,
                        GRID_STEP,
                        homogeneous,
                    )?,
                };
                for (k, (a, b)) in here.iter().zip(&there).enumerate() {
                    let d = (a - b).abs();
                    if d > r.max_residual || r.worst_point.is_empty() {
                        r.max_residual = d;
                        r.coefficient = split_index(n, k);
                        r.worst_point = x.clone();
                    }
                }
            }
            Ok(r)
        })
        .collect();
    let pieces = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let max_residual = pieces.iter().map(|p| p.max_residual).fold(0.0, f64::max);
    Ok(LawReport {
        mode,
        tolerance: tol,
        passed: max_residual <= tol,
        max_residual,
        pieces,
    })
}

fn same_atlas(atlas: &Atlas, charts: &[String], dim: usize) -> Result<(), ConnectionError> {
    let names: Vec<&str> = atlas.charts.iter().map(|c| c.name.as_str()).collect();
    if dim != atlas.dim || charts.iter().map(String::as_str).ne(names.iter().copied()) {
        return Err(ConnectionError::AtlasMismatch(format!(
            "charts {charts:?} in dimension {dim} against {names:?} in dimension {}",
            atlas.dim
        )));
    }
    Ok(())
}

/// Checks the transformation law of a connection on every overlap.
pub fn verify_connection_law(
    g: &GlobalConnection,
    atlas: &Atlas,
    grid: usize,
    mode: LawMode,
    tol: f64,
) -> Result<LawReport, ConnectionError> {
    same_atlas(atlas, &g.charts, g.dim)?;
    law_residuals(atlas, &g.coefficients, grid, mode, tol, false)
}

/// Checks that a one-form transforms tensorially on every overlap.
pub fn verify_tensoriality(
    w: &EndValuedOneForm,
    atlas: &Atlas,
    grid: usize,
    tol: f64,
) -> Result<LawReport, ConnectionError> {
    same_atlas(atlas, &w.charts, w.dim)?;
    law_residuals(atlas, &w.coefficients, grid, LawMode::Symbolic, tol, true)
}

/// `ω = Γ − Γ̄` chart by chart.
pub fn difference(g1: &GlobalConnection, g2: &GlobalConnection) -> Result<EndValuedOneForm, ConnectionError> {
    if g1.dim != g2.dim || g1.charts != g2.charts {
        return Err(ConnectionError::AtlasMismatch(format!(
            "{:?} versus {:?}",
            g1.charts, g2.charts
        )));
    }
    Ok(EndValuedOneForm {
        dim: g1.dim,
        charts: g1.charts.clone(),
        coefficients: g1
            .coefficients
            .iter()
            .zip(&g2.coefficients)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Expr::sub(x.clone(), y.clone())).collect())
            .collect(),
    })
}

/// `Γ + ω` chart by chart.
pub fn add(g: &GlobalConnection, w: &EndValuedOneForm) -> Result<GlobalConnection, ConnectionError> {
    if g.dim != w.dim || g.charts != w.charts {
        return Err(ConnectionError::AtlasMismatch(format!(
            "{:?} versus {:?}",
            g.charts, w.charts
        )));
    }
    Ok(GlobalConnection {
        dim: g.dim,
        charts: g.charts.clone(),
        coefficients: g
            .coefficients
            .iter()
            .zip(&w.coefficients)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Expr::add(x.clone(), y.clone())).collect())
            .collect(),
        provenance: format!("{} plus a one-form", g.provenance),
    })
}
