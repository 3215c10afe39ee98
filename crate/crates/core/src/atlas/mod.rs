//! Chart-described manifolds.
//!
//! A manifold is given by its charts' images in `R^n` and, for ordered
//! pairs of charts, the overlap (in the source chart's coordinates) with the
//! transition map on it. An overlap may be split into several boxes, each
//! with its own transition expression.

mod examples;
mod partition;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::spaces::{Domain, Rect, SpaceError};

pub use examples::{s1_angle, s1_exp, single_chart, t2_angle};
pub(crate) use partition::restrict_to_rect;
pub use partition::{
    box_bump, build_partition, check_partition, PartitionCheck, PartitionOfUnity, PartitionWeight,
};
pub use verify::{
    check_regular_structure, verify_atlas, AtlasReport, PairResidual, StructureEntry,
    StructureReport, TripleResidual, COCYCLE_TOLERANCE, INVERTIBILITY_LIMIT,
};

/// Verification order used for `C^∞` atlases.
pub const DEFAULT_K_CHECK: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum Regularity {
    Finite { k: u32 },
    Smooth { k_check: u32 },
}

impl Regularity {
    pub fn smooth() -> Regularity {
        Regularity::Smooth {
            k_check: DEFAULT_K_CHECK,
        }
    }

    /// Order up to which claims are verified.
    pub fn order(self) -> u32 {
        match self {
            Regularity::Finite { k } => k,
            Regularity::Smooth { k_check } => k_check,
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, Regularity::Smooth { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub name: String,
    pub image: Domain,
}

/// One box of the overlap of `from` with `to`, in `from` coordinates, and
/// the transition `φ_{to,from}` on it.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapPiece {
    pub from: usize,
    pub to: usize,
    pub domain: Rect,
    pub transition: Vec<Expr>,
}

impl OverlapPiece {
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.transition.iter().map(|e| e.eval(p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atlas {
    pub dim: usize,
    pub charts: Vec<Chart>,
    pub pieces: Vec<OverlapPiece>,
    pub regularity: Regularity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtlasError {
    #[error("unknown chart `{name}` at {location}")]
    UnknownChart { name: String, location: String },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("transition {from} -> {to} is not invertible at {point:?}: residual {residual:e}")]
    NotInvertible {
        from: String,
        to: String,
        point: Vec<f64>,
        residual: f64,
    },
    #[error("shrunk cover misses the point {point:?} of chart {chart}")]
    Coverage { chart: String, point: Vec<f64> },
    #[error("evaluating {what} at {point:?}: {source}")]
    Eval {
        what: String,
        point: Vec<f64>,
        source: EvalError,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

impl Atlas {
    pub fn new(
        charts: Vec<Chart>,
        pieces: Vec<OverlapPiece>,
        regularity: Regularity,
    ) -> Result<Atlas, AtlasError> {
        let Some(first) = charts.first() else {
            return Err(AtlasError::Invalid {
                location: "atlas.charts".into(),
                message: "no charts".into(),
            });
        };
        let dim = first.image.dim();
        for (i, c) in charts.iter().enumerate() {
            if c.image.dim() != dim {
                return Err(AtlasError::Invalid {
                    location: format!("atlas.charts[{i}]"),
                    message: format!("dimension {} differs from {dim}", c.image.dim()),
                });
            }
            if charts[..i].iter().any(|d| d.name == c.name) {
                return Err(AtlasError::Invalid {
                    location: format!("atlas.charts[{i}].name"),
                    message: format!("duplicate chart name `{}`", c.name),
                });
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            let loc = format!("atlas.overlaps[{i}]");
            if p.from >= charts.len() || p.to >= charts.len() || p.from == p.to {
                return Err(AtlasError::Invalid {
                    location: loc,
                    message: "overlap must join two distinct declared charts".into(),
                });
            }
            if p.domain.dim() != dim || p.transition.len() != dim {
                return Err(AtlasError::Invalid {
                    location: loc,
                    message: format!("overlap box and transition must have dimension {dim}"),
                });
            }
            if let Some(v) = p.transition.iter().flat_map(|e| e.free_vars()).find(|v| *v >= dim) {
                return Err(AtlasError::Invalid {
                    location: format!("{loc}.transition"),
                    message: format!("uses x{} in dimension {dim}", v + 1),
                });
            }
            let inside = charts[p.from]
                .image
                .boxes()
                .iter()
                .any(|b| p.domain.is_within(b));
            if !inside {
                return Err(AtlasError::Invalid {
                    location: format!("{loc}.domain"),
                    message: format!("not contained in the image of chart {}", charts[p.from].name),
                });
            }
        }
        Ok(Atlas {
            dim,
            charts,
            pieces,
            regularity,
        })
    }

    pub fn chart_index(&self, name: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.name == name)
    }

    pub fn name(&self, s: usize) -> &str {
        &self.charts[s].name
    }

    pub fn pieces_between(&self, from: usize, to: usize) -> impl Iterator<Item = &OverlapPiece> {
        self.pieces.iter().filter(move |p| p.from == from && p.to == to)
    }

    /// Charts that overlap `s`, in chart order, including `s` itself.
    pub fn neighbours(&self, s: usize) -> Vec<usize> {
        (0..self.charts.len())
            .filter(|t| *t == s || self.pieces.iter().any(|p| p.from == s && p.to == *t))
            .collect()
    }

    /// The piece of the overlap `from -> to` containing `p`, if any.
    pub fn piece_at(&self, from: usize, to: usize, p: &[f64]) -> Option<&OverlapPiece> {
        self.pieces_between(from, to).find(|q| q.domain.contains(p))
    }

    /// Coordinates in chart `to` of the point with coordinates `p` in
    /// chart `from`; `None` when the point is not in `to`.
    pub fn transfer(&self, from: usize, to: usize, p: &[f64]) -> Result<Option<Vec<f64>>, AtlasError> {
        if from == to {
            return Ok(Some(p.to_vec()));
        }
        match self.piece_at(from, to, p) {
            None => Ok(None),
            Some(piece) => piece.apply(p).map(Some).map_err(|source| AtlasError::Eval {
                what: format!("transition {} -> {}", self.name(from), self.name(to)),
                point: p.to_vec(),
                source,
            }),
        }
    }

    /// A copy with every chart image intersected with `sub` (given per
    /// chart); pieces are clipped accordingly and dropped when empty.
    pub fn restrict(&self, sub: &[Rect]) -> Result<Atlas, AtlasError> {
        let mut charts = Vec::new();
        for (c, r) in self.charts.iter().zip(sub) {
            let image = c.image.restrict(r).ok_or_else(|| AtlasError::Invalid {
                location: format!("chart {}", c.name),
                message: "restriction is empty".into(),
            })?;
            charts.push(Chart {
                name: c.name.clone(),
                image,
            });
        }
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| {
                p.domain.intersect(&sub[p.from]).map(|d| OverlapPiece {
                    domain: d,
                    ..p.clone()
                })
            })
            .collect();
        Atlas::new(charts, pieces, self.regularity)
    }
}
