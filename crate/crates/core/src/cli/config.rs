//! TOML run configuration and its resolution into library objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::atlas::{s1_angle, s1_exp, t2_angle, Atlas, AtlasError, Chart, OverlapPiece, Regularity};
use crate::connection::{local_connection, ConnectionError, LocalCoefficients};
use crate::connective::{
    identity, minimal_identity, CompositionTable, ConnectiveStructure, NamedMap, Transformer, Xi,
};
use crate::expr::Expr;
use crate::index_algebra::{DistributiveStructure, IndexFn, StructureSpec};
use crate::multiplicity::ThreeParamFamily;
use crate::spaces::{Budget, Domain, Family, Rect};

use super::RunError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub settings: Settings,
    pub index: Option<StructureSpec>,
    pub window: Option<WindowSection>,
    pub spaces: Option<SpacesSection>,
    pub atlas: Option<AtlasSection>,
    pub partition: Option<PartitionSection>,
    pub connection: Option<ConnectionSection>,
    pub connective: Option<ConnectiveSection>,
    pub multiplicity: Option<MultiplicitySection>,
    pub residual: Option<ResidualSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Cells per axis for law, residual and difference grids.
    pub grid: usize,
    /// Tolerance for symbolic law checks and residuals.
    pub tol: f64,
    /// Tolerance for finite-difference law checks.
    pub grid_tol: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Random samples for partition checks.
    pub samples: usize,
    /// Triples drawn when the index base is too large to enumerate.
    pub law_samples: usize,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            grid: 32,
            tol: 1e-6,
            grid_tol: 1e-3,
            seed: 0,
            jobs: 0,
            samples: 1000,
            law_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub k: u32,
    pub beta0_j: i64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSection {
    pub family: Family,
    pub k: u32,
    pub alpha: IndexFn,
    pub beta: IndexFn,
    #[serde(default)]
    pub claims: Vec<ClaimSpec>,
    #[serde(default)]
    pub inequalities: Vec<InequalitySpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    pub function: String,
    pub domain: Vec<BoxSpec>,
    pub s: Vec<u32>,
    pub alpha: Option<IndexFn>,
    pub beta: Option<IndexFn>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    Holder,
    Young,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySpec {
    pub kind: InequalityKind,
    pub f: String,
    pub g: String,
    pub domain: BoxSpec,
    /// Exponent pairs; all composable pairs of the base when omitted.
    pub pairs: Option<Vec<[i64; 2]>>,
    pub cells: Option<usize>,
}

/// A number or a constant expression such as `"2*pi"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<Num>,
    pub hi: Vec<Num>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasSection {
    pub builtin: Option<String>,
    /// Finite order `k`; with `smooth = true` it is the order checked.
    pub k: Option<u32>,
    #[serde(default)]
    pub smooth: bool,
    #[serde(default)]
    pub charts: Vec<ChartSpec>,
    #[serde(default)]
    pub overlaps: Vec<OverlapSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub name: String,
    pub boxes: Vec<BoxSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapSpec {
    pub from: String,
    pub to: String,
    pub lo: Vec<Num>,
    pub hi: Vec<Num>,
    pub transition: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub margin: f64,
}

/// Expression lists keyed by chart name.
pub type ChartTable = BTreeMap<String, Vec<String>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSection {
    pub alpha0: IndexFn,
    pub beta0: IndexFn,
    pub locals: ChartTable,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectiveSection {
    #[serde(default)]
    pub j: u32,
    pub k: Option<u32>,
    #[serde(default)]
    pub z: u32,
    pub theta: IndexFn,
    pub vartheta: IndexFn,
    #[serde(default = "default_xi")]
    pub xi: String,
    /// Explicit `O` and `Q`; the minimal identity structure on the glued
    /// indices when omitted.
    pub o: Option<BTreeMap<String, IndexFn>>,
    pub q: Option<BTreeMap<String, IndexFn>>,
    #[serde(default)]
    pub names: Option<[String; 4]>,
    #[serde(default)]
    pub d_o: Vec<[String; 3]>,
    #[serde(default)]
    pub d_q: Vec<[String; 3]>,
    #[serde(default)]
    pub xi_table: Vec<[String; 3]>,
}

fn default_xi() -> String {
    "identity".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicitySection {
    pub first: ChartTable,
    pub second: ChartTable,
    pub max_seeds: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualSection {
    pub omega: ChartTable,
}

pub fn parse(text: &str) -> Result<RunConfig, RunError> {
    toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "config".into(),
        };
        RunError::Config {
            location,
            message: e.message().to_string(),
        }
    })
}

fn config_err(location: impl Into<String>, message: impl ToString) -> RunError {
    RunError::Config {
        location: location.into(),
        message: message.to_string(),
    }
}

pub(crate) fn section<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, RunError> {
    v.as_ref()
        .ok_or_else(|| config_err(name, format!("section [{name}] is required by this command")))
}

pub fn expr(text: &str, location: &str) -> Result<Expr, RunError> {
    Expr::parse(text).map_err(|e| config_err(location, e))
}

fn number(n: &Num, location: &str) -> Result<f64, RunError> {
    match n {
        Num::Value(v) => Ok(*v),
        Num::Text(t) => {
            let e = expr(t, location)?;
            if !e.is_constant() {
                return Err(config_err(location, format!("`{t}` is not a constant")));
            }
            e.eval(&[]).map_err(|err| config_err(location, err))
        }
    }
}

pub fn rect(lo: &[Num], hi: &[Num], location: &str) -> Result<Rect, RunError> {
    let lo = lo
        .iter()
        .enumerate()
        .map(|(i, n)| number(n, &format!("{location}.lo[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let hi = hi
        .iter()
        .enumerate()
        .map(|(i, n)| number(n, &format!("{location}.hi[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Rect::new(lo, hi).map_err(|e| config_err(location, e))
}

pub fn domain(boxes: &[BoxSpec], location: &str) -> Result<Domain, RunError> {
    let rects = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| rect(&b.lo, &b.hi, &format!("{location}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Domain::new(rects).map_err(|e| config_err(location, e))
}

impl RunConfig {
    pub fn structure(&self) -> Result<DistributiveStructure, RunError> {
        section(&self.index, "index")?.build().map_err(|e| config_err("index", e))
    }

    pub fn atlas(&self) -> Result<Atlas, RunError> {
        let a = section(&self.atlas, "atlas")?;
        let regularity = match (a.k, a.smooth) {
            (Some(k), true) => Some(Regularity::Smooth { k_check: k }),
            (None, true) => Some(Regularity::smooth()),
            (Some(k), false) => Some(Regularity::Finite { k }),
            (None, false) => None,
        };
        if let Some(name) = &a.builtin {
            if !a.charts.is_empty() || !a.overlaps.is_empty() {
                return Err(config_err("atlas", "give either `builtin` or charts and overlaps, not both"));
            }
            let mut atlas = match name.as_str() {
                "s1_angle" => s1_angle(),
                "s1_exp" => s1_exp(),
                "t2_angle" => t2_angle(),
                other => {
                    return Err(config_err(
                        "atlas.builtin",
                        format!("unknown atlas `{other}` (s1_angle, s1_exp, t2_angle)"),
                    ))
                }
            };
            if let Some(r) = regularity {
                atlas.regularity = r;
            }
            return Ok(atlas);
        }
        let charts = a
            .charts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(Chart {
                    name: c.name.clone(),
                    image: domain(&c.boxes, &format!("atlas.charts[{i}].boxes"))?,
                })
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        let index_of = |name: &str, loc: String| {
            charts
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| config_err(loc, format!("undeclared chart `{name}`")))
        };
        let pieces = a
            .overlaps
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let loc = format!("atlas.overlaps[{i}]");
                Ok(OverlapPiece {
                    from: index_of(&o.from, format!("{loc}.from"))?,
                    to: index_of(&o.to, format!("{loc}.to"))?,
                    domain: rect(&o.lo, &o.hi, &loc)?,
                    transition: o
                        .transition
                        .iter()
                        .enumerate()
                        .map(|(d, t)| expr(t, &format!("{loc}.transition[{d}]")))
                        .collect::<Result<Vec<_>, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        Atlas::new(charts, pieces, regularity.unwrap_or_else(Regularity::smooth)).map_err(|e| match e {
            AtlasError::Invalid { location, message } => config_err(location, message),
            other => config_err("atlas", other),
        })
    }

    pub fn margin(&self) -> Result<f64, RunError> {
        let m = section(&self.partition, "partition")?.margin;
        if !(m > 0.0 && m.is_finite()) {
            return Err(config_err("partition.margin", "must be positive"));
        }
        Ok(m)
    }
}

/// Expressions per chart in atlas order; every chart must be listed and
/// every listed chart must exist.
pub fn chart_table(atlas: &Atlas, table: &ChartTable, location: &str) -> Result<Vec<Vec<Expr>>, RunError> {
    if let Some(name) = table.keys().find(|n| atlas.chart_index(n).is_none()) {
        return Err(config_err(format!("{location}.{name}"), format!("undeclared chart `{name}`")));
    }
    atlas
        .charts
        .iter()
        .map(|c| {
            let loc = format!("{location}.{}", c.name);
            let texts = table
                .get(&c.name)
                .ok_or_else(|| config_err(&loc, format!("no entry for chart `{}`", c.name)))?;
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| expr(t, &format!("{loc}[{i}]")))
                .collect()
        })
        .collect()
}

pub fn locals(cfg: &RunConfig, atlas: &Atlas, budget: &Budget) -> Result<Vec<LocalCoefficients>, RunError> {
    let c = section(&cfg.connection, "connection")?;
    let table = chart_table(atlas, &c.locals, "connection.locals")?;
    atlas
        .charts
        .iter()
        .zip(table)
        .map(|(chart, fs)| {
            local_connection(atlas, &chart.name, fs, budget).map_err(|e| match e {
                ConnectionError::CoefficientCount { .. } => {
                    config_err(format!("connection.locals.{}", chart.name), e)
                }
                other => RunError::Precondition {
                    hypothesis: "local coefficients are C^2".into(),
                    detail: other.to_string(),
                },
            })
        })
        .collect()
}

pub fn family(atlas: &Atlas, table: &ChartTable, location: &str) -> Result<ThreeParamFamily, RunError> {
    ThreeParamFamily::new(atlas, chart_table(atlas, table, location)?).map_err(|e| config_err(location, e))
}

fn transformer(text: &str, location: &str) -> Result<Transformer, RunError> {
    Ok(Arc::new(Xi::parse(text).map_err(|e| config_err(location, e))?))
}

fn table(rows: &[[String; 3]], location: &str) -> Result<CompositionTable, RunError> {
    let entries = rows
        .iter()
        .enumerate()
        .map(|(i, [a, b, t])| Ok((a.clone(), b.clone(), transformer(t, &format!("{location}[{i}]"))?)))
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(CompositionTable { entries })
}

/// The connective structure of `[connective]`, defaulting to the minimal
/// identity structure on the glued indices `(α'₀, β'₀)`.
pub fn connective(
    cfg: &RunConfig,
    glued: impl FnOnce() -> Result<(i64, i64), RunError>,
    atlas_k: u32,
) -> Result<ConnectiveStructure, RunError> {
    let c = section(&cfg.connective, "connective")?;
    let k = c.k.unwrap_or(atlas_k);
    let precondition = |e: crate::connective::ConnectiveError| RunError::Precondition {
        hypothesis: "valid connective structure".into(),
        detail: e.to_string(),
    };
    let mut cs = match (&c.o, &c.q) {
        (None, None) => {
            let (a, b) = glued()?;
            minimal_identity(
                IndexFn::constant(a),
                IndexFn::constant(a),
                IndexFn::constant(b),
                IndexFn::constant(b),
                c.j,
                k,
            )
            .map_err(precondition)?
        }
        (Some(o), Some(q)) => {
            let names = c.names.clone().unwrap_or_else(|| {
                ["alpha".into(), "alpha0".into(), "beta".into(), "beta0".into()]
            });
            let named = |m: &BTreeMap<String, IndexFn>| {
                m.iter().map(|(n, f)| NamedMap::new(n, f.clone())).collect::<Vec<_>>()
            };
            ConnectiveStructure {
                k,
                j: c.j,
                o: named(o),
                q: named(q),
                alpha: names[0].clone(),
                alpha0: names[1].clone(),
                beta: names[2].clone(),
                beta0: names[3].clone(),
                d_o: CompositionTable::default(),
                d_q: CompositionTable::default(),
                xi_table: CompositionTable::default(),
                xi: identity(),
                base_tag: "standard".into(),
                compatible_tags: Vec::new(),
            }
        }
        _ => return Err(config_err("connective", "give both `o` and `q`, or neither")),
    };
    cs.d_o = table(&c.d_o, "connective.d_o")?;
    cs.d_q = table(&c.d_q, "connective.d_q")?;
    cs.xi_table = table(&c.xi_table, "connective.xi_table")?;
    cs = cs.with_xi(transformer(&c.xi, "connective.xi")?);
    cs.validate().map_err(precondition)?;
    Ok(cs)
}
