//! Pareto frontier of QoS measurements and the scenario boxes derived from it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ariel::{format_milli, OTHERWISE};
use crate::tuple_space::to_milli;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Dimensions in declaration order with the preferred direction of each.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation(pub Vec<(String, Direction)>);

impl Orientation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn maximize(mut self, dim: impl Into<String>) -> Self {
        self.0.push((dim.into(), Direction::Maximize));
        self
    }

    pub fn minimize(mut self, dim: impl Into<String>) -> Self {
        self.0.push((dim.into(), Direction::Minimize));
        self
    }

    pub fn dims(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(d, _)| d.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoSPoint {
    pub label: String,
    pub coords: BTreeMap<String, f64>,
}

impl QoSPoint {
    pub fn new<I, S>(label: impl Into<String>, coords: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            label: label.into(),
            coords: coords.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParetoError {
    #[error("no points given")]
    Empty,
    #[error("orientation names no dimensions")]
    NoDimensions,
    #[error("point `{label}` lacks dimension `{dim}`")]
    MissingDimension { label: String, dim: String },
    #[error("point `{label}` has a non-finite `{dim}`")]
    NonFinite { label: String, dim: String },
    #[error("margin for `{0}` is missing")]
    MissingMargin(String),
    #[error("margin for `{0}` must be positive and finite")]
    BadMargin(String),
    #[error("CSV: {0}")]
    Csv(String),
}

/// Oriented coordinates: larger is always better.
fn gains(points: &[QoSPoint], orient: &Orientation) -> Result<Vec<Vec<f64>>, ParetoError> {
    if points.is_empty() {
        return Err(ParetoError::Empty);
    }
    if orient.is_empty() {
        return Err(ParetoError::NoDimensions);
    }
    points
        .iter()
        .map(|p| {
            orient
                .0
                .iter()
                .map(|(dim, dir)| {
                    let v = *p.coords.get(dim).ok_or_else(|| ParetoError::MissingDimension {
                        label: p.label.clone(),
                        dim: dim.clone(),
                    })?;
                    if !v.is_finite() {
                        return Err(ParetoError::NonFinite {
                            label: p.label.clone(),
                            dim: dim.clone(),
                        });
                    }
                    Ok(match dir {
                        Direction::Maximize => v,
                        Direction::Minimize => -v,
                    })
                })
                .collect()
        })
        .collect()
}

/// `a` dominates `b`: at least as good everywhere and better somewhere.
fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Indices of non-dominated points, ascending.
pub fn pareto_indices(points: &[QoSPoint], orient: &Orientation) -> Result<Vec<usize>, ParetoError> {
    let g = gains(points, orient)?;
    let mut order: Vec<usize> = (0..g.len()).collect();
    // Lexicographically descending: every dominator of a point sorts before it.
    order.sort_by(|&i, &j| {
        g[j].iter()
            .zip(&g[i])
            .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&g[f], &g[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    Ok(front)
}

/// Non-dominated points in input order. Identical points never dominate
/// each other, so duplicates of a frontier point are all kept.
pub fn pareto_front(points: &[QoSPoint], orient: &Orientation) -> Result<Vec<QoSPoint>, ParetoError> {
    Ok(pareto_indices(points, orient)?
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedScenario {
    pub name: String,
    /// Frontier point the box surrounds; `None` for `Otherwise`.
    pub label: Option<String>,
    pub predicate: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapWarning {
    pub first: String,
    pub second: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub scenarios: Vec<DerivedScenario>,
    pub warnings: Vec<OverlapWarning>,
}

impl Derivation {
    /// `SCENARIO <name> <predicate>` lines, one per scenario.
    pub fn to_text(&self) -> String {
        self.scenarios
            .iter()
            .map(|s| format!("SCENARIO {} {}\n", s.name, s.predicate))
            .collect()
    }
}

fn bound(v: f64) -> String {
    format_milli(to_milli(v).unwrap_or(if v > 0.0 { i64::MAX } else { i64::MIN }))
}

/// One margin box per frontier point, `[p - m, p + m)` on every dimension,
/// quantified over all stations. Ranks follow the first maximized dimension,
/// best first; an `Otherwise` scenario closes the list.
pub fn derive_scenarios(
    front: &[QoSPoint],
    orient: &Orientation,
    margins: &BTreeMap<String, f64>,
) -> Result<Derivation, ParetoError> {
    gains(front, orient)?;
    for dim in orient.dims() {
        let m = *margins
            .get(dim)
            .ok_or_else(|| ParetoError::MissingMargin(dim.to_string()))?;
        if !(m.is_finite() && m > 0.0) {
            return Err(ParetoError::BadMargin(dim.to_string()));
        }
    }
    let mut order: Vec<usize> = (0..front.len()).collect();
    if let Some((key, _)) = orient.0.iter().find(|(_, d)| *d == Direction::Maximize) {
        order.sort_by(|&i, &j| front[j].coords[key].total_cmp(&front[i].coords[key]).then(i.cmp(&j)));
    }
    let mut scenarios = Vec::with_capacity(front.len() + 1);
    for (rank, &i) in order.iter().enumerate() {
        let p = &front[i];
        let terms: Vec<String> = orient
            .dims()
            .flat_map(|dim| {
                let (v, m) = (p.coords[dim], margins[dim]);
                [
                    format!("{dim} >= {}", bound(v - m)),
                    format!("{dim} < {}", bound(v + m)),
                ]
            })
            .collect();
        scenarios.push(DerivedScenario {
            name: format!("PARETO_{}", rank + 1),
            label: Some(p.label.clone()),
            predicate: format!("FORALL STATION: {}", terms.join(" AND ")),
            rank: rank as u32,
        });
    }
    let mut warnings = Vec::new();
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            let (p, q) = (&front[order[a]], &front[order[b]]);
            let overlap = orient
                .dims()
                .all(|d| (p.coords[d] - q.coords[d]).abs() < 2.0 * margins[d]);
            if overlap {
                warnings.push(OverlapWarning {
                    first: scenarios[a].name.clone(),
                    second: scenarios[b].name.clone(),
                    message: format!(
                        "boxes around `{}` and `{}` overlap; {} takes precedence",
                        p.label, q.label, scenarios[a].name
                    ),
                });
            }
        }
    }
    scenarios.push(DerivedScenario {
        name: OTHERWISE.to_string(),
        label: None,
        predicate: "TRUE".to_string(),
        rank: order.len() as u32,
    });
    Ok(Derivation { scenarios, warnings })
}

/// Reads points from CSV with a `label` column; all other columns are
/// numeric dimensions. Rows without a label are named `row<N>`.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<QoSPoint>, ParetoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| ParetoError::Csv(e.to_string()))?.clone();
    let label_col = headers.iter().position(|h| h == "label");
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ParetoError::Csv(e.to_string()))?;
        let label = label_col
            .and_then(|c| rec.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row{}", row + 1));
        let mut coords = BTreeMap::new();
        for (c, h) in headers.iter().enumerate() {
            if Some(c) == label_col {
                continue;
            }
            let cell = rec.get(c).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| ParetoError::Csv(format!("row {}: `{h}` is not a number: `{cell}`", row + 1)))?;
            coords.insert(h.to_string(), v);
        }
        points.push(QoSPoint { label, coords });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontReport {
    pub orientation: Orientation,
    pub points: usize,
    pub front: Vec<QoSPoint>,
}
