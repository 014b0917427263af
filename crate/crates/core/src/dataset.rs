//! Data model, CSV ingestion, the distinct-coordinates check and
//! distance-based outlier labeling.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Ground-truth class of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Anomaly,
    Normal,
}

/// An ordered collection of d-dimensional points, optionally labeled.
///
/// Immutable after construction; safe to share across workers.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    dim: usize,
    labels: Option<Vec<Label>>,
    ids: Option<Vec<String>>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_labels(points, None, None)
    }

    pub fn with_labels(
        points: Vec<Vec<f64>>,
        labels: Option<Vec<Label>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("points must have dimension >= 1".into()));
        }
        for (row, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InconsistentRow {
                    row,
                    got: p.len(),
                    expected: dim,
                });
            }
            if let Some(&bad) = p.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite coordinate {bad} at row {row}"
                )));
            }
        }
        if let Some(ref l) = labels {
            if l.len() != points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        Ok(Self {
            points,
            dim,
            labels,
            ids,
        })
    }

    /// A 1D set from a plain sequence of reals.
    pub fn from_1d(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty sets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Record identifier for point `i` (its row index when no ids were loaded).
    pub fn id_of(&self, i: usize) -> String {
        match &self.ids {
            Some(ids) => ids[i].clone(),
            None => i.to_string(),
        }
    }
}

/// Parameters of the distance-based outlier rule: a point is an outlier when
/// at most a `fraction` of the set lies inside its closed `radius`-ball.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OutlierParams {
    pub radius: f64,
    pub fraction: f64,
}

impl OutlierParams {
    pub fn new(radius: f64, fraction: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be > 0")));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "fraction {fraction} must lie in [0, 1]"
            )));
        }
        Ok(Self { radius, fraction })
    }
}

/// Column selection for CSV loading. Feature columns are an explicit
/// include-list; `None` takes every column that is not the label or id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvConfig {
    pub feature_columns: Option<Vec<String>>,
    pub label_column: Option<String>,
    /// Cell value mapped to `Label::Anomaly`; everything else is `Normal`.
    pub positive_class: Option<String>,
    pub id_column: Option<String>,
}

impl CsvConfig {
    pub fn features(columns: Vec<String>) -> Self {
        Self {
            feature_columns: Some(columns),
            label_column: None,
            positive_class: None,
            id_column: None,
        }
    }
}

/// Loads a header-full CSV into a [`SampleSet`], keeping rows in file order.
pub fn load_csv(path: &Path, config: &CsvConfig) -> Result<SampleSet> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);

    let header = reader.headers()?.clone();
    let col_index: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, name)| (name, i))
        .collect();

    let label_idx = match &config.label_column {
        Some(name) => Some(
            col_index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => None,
    };
    let id_idx = match &config.id_column {
        Some(name) => Some(
            col_index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => None,
    };

    // (column index, column name) feature pairs.
    let features: Vec<(usize, String)> = match &config.feature_columns {
        Some(names) => names
            .iter()
            .map(|name| {
                col_index
                    .get(name.as_str())
                    .copied()
                    .map(|idx| (idx, name.clone()))
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<_>>()?,
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx && Some(*i) != id_idx)
            .map(|(i, name)| (i, name.to_string()))
            .collect(),
    };

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::InconsistentRow {
                row,
                got: record.len(),
                expected: header.len(),
            });
        }
        let mut point = Vec::with_capacity(features.len());
        for (idx, name) in &features {
            let cell = &record[*idx];
            let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                value: cell.to_string(),
                column: name.clone(),
                row,
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    value: cell.to_string(),
                    column: name.clone(),
                    row,
                });
            }
            point.push(value);
        }
        points.push(point);
        if let Some(idx) = label_idx {
            let positive = config.positive_class.as_deref().unwrap_or("1");
            labels.push(if record[idx].trim() == positive {
                Label::Anomaly
            } else {
                Label::Normal
            });
        }
        if let Some(idx) = id_idx {
            ids.push(record[idx].to_string());
        }
    }

    SampleSet::with_labels(
        points,
        label_idx.map(|_| labels),
        id_idx.map(|_| ids),
    )
}

/// Report of the distinct-coordinates check: `satisfied` iff every
/// dimension's projection has as many distinct values as there are points.
#[derive(Debug, Clone, Serialize)]
pub struct DistinctReport {
    pub satisfied: bool,
    /// (1-based dimension, duplicated value) pairs.
    pub violations: Vec<(usize, f64)>,
}

pub fn check_distinct_coordinates(s: &SampleSet) -> DistinctReport {
    let mut violations = Vec::new();
    for j in 0..s.dim() {
        let mut values: Vec<f64> = s.points().iter().map(|p| p[j]).collect();
        values.sort_by(|a, b| a.total_cmp(b));
        for w in values.windows(2) {
            if w[0] == w[1] {
                violations.push((j + 1, w[0]));
            }
        }
    }
    violations.dedup();
    DistinctReport {
        satisfied: violations.is_empty(),
        violations,
    }
}

/// Labels each point by the (r, p) rule: anomaly iff the closed ball of
/// radius `r` around it (the point itself included) holds at most a
/// `p`-fraction of the set.
pub fn distance_outliers(s: &SampleSet, params: &OutlierParams) -> Vec<Label> {
    let n = s.len() as f64;
    let r2 = params.radius * params.radius;
    s.points()
        .iter()
        .map(|x| {
            let inside = s
                .points()
                .iter()
                .filter(|z| squared_distance(x, z) <= r2)
                .count();
            if inside as f64 / n <= params.fraction {
                Label::Anomaly
            } else {
                Label::Normal
            }
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Builds a benchmark subset: every point of `keep_label` plus
/// `inject_count` points of the other class, drawn uniformly without
/// replacement. Deterministic for a fixed `seed`; injected points keep the
/// other class as their label.
pub fn make_benchmark_subset(
    s: &SampleSet,
    keep_label: Label,
    inject_count: usize,
    seed: u64,
) -> Result<SampleSet> {
    let labels = s
        .labels()
        .ok_or_else(|| Error::InvalidInput("benchmark subset needs a labeled set".into()))?;
    let other: Vec<usize> = (0..s.len()).filter(|&i| labels[i] != keep_label).collect();
    if inject_count > other.len() {
        return Err(Error::InjectCountTooLarge {
            requested: inject_count,
            available: other.len(),
        });
    }
    let mut rng = trial_rng(seed, 0);
    let mut injected = other;
    injected.shuffle(&mut rng);
    injected.truncate(inject_count);
    injected.sort_unstable();

    let mut chosen: Vec<usize> = (0..s.len()).filter(|&i| labels[i] == keep_label).collect();
    chosen.extend(injected);
    chosen.sort_unstable();

    let points = chosen.iter().map(|&i| s.point(i).to_vec()).collect();
    let new_labels = chosen.iter().map(|&i| labels[i]).collect();
    let new_ids = s
        .ids()
        .map(|ids| chosen.iter().map(|&i| ids[i].clone()).collect());
    SampleSet::with_labels(points, Some(new_labels), new_ids)
}
