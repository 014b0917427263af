//! Experiment harness: quantile sweeps over component-count prefixes,
//! detection/false-positive tables, and the IRF−DIRF difference matrix.

use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{distance_outliers, load_csv, CsvConfig, Label, OutlierParams, SampleSet};
use crate::dirf::{dirf_estimate_on_projections, pca_fit, project, DirectionChoice};
use crate::error::{Error, Result};
use crate::forest::{
    flag_anomalies, irf_estimate, trials_from_confidence, ConfidenceLevel, ThresholdCriterion,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Irf,
    Dirf,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Irf => "IRF",
            Method::Dirf => "DIRF",
        })
    }
}

/// Where the ground-truth anomaly labels come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LabelSource {
    /// A CSV column whose value equals the positive class.
    Column { name: String, positive: String },
    /// Distance-based outliers under the given radius/fraction.
    Distance(OutlierParams),
    /// No labels: detection percentages are reported as 0 with a warning.
    None,
}

/// Trial budget: explicit or derived from the confidence rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum TrialBudget {
    Explicit(u64),
    Confidence(ConfidenceLevel),
}

/// Denominator convention for the false-positive percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FpNormalization {
    /// Share of flagged points that are unlabeled (precision complement).
    Flagged,
    /// Share of the whole dataset flagged but unlabeled.
    Dataset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub feature_columns: Option<Vec<String>>,
    pub id_column: Option<String>,
    pub method: Method,
    pub quantiles: Vec<f64>,
    /// 1-based PCA component indices; sweeps run over prefixes.
    pub components: Vec<usize>,
    pub trials: TrialBudget,
    pub seed: u64,
    pub label_source: LabelSource,
    pub fp_normalization: FpNormalization,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter(
                "the component list must be non-empty".into(),
            ));
        }
        if self.quantiles.is_empty() {
            return Err(Error::InvalidParameter(
                "the quantile list must be non-empty".into(),
            ));
        }
        for &q in &self.quantiles {
            ThresholdCriterion::new(q)?;
        }
        if let TrialBudget::Explicit(k) = self.trials {
            if k < 1 {
                return Err(Error::InvalidParameter("trials must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// One (component count, quantile) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRow {
    pub component_count: usize,
    pub quantile: f64,
    pub detected_pct: f64,
    pub false_positive_pct: f64,
    pub flagged_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub rows: Vec<CellRow>,
    pub seed: u64,
    pub trials: u64,
    pub n_points: usize,
    pub labeled_count: usize,
    pub fp_normalization: FpNormalization,
    pub warning: Option<String>,
}

impl ExperimentReport {
    /// Long-format CSV, one row per grid cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io_err = |source| Error::Io {
            path: "<writer>".into(),
            source,
        };
        writeln!(
            w,
            "method,component_count,quantile,detected_pct,false_positive_pct,flagged_count"
        )
        .map_err(io_err)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.method,
                r.component_count,
                r.quantile,
                r.detected_pct,
                r.false_positive_pct,
                r.flagged_count
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

fn labeled_indices(s: &SampleSet, source: &LabelSource) -> Result<Vec<usize>> {
    match source {
        LabelSource::Column { .. } => {
            let labels = s.labels().ok_or_else(|| {
                Error::InvalidInput("label column requested but none loaded".into())
            })?;
            Ok(labels
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == Label::Anomaly)
                .map(|(i, _)| i)
                .collect())
        }
        LabelSource::Distance(params) => Ok(distance_outliers(s, params)
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Anomaly)
            .map(|(i, _)| i)
            .collect()),
        LabelSource::None => Ok(Vec::new()),
    }
}

fn resolve_trials(s: &SampleSet, budget: TrialBudget) -> Result<u64> {
    match budget {
        TrialBudget::Explicit(k) => Ok(k),
        TrialBudget::Confidence(level) => trials_from_confidence(s, level),
    }
}

/// Runs the full sweep: for every prefix of the component list and every
/// quantile, estimate depths (both methods work on the same PCA
/// projections and per-prefix seed), flag, and score against the labels.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let csv_cfg = match (&cfg.label_source, &cfg.feature_columns) {
        (LabelSource::Column { name, positive }, cols) => CsvConfig {
            feature_columns: cols.clone(),
            label_column: Some(name.clone()),
            positive_class: Some(positive.clone()),
            id_column: cfg.id_column.clone(),
        },
        (_, cols) => CsvConfig {
            feature_columns: cols.clone(),
            label_column: None,
            positive_class: None,
            id_column: cfg.id_column.clone(),
        },
    };
    let s = load_csv(&cfg.input, &csv_cfg)?;
    run_experiment_on(&s, cfg)
}

/// Same as [`run_experiment`] but on an already-loaded sample set.
pub fn run_experiment_on(s: &SampleSet, cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let labeled: HashSet<usize> = labeled_indices(s, &cfg.label_source)?.into_iter().collect();
    let trials = resolve_trials(s, cfg.trials)?;
    let model = pca_fit(s)?;
    let all_projections = project(s, &model, &cfg.components)?;

    let warning = if labeled.is_empty() {
        Some("no labeled anomalies: detected_pct reported as 0".to_string())
    } else {
        None
    };

    let prefix_rows: Result<Vec<Vec<CellRow>>> = (1..=cfg.components.len())
        .into_par_iter()
        .map(|count| {
            let projections = &all_projections[..count];
            let cell_seed = cfg.seed.wrapping_add(count as u64);
            let est = match cfg.method {
                Method::Dirf => dirf_estimate_on_projections(
                    projections,
                    trials,
                    cell_seed,
                    DirectionChoice::Resample,
                )?,
                Method::Irf => {
                    let points: Vec<Vec<f64>> = (0..s.len())
                        .map(|i| projections.iter().map(|p| p[i]).collect())
                        .collect();
                    irf_estimate(&SampleSet::new(points)?, trials, cell_seed)?
                }
            };
            cfg.quantiles
                .iter()
                .map(|&q| {
                    let flags = flag_anomalies(&est, &ThresholdCriterion::new(q)?);
                    let hits = flags.iter().filter(|i| labeled.contains(i)).count();
                    let misses = flags.len() - hits;
                    let detected_pct = if labeled.is_empty() {
                        0.0
                    } else {
                        100.0 * hits as f64 / labeled.len() as f64
                    };
                    let fp_denom = match cfg.fp_normalization {
                        FpNormalization::Flagged => flags.len(),
                        FpNormalization::Dataset => s.len(),
                    };
                    let false_positive_pct = if fp_denom == 0 {
                        0.0
                    } else {
                        100.0 * misses as f64 / fp_denom as f64
                    };
                    Ok(CellRow {
                        component_count: count,
                        quantile: q,
                        detected_pct,
                        false_positive_pct,
                        flagged_count: flags.len(),
                    })
                })
                .collect()
        })
        .collect();

    Ok(ExperimentReport {
        method: cfg.method,
        rows: prefix_rows?.into_iter().flatten().collect(),
        seed: cfg.seed,
        trials,
        n_points: s.len(),
        labeled_count: labeled.len(),
        fp_normalization: cfg.fp_normalization,
        warning,
    })
}

/// Cellwise `a − b` difference matrix over a shared grid: component-count
/// rows, quantile columns, (ΔA, ΔF) per cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffTable {
    pub component_counts: Vec<usize>,
    pub quantiles: Vec<f64>,
    /// cells[row][col] = (detected difference, false-positive difference).
    pub cells: Vec<Vec<(f64, f64)>>,
}

impl DiffTable {
    /// Text layout: one component-count row, A/F sub-columns per quantile.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("components");
        for q in &self.quantiles {
            out.push_str(&format!(",A@{q},F@{q}"));
        }
        out.push('\n');
        for (row, &count) in self.component_counts.iter().enumerate() {
            out.push_str(&count.to_string());
            for cell in &self.cells[row] {
                out.push_str(&format!(",{:.2},{:.2}", cell.0, cell.1));
            }
            out.push('\n');
        }
        out
    }
}

pub fn diff_table(a: &ExperimentReport, b: &ExperimentReport) -> Result<DiffTable> {
    let grid_of = |r: &ExperimentReport| -> Vec<(usize, f64)> {
        r.rows
            .iter()
            .map(|row| (row.component_count, row.quantile))
            .collect()
    };
    if grid_of(a) != grid_of(b) {
        return Err(Error::InvalidInput(
            "reports cover different (component, quantile) grids".into(),
        ));
    }

    let mut component_counts: Vec<usize> = a.rows.iter().map(|r| r.component_count).collect();
    component_counts.dedup();
    let quantiles: Vec<f64> = a
        .rows
        .iter()
        .take_while(|r| r.component_count == component_counts[0])
        .map(|r| r.quantile)
        .collect();

    let cols = quantiles.len();
    let cells = a
        .rows
        .chunks(cols)
        .zip(b.rows.chunks(cols))
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| {
                    (
                        x.detected_pct - y.detected_pct,
                        x.false_positive_pct - y.false_positive_pct,
                    )
                })
                .collect()
        })
        .collect();

    Ok(DiffTable {
        component_counts,
        quantiles,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use rand::Rng;

    fn synthetic_config(input: PathBuf, method: Method) -> RunConfig {
        RunConfig {
            input,
            feature_columns: None,
            id_column: None,
            method,
            quantiles: vec![2.0, 5.0, 10.0],
            components: vec![1, 2],
            trials: TrialBudget::Explicit(300),
            seed: 11,
            label_source: LabelSource::Column {
                name: "label".into(),
                positive: "1".into(),
            },
            fp_normalization: FpNormalization::Flagged,
        }
    }

    fn write_synthetic_csv(path: &std::path::Path, n: usize, anomalies: usize) {
        let mut gen = trial_rng(1234, 0);
        let mut rows = String::from("x,y,label\n");
        for i in 0..n {
            let (x, y, label) = if i < anomalies {
                (
                    8.0 + gen.random_range(0.0..0.5),
                    8.0 + gen.random_range(0.0..0.5),
                    1,
                )
            } else {
                (gen.random_range(0.0..1.0), gen.random_range(0.0..1.0), 0)
            };
            rows.push_str(&format!("{x},{y},{label}\n"));
        }
        std::fs::write(path, rows).unwrap();
    }

    #[test]
    fn experiment_grid_shape_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_synthetic_csv(&path, 60, 3);
        let cfg = synthetic_config(path, Method::Dirf);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 6); // 2 prefixes x 3 quantiles
        assert_eq!(a.labeled_count, 3);
        let cells_a: Vec<_> = a.rows.iter().map(|r| (r.detected_pct, r.flagged_count)).collect();
        let cells_b: Vec<_> = b.rows.iter().map(|r| (r.detected_pct, r.flagged_count)).collect();
        assert_eq!(cells_a, cells_b);
        // Flag counts follow the ceiling rule and detection is monotone in q.
        for r in &a.rows {
            assert_eq!(r.flagged_count, (r.quantile / 100.0 * 60.0).ceil() as usize);
            assert!((0.0..=100.0).contains(&r.detected_pct));
            assert!((0.0..=100.0).contains(&r.false_positive_pct));
        }
        for pair in a.rows.chunks(3) {
            assert!(pair[0].detected_pct <= pair[1].detected_pct);
            assert!(pair[1].detected_pct <= pair[2].detected_pct);
        }
    }

    #[test]
    fn obvious_outliers_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_synthetic_csv(&path, 80, 4);
        for method in [Method::Irf, Method::Dirf] {
            let mut cfg = synthetic_config(path.clone(), method);
            cfg.quantiles = vec![6.0];
            let report = run_experiment(&cfg).unwrap();
            // The injected cluster sits far away; the full-component run
            // should catch all 4 within the 5 flagged.
            let last = report.rows.last().unwrap();
            assert_eq!(last.flagged_count, 5);
            assert!(last.detected_pct >= 75.0, "{method}: {}", last.detected_pct);
        }
    }

    #[test]
    fn distance_labeling_and_no_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_synthetic_csv(&path, 50, 2);
        let mut cfg = synthetic_config(path.clone(), Method::Dirf);
        cfg.label_source = LabelSource::Distance(OutlierParams {
            radius: 2.0,
            fraction: 0.1,
        });
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.labeled_count, 2);
        assert!(report.warning.is_none());

        cfg.label_source = LabelSource::None;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.warning.is_some());
        assert!(report.rows.iter().all(|r| r.detected_pct == 0.0));
    }

    #[test]
    fn diff_table_identity_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_synthetic_csv(&path, 40, 2);
        let cfg = synthetic_config(path, Method::Irf);
        let a = run_experiment(&cfg).unwrap();
        let diff = diff_table(&a, &a).unwrap();
        assert_eq!(diff.component_counts, vec![1, 2]);
        assert_eq!(diff.quantiles, vec![2.0, 5.0, 10.0]);
        assert!(diff
            .cells
            .iter()
            .flatten()
            .all(|&(da, df)| da == 0.0 && df == 0.0));
        // Header + one line per component row.
        assert_eq!(diff.render().lines().count(), 3);

        let mut other = a.clone();
        other.rows.pop();
        assert!(diff_table(&a, &other).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = synthetic_config(PathBuf::from("/nonexistent.csv"), Method::Irf);
        cfg.quantiles = vec![150.0];
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = synthetic_config(PathBuf::from("/nonexistent.csv"), Method::Irf);
        cfg.components.clear();
        assert!(run_experiment(&cfg).is_err());
        // Valid config, missing file.
        let cfg = synthetic_config(PathBuf::from("/nonexistent.csv"), Method::Irf);
        assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_output_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_synthetic_csv(&path, 30, 2);
        let report = run_experiment(&synthetic_config(path, Method::Dirf)).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + report.rows.len());
        assert!(text.starts_with("method,component_count,quantile"));
    }
}
