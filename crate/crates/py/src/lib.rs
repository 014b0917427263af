//! Python bindings: datasets, both depth estimators, quantile flagging,
//! PCA, the exact 1D analytics and the enumeration oracles.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use irf::dataset::{load_csv, CsvConfig, Label, SampleSet};
use irf::dirf::{dirf_estimate, pca_fit, project};
use irf::forest::{
    flag_anomalies, irf_estimate, trials_from_confidence, ConfidenceLevel, HeightEstimate,
    ThresholdCriterion,
};
use irf::monotone::{
    exact_expected_height, max_variance_equidistant, oracle_variance, paper_variance_formula,
    MonotonePartition, VarianceSource,
};
use irf::oracle::{
    build_counterexample, cardinality_formula, counterexample_mc_check, enumerate_irf,
};

fn err(e: irf::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An immutable point set, optionally labeled.
#[pyclass]
struct Dataset {
    inner: SampleSet,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (points, labels=None))]
    fn new(points: Vec<Vec<f64>>, labels: Option<Vec<bool>>) -> PyResult<Self> {
        let labels = labels.map(|ls| {
            ls.into_iter()
                .map(|a| if a { Label::Anomaly } else { Label::Normal })
                .collect()
        });
        Ok(Self {
            inner: SampleSet::with_labels(points, labels, None).map_err(err)?,
        })
    }

    /// Load a header-full CSV; features default to every non-label,
    /// non-id column.
    #[staticmethod]
    #[pyo3(signature = (path, features=None, label_column=None, positive_class=None, id_column=None))]
    fn from_csv(
        path: PathBuf,
        features: Option<Vec<String>>,
        label_column: Option<String>,
        positive_class: Option<String>,
        id_column: Option<String>,
    ) -> PyResult<Self> {
        let cfg = CsvConfig {
            feature_columns: features,
            label_column,
            positive_class,
            id_column,
        };
        Ok(Self {
            inner: load_csv(&path, &cfg).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Indices labeled as anomalies, or None when unlabeled.
    #[getter]
    fn anomaly_indices(&self) -> Option<Vec<usize>> {
        self.inner.labels().map(|ls| {
            ls.iter()
                .enumerate()
                .filter(|(_, l)| **l == Label::Anomaly)
                .map(|(i, _)| i)
                .collect()
        })
    }
}

/// Per-point Monte Carlo depth summary.
#[pyclass]
struct Scores {
    inner: HeightEstimate,
}

#[pymethods]
impl Scores {
    #[getter]
    fn mean_depth(&self) -> Vec<f64> {
        self.inner.mean_depth.clone()
    }

    #[getter]
    fn sample_variance(&self) -> Vec<f64> {
        self.inner.sample_variance.clone()
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.inner.trials
    }

    /// Indices of the lowest-`quantile`% mean depths, sorted ascending.
    fn flag(&self, quantile: f64) -> PyResult<Vec<usize>> {
        Ok(flag_anomalies(
            &self.inner,
            &ThresholdCriterion::new(quantile).map_err(err)?,
        ))
    }
}

/// Classic isolation-forest scores: `trees` full-dimensional trees.
#[pyfunction]
fn irf_scores(dataset: &Dataset, trees: u64, seed: u64) -> PyResult<Scores> {
    Ok(Scores {
        inner: irf_estimate(&dataset.inner, trees, seed).map_err(err)?,
    })
}

/// Directional scores: each tree is 1D on a randomly chosen PCA
/// projection from `components` (1-based indices).
#[pyfunction]
fn dirf_scores(dataset: &Dataset, components: Vec<usize>, trees: u64, seed: u64) -> PyResult<Scores> {
    Ok(Scores {
        inner: dirf_estimate(&dataset.inner, &components, trees, seed).map_err(err)?,
    })
}

/// Tree count guaranteeing the given confidence level (90 or 95) under the
/// regression variance model.
#[pyfunction]
fn trees_for_confidence(dataset: &Dataset, level: u32) -> PyResult<u64> {
    let level = match level {
        90 => ConfidenceLevel::P90,
        95 => ConfidenceLevel::P95,
        other => {
            return Err(PyValueError::new_err(format!(
                "confidence level must be 90 or 95, got {other}"
            )))
        }
    };
    trials_from_confidence(&dataset.inner, level).map_err(err)
}

/// PCA of the dataset: (mean, axes, eigenvalues), axes by descending
/// eigenvalue.
#[pyfunction]
fn pca(dataset: &Dataset) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let m = pca_fit(&dataset.inner).map_err(err)?;
    Ok((m.mean, m.axes, m.eigenvalues))
}

/// Centered projections onto the selected principal directions.
#[pyfunction]
fn pca_projections(dataset: &Dataset, components: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
    let m = pca_fit(&dataset.inner).map_err(err)?;
    project(&dataset.inner, &m, &components).map_err(err)
}

/// Closed-form expected isolation depth of interval `i` (1-based) in the
/// partition given by interval lengths.
#[pyfunction]
fn expected_interval_depth(lengths: Vec<f64>, i: usize) -> PyResult<f64> {
    let p = MonotonePartition::from_lengths(&lengths).map_err(err)?;
    exact_expected_height(&p, i).map_err(err)
}

/// Exact and closed-form depth variance of interval `i`; the two differ in
/// general (the closed form assumes independent ancestor indicators).
#[pyfunction]
fn interval_depth_variance(lengths: Vec<f64>, i: usize) -> PyResult<(f64, f64)> {
    let p = MonotonePartition::from_lengths(&lengths).map_err(err)?;
    Ok((
        oracle_variance(&p, i).map_err(err)?,
        paper_variance_formula(&p, i).map_err(err)?,
    ))
}

/// Enumerates every isolation tree of a small dataset; returns
/// (tree count, total probability, Catalan-formula count).
#[pyfunction]
fn enumerate_trees(dataset: &Dataset) -> PyResult<(usize, f64, u128)> {
    let forest = enumerate_irf(&dataset.inner).map_err(err)?;
    let formula = cardinality_formula(dataset.inner.len(), dataset.inner.dim()).map_err(err)?;
    Ok((forest.count(), forest.total_probability, formula))
}

/// Maximum per-interval depth variance on the equidistant n-partition
/// (exact for n <= 8, Monte Carlo above).
#[pyfunction]
#[pyo3(signature = (n, trees=200_000, seed=0))]
fn max_depth_variance(py: Python<'_>, n: usize, trees: u64, seed: u64) -> PyResult<Py<PyDict>> {
    let source = if n <= irf::oracle::MRF_ENUMERATION_LIMIT {
        VarianceSource::Oracle
    } else {
        VarianceSource::MonteCarlo { trials: trees, seed }
    };
    let mv = max_variance_equidistant(n, source).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("value", mv.value)?;
    out.set_item("argmax", mv.argmax)?;
    out.set_item("ci_half_width", mv.ci_half_width)?;
    Ok(out.into())
}

/// The two-configuration counterexample: same grid, transposed corners,
/// wildly different nearest-neighbor distances, near-equal expected origin
/// depths.
#[pyfunction]
#[pyo3(signature = (p, q, trees=100_000, seed=0))]
fn counterexample(
    py: Python<'_>,
    p: Vec<f64>,
    q: Vec<f64>,
    trees: u64,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let pair = build_counterexample(&p, &q).map_err(err)?;
    let report = counterexample_mc_check(&pair, trees, seed).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("d1", report.d1)?;
    out.set_item("d2", report.d2)?;
    out.set_item("mc_e1", report.mc_e1)?;
    out.set_item("mc_e2", report.mc_e2)?;
    out.set_item("ci1", report.ci1)?;
    out.set_item("ci2", report.ci2)?;
    out.set_item("closed_form_e1", report.closed_form_e1)?;
    out.set_item("closed_form_e2", report.closed_form_e2)?;
    Ok(out.into())
}

#[pymodule]
fn irf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Scores>()?;
    m.add_function(wrap_pyfunction!(irf_scores, m)?)?;
    m.add_function(wrap_pyfunction!(dirf_scores, m)?)?;
    m.add_function(wrap_pyfunction!(trees_for_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(pca_projections, m)?)?;
    m.add_function(wrap_pyfunction!(expected_interval_depth, m)?)?;
    m.add_function(wrap_pyfunction!(interval_depth_variance, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_trees, m)?)?;
    m.add_function(wrap_pyfunction!(max_depth_variance, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    Ok(())
}
