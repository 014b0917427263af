//! Isolation-forest anomaly detection with a verification toolkit.
//!
//! The crate implements two estimators — the classic isolation random
//! forest (IRF) and its directional variant (DIRF), which runs 1D
//! isolation trees on randomly chosen PCA projections — together with the
//! exact machinery needed to check them: exhaustive enumeration of small
//! tree spaces with their probabilities, closed-form expectations and
//! variances for the 1D (monotone) model, depth bounds, and a
//! confidence-driven trial-count rule.
//!
//! Entry points:
//! - [`forest::irf_estimate`] / [`dirf::dirf_estimate`] — anomaly scores.
//! - [`forest::flag_anomalies`] — quantile thresholding.
//! - [`oracle`] — enumeration ground truth and the 2D counterexamples.
//! - [`monotone`] — exact 1D analytics and the trial-count rule.
//! - [`bench`] — the experiment harness behind the `irf` CLI.

pub mod bench;
pub mod dataset;
pub mod dirf;
pub mod error;
pub mod forest;
pub mod itree;
pub mod monotone;
pub mod oracle;
pub mod rng;

pub use dataset::{
    check_distinct_coordinates, distance_outliers, load_csv, make_benchmark_subset, CsvConfig,
    Label, OutlierParams, SampleSet,
};
pub use dirf::{dirf_estimate, dirf_estimate_with, pca_fit, project, DirectionChoice, PcaModel};
pub use error::{Error, Result};
pub use forest::{
    flag_anomalies, irf_estimate, trials_from_confidence, ConfidenceLevel, HeightEstimate,
    ThresholdCriterion,
};
pub use itree::{build_itree, tree_signature, IsolationTree};
pub use monotone::{
    exact_expected_height, max_variance_equidistant, sandwich_bounds, MonotonePartition,
    MonotoneTree, VarianceSource,
};
pub use oracle::{build_counterexample, cardinality_formula, enumerate_irf, enumerate_mrf};
