//! The DIRF method: PCA principal directions, per-trial random direction
//! choice, and 1D isolation trees on the chosen projection.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::forest::{mc_depth_estimate, trials_from_confidence, ConfidenceLevel, HeightEstimate};
use crate::itree::build_itree;
use crate::monotone::{build_mtree, point_depth_relation, MonotonePartition};
use crate::rng::{trial_rng, TrialRng};

/// Principal directions of a sample set.
#[derive(Debug, Clone, Serialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal axes, descending eigenvalue. `axes[j]` is the
    /// (j+1)-th principal direction.
    pub axes: Vec<Vec<f64>>,
    /// Matching eigenvalues, clamped to be non-negative.
    pub eigenvalues: Vec<f64>,
}

/// Fits PCA by mean-centering, forming the sample covariance
/// (divisor `#S - 1`) and diagonalizing it with cyclic Jacobi rotations.
/// Axis signs are normalized so each axis' largest-magnitude component is
/// positive.
pub fn pca_fit(s: &SampleSet) -> Result<PcaModel> {
    let n = s.len();
    let d = s.dim();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "PCA needs at least 2 points".into(),
        ));
    }

    let mut mean = vec![0.0; d];
    for p in s.points() {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = vec![vec![0.0f64; d]; d];
    for p in s.points() {
        for a in 0..d {
            let da = p[a] - mean[a];
            for b in a..d {
                cov[a][b] += da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a][b] /= (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }

    let (eigenvalues, axes) = jacobi_eigen(cov);
    Ok(PcaModel {
        mean,
        axes,
        eigenvalues,
    })
}

/// Cyclic Jacobi diagonalization of a symmetric matrix. Returns
/// (eigenvalues desc, matching orthonormal row-vectors), eigenvalues
/// clamped at zero.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    // v[r] accumulates the r-th eigenvector as a row.
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|r| (0..d).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                s += 2.0 * a[p][q] * a[p][q];
            }
        }
        s.sqrt()
    };
    // The tolerance scales with the matrix so huge covariances still
    // converge within the sweep budget.
    let scale: f64 = (0..d)
        .map(|p| (0..d).map(|q| a[p][q] * a[p][q]).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    let tol = 1e-12 * scale.max(1.0);

    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q].abs() <= tol / (d * d) as f64 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vpk = v[p][k];
                    let vqk = v[q][k];
                    v[p][k] = c * vpk - s * vqk;
                    v[q][k] = s * vpk + c * vqk;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let mut eigenvalues = Vec::with_capacity(d);
    let mut axes = Vec::with_capacity(d);
    for &i in &order {
        eigenvalues.push(a[i][i].max(0.0));
        let mut axis = v[i].clone();
        let lead = axis
            .iter()
            .cloned()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(1.0);
        if lead < 0.0 {
            for x in &mut axis {
                *x = -*x;
            }
        }
        axes.push(axis);
    }
    (eigenvalues, axes)
}

/// Centered projections of `s` onto the selected principal directions
/// (1-based component indices). Point order is preserved.
pub fn project(s: &SampleSet, model: &PcaModel, components: &[usize]) -> Result<Vec<Vec<f64>>> {
    let d = model.axes.len();
    components
        .iter()
        .map(|&c| {
            if c == 0 || c > d {
                return Err(Error::IndexOutOfRange { index: c, max: d });
            }
            let axis = &model.axes[c - 1];
            Ok(s.points()
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(axis)
                        .zip(&model.mean)
                        .map(|((&x, &a), &m)| (x - m) * a)
                        .sum()
                })
                .collect())
        })
        .collect()
}

/// How trials are spread over the selected directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionChoice {
    /// Each trial draws its direction uniformly at random.
    Resample,
    /// Trial `k` uses direction `k mod d'` (same limit, less variance).
    Stratified,
}

/// Preprocessed 1D trial machinery for one projection.
enum Projection1d {
    /// All points share one value: every trial yields depth 0 everywhere.
    Degenerate,
    /// Strictly distinct values: sample a monotone tree over the gap
    /// partition and transfer interval depths to the sorted points.
    Sorted {
        partition: MonotonePartition,
        /// order[rank] = original point index.
        order: Vec<usize>,
    },
    /// Duplicated values: fall back to the generic tree builder.
    Generic(SampleSet),
}

impl Projection1d {
    fn new(values: &[f64]) -> Result<Self> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        if sorted.first() == sorted.last() {
            return Ok(Self::Degenerate);
        }
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            Ok(Self::Sorted {
                partition: MonotonePartition::from_sorted_points(&sorted)?,
                order,
            })
        } else {
            Ok(Self::Generic(SampleSet::from_1d(values)?))
        }
    }

    fn fill_depths(&self, rng: &mut TrialRng, buf: &mut [usize]) {
        match self {
            Self::Degenerate => buf.fill(0),
            Self::Sorted { partition, order } => {
                let t = build_mtree(partition, rng);
                let gaps = t.interval_depths();
                let point_depths = point_depth_relation(partition, &gaps)
                    .expect("depth buffer matches its own partition");
                for (rank, &point) in order.iter().enumerate() {
                    buf[point] = point_depths[rank];
                }
            }
            Self::Generic(set) => {
                let t = build_itree(set, rng);
                t.depths_into(buf);
            }
        }
    }

    /// Internal node count of one sampled tree.
    fn probe_nodes(&self, rng: &mut TrialRng) -> usize {
        match self {
            Self::Degenerate => 0,
            Self::Sorted { partition, .. } => build_mtree(partition, rng).nodes().len(),
            Self::Generic(set) => build_itree(set, rng).internal_count(),
        }
    }
}

fn prepare_projections(projections: &[Vec<f64>]) -> Result<Vec<Projection1d>> {
    if projections.is_empty() {
        return Err(Error::InvalidParameter(
            "the component list must be non-empty".into(),
        ));
    }
    let n = projections[0].len();
    if projections.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput(
            "all projections must have the same length".into(),
        ));
    }
    projections.iter().map(|p| Projection1d::new(p)).collect()
}

/// DIRF over precomputed 1D projections, one per selected direction.
/// Converges to the average of the per-direction expected depths.
pub fn dirf_estimate_on_projections(
    projections: &[Vec<f64>],
    trials: u64,
    seed: u64,
    choice: DirectionChoice,
) -> Result<HeightEstimate> {
    if trials < 1 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let prepared = prepare_projections(projections)?;
    let n = projections[0].len();
    let m = prepared.len();
    Ok(mc_depth_estimate(n, trials, seed, |trial, buf| {
        let mut rng = trial_rng(seed, trial);
        let j = match choice {
            _ if m == 1 => 0,
            DirectionChoice::Resample => rng.random_range(0..m),
            DirectionChoice::Stratified => (trial % m as u64) as usize,
        };
        prepared[j].fill_depths(&mut rng, buf);
    }))
}

/// The DIRF estimator: PCA fit, projection onto the selected 1-based
/// components, then `trials` 1D isolation trees with per-trial direction
/// choice.
pub fn dirf_estimate(
    s: &SampleSet,
    components: &[usize],
    trials: u64,
    seed: u64,
) -> Result<HeightEstimate> {
    dirf_estimate_with(s, components, trials, seed, DirectionChoice::Resample)
}

pub fn dirf_estimate_with(
    s: &SampleSet,
    components: &[usize],
    trials: u64,
    seed: u64,
    choice: DirectionChoice,
) -> Result<HeightEstimate> {
    if s.len() == 1 {
        // A singleton is isolated at the root; nothing to project.
        return Ok(HeightEstimate {
            mean_depth: vec![0.0],
            sample_variance: vec![0.0],
            trials,
            seed,
        });
    }
    let model = pca_fit(s)?;
    let projections = project(s, &model, components)?;
    dirf_estimate_on_projections(&projections, trials, seed, choice)
}

/// One row of the complexity probe.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexityRow {
    pub n: usize,
    pub trials: u64,
    pub wall_seconds: f64,
    /// Internal nodes of one sampled tree.
    pub tree_nodes: usize,
}

/// Times end-to-end DIRF runs on synthetic 2D data of the given sizes,
/// with the trial count set by the 90% confidence rule (floor of 64 where
/// the rule degenerates). Emits data for a log-log fit against n log n.
pub fn dirf_complexity_probe(sizes: &[usize], seed: u64) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for (run, &n) in sizes.iter().enumerate() {
        let mut gen = trial_rng(seed, run as u64);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![gen.random_range(0.0..1.0), gen.random_range(0.0..1.0)])
            .collect();
        let s = SampleSet::new(points)?;
        let trials = trials_from_confidence(&s, ConfidenceLevel::P90).unwrap_or(64).max(64);

        let start = Instant::now();
        let est = dirf_estimate(&s, &[1, 2], trials, seed ^ n as u64)?;
        let wall_seconds = start.elapsed().as_secs_f64();
        debug_assert_eq!(est.len(), n);

        let tree_nodes = if n == 1 {
            0
        } else {
            let model = pca_fit(&s)?;
            let projections = project(&s, &model, &[1])?;
            Projection1d::new(&projections[0])?.probe_nodes(&mut trial_rng(seed, 0))
        };
        rows.push(ComplexityRow {
            n,
            trials,
            wall_seconds: wall_seconds.max(f64::MIN_POSITIVE),
            tree_nodes,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln(wall time)` against `ln(n log n)`.
pub fn fitted_exponent(rows: &[ComplexityRow]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter(
            "an exponent fit needs at least two sizes".into(),
        ));
    }
    let xy: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let x = (r.n as f64 * (r.n as f64).ln().max(1.0)).ln();
            (x, r.wall_seconds.ln())
        })
        .collect();
    let k = xy.len() as f64;
    let sx: f64 = xy.iter().map(|p| p.0).sum();
    let sy: f64 = xy.iter().map(|p| p.1).sum();
    let sxx: f64 = xy.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = xy.iter().map(|p| p.0 * p.1).sum();
    Ok((k * sxy - sx * sy) / (k * sxx - sx * sx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{flag_anomalies, irf_estimate, ThresholdCriterion};

    fn covariance(s: &SampleSet) -> Vec<Vec<f64>> {
        let n = s.len();
        let d = s.dim();
        let mut mean = vec![0.0; d];
        for p in s.points() {
            for (m, &v) in mean.iter_mut().zip(p) {
                *m += v / n as f64;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for p in s.points() {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        cov
    }

    #[test]
    fn pca_degenerate_covariance() {
        // Variation only along coordinate 1.
        let s = SampleSet::new(vec![vec![0.0, 5.0], vec![2.0, 5.0], vec![6.0, 5.0]]).unwrap();
        let m = pca_fit(&s).unwrap();
        assert!((m.axes[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(m.axes[0][1].abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
        // Sign convention: leading component positive.
        assert!(m.axes[0][0] > 0.0);
    }

    #[test]
    fn pca_orthonormal_and_reconstructs_covariance() {
        let mut gen = trial_rng(11, 0);
        let points: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let t = gen.random_range(-1.0..1.0);
                vec![
                    t + 0.1 * gen.random_range(-1.0..1.0),
                    2.0 * t + 0.1 * gen.random_range(-1.0..1.0),
                    gen.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let s = SampleSet::new(points).unwrap();
        let m = pca_fit(&s).unwrap();

        for a in 0..3 {
            let norm: f64 = m.axes[a].iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            for b in (a + 1)..3 {
                let dot: f64 = m.axes[a].iter().zip(&m.axes[b]).map(|(x, y)| x * y).sum();
                assert!(dot.abs() < 1e-9);
            }
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));

        // sum_j lambda_j u_j u_j^T reproduces the covariance.
        let cov = covariance(&s);
        for a in 0..3 {
            for b in 0..3 {
                let rec: f64 = (0..3)
                    .map(|j| m.eigenvalues[j] * m.axes[j][a] * m.axes[j][b])
                    .sum();
                assert!((rec - cov[a][b]).abs() < 1e-9, "({a},{b})");
            }
        }
    }

    #[test]
    fn pca_rejects_single_point() {
        let s = SampleSet::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(pca_fit(&s).is_err());
    }

    #[test]
    fn projection_identity_in_1d() {
        let s = SampleSet::from_1d(&[1.0, 3.0, 8.0]).unwrap();
        let m = pca_fit(&s).unwrap();
        let proj = project(&s, &m, &[1]).unwrap();
        let mean = 4.0;
        for (i, &x) in [1.0, 3.0, 8.0].iter().enumerate() {
            assert!((proj[0][i] - (x - mean)).abs() < 1e-12);
        }
        assert!(project(&s, &m, &[2]).is_err());
        assert!(project(&s, &m, &[0]).is_err());
    }

    #[test]
    fn projections_have_zero_mean() {
        let mut gen = trial_rng(21, 0);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![gen.random_range(0.0..9.0), gen.random_range(-4.0..4.0)])
            .collect();
        let s = SampleSet::new(points).unwrap();
        let m = pca_fit(&s).unwrap();
        for proj in project(&s, &m, &[1, 2]).unwrap() {
            let mean: f64 = proj.iter().sum::<f64>() / proj.len() as f64;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn three_point_projection_oracle() {
        // {0, 1, 3} as the sole projection: mean depths (5/3, 2, 4/3).
        let est =
            dirf_estimate_on_projections(&[vec![0.0, 1.0, 3.0]], 100_000, 5, DirectionChoice::Resample)
                .unwrap();
        assert_eq!(est.mean_depth[1], 2.0);
        let tol = |i: usize| 4.0 * (est.sample_variance[i] / est.trials as f64).sqrt();
        assert!((est.mean_depth[0] - 5.0 / 3.0).abs() <= tol(0));
        assert!((est.mean_depth[2] - 4.0 / 3.0).abs() <= tol(2));
    }

    #[test]
    fn single_component_matches_1d_irf() {
        let values = [0.0, 0.7, 1.9, 2.0, 6.3];
        let s = SampleSet::from_1d(&values).unwrap();
        let irf = irf_estimate(&s, 60_000, 9).unwrap();
        let dirf =
            dirf_estimate_on_projections(&[values.to_vec()], 60_000, 10, DirectionChoice::Resample)
                .unwrap();
        for i in 0..values.len() {
            let tol = 4.0
                * ((irf.sample_variance[i] + dirf.sample_variance[i]) / 60_000.0).sqrt();
            assert!(
                (irf.mean_depth[i] - dirf.mean_depth[i]).abs() <= tol,
                "point {i}: {} vs {}",
                irf.mean_depth[i],
                dirf.mean_depth[i]
            );
        }
    }

    #[test]
    fn duplicated_component_is_statistically_equal() {
        let proj = vec![0.0, 1.0, 3.0, 3.5];
        let one = dirf_estimate_on_projections(&[proj.clone()], 50_000, 3, DirectionChoice::Resample)
            .unwrap();
        let two = dirf_estimate_on_projections(
            &[proj.clone(), proj],
            50_000,
            4,
            DirectionChoice::Resample,
        )
        .unwrap();
        for i in 0..4 {
            let tol =
                4.0 * ((one.sample_variance[i] + two.sample_variance[i]) / 50_000.0).sqrt();
            assert!((one.mean_depth[i] - two.mean_depth[i]).abs() <= tol);
        }
    }

    #[test]
    fn duplicated_projection_values_are_handled() {
        // Two points project identically: they share a leaf, others isolate.
        let est = dirf_estimate_on_projections(
            &[vec![0.0, 1.0, 1.0, 5.0]],
            2_000,
            8,
            DirectionChoice::Resample,
        )
        .unwrap();
        assert_eq!(est.mean_depth[1], est.mean_depth[2]);
        assert!(est.mean_depth[0] >= 1.0);

        let flat = dirf_estimate_on_projections(
            &[vec![2.0, 2.0, 2.0]],
            100,
            0,
            DirectionChoice::Resample,
        )
        .unwrap();
        assert_eq!(flat.mean_depth, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn reproducible_and_mode_consistent() {
        let mut gen = trial_rng(31, 0);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![gen.random_range(0.0..1.0), gen.random_range(0.0..1.0)])
            .collect();
        let s = SampleSet::new(points).unwrap();
        let a = dirf_estimate(&s, &[1, 2], 2_000, 77).unwrap();
        let b = dirf_estimate(&s, &[1, 2], 2_000, 77).unwrap();
        assert_eq!(a.mean_depth, b.mean_depth);

        let strat = dirf_estimate_with(&s, &[1, 2], 20_000, 78, DirectionChoice::Stratified)
            .unwrap();
        let resample = dirf_estimate_with(&s, &[1, 2], 20_000, 79, DirectionChoice::Resample)
            .unwrap();
        for i in 0..s.len() {
            let tol = 4.0
                * ((strat.sample_variance[i] + resample.sample_variance[i]) / 20_000.0).sqrt();
            assert!((strat.mean_depth[i] - resample.mean_depth[i]).abs() <= tol);
        }
    }

    #[test]
    fn empty_component_list_is_an_error() {
        let s = SampleSet::from_1d(&[0.0, 1.0]).unwrap();
        assert!(dirf_estimate(&s, &[], 10, 0).is_err());
    }

    #[test]
    fn flags_invariant_under_power_of_two_scaling() {
        let mut gen = trial_rng(41, 0);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![gen.random_range(0.0..1.0), gen.random_range(0.0..1.0)])
            .collect();
        let scaled: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().map(|&x| 4.0 * x).collect())
            .collect();
        let s = SampleSet::new(points).unwrap();
        let t = SampleSet::new(scaled).unwrap();
        let crit = ThresholdCriterion::new(10.0).unwrap();
        let fa = flag_anomalies(&dirf_estimate(&s, &[1, 2], 3_000, 55).unwrap(), &crit);
        let fb = flag_anomalies(&dirf_estimate(&t, &[1, 2], 3_000, 55).unwrap(), &crit);
        assert_eq!(fa, fb);
    }

    #[test]
    fn probe_counts_and_trivial_run() {
        let rows = dirf_complexity_probe(&[1, 50, 200], 17).unwrap();
        assert_eq!(rows[0].tree_nodes, 0);
        assert!(rows[0].wall_seconds > 0.0);
        assert_eq!(rows[1].tree_nodes, 49);
        assert_eq!(rows[2].tree_nodes, 199);
        assert!(fitted_exponent(&rows[1..]).is_ok());
        assert!(fitted_exponent(&rows[..1]).is_err());
    }
}
