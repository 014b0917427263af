//! The IRF method: K independent tree builds, per-point average depth and
//! quantile-based anomaly thresholding.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::itree::build_itree;
use crate::monotone;
use crate::rng::trial_rng;

/// Per-point Monte Carlo summary of isolation depths over `trials` trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeightEstimate {
    pub mean_depth: Vec<f64>,
    pub sample_variance: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl HeightEstimate {
    pub fn len(&self) -> usize {
        self.mean_depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_depth.is_empty()
    }

    /// Writes `id,mean_depth,sample_variance` rows, one per point.
    pub fn write_csv<W: Write>(&self, s: &SampleSet, mut w: W) -> Result<()> {
        let io_err = |source| Error::Io {
            path: "<writer>".into(),
            source,
        };
        writeln!(w, "id,mean_depth,sample_variance").map_err(io_err)?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                s.id_of(i),
                self.mean_depth[i],
                self.sample_variance[i]
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

/// "Lowest q% of mean depths are anomalies", 0 < q < 100.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdCriterion {
    pub quantile: f64,
}

impl ThresholdCriterion {
    pub fn new(quantile: f64) -> Result<Self> {
        if !(quantile > 0.0 && quantile < 100.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile {quantile} must lie in (0, 100)"
            )));
        }
        Ok(Self { quantile })
    }
}

/// Confidence level for the trial-count rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    P90,
    P95,
}

/// Monte Carlo mean/variance of per-point depths where trial `k` fills a
/// depth buffer from its own rng stream. Depth sums are accumulated in
/// integer arithmetic, so the result is bit-identical regardless of worker
/// scheduling or trial order.
pub(crate) fn mc_depth_estimate<F>(n_points: usize, trials: u64, seed: u64, fill: F) -> HeightEstimate
where
    F: Fn(u64, &mut [usize]) + Sync,
{
    let (sum, sum_sq) = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; n_points], vec![0u64; n_points], vec![0usize; n_points]),
            |(mut sum, mut sum_sq, mut buf), trial| {
                fill(trial, &mut buf);
                for i in 0..n_points {
                    let d = buf[i] as u64;
                    sum[i] += d;
                    sum_sq[i] += d * d;
                }
                (sum, sum_sq, buf)
            },
        )
        .map(|(sum, sum_sq, _)| (sum, sum_sq))
        .reduce(
            || (vec![0u64; n_points], vec![0u64; n_points]),
            |(mut a, mut a2), (b, b2)| {
                for i in 0..n_points {
                    a[i] += b[i];
                    a2[i] += b2[i];
                }
                (a, a2)
            },
        );

    let k = trials as f64;
    let mean_depth: Vec<f64> = sum.iter().map(|&s| s as f64 / k).collect();
    let sample_variance: Vec<f64> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &s2)| {
            if trials < 2 {
                0.0
            } else {
                // K*sum_sq - sum^2 is exact in u128.
                let num = trials as u128 * s2 as u128 - (s as u128) * (s as u128);
                num as f64 / (k * (k - 1.0))
            }
        })
        .collect();

    HeightEstimate {
        mean_depth,
        sample_variance,
        trials,
        seed,
    }
}

/// The IRF estimator: builds `trials` isolation trees with independent
/// per-trial streams derived from `seed` and returns per-point depth means
/// and unbiased sample variances.
pub fn irf_estimate(s: &SampleSet, trials: u64, seed: u64) -> Result<HeightEstimate> {
    if trials < 1 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    Ok(mc_depth_estimate(s.len(), trials, seed, |trial, buf| {
        let t = build_itree(s, &mut trial_rng(seed, trial));
        t.depths_into(buf);
    }))
}

/// Indices whose mean depth falls in the lowest `q%`, i.e. the
/// `ceil(q/100 * N)` smallest values; ties at the cut are broken by
/// ascending point index. Returned sorted ascending.
pub fn flag_anomalies(est: &HeightEstimate, crit: &ThresholdCriterion) -> Vec<usize> {
    let n = est.len();
    let count = ((crit.quantile / 100.0) * n as f64).ceil() as usize;
    let count = count.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        est.mean_depth[a]
            .total_cmp(&est.mean_depth[b])
            .then(a.cmp(&b))
    });
    let mut flagged: Vec<usize> = order.into_iter().take(count).collect();
    flagged.sort_unstable();
    flagged
}

/// Trial count for a confidence level, using the regression variance model
/// on `#S - 1` intervals. Fails for sets small enough that the model goes
/// non-positive; callers should then pick K themselves.
pub fn trials_from_confidence(s: &SampleSet, level: ConfidenceLevel) -> Result<u64> {
    if s.len() < 2 {
        return Err(Error::InvalidParameter(
            "confidence-based trial count needs at least 2 points".into(),
        ));
    }
    let sigma2 = monotone::variance_regression(s.len() - 1)?;
    monotone::trials_for_confidence(sigma2, level)
}
