//! Exact 1D analytics: monotone partitions and random trees, closed-form
//! expectations, the printed variance formula and its enumeration oracle,
//! bound quality, the maximum-variance table, the regression model for
//! trial counts, and the endpoint/interval depth relation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ConfidenceLevel;
use crate::oracle;
use crate::rng::{trial_rng, TrialRng};

/// Sorted 1D interval family defined by strictly increasing endpoints
/// `x_0 < x_1 < ... < x_N`. Intervals are 1-indexed (`I_1 ..= I_N`),
/// endpoints 0-indexed.
#[derive(Debug, Clone)]
pub struct MonotonePartition {
    endpoints: Vec<f64>,
    // prefix[k] = |I_1| + ... + |I_k|, prefix[0] = 0
    prefix: Vec<f64>,
}

impl MonotonePartition {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.len() < 2 {
            return Err(Error::InvalidInput(
                "a partition needs at least two endpoints".into(),
            ));
        }
        if endpoints.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("endpoints must be finite".into()));
        }
        if endpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "endpoints must be strictly increasing".into(),
            ));
        }
        let mut prefix = Vec::with_capacity(endpoints.len());
        prefix.push(0.0);
        for w in endpoints.windows(2) {
            prefix.push(prefix.last().unwrap() + (w[1] - w[0]));
        }
        Ok(Self { endpoints, prefix })
    }

    /// Partition from positive interval lengths, anchored at 0.
    pub fn from_lengths(lengths: &[f64]) -> Result<Self> {
        let mut endpoints = Vec::with_capacity(lengths.len() + 1);
        endpoints.push(0.0);
        for &len in lengths {
            if !(len > 0.0) {
                return Err(Error::InvalidInput("lengths must be positive".into()));
            }
            endpoints.push(endpoints.last().unwrap() + len);
        }
        Self::new(endpoints)
    }

    /// `n` equal intervals over [0, 1].
    pub fn equidistant(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("need at least one interval".into()));
        }
        Self::new((0..=n).map(|i| i as f64 / n as f64).collect())
    }

    /// Gap partition of a strictly increasing point sequence.
    pub fn from_sorted_points(points: &[f64]) -> Result<Self> {
        Self::new(points.to_vec())
    }

    /// Number of intervals N.
    pub fn len(&self) -> usize {
        self.endpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// Length of interval `I_i`, 1-indexed.
    pub fn length(&self, i: usize) -> f64 {
        self.endpoints[i] - self.endpoints[i - 1]
    }

    pub fn total_length(&self) -> f64 {
        self.prefix[self.len()]
    }

    /// Total length of the contiguous block `I_lo ..= I_hi`.
    fn block_length(&self, lo: usize, hi: usize) -> f64 {
        self.prefix[hi] - self.prefix[lo - 1]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.len() {
            Err(Error::IndexOutOfRange {
                index: i,
                max: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Total length of the block spanning intervals `i..k` (inclusive);
/// the denominator of the ancestor-indicator expectation.
pub fn ancestor_weight(p: &MonotonePartition, i: usize, k: usize) -> Result<f64> {
    p.check_index(i)?;
    p.check_index(k)?;
    Ok(p.block_length(i.min(k), i.max(k)))
}

/// A monotone random tree: binary tree over interval indices whose in-order
/// traversal is `1..=N`. Arena representation, root at index 0.
#[derive(Debug, Clone)]
pub struct MonotoneTree {
    nodes: Vec<MNode>,
}

#[derive(Debug, Clone)]
pub struct MNode {
    /// 1-based interval index.
    pub interval: usize,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl MonotoneTree {
    pub fn nodes(&self) -> &[MNode] {
        &self.nodes
    }

    /// Depth of every interval; `out[i - 1]` is the depth of `I_i`.
    pub fn interval_depths(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.nodes.len()];
        self.depths_into(&mut out);
        out
    }

    pub fn depths_into(&self, out: &mut [usize]) {
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            let node = &self.nodes[idx];
            out[node.interval - 1] = depth;
            if let Some(l) = node.left {
                stack.push((l, depth + 1));
            }
            if let Some(r) = node.right {
                stack.push((r, depth + 1));
            }
        }
    }

    /// Preorder root-index sequence; a complete structural identity.
    pub fn signature(&self) -> Vec<usize> {
        let mut sig = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            sig.push(node.interval);
            if let Some(r) = node.right {
                stack.push(r);
            }
            if let Some(l) = node.left {
                stack.push(l);
            }
        }
        sig
    }
}

/// Samples a monotone random tree: the root of every sub-range is drawn
/// with probability proportional to interval length. Root selection is a
/// binary search on the length prefix sums, so a build costs
/// O(N log N) expected.
pub fn build_mtree(p: &MonotonePartition, rng: &mut TrialRng) -> MonotoneTree {
    struct Work {
        lo: usize,
        hi: usize,
        patch: Option<(usize, bool)>,
    }

    let mut nodes: Vec<MNode> = Vec::with_capacity(p.len());
    let mut stack = vec![Work {
        lo: 1,
        hi: p.len(),
        patch: None,
    }];

    while let Some(Work { lo, hi, patch }) = stack.pop() {
        let root = if lo == hi {
            lo
        } else {
            let base = p.prefix[lo - 1];
            let total = p.prefix[hi] - base;
            let u = rng.random_range(0.0..total);
            // Smallest k in [lo, hi] with prefix[k] - base > u.
            let k = lo + p.prefix[lo..=hi].partition_point(|&pre| pre - base <= u);
            k.min(hi)
        };

        let idx = nodes.len();
        if let Some((parent, is_right)) = patch {
            if is_right {
                nodes[parent].right = Some(idx);
            } else {
                nodes[parent].left = Some(idx);
            }
        }
        nodes.push(MNode {
            interval: root,
            left: None,
            right: None,
        });
        if root < hi {
            stack.push(Work {
                lo: root + 1,
                hi,
                patch: Some((idx, true)),
            });
        }
        if lo < root {
            stack.push(Work {
                lo,
                hi: root - 1,
                patch: Some((idx, false)),
            });
        }
    }

    MonotoneTree { nodes }
}

/// E(X_{i,k}) = |I_k| / w(i,k): the probability that `I_k` is an ancestor
/// of `I_i`.
pub fn expected_indicator(p: &MonotonePartition, i: usize, k: usize) -> Result<f64> {
    if i == k {
        return Err(Error::InvalidParameter(
            "indicator indices must differ".into(),
        ));
    }
    Ok(p.length(k) / ancestor_weight(p, i, k)?)
}

/// Closed-form expected depth of `I_i`: the sum of ancestor indicators.
pub fn exact_expected_height(p: &MonotonePartition, i: usize) -> Result<f64> {
    p.check_index(i)?;
    let mut sum = 0.0;
    for k in 1..=p.len() {
        if k != i {
            sum += p.length(k) / p.block_length(i.min(k), i.max(k));
        }
    }
    Ok(sum)
}

/// The printed closed-form variance,
/// `sum E(X_ik) + sum_k E(X_ik) sum_{l != i,k} E(X_il) - E^2(h_i)`,
/// exposed verbatim so it can be compared against the enumeration oracle.
pub fn paper_variance_formula(p: &MonotonePartition, i: usize) -> Result<f64> {
    p.check_index(i)?;
    let e: Vec<f64> = (1..=p.len())
        .map(|k| {
            if k == i {
                0.0
            } else {
                p.length(k) / p.block_length(i.min(k), i.max(k))
            }
        })
        .collect();
    let total: f64 = e.iter().sum();
    let cross: f64 = e.iter().map(|&ek| ek * (total - ek)).sum();
    Ok(total + cross - total * total)
}

/// Exact Var(h_i) from the full enumerated tree distribution; ground truth
/// for the printed formula. Limited to small partitions.
pub fn oracle_variance(p: &MonotonePartition, i: usize) -> Result<f64> {
    p.check_index(i)?;
    let forest = oracle::enumerate_mrf(p)?;
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for entry in &forest.entries {
        let d = entry.interval_depths[i - 1] as f64;
        mean += entry.probability * d;
        mean_sq += entry.probability * d * d;
    }
    Ok(mean_sq - mean * mean)
}

/// Logarithmic depth proxy `b(h_i) = ln(total length / |I_i|)`.
pub fn bound_b(p: &MonotonePartition, i: usize) -> Result<f64> {
    p.check_index(i)?;
    Ok((p.total_length() / p.length(i)).ln())
}

/// The three bounds sandwiching `E(h_1)` for a partition normalized to
/// [0, 1] with first gap `d`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SandwichBounds {
    pub lower: f64,
    pub upper_amgm: f64,
    pub upper_direct: f64,
}

pub fn sandwich_bounds(p: &MonotonePartition) -> Result<SandwichBounds> {
    let eps = &p.endpoints;
    if eps[0] != 0.0 || *eps.last().unwrap() != 1.0 {
        return Err(Error::InvalidInput(
            "sandwich bounds need endpoints normalized to [0, 1]".into(),
        ));
    }
    let n = p.len() as f64;
    let d = eps[1];
    Ok(SandwichBounds {
        lower: 1.0 - d,
        upper_amgm: if p.len() >= 2 {
            (n - 1.0) * (1.0 - d.powf(1.0 / (n - 1.0)))
        } else {
            0.0
        },
        upper_direct: (1.0 - d) / d,
    })
}

/// How `max_variance_equidistant` obtains its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarianceSource {
    /// Exact enumeration (N <= 8), printed formula above.
    Auto,
    /// Exact enumeration only; errors above the limit.
    Oracle,
    /// The printed closed-form formula.
    Formula,
    /// Tree sampling with a reported confidence interval.
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MaxVariance {
    pub value: f64,
    /// Interval index attaining the maximum, 1-based.
    pub argmax: usize,
    /// 95% half-width of the Monte Carlo estimate, when sampled.
    pub ci_half_width: Option<f64>,
}

/// Maximum over intervals of Var(h_i) on the equidistant n-interval
/// partition.
pub fn max_variance_equidistant(n: usize, source: VarianceSource) -> Result<MaxVariance> {
    let p = MonotonePartition::equidistant(n)?;
    match source {
        VarianceSource::Auto => {
            if n <= oracle::MRF_ENUMERATION_LIMIT {
                max_variance_equidistant(n, VarianceSource::Oracle)
            } else {
                max_variance_equidistant(n, VarianceSource::Formula)
            }
        }
        VarianceSource::Oracle => {
            let mut best = (0.0f64, 1usize);
            for i in 1..=n {
                let v = oracle_variance(&p, i)?;
                if v > best.0 {
                    best = (v, i);
                }
            }
            Ok(MaxVariance {
                value: best.0,
                argmax: best.1,
                ci_half_width: None,
            })
        }
        VarianceSource::Formula => {
            let mut best = (0.0f64, 1usize);
            for i in 1..=n {
                let v = paper_variance_formula(&p, i)?;
                if v > best.0 {
                    best = (v, i);
                }
            }
            Ok(MaxVariance {
                value: best.0,
                argmax: best.1,
                ci_half_width: None,
            })
        }
        VarianceSource::MonteCarlo { trials, seed } => mc_max_variance(&p, trials, seed),
    }
}

/// Monte Carlo per-interval depth variance with a moment-based 95%
/// confidence interval on the maximizing interval.
fn mc_max_variance(p: &MonotonePartition, trials: u64, seed: u64) -> Result<MaxVariance> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let n = p.len();
    // Raw moment sums per interval; depths are integers so these are exact.
    let sums = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; n], vec![0u64; n], vec![0u128; n], vec![0u128; n], vec![0usize; n]),
            |(mut s1, mut s2, mut s3, mut s4, mut buf), trial| {
                let t = build_mtree(p, &mut trial_rng(seed, trial));
                t.depths_into(&mut buf);
                for i in 0..n {
                    let d = buf[i] as u64;
                    s1[i] += d;
                    s2[i] += d * d;
                    s3[i] += (d * d * d) as u128;
                    s4[i] += (d * d) as u128 * (d * d) as u128;
                }
                (s1, s2, s3, s4, buf)
            },
        )
        .map(|(s1, s2, s3, s4, _)| (s1, s2, s3, s4))
        .reduce(
            || (vec![0u64; n], vec![0u64; n], vec![0u128; n], vec![0u128; n]),
            |(mut a1, mut a2, mut a3, mut a4), (b1, b2, b3, b4)| {
                for i in 0..n {
                    a1[i] += b1[i];
                    a2[i] += b2[i];
                    a3[i] += b3[i];
                    a4[i] += b4[i];
                }
                (a1, a2, a3, a4)
            },
        );

    let k = trials as f64;
    let mut best = (f64::NEG_INFINITY, 1usize, 0.0f64);
    for i in 0..n {
        let m1 = sums.0[i] as f64 / k;
        let m2 = sums.1[i] as f64 / k;
        let m3 = sums.2[i] as f64 / k;
        let m4 = sums.3[i] as f64 / k;
        let var = (m2 - m1 * m1) * k / (k - 1.0);
        // Central fourth moment from raw moments.
        let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        let half = 1.96 * ((mu4 - var * var).max(0.0) / k).sqrt();
        if var > best.0 {
            best = (var, i + 1, half);
        }
    }
    Ok(MaxVariance {
        value: best.0,
        argmax: best.1,
        ci_half_width: Some(best.2),
    })
}

/// Correlation coefficient reported for the regression model.
pub const REGRESSION_KAPPA: f64 = 0.9967;
/// Standard error reported for the regression model.
pub const REGRESSION_SIGMA: f64 = 0.076;

/// Regression estimate of the maximum variance for an n-interval partition:
/// `(1.99 / ln 3) ln n - 2.38` (natural logs). Errors when the model goes
/// non-positive, which happens below roughly four intervals.
pub fn variance_regression(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one interval".into()));
    }
    let value = 1.99 / 3f64.ln() * (n as f64).ln() - 2.38;
    if value <= 0.0 {
        return Err(Error::RegressionOutOfRange { n, value });
    }
    Ok(value)
}

/// Bernoulli trial count guaranteeing the requested confidence level for a
/// variance estimate `sigma2`: `(1.645/0.1)^2 sigma2` at 90%,
/// `(1.96/0.05)^2 sigma2` at 95%, rounded up.
pub fn trials_for_confidence(sigma2: f64, level: ConfidenceLevel) -> Result<u64> {
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variance {sigma2} must be non-negative"
        )));
    }
    let multiplier = match level {
        ConfidenceLevel::P90 => (1.645f64 / 0.1).powi(2),
        ConfidenceLevel::P95 => (1.96f64 / 0.05).powi(2),
    };
    Ok((multiplier * sigma2).ceil() as u64)
}

/// Transfers interval depths to endpoint depths: an interior endpoint sits
/// one level below the deeper of its two adjacent intervals; the extreme
/// endpoints below their single adjacent interval.
pub fn point_depth_relation(p: &MonotonePartition, interval_depths: &[usize]) -> Result<Vec<usize>> {
    let n = p.len();
    if interval_depths.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} depths supplied for {} intervals",
            interval_depths.len(),
            n
        )));
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(1 + interval_depths[0]);
    for i in 1..n {
        out.push(1 + interval_depths[i - 1].max(interval_depths[i]));
    }
    out.push(1 + interval_depths[n - 1]);
    Ok(out)
}
