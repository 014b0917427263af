//! Ground-truth machinery: exhaustive enumeration of tree spaces with exact
//! probabilities, the Catalan cardinality formula, and the 2D
//! inconclusiveness counterexamples.

use serde::Serialize;

use crate::dataset::{check_distinct_coordinates, SampleSet};
use crate::error::{Error, Result};
use crate::forest::irf_estimate;
use crate::monotone::MonotonePartition;

/// Largest point count accepted by [`enumerate_irf`].
pub const IRF_ENUMERATION_MAX_POINTS: usize = 6;
/// Largest dimension accepted by [`enumerate_irf`].
pub const IRF_ENUMERATION_MAX_DIM: usize = 3;
/// Largest interval count accepted by [`enumerate_mrf`].
pub const MRF_ENUMERATION_LIMIT: usize = 8;

/// Complete list of trees with their exact probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct EnumeratedForest<E> {
    pub entries: Vec<E>,
    pub total_probability: f64,
}

impl<E> EnumeratedForest<E> {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    fn from_entries(entries: Vec<E>, prob_of: impl Fn(&E) -> f64) -> Self {
        let total_probability = entries.iter().map(prob_of).sum();
        Self {
            entries,
            total_probability,
        }
    }
}

/// One isolation tree, identified by its structural signature: preorder
/// `(dim, left size)` per internal node. The continuous split value is
/// marginalized into its inter-point gap.
#[derive(Debug, Clone, Serialize)]
pub struct IrfEntry {
    pub signature: Vec<(usize, usize)>,
    /// Depth of every point, indexed by point index.
    pub point_depths: Vec<usize>,
    pub probability: f64,
}

/// One monotone tree, identified by its preorder root-index sequence.
#[derive(Debug, Clone, Serialize)]
pub struct MrfEntry {
    pub signature: Vec<usize>,
    /// `interval_depths[i - 1]` is the depth of interval `I_i`.
    pub interval_depths: Vec<usize>,
    pub probability: f64,
}

struct IrfCase {
    signature: Vec<(usize, usize)>,
    depths: Vec<(usize, usize)>, // (point index, depth)
    probability: f64,
}

/// Enumerates every isolation tree over `s` with its exact probability
/// under the recursion `P(T) = (1/d) (|gap| / span) P(T_lt) P(T_rt)`.
/// Requires the distinct-coordinates hypothesis and the desk-scale limits.
pub fn enumerate_irf(s: &SampleSet) -> Result<EnumeratedForest<IrfEntry>> {
    if s.len() > IRF_ENUMERATION_MAX_POINTS || s.dim() > IRF_ENUMERATION_MAX_DIM {
        return Err(Error::EnumerationLimit(format!(
            "{} points in dimension {} exceed the {} x {} enumeration limit",
            s.len(),
            s.dim(),
            IRF_ENUMERATION_MAX_POINTS,
            IRF_ENUMERATION_MAX_DIM
        )));
    }
    let report = check_distinct_coordinates(s);
    if !report.satisfied {
        return Err(Error::HypothesisViolated(format!(
            "duplicated coordinates {:?}",
            report.violations
        )));
    }

    let indices: Vec<usize> = (0..s.len()).collect();
    let cases = enumerate_irf_subset(s, &indices);
    let entries = cases
        .into_iter()
        .map(|case| {
            let mut point_depths = vec![0usize; s.len()];
            for (point, depth) in case.depths {
                point_depths[point] = depth;
            }
            IrfEntry {
                signature: case.signature,
                point_depths,
                probability: case.probability,
            }
        })
        .collect();
    Ok(EnumeratedForest::from_entries(entries, |e: &IrfEntry| {
        e.probability
    }))
}

fn enumerate_irf_subset(s: &SampleSet, indices: &[usize]) -> Vec<IrfCase> {
    if indices.len() == 1 {
        return vec![IrfCase {
            signature: Vec::new(),
            depths: vec![(indices[0], 0)],
            probability: 1.0,
        }];
    }

    let d = s.dim();
    let mut cases = Vec::new();
    for dim in 0..d {
        let mut sorted = indices.to_vec();
        sorted.sort_by(|&a, &b| s.point(a)[dim].total_cmp(&s.point(b)[dim]));
        let span = s.point(*sorted.last().unwrap())[dim] - s.point(sorted[0])[dim];
        for cut in 1..sorted.len() {
            let gap = s.point(sorted[cut])[dim] - s.point(sorted[cut - 1])[dim];
            let factor = gap / span / d as f64;
            let left_cases = enumerate_irf_subset(s, &sorted[..cut]);
            let right_cases = enumerate_irf_subset(s, &sorted[cut..]);
            for left in &left_cases {
                for right in &right_cases {
                    let mut signature = Vec::with_capacity(
                        1 + left.signature.len() + right.signature.len(),
                    );
                    signature.push((dim, cut));
                    signature.extend_from_slice(&left.signature);
                    signature.extend_from_slice(&right.signature);
                    let mut depths =
                        Vec::with_capacity(left.depths.len() + right.depths.len());
                    depths.extend(left.depths.iter().map(|&(p, h)| (p, h + 1)));
                    depths.extend(right.depths.iter().map(|&(p, h)| (p, h + 1)));
                    cases.push(IrfCase {
                        signature,
                        depths,
                        probability: factor * left.probability * right.probability,
                    });
                }
            }
        }
    }
    cases
}

/// `C_{n-1} d^{n-1}`: the number of isolation trees over `n` points in
/// dimension `d`, in exact integer arithmetic.
pub fn cardinality_formula(n_points: usize, d: usize) -> Result<u128> {
    if n_points < 1 || d < 1 {
        return Err(Error::InvalidParameter(
            "need n_points >= 1 and d >= 1".into(),
        ));
    }
    let k = n_points - 1;
    let catalan = catalan_number(k).ok_or(Error::CardinalityOverflow { n: n_points, d })?;
    let mut power: u128 = 1;
    for _ in 0..k {
        power = power
            .checked_mul(d as u128)
            .ok_or(Error::CardinalityOverflow { n: n_points, d })?;
    }
    catalan
        .checked_mul(power)
        .ok_or(Error::CardinalityOverflow { n: n_points, d })
}

fn catalan_number(k: usize) -> Option<u128> {
    // C_0 = 1, C_{m+1} = C_m * 2(2m + 1) / (m + 2); the division is exact.
    let mut c: u128 = 1;
    for m in 0..k {
        c = c.checked_mul(2 * (2 * m as u128 + 1))? / (m as u128 + 2);
    }
    Some(c)
}

struct MrfCase {
    signature: Vec<usize>,
    depths: Vec<(usize, usize)>, // (interval index, depth)
    probability: f64,
}

/// Enumerates every monotone tree over `p` with its exact probability
/// (the product of the root-choice probabilities down the recursion).
pub fn enumerate_mrf(p: &MonotonePartition) -> Result<EnumeratedForest<MrfEntry>> {
    if p.len() > MRF_ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit(format!(
            "{} intervals exceed the limit of {}",
            p.len(),
            MRF_ENUMERATION_LIMIT
        )));
    }
    let cases = enumerate_mrf_range(p, 1, p.len());
    let entries = cases
        .into_iter()
        .map(|case| {
            let mut interval_depths = vec![0usize; p.len()];
            for (interval, depth) in case.depths {
                interval_depths[interval - 1] = depth;
            }
            MrfEntry {
                signature: case.signature,
                interval_depths,
                probability: case.probability,
            }
        })
        .collect();
    Ok(EnumeratedForest::from_entries(entries, |e: &MrfEntry| {
        e.probability
    }))
}

fn enumerate_mrf_range(p: &MonotonePartition, lo: usize, hi: usize) -> Vec<MrfCase> {
    if lo > hi {
        return vec![MrfCase {
            signature: Vec::new(),
            depths: Vec::new(),
            probability: 1.0,
        }];
    }
    let block: f64 = (lo..=hi).map(|i| p.length(i)).sum();
    let mut cases = Vec::new();
    for root in lo..=hi {
        let root_prob = p.length(root) / block;
        for left in enumerate_mrf_range(p, lo, root - 1) {
            for right in enumerate_mrf_range(p, root + 1, hi) {
                let mut signature = Vec::with_capacity(hi - lo + 1);
                signature.push(root);
                signature.extend_from_slice(&left.signature);
                signature.extend_from_slice(&right.signature);
                let mut depths = Vec::with_capacity(hi - lo + 1);
                depths.push((root, 0));
                depths.extend(left.depths.iter().map(|&(n, h)| (n, h + 1)));
                depths.extend(right.depths.iter().map(|&(n, h)| (n, h + 1)));
                cases.push(MrfCase {
                    signature,
                    depths,
                    probability: root_prob * left.probability * right.probability,
                });
            }
        }
    }
    cases
}

/// Pair of 2D configurations with equal printed expected heights for the
/// origin but arbitrarily different distances to the rest of the set.
#[derive(Debug, Clone)]
pub struct CounterexamplePair {
    /// The monotone configuration `{0} + {(p_i, q_i)}`.
    pub s1: SampleSet,
    /// The strategic transposition: same grid with `(p_1, q_2)` and
    /// `(p_2, q_1)` swapped in.
    pub s2: SampleSet,
    /// Sorted per-axis grid values, origin included.
    pub grid: (Vec<f64>, Vec<f64>),
    pub closed_form_e1: f64,
    pub closed_form_e2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Origin-depth expectation for the monotone configuration, as printed.
fn closed_form_monotone(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    let mut sum = 1.0;
    for i in 1..n {
        sum += 0.5 * (q[i] - q[i - 1]) / q[i] + 0.5 * (p[i] - p[i - 1]) / p[i];
    }
    sum
}

/// Origin-depth expectation for the transposed configuration, as printed
/// (indices shifted down by one, with `p_0 = q_0 = 0`).
fn closed_form_transposed(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    let mut sum = 1.0;
    for i in 1..n {
        let (p_prev, q_prev) = if i == 1 { (0.0, 0.0) } else { (p[i - 2], q[i - 2]) };
        sum += 0.5 * (q[i - 1] - q_prev) / q[i - 1] + 0.5 * (p[i - 1] - p_prev) / p[i - 1];
    }
    sum
}

/// Builds the counterexample pair from strictly increasing positive grid
/// sequences `p`, `q` of equal length N >= 3.
pub fn build_counterexample(p: &[f64], q: &[f64]) -> Result<CounterexamplePair> {
    if p.len() != q.len() || p.len() < 3 {
        return Err(Error::InvalidInput(
            "grid sequences must have equal length >= 3".into(),
        ));
    }
    for seq in [p, q] {
        if seq[0] <= 0.0 || seq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "grid sequences must be strictly increasing and positive".into(),
            ));
        }
    }

    let mut pts1 = vec![vec![0.0, 0.0]];
    pts1.extend(p.iter().zip(q).map(|(&x, &y)| vec![x, y]));
    let mut pts2 = vec![vec![0.0, 0.0], vec![p[0], q[1]], vec![p[1], q[0]]];
    pts2.extend(p.iter().zip(q).skip(2).map(|(&x, &y)| vec![x, y]));

    let mut grid_x = vec![0.0];
    grid_x.extend_from_slice(p);
    let mut grid_y = vec![0.0];
    grid_y.extend_from_slice(q);

    Ok(CounterexamplePair {
        s1: SampleSet::new(pts1)?,
        s2: SampleSet::new(pts2)?,
        grid: (grid_x, grid_y),
        closed_form_e1: closed_form_monotone(p, q),
        closed_form_e2: closed_form_transposed(p, q),
        d1: (p[0] * p[0] + q[0] * q[0]).sqrt(),
        d2: (p[0] * p[0] + q[1] * q[1])
            .sqrt()
            .min((p[1] * p[1] + q[0] * q[0]).sqrt()),
    })
}

/// Monte Carlo comparison of the origin's expected depth in both
/// configurations, reported alongside the closed forms and distances.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub mc_e1: f64,
    pub mc_e2: f64,
    /// 95% normal-approximation half-widths.
    pub ci1: f64,
    pub ci2: f64,
    pub closed_form_e1: f64,
    pub closed_form_e2: f64,
    pub d1: f64,
    pub d2: f64,
    pub trials: u64,
}

pub fn counterexample_mc_check(
    pair: &CounterexamplePair,
    trials: u64,
    seed: u64,
) -> Result<CounterexampleReport> {
    let est1 = irf_estimate(&pair.s1, trials, seed)?;
    let est2 = irf_estimate(&pair.s2, trials, seed.wrapping_add(1))?;
    let k = trials as f64;
    Ok(CounterexampleReport {
        mc_e1: est1.mean_depth[0],
        mc_e2: est2.mean_depth[0],
        ci1: 1.96 * (est1.sample_variance[0] / k).sqrt(),
        ci2: 1.96 * (est2.sample_variance[0] / k).sqrt(),
        closed_form_e1: pair.closed_form_e1,
        closed_form_e2: pair.closed_form_e2,
        d1: pair.d1,
        d2: pair.d2,
        trials,
    })
}
