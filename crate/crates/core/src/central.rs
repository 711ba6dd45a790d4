//! Centralized disparity functionals computed from pooled group samples.
//!
//! `U_p` is the weighted Wasserstein-Fréchet variance of the group score laws
//! around their transport barycenter; `H_p` is the Cramér-Fréchet variance
//! around the pooled mixture. Both are reported in `p`-th power units.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::distances::{cramer_cost, grid_cost, pointwise_barycenter};
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, Power};
use crate::sketch::{mix_step_cdfs, sketch_to_step_cdf, sorted_finite, GridSpec, QuantileSketch, StepCdf};

/// Raw scores per sensitive group, each group kept sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: BTreeMap<String, Vec<f64>>,
}

impl GroupedSample {
    pub fn new(groups: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups(groups.len()));
        }
        let mut sorted = BTreeMap::new();
        for (label, scores) in groups {
            if scores.is_empty() {
                return Err(Error::EmptyGroup(label));
            }
            let s = sorted_finite(&scores)?;
            sorted.insert(label, s);
        }
        Ok(Self { groups: sorted })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (label, z) in pairs {
            groups.entry(label.into()).or_default().push(z);
        }
        Self::new(groups)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn sorted_scores(&self, label: &str) -> Option<&[f64]> {
        self.groups.get(label).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.groups.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    /// `alpha_s = n_s / n` in label order.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.groups.values().map(|v| v.len() as f64 / n).collect()
    }

    pub fn sketches(&self, grid: GridSpec) -> Vec<QuantileSketch> {
        self.groups
            .values()
            .map(|v| QuantileSketch::from_sorted(v, grid).expect("groups are nonempty"))
            .collect()
    }
}

/// Weighted grid disparity `sum_s w_s * h * sum_l |q_{s,l} - q*_l|^p` and the
/// barycenter curve `q*`. Shared by the centralized and federated estimators
/// so both accumulate identically.
pub(crate) fn grid_disparity(
    curves: &[(f64, &[f64])],
    grid: &GridSpec,
    p: Power,
) -> Result<(f64, Vec<f64>)> {
    let bary = pointwise_barycenter(curves, grid.k(), p)?;
    let value = curves
        .iter()
        .map(|(w, q)| w * grid_cost(q, &bary, grid.cell_width(), p))
        .collect::<CompensatedSum>()
        .value();
    Ok((value, bary))
}

/// `sum_s w_s C_p(F_s, sum_r w_r F_r)^p` with exact breakpoint integration.
pub(crate) fn pooled_heterogeneity(cdfs: &[(f64, &StepCdf)], p: Power) -> Result<(f64, StepCdf)> {
    let pooled = mix_step_cdfs(cdfs)?;
    let value = cdfs
        .iter()
        .map(|(w, f)| w * cramer_cost(f, &pooled, p))
        .collect::<CompensatedSum>()
        .value();
    Ok((value, pooled))
}

/// Midpoint-Riemann estimate of `U_p` from per-group sketches on `grid`.
pub fn u_hat(groups: &GroupedSample, grid: GridSpec, p: Power) -> Result<f64> {
    let sketches = groups.sketches(grid);
    let weights = groups.weights();
    let curves: Vec<(f64, &[f64])> = weights.iter().copied().zip(sketches.iter().map(|s| s.values())).collect();
    Ok(grid_disparity(&curves, &grid, p)?.0)
}

/// Estimate of `H_p` from the sketches' step-CDFs and their `alpha`-mixture.
pub fn h_hat(groups: &GroupedSample, grid: GridSpec, p: Power) -> Result<f64> {
    let cdfs: Vec<StepCdf> = groups.sketches(grid).iter().map(sketch_to_step_cdf).collect();
    let weights = groups.weights();
    let parts: Vec<(f64, &StepCdf)> = weights.iter().copied().zip(cdfs.iter()).collect();
    Ok(pooled_heterogeneity(&parts, p)?.0)
}

/// Exact integral of the squared gap between piecewise-linear quantile
/// reconstructions (constant on the two boundary half-cells), `p = 2` only.
pub fn u2_linear_exact(groups: &GroupedSample, grid: GridSpec) -> Result<f64> {
    if grid.k() < 2 {
        return Err(Error::KTooSmall(grid.k()));
    }
    let sketches = groups.sketches(grid);
    let weights = groups.weights();
    let curves: Vec<(f64, &[f64])> = weights.iter().copied().zip(sketches.iter().map(|s| s.values())).collect();
    let bary = pointwise_barycenter(&curves, grid.k(), Power::Two)?;
    let h = grid.cell_width();
    let mut total = CompensatedSum::new();
    for (w, q) in &curves {
        let d: Vec<f64> = q.iter().zip(&bary).map(|(a, b)| a - b).collect();
        let mut acc = CompensatedSum::new();
        acc.add(0.5 * h * d[0] * d[0]);
        for pair in d.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            acc.add(h / 3.0 * (a * a + a * b + b * b));
        }
        let last = d[d.len() - 1];
        acc.add(0.5 * h * last * last);
        total.add(w * acc.value());
    }
    Ok(total.value())
}

/// Bin-averaged discretization of `U_2` for two groups: the exact average of
/// the quantile gap over each cell `[(l-1)/k, l/k)`, squared and summed.
///
/// The gap `Q_1 - Q_0` is constant between consecutive points of
/// `{i/n0} U {j/n1} U {l/k}`; those pieces are walked in order and integrated
/// exactly, comparing breakpoints in integer arithmetic.
pub fn u2_bin_averaged(groups: &GroupedSample, k: usize) -> Result<f64> {
    if groups.len() != 2 {
        return Err(Error::TwoGroupsOnly(groups.len()));
    }
    if k == 0 {
        return Err(Error::InvalidGrid("k must be at least 1".into()));
    }
    let mut it = groups.iter();
    let (_, x) = it.next().expect("two groups");
    let (_, y) = it.next().expect("two groups");
    let (n0, n1) = (x.len() as u128, y.len() as u128);
    let kk = k as u128;
    // 1-based indices of the next breakpoints i/n0, j/n1, l/k
    let (mut i, mut j, mut l) = (1u128, 1u128, 1u128);
    let mut left = 0.0f64;
    let mut bin = CompensatedSum::new();
    let mut acc = CompensatedSum::new();
    while l <= kk {
        // smallest of i/n0, j/n1, l/k; ties advance every matching pointer
        let mut num = i;
        let mut den = n0;
        for (a, b) in [(j, n1), (l, kk)] {
            if a * den < num * b {
                num = a;
                den = b;
            }
        }
        let right = num as f64 / den as f64;
        let gap = y[(j - 1) as usize] - x[(i - 1) as usize];
        bin.add((right - left) * gap);
        left = right;
        if i * den == num * n0 {
            i += 1;
        }
        if j * den == num * n1 {
            j += 1;
        }
        if l * den == num * kk {
            let mean = bin.value() * k as f64;
            acc.add(mean * mean);
            bin = CompensatedSum::new();
            l += 1;
        }
    }
    let w = groups.weights();
    Ok(w[0] * w[1] * acc.value() / k as f64)
}

/// All centralized quantities reported by an audit.
#[derive(Debug, Clone, Serialize)]
pub struct CentralAudit {
    pub p: Power,
    pub grid: GridSpec,
    pub counts: BTreeMap<String, usize>,
    pub alpha: BTreeMap<String, f64>,
    pub u_p: f64,
    pub h_p: f64,
    /// Two-group fields: `W_p` and `C_p` between the groups (rooted) and the
    /// absolute difference of group means.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2_linear_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2_bin_averaged: Option<f64>,
}

pub fn central_audit(groups: &GroupedSample, grid: GridSpec, p: Power) -> Result<CentralAudit> {
    let sketches = groups.sketches(grid);
    let weights = groups.weights();
    let labels: Vec<String> = groups.labels().map(str::to_owned).collect();
    let curves: Vec<(f64, &[f64])> = weights.iter().copied().zip(sketches.iter().map(|s| s.values())).collect();
    let (u_p, _) = grid_disparity(&curves, &grid, p)?;
    let cdfs: Vec<StepCdf> = sketches.iter().map(sketch_to_step_cdf).collect();
    let parts: Vec<(f64, &StepCdf)> = weights.iter().copied().zip(cdfs.iter()).collect();
    let (h_p, _) = pooled_heterogeneity(&parts, p)?;

    let two = groups.len() == 2;
    let (w_p, c_p, mean_gap) = if two {
        let w = p.root(grid_cost(sketches[0].values(), sketches[1].values(), grid.cell_width(), p));
        let c = p.root(cramer_cost(&cdfs[0], &cdfs[1], p));
        let means: Vec<f64> = groups
            .iter()
            .map(|(_, v)| v.iter().copied().collect::<CompensatedSum>().value() / v.len() as f64)
            .collect();
        (Some(w), Some(c), Some((means[1] - means[0]).abs()))
    } else {
        (None, None, None)
    };
    let u2_linear_exact = if p == Power::Two && grid.k() >= 2 {
        Some(u2_linear_exact(groups, grid)?)
    } else {
        None
    };
    let u2_bin_averaged = if p == Power::Two && two && !grid.is_trimmed() {
        Some(u2_bin_averaged(groups, grid.k())?)
    } else {
        None
    };
    Ok(CentralAudit {
        p,
        grid,
        counts: groups.counts(),
        alpha: labels.into_iter().zip(weights).collect(),
        u_p,
        h_p,
        w_p,
        c_p,
        mean_gap,
        u2_linear_exact,
        u2_bin_averaged,
    })
}
