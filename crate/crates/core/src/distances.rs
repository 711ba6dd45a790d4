//! One-dimensional Wasserstein and Cramér distances, and the two barycenters.
//!
//! On a shared grid the Wasserstein distance is the `L^p` distance between
//! quantile curves and the transport barycenter is computed level by level
//! (weighted mean for `p = 2`, lower weighted median for `p = 1`). The Cramér
//! distance compares CDFs and is integrated exactly between breakpoints.

use crate::error::{Error, Result};
use crate::numeric::{check_normalized, CompensatedSum, Power};
use crate::sketch::{StepCdf, MASS_SLACK};

pub use crate::sketch::QuantileArray;

/// `(1/k sum_l |a_l - b_l|^p)^(1/p)` over the untrimmed grid; the trimmed
/// variant weights each cell by its width instead of `1/k`.
pub fn wasserstein_p_grid(a: &QuantileArray, b: &QuantileArray, p: Power) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    Ok(p.root(grid_cost(a.values(), b.values(), a.grid().cell_width(), p)))
}

/// Riemann sum `h * sum_l |a_l - b_l|^p`, accumulated in index order.
pub(crate) fn grid_cost(a: &[f64], b: &[f64], cell_width: f64, p: Power) -> f64 {
    let acc: CompensatedSum = a.iter().zip(b).map(|(x, y)| p.cost(x - y)).collect();
    acc.value() * cell_width
}

/// `int |F(x) - G(x)|^p dx`, exact for step functions (not rooted).
pub(crate) fn cramer_cost(f: &StepCdf, g: &StepCdf, p: Power) -> f64 {
    let (fk, gk) = (f.knots(), g.knots());
    let (fc, gc) = (f.cumulative(), g.cumulative());
    let (mut i, mut j) = (0usize, 0usize);
    let (mut fv, mut gv) = (0.0, 0.0);
    let mut prev: Option<f64> = None;
    let mut acc = CompensatedSum::new();
    while i < fk.len() || j < gk.len() {
        let x = match (fk.get(i), gk.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        if let Some(left) = prev {
            let gap = fv - gv;
            if gap != 0.0 {
                acc.add((x - left) * p.cost(gap));
            }
        }
        if i < fk.len() && fk[i] == x {
            fv = fc[i];
            i += 1;
        }
        if j < gk.len() && gk[j] == x {
            gv = gc[j];
            j += 1;
        }
        prev = Some(x);
    }
    acc.value()
}

/// Cramér distance `C_p` between two atomic distributions.
pub fn cramer_p_step(f: &StepCdf, g: &StepCdf, p: Power) -> Result<f64> {
    Ok(p.root(cramer_cost(f, g, p)))
}

/// Lower weighted median: after sorting by value, the first value whose
/// normalized cumulative weight reaches one half.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} values and {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sorted_weighted_median(&pairs)
}

fn sorted_weighted_median(pairs: &[(f64, f64)]) -> Result<f64> {
    let total = pairs.iter().map(|p| p.1).collect::<CompensatedSum>().value();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let half = 0.5 * total;
    let mut acc = CompensatedSum::new();
    for &(v, w) in pairs {
        if w == 0.0 {
            continue;
        }
        acc.add(w);
        if acc.value() >= half - MASS_SLACK * total {
            return Ok(v);
        }
    }
    // unreachable for positive totals, kept for float safety
    Ok(pairs.iter().rev().find(|p| p.1 > 0.0).map(|p| p.0).unwrap_or(pairs[0].0))
}

/// Pointwise transport barycenter of quantile curves sharing one grid.
pub fn barycenter_quantiles(parts: &[(f64, &QuantileArray)], p: Power) -> Result<QuantileArray> {
    let first = parts.first().ok_or(Error::DegenerateWeights)?;
    let grid = *first.1.grid();
    for (_, q) in parts {
        grid.ensure_same(q.grid())?;
    }
    check_normalized(parts.iter().map(|(w, _)| *w))?;
    let curves: Vec<(f64, &[f64])> = parts.iter().map(|(w, q)| (*w, q.values())).collect();
    let values = pointwise_barycenter(&curves, grid.k(), p)?;
    Ok(QuantileArray::from_parts(grid, values))
}

/// Level-by-level barycenter of raw curves of length `k`. Weighted means
/// accumulate over parts in the given order.
pub(crate) fn pointwise_barycenter(curves: &[(f64, &[f64])], k: usize, p: Power) -> Result<Vec<f64>> {
    match p {
        Power::Two => {
            let total = curves.iter().map(|c| c.0).collect::<CompensatedSum>().value();
            if total.is_nan() || total <= 0.0 {
                return Err(Error::DegenerateWeights);
            }
            // Plain left-to-right sums: rounding is monotone, so nondecreasing
            // inputs give a nondecreasing output.
            Ok((0..k)
                .map(|l| curves.iter().fold(0.0, |acc, (w, q)| acc + w * q[l]) / total)
                .collect())
        }
        Power::One => {
            let mut pairs = Vec::with_capacity(curves.len());
            let mut out = Vec::with_capacity(k);
            for l in 0..k {
                pairs.clear();
                pairs.extend(curves.iter().map(|(w, q)| (q[l], *w)));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                out.push(sorted_weighted_median(&pairs)?);
            }
            Ok(out)
        }
    }
}
