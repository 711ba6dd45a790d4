//! Quantile sketches on the midpoint grid and the atomic step-CDFs they induce.
//!
//! A sketch of size `k` stores the empirical quantiles of a sample at the
//! levels `u_l = (l - 1/2) / k` (or the trimmed variant
//! `u_l = eps + (l - 1/2)(1 - 2 eps) / k`). Read back as a distribution it is
//! the uniform mixture of `k` Dirac masses, one per stored value.
//!
//! Quantiles are always the left-continuous generalized inverse
//! `Q(u) = inf { x : F(x) >= u }`; for an empirical sample of size `n` this is
//! the order statistic `x_(ceil(u n))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_normalized, CompensatedSum};

/// Slack absorbed when comparing an accumulated cumulative mass against a
/// level `u`: a cumulative mass `c` counts as reaching `u` when `c >= u - MASS_SLACK`.
pub const MASS_SLACK: f64 = 1e-13;

/// Relative slack used when rounding `u * n` up to an order-statistic rank.
pub const RANK_SLACK: f64 = 1e-12;

/// Tolerance on the total mass of a [`StepCdf`].
pub const STEP_MASS_TOLERANCE: f64 = 1e-12;

/// The shared grid of quantile levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDoc", into = "GridDoc")]
pub struct GridSpec {
    k: usize,
    trim_epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    k: usize,
    #[serde(default)]
    trim_epsilon: f64,
}

impl TryFrom<GridDoc> for GridSpec {
    type Error = Error;

    fn try_from(doc: GridDoc) -> Result<Self> {
        GridSpec::trimmed(doc.k, doc.trim_epsilon)
    }
}

impl From<GridSpec> for GridDoc {
    fn from(g: GridSpec) -> Self {
        GridDoc { k: g.k, trim_epsilon: g.trim_epsilon }
    }
}

impl GridSpec {
    pub fn new(k: usize) -> Result<Self> {
        Self::trimmed(k, 0.0)
    }

    pub fn trimmed(k: usize, trim_epsilon: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("k must be at least 1".into()));
        }
        if k > u32::MAX as usize {
            return Err(Error::InvalidGrid(format!("k = {k} does not fit in 32 bits")));
        }
        if !(0.0..0.5).contains(&trim_epsilon) {
            return Err(Error::InvalidGrid(format!(
                "trim epsilon {trim_epsilon} is not in [0, 0.5)"
            )));
        }
        Ok(Self { k, trim_epsilon })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn trim_epsilon(&self) -> f64 {
        self.trim_epsilon
    }

    pub fn is_trimmed(&self) -> bool {
        self.trim_epsilon > 0.0
    }

    /// Level `u_l` for the zero-based index `index = l - 1`.
    pub fn level(&self, index: usize) -> f64 {
        debug_assert!(index < self.k);
        let mid = (index as f64 + 0.5) / self.k as f64;
        if self.trim_epsilon == 0.0 {
            mid
        } else {
            self.trim_epsilon + (index as f64 + 0.5) * (1.0 - 2.0 * self.trim_epsilon) / self.k as f64
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.level(i)).collect()
    }

    /// Level at which the `index`-th stored value sits inside the sketch's own
    /// atomic measure, `(l - 1/2) / k`. Coincides with [`GridSpec::level`] on
    /// untrimmed grids.
    pub fn mass_level(&self, index: usize) -> f64 {
        (index as f64 + 0.5) / self.k as f64
    }

    /// Width of one grid cell in `u`: `(1 - 2 eps) / k`. Riemann sums over the
    /// grid are weighted by this.
    pub fn cell_width(&self) -> f64 {
        (1.0 - 2.0 * self.trim_epsilon) / self.k as f64
    }

    /// One-based rank of the order statistic that realizes `Q(u_l)` in a
    /// sorted sample of size `n`.
    pub fn rank(&self, index: usize, n: usize) -> usize {
        debug_assert!(n > 0);
        if self.trim_epsilon == 0.0 {
            // ceil(n (2l - 1) / 2k) in exact integer arithmetic
            let num = (2 * index as u128 + 1) * n as u128;
            let den = 2 * self.k as u128;
            (num.div_ceil(den) as usize).clamp(1, n)
        } else {
            ceil_rank(self.level(index), n)
        }
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "k = {} / eps = {} versus k = {} / eps = {}",
                self.k, self.trim_epsilon, other.k, other.trim_epsilon
            )))
        }
    }
}

fn ceil_rank(u: f64, n: usize) -> usize {
    let pos = u * n as f64;
    let floor = pos.floor();
    let rank = if pos - floor <= RANK_SLACK * pos.max(1.0) {
        floor
    } else {
        floor + 1.0
    };
    (rank as usize).clamp(1, n)
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange(u))
    }
}

/// Left-continuous empirical quantile `x_(ceil(u n))` of an ascending sample.
pub fn empirical_quantile(sorted: &[f64], u: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    check_level(u)?;
    Ok(sorted[ceil_rank(u, sorted.len()) - 1])
}

/// A nondecreasing curve of quantile values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileArray {
    grid: GridSpec,
    values: Vec<f64>,
}

impl QuantileArray {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.k() {
            return Err(Error::InvalidSketch(format!(
                "{} values for a grid of k = {}",
                values.len(),
                grid.k()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSketch(format!("non-finite value {bad}")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSketch(format!(
                "values decrease at index {}: {} > {}",
                i + 1,
                values[i],
                values[i + 1]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.k());
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `k` empirical quantiles of one (silo, group) cell plus the sample size behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSketch {
    quantiles: QuantileArray,
    count: u64,
}

impl QuantileSketch {
    pub fn new(grid: GridSpec, values: Vec<f64>, count: u64) -> Result<Self> {
        Ok(Self {
            quantiles: QuantileArray::new(grid, values)?,
            count,
        })
    }

    /// Sketch of an already sorted, finite sample.
    pub fn from_sorted(sorted: &[f64], grid: GridSpec) -> Result<Self> {
        if sorted.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = sorted.len();
        let values = (0..grid.k()).map(|i| sorted[grid.rank(i, n) - 1]).collect();
        Ok(Self {
            quantiles: QuantileArray::from_parts(grid, values),
            count: n as u64,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.quantiles.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.quantiles.values()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn quantiles(&self) -> &QuantileArray {
        &self.quantiles
    }

    /// A sketch backed by a single observation: `k` copies of one value.
    pub fn is_degenerate(&self) -> bool {
        self.count == 1
    }
}

/// Sorts a copy of `samples` and reads off its quantiles on `grid`.
pub fn build_sketch(samples: &[f64], grid: GridSpec) -> Result<QuantileSketch> {
    let sorted = sorted_finite(samples)?;
    QuantileSketch::from_sorted(&sorted, grid)
}

pub(crate) fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidSketch(format!("non-finite score {bad}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Atomic distribution: strictly increasing knots carrying positive masses
/// that sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    knots: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    pub fn new(knots: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != masses.len() {
            return Err(Error::InvalidStepCdf(format!(
                "{} knots and {} masses",
                knots.len(),
                masses.len()
            )));
        }
        if knots.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidStepCdf("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStepCdf("knots must be strictly increasing".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::InvalidStepCdf("masses must be positive".into()));
        }
        let cdf = Self::assemble(knots, masses);
        let total = cdf.total_mass();
        if (total - 1.0).abs() > STEP_MASS_TOLERANCE {
            return Err(Error::InvalidStepCdf(format!("masses sum to {total}")));
        }
        Ok(cdf)
    }

    fn assemble(knots: Vec<f64>, masses: Vec<f64>) -> Self {
        let mut acc = CompensatedSum::new();
        let cumulative = masses
            .iter()
            .map(|&m| {
                acc.add(m);
                acc.value()
            })
            .collect();
        Self {
            knots,
            masses,
            cumulative,
        }
    }

    /// Builds the distribution `sum_i mass_i * delta(value_i)`, merging
    /// coincident values. Masses must be positive and finite.
    pub(crate) fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        // Sorting by (value, mass) makes the merge order canonical, so the
        // result does not depend on the order atoms were supplied in.
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut knots: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses = Vec::with_capacity(atoms.len());
        let mut acc = CompensatedSum::new();
        for (x, m) in atoms {
            match knots.last() {
                Some(&last) if last == x => acc.add(m),
                Some(_) => {
                    masses.push(acc.value());
                    acc = CompensatedSum::new();
                    acc.add(m);
                    knots.push(x);
                }
                None => {
                    acc.add(m);
                    knots.push(x);
                }
            }
        }
        if !knots.is_empty() {
            masses.push(acc.value());
        }
        Self::assemble(knots, masses)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Cumulative mass at each knot, i.e. `F(knot_i)`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// `F(x)`: total mass on knots `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Smallest knot whose cumulative mass reaches `u`.
    pub fn invert(&self, u: f64) -> Result<f64> {
        check_level(u)?;
        Ok(self.invert_unchecked(u))
    }

    fn invert_unchecked(&self, u: f64) -> f64 {
        let idx = self
            .cumulative
            .partition_point(|&c| c < u - MASS_SLACK)
            .min(self.knots.len() - 1);
        self.knots[idx]
    }
}

/// The sketch's atomic measure `(1/k) sum_l delta(q_l)`, ties merged.
pub fn sketch_to_step_cdf(sketch: &QuantileSketch) -> StepCdf {
    let k = sketch.grid().k() as f64;
    let values = sketch.values();
    let mut knots = Vec::new();
    let mut masses = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] == values[start] {
            end += 1;
        }
        knots.push(values[start]);
        masses.push((end - start) as f64 / k);
        start = end;
    }
    StepCdf::assemble(knots, masses)
}

fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    check_normalized(weights.iter().copied())?;
    // Sum in sorted order so that permuting the parts cannot change the result.
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().copied().collect::<CompensatedSum>().value();
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Weighted mixture `sum_j w_j F_j`. Weights must be nonnegative and sum to
/// one within [`crate::numeric::WEIGHT_SUM_TOLERANCE`]; they are renormalized
/// exactly before mixing and zero-weight parts are dropped.
pub fn mix_step_cdfs(parts: &[(f64, &StepCdf)]) -> Result<StepCdf> {
    let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
    let weights = normalized_weights(&weights)?;
    let atoms = parts
        .iter()
        .zip(&weights)
        .filter(|(_, w)| **w > 0.0)
        .flat_map(|((_, cdf), &w)| {
            cdf.knots()
                .iter()
                .zip(cdf.masses())
                .map(move |(&x, &m)| (x, w * m))
        })
        .filter(|(_, m)| *m > 0.0)
        .collect();
    Ok(StepCdf::from_atoms(atoms))
}

pub fn invert_step_cdf(cdf: &StepCdf, u: f64) -> Result<f64> {
    cdf.invert(u)
}

/// Mixture step-CDF of several sketches sharing `grid`.
pub fn mixture_step_cdf(parts: &[(f64, &QuantileSketch)], grid: &GridSpec) -> Result<StepCdf> {
    for (_, sketch) in parts {
        grid.ensure_same(sketch.grid())?;
    }
    let cdfs: Vec<(f64, StepCdf)> = parts
        .iter()
        .map(|(w, sketch)| (*w, sketch_to_step_cdf(sketch)))
        .collect();
    let refs: Vec<(f64, &StepCdf)> = cdfs.iter().map(|(w, c)| (*w, c)).collect();
    mix_step_cdfs(&refs)
}

/// Reads a step-CDF back onto the grid: the `l`-th value is the inverse at the
/// mass level `(l - 1/2)/k`.
pub fn quantiles_on_grid(cdf: &StepCdf, grid: &GridSpec) -> QuantileArray {
    let values = (0..grid.k())
        .map(|i| cdf.invert_unchecked(grid.mass_level(i)))
        .collect();
    QuantileArray::from_parts(*grid, values)
}

/// Quantiles of the weighted mixture of sketches, evaluated on the grid.
pub fn mixture_quantiles_on_grid(
    parts: &[(f64, &QuantileSketch)],
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    let mixture = mixture_step_cdf(parts, grid)?;
    Ok(quantiles_on_grid(&mixture, grid).into_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(k: usize) -> GridSpec {
        GridSpec::new(k).unwrap()
    }

    #[test]
    fn grid_levels() {
        assert_eq!(grid(4).levels(), vec![0.125, 0.375, 0.625, 0.875]);
        let g = GridSpec::trimmed(2, 0.1).unwrap();
        let lv = g.levels();
        assert!((lv[0] - 0.3).abs() < 1e-15 && (lv[1] - 0.7).abs() < 1e-15);
        assert!(GridSpec::new(0).is_err());
        assert!(GridSpec::trimmed(3, 0.5).is_err());
        assert!(GridSpec::trimmed(3, -0.1).is_err());
    }

    #[test]
    fn empirical_quantile_examples() {
        assert_eq!(empirical_quantile(&[5.0], 0.5).unwrap(), 5.0);
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&s, 0.51).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[], 0.5).unwrap_err().code(), "empty-sample");
        assert_eq!(empirical_quantile(&s, 1.0).unwrap_err().code(), "level-out-of-range");
        assert_eq!(empirical_quantile(&s, 0.0).unwrap_err().code(), "level-out-of-range");
    }

    #[test]
    fn build_sketch_examples() {
        let sk = build_sketch(&[0.0; 7], grid(4)).unwrap();
        assert_eq!(sk.values(), &[0.0; 4]);
        assert_eq!(sk.count(), 7);

        let sk = build_sketch(&[4.0, 2.0, 3.0, 1.0], grid(2)).unwrap();
        assert_eq!(sk.values(), &[1.0, 3.0]);
        assert_eq!(sk.count(), 4);

        let sk = build_sketch(&[1.0, 2.0, 3.0, 4.0], grid(4)).unwrap();
        assert_eq!(sk.values(), &[1.0, 2.0, 3.0, 4.0]);

        assert_eq!(build_sketch(&[], grid(3)).unwrap_err().code(), "empty-sample");
    }

    #[test]
    fn sketch_to_step_cdf_examples() {
        let c = sketch_to_step_cdf(&QuantileSketch::new(grid(2), vec![1.0, 3.0], 2).unwrap());
        assert_eq!(c.knots(), &[1.0, 3.0]);
        assert_eq!(c.masses(), &[0.5, 0.5]);

        let c = sketch_to_step_cdf(&QuantileSketch::new(grid(4), vec![2.0, 2.0, 5.0, 5.0], 4).unwrap());
        assert_eq!(c.knots(), &[2.0, 5.0]);
        assert_eq!(c.masses(), &[0.5, 0.5]);

        let c = sketch_to_step_cdf(&QuantileSketch::new(grid(3), vec![0.0; 3], 9).unwrap());
        assert_eq!(c.knots(), &[0.0]);
        assert_eq!(c.masses(), &[1.0]);
    }

    #[test]
    fn mixture_examples() {
        let a = StepCdf::new(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let same = mix_step_cdfs(&[(1.0, &a)]).unwrap();
        assert_eq!(same, a);

        let b = StepCdf::new(vec![2.0, 4.0], vec![0.5, 0.5]).unwrap();
        let m = mix_step_cdfs(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_eq!(m.knots(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.masses(), &[0.25; 4]);

        let z = StepCdf::new(vec![0.0], vec![1.0]).unwrap();
        let m = mix_step_cdfs(&[(0.3, &z), (0.7, &z)]).unwrap();
        assert_eq!(m.knots(), &[0.0]);
        assert!((m.masses()[0] - 1.0).abs() < 1e-15);

        assert_eq!(
            mix_step_cdfs(&[(0.5, &a), (0.6, &b)]).unwrap_err().code(),
            "weights-not-normalized"
        );
    }

    #[test]
    fn inversion_examples() {
        let c = StepCdf::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.25; 4]).unwrap();
        assert_eq!(invert_step_cdf(&c, 0.25).unwrap(), 1.0);
        assert_eq!(invert_step_cdf(&c, 0.75).unwrap(), 3.0);
        let single = StepCdf::new(vec![7.0], vec![1.0]).unwrap();
        for u in [1e-9, 0.3, 0.999] {
            assert_eq!(invert_step_cdf(&single, u).unwrap(), 7.0);
        }
        assert_eq!(invert_step_cdf(&c, 1.5).unwrap_err().code(), "level-out-of-range");
    }

    #[test]
    fn step_cdf_rejects_bad_input() {
        assert!(StepCdf::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(StepCdf::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(StepCdf::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(StepCdf::new(vec![], vec![]).is_err());
    }

    #[test]
    fn mixture_quantile_examples() {
        let a = QuantileSketch::new(grid(2), vec![1.0, 3.0], 10).unwrap();
        let b = QuantileSketch::new(grid(2), vec![2.0, 4.0], 10).unwrap();
        assert_eq!(mixture_quantiles_on_grid(&[(1.0, &a)], &grid(2)).unwrap(), vec![1.0, 3.0]);
        assert_eq!(
            mixture_quantiles_on_grid(&[(0.5, &a), (0.5, &b)], &grid(2)).unwrap(),
            vec![1.0, 3.0]
        );
        assert_eq!(
            mixture_quantiles_on_grid(&[(1.0, &a), (0.0, &b)], &grid(2)).unwrap(),
            vec![1.0, 3.0]
        );
        let c = QuantileSketch::new(grid(3), vec![1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(
            mixture_quantiles_on_grid(&[(0.5, &a), (0.5, &c)], &grid(2))
                .unwrap_err()
                .code(),
            "grid-mismatch"
        );
    }

    #[test]
    fn degenerate_single_sample_sketch() {
        let sk = build_sketch(&[4.0], grid(5)).unwrap();
        assert_eq!(sk.values(), &[4.0; 5]);
        assert!(sk.is_degenerate());
    }

    #[test]
    fn uniform_step_cdf_within_one_over_k() {
        for k in [1usize, 2, 5, 17, 100] {
            let g = grid(k);
            let sk = QuantileSketch::new(g, g.levels(), 1).unwrap();
            let cdf = sketch_to_step_cdf(&sk);
            let worst = (0..=10_000)
                .map(|i| i as f64 / 10_000.0)
                .map(|x| (cdf.cdf(x) - x).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1.0 / k as f64 + 1e-12, "k={k} worst={worst}");
        }
    }

    fn sorted_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, len).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
    }

    fn rounded_sorted(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        // coarse values so that ties are common
        prop::collection::vec(-10i32..10, len).prop_map(|v| {
            let mut v: Vec<f64> = v.into_iter().map(f64::from).collect();
            v.sort_by(f64::total_cmp);
            v
        })
    }

    proptest! {
        #[test]
        fn grid_rank_matches_empirical_quantile(sample in sorted_vec(1..300), k in 1usize..64) {
            let g = grid(k);
            let sk = QuantileSketch::from_sorted(&sample, g).unwrap();
            for (i, v) in sk.values().iter().enumerate() {
                prop_assert_eq!(*v, empirical_quantile(&sample, g.level(i)).unwrap());
            }
        }

        #[test]
        fn single_sketch_round_trip(values in rounded_sorted(1..80), eps in prop_oneof![Just(0.0), 0.0f64..0.45]) {
            let g = GridSpec::trimmed(values.len(), eps).unwrap();
            let sk = QuantileSketch::new(g, values.clone(), 3).unwrap();
            let back = mixture_quantiles_on_grid(&[(1.0, &sk)], &g).unwrap();
            prop_assert_eq!(back, values);
        }

        #[test]
        fn left_continuity(values in rounded_sorted(1..40)) {
            let g = grid(values.len());
            let cdf = sketch_to_step_cdf(&QuantileSketch::new(g, values, 1).unwrap());
            let knots = cdf.knots();
            for (i, &c) in cdf.cumulative().iter().enumerate() {
                if c < 1.0 {
                    prop_assert_eq!(cdf.invert(c).unwrap(), knots[i]);
                    if i + 1 < knots.len() {
                        prop_assert_eq!(cdf.invert(c + 1e-12).unwrap(), knots[i + 1]);
                    }
                }
            }
        }

        #[test]
        fn knot_perturbation_is_stable(
            values in sorted_vec(1..40),
            noise in prop::collection::vec(-1.0f64..1.0, 40),
            eta in 0.0f64..2.0,
            probes in prop::collection::vec(-55.0f64..55.0, 20),
        ) {
            let k = values.len();
            let g = grid(k);
            let mut moved: Vec<f64> = values.iter().zip(&noise).map(|(v, z)| v + eta * z).collect();
            moved.sort_by(f64::total_cmp);
            let f = sketch_to_step_cdf(&QuantileSketch::new(g, values.clone(), 1).unwrap());
            let h = sketch_to_step_cdf(&QuantileSketch::new(g, moved, 1).unwrap());
            for x in probes {
                let near = values.iter().filter(|&&q| q > x - eta && q <= x + eta).count();
                let allowed = near as f64 / k as f64 + 1e-12;
                prop_assert!((f.cdf(x) - h.cdf(x)).abs() <= allowed);
            }
        }

        #[test]
        fn mixture_is_permutation_invariant(
            parts in prop::collection::vec((rounded_sorted(1..12), 0.01f64..1.0), 1..6),
            rotate in 0usize..6,
        ) {
            let cdfs: Vec<StepCdf> = parts
                .iter()
                .map(|(v, _)| sketch_to_step_cdf(&QuantileSketch::new(grid(v.len()), v.clone(), 1).unwrap()))
                .collect();
            let total: f64 = parts.iter().map(|(_, w)| w).sum();
            let weighted: Vec<(f64, &StepCdf)> = parts.iter().zip(&cdfs).map(|((_, w), c)| (w / total, c)).collect();
            let mut shuffled = weighted.clone();
            shuffled.rotate_left(rotate % weighted.len());
            shuffled.reverse();
            let a = mix_step_cdfs(&weighted).unwrap();
            let b = mix_step_cdfs(&shuffled).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
