//! Silo-allocation scenarios with controlled selection bias.
//!
//! A baseline allocation fixes the contingency table `N[silo][group]`. The
//! copula regimes then reassign individuals inside each group so that the
//! silo index depends on the score through a Gaussian copula, while the table
//! stays exactly the same.

mod normal;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normal::{normal_cdf, normal_quantile};
use rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Random,
    Positive,
    Negative,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Random, Regime::Positive, Regime::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Random => "random",
            Regime::Positive => "positive",
            Regime::Negative => "negative",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Regime::Random),
            "positive" => Ok(Regime::Positive),
            "negative" => Ok(Regime::Negative),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

/// Counts `N[silo][group]`.
pub type Margins = Vec<Vec<u64>>;

/// I.i.d. uniform silo indices in `0..d`.
pub fn allocate_random(n: usize, d: usize, seed: u64) -> Result<Vec<usize>> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let mut rng = stream(derive_seed(seed, "allocate-random", &[]));
    Ok((0..n).map(|_| rng.random_range(0..d)).collect())
}

pub fn contingency_table(groups: &[usize], assignment: &[usize], d: usize, n_groups: usize) -> Result<Margins> {
    if groups.len() != assignment.len() {
        return Err(Error::LengthMismatch(format!(
            "{} group labels and {} assignments",
            groups.len(),
            assignment.len()
        )));
    }
    let mut table = vec![vec![0u64; n_groups]; d];
    for (&g, &s) in groups.iter().zip(assignment) {
        if g >= n_groups || s >= d {
            return Err(Error::InvalidParameter(format!("cell ({s}, {g}) outside a {d} x {n_groups} table")));
        }
        table[s][g] += 1;
    }
    Ok(table)
}

fn group_members(groups: &[usize], n_groups: usize) -> Result<Vec<Vec<usize>>> {
    let mut members = vec![Vec::new(); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        members
            .get_mut(g)
            .ok_or_else(|| Error::InvalidParameter(format!("group index {g} outside 0..{n_groups}")))?
            .push(i);
    }
    Ok(members)
}

fn check_margins(margins: &Margins, members: &[Vec<usize>]) -> Result<()> {
    if margins.is_empty() {
        return Err(Error::MarginMismatch("no silos".into()));
    }
    for (s, row) in margins.iter().enumerate() {
        if row.len() != members.len() {
            return Err(Error::MarginMismatch(format!(
                "silo {s} has {} group columns, expected {}",
                row.len(),
                members.len()
            )));
        }
    }
    for (g, m) in members.iter().enumerate() {
        let col: u64 = margins.iter().map(|row| row[g]).sum();
        if col != m.len() as u64 {
            return Err(Error::MarginMismatch(format!(
                "group {g} has {} members but its margins sum to {col}",
                m.len()
            )));
        }
    }
    Ok(())
}

/// Reassigns silos within each group through a Gaussian copula on the score
/// ranks, realizing `margins` exactly.
///
/// Ranks are taken over all individuals after a seeded shuffle so ties are
/// broken at random; `R = rank/(n+1)` and `U = Phi(rho Phi^-1(R) + sqrt(1-rho^2) e)`.
/// The negative regime uses `1 - U` for group `0`. Within a group, members
/// sorted by `U` fill silo `0` first, then silo `1`, and so on. The random
/// regime ignores `rho` and uses independent latents.
pub fn allocate_copula(
    scores: &[f64],
    groups: &[usize],
    margins: &Margins,
    rho: f64,
    regime: Regime,
    seed: u64,
) -> Result<Vec<usize>> {
    if scores.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores and {} group labels",
            scores.len(),
            groups.len()
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} is not in [0, 1)")));
    }
    if let Some(bad) = scores.iter().find(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {bad}")));
    }
    let n_groups = margins.first().map_or(0, Vec::len);
    let members = group_members(groups, n_groups)?;
    check_margins(margins, &members)?;

    let n = scores.len();
    let mut rng = stream(derive_seed(seed, "allocate-copula", &[regime.index()]));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // stable sort keeps the shuffled order among tied scores
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }

    let rho = if regime == Regime::Random { 0.0 } else { rho };
    let noise_scale = (1.0 - rho * rho).sqrt();
    let latent: Vec<f64> = (0..n)
        .map(|i| {
            let r = rank[i] as f64 / (n as f64 + 1.0);
            let e: f64 = StandardNormal.sample(&mut rng);
            let z = rho * normal_quantile(r).expect("rank level inside (0, 1)") + noise_scale * e;
            let u = normal_cdf(z);
            if regime == Regime::Negative && groups[i] == 0 {
                1.0 - u
            } else {
                u
            }
        })
        .collect();

    let mut assignment = vec![0usize; n];
    for (g, mut m) in members.into_iter().enumerate() {
        m.sort_by(|&a, &b| latent[a].total_cmp(&latent[b]).then(a.cmp(&b)));
        let mut it = m.into_iter();
        for (s, row) in margins.iter().enumerate() {
            for i in it.by_ref().take(row[g] as usize) {
                assignment[i] = s;
            }
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dependence {
    pub pearson: f64,
    pub spearman: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson and Spearman correlations between scores and silo indices.
pub fn dependence_diagnostics(scores: &[f64], assignment: &[usize]) -> Result<Dependence> {
    if scores.len() != assignment.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores and {} assignments",
            scores.len(),
            assignment.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::DegenerateCorrelation);
    }
    let a: Vec<f64> = assignment.iter().map(|&s| s as f64).collect();
    Ok(Dependence {
        pearson: pearson(scores, &a)?,
        spearman: pearson(&average_ranks(scores), &average_ranks(&a))?,
    })
}

/// `n` Beta(alpha, beta) draws as `X / (X + Y)` with independent gammas.
pub fn sample_beta(alpha: f64, beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let shape = |v: f64| {
        Gamma::new(v, 1.0).map_err(|_| Error::InvalidParameter(format!("Beta shape {v} must be positive")))
    };
    let (ga, gb) = (shape(alpha)?, shape(beta)?);
    let mut rng = stream(derive_seed(seed, "beta", &[]));
    Ok((0..n)
        .map(|_| {
            let x: f64 = ga.sample(&mut rng);
            let y: f64 = gb.sample(&mut rng);
            x / (x + y)
        })
        .collect())
}

/// A fully specified allocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationScenario {
    pub regime: Regime,
    #[serde(default)]
    pub rho: f64,
    pub d: usize,
    pub seed: u64,
    /// Baseline table; when absent it is drawn from a random allocation.
    #[serde(default)]
    pub margins: Option<Margins>,
}

impl AllocationScenario {
    pub fn baseline_margins(&self, groups: &[usize], n_groups: usize) -> Result<Margins> {
        match &self.margins {
            Some(m) => {
                if m.len() != self.d {
                    return Err(Error::MarginMismatch(format!("{} margin rows for d = {}", m.len(), self.d)));
                }
                Ok(m.clone())
            }
            None => {
                let base = allocate_random(groups.len(), self.d, derive_seed(self.seed, "baseline", &[]))?;
                contingency_table(groups, &base, self.d, n_groups)
            }
        }
    }

    /// Silo index per individual.
    pub fn allocate(&self, scores: &[f64], groups: &[usize], n_groups: usize) -> Result<Vec<usize>> {
        let margins = self.baseline_margins(groups, n_groups)?;
        allocate_copula(scores, groups, &margins, self.rho, self.regime, self.seed)
    }
}
