//! Finite-sample bound calculators and the communication budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

fn positive(value: u64, name: &str) -> Result<f64> {
    if value == 0 {
        return Err(Error::InvalidBoundInput(format!("{name} must be positive")));
    }
    Ok(value as f64)
}

/// DKW-Massart radius `sqrt(ln(2/delta) / (2n))`.
pub fn dkw_bound(n: u64, delta: f64) -> Result<f64> {
    let n = positive(n, "n")?;
    check_delta(delta)?;
    Ok(((2.0 / delta).ln() / (2.0 * n)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n_min: u64,
    pub k: u64,
    pub d: u64,
    pub groups: u64,
    pub delta: f64,
    /// Lower bound on the score densities over the trimmed range.
    pub m_eps: f64,
    pub eps: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.n_min, "n_min"), (self.k, "k"), (self.d, "d"), (self.groups, "groups")] {
            positive(v, name)?;
        }
        check_delta(self.delta)?;
        if !(self.m_eps > 0.0 && self.m_eps.is_finite()) {
            return Err(Error::InvalidBoundInput(format!("m_eps = {} must be positive", self.m_eps)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidBoundInput(format!("eps = {} is not in (0, 0.5)", self.eps)));
        }
        Ok(())
    }
}

/// Uniform error radius of the communicated trimmed quantiles:
/// `(1/m_eps) sqrt(ln(2(k+1) d |S| / delta) / (2 n_min))`.
pub fn hp_quantile_bound(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let cells = 2.0 * (inp.k as f64 + 1.0) * inp.d as f64 * inp.groups as f64;
    Ok(((cells / inp.delta).ln() / (2.0 * inp.n_min as f64)).sqrt() / inp.m_eps)
}

/// Concentration radii for the group weights `alpha` and the silo weights `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightBounds {
    pub alpha_bound: f64,
    pub pi_bound: f64,
}

pub fn weight_bounds(n: u64, n_s_min: u64, d: u64, groups: u64, delta: f64) -> Result<WeightBounds> {
    let n = positive(n, "n")?;
    let n_s_min = positive(n_s_min, "n_s_min")?;
    let d = positive(d, "d")?;
    let groups = positive(groups, "groups")?;
    check_delta(delta)?;
    Ok(WeightBounds {
        alpha_bound: ((2.0 * groups / delta).ln() / (2.0 * n)).sqrt(),
        pi_bound: ((2.0 * d * groups / delta).ln() / (2.0 * n_s_min)).sqrt(),
    })
}

/// Scalars sent by all silos: each ships `k` quantiles and one count per group.
pub fn communication_budget(d: u64, k: u64, groups: u64) -> u64 {
    d * groups * (k + 1)
}

/// Heuristic error scale for the federated `G_2` estimate: the quantile radius
/// times a user-supplied multiplier standing in for an unknown constant. Not a
/// rigorous bound.
pub fn g2_scale_term(inp: &BoundInputs, multiplier: f64) -> Result<f64> {
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::InvalidBoundInput(format!("multiplier = {multiplier} must be positive")));
    }
    Ok(multiplier * hp_quantile_bound(inp)?)
}

/// All calculators evaluated on one set of inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundInputs,
    pub n: u64,
    pub dkw: f64,
    pub hp_quantile: f64,
    pub weights: WeightBounds,
    pub communication_budget: u64,
    /// Labeled as a non-rigorous scale: `multiplier * hp_quantile`.
    pub non_rigorous_g2_scale: f64,
    pub multiplier: f64,
}

pub fn bounds_report(inp: BoundInputs, n: u64, multiplier: f64) -> Result<BoundsReport> {
    Ok(BoundsReport {
        inputs: inp,
        n,
        dkw: dkw_bound(inp.n_min, inp.delta)?,
        hp_quantile: hp_quantile_bound(&inp)?,
        weights: weight_bounds(n, inp.n_min, inp.d, inp.groups, inp.delta)?,
        communication_budget: communication_budget(inp.d, inp.k, inp.groups),
        non_rigorous_g2_scale: g2_scale_term(&inp, multiplier)?,
        multiplier,
    })
}
