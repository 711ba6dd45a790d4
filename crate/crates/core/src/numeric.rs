//! Small numeric helpers shared by the estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
///
/// All Riemann sums and mass accumulations go through this so results do not
/// depend on how a caller batches the terms, only on their order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn stable_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Order of the transport / Cramér cost. Only `p = 1` and `p = 2` are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Power {
    One,
    Two,
}

impl Power {
    pub fn exponent(self) -> u32 {
        match self {
            Power::One => 1,
            Power::Two => 2,
        }
    }

    /// `|x|^p`
    #[inline]
    pub fn cost(self, x: f64) -> f64 {
        match self {
            Power::One => x.abs(),
            Power::Two => x * x,
        }
    }

    /// Inverse of [`Power::cost`] on nonnegative inputs.
    #[inline]
    pub fn root(self, x: f64) -> f64 {
        match self {
            Power::One => x,
            Power::Two => x.max(0.0).sqrt(),
        }
    }
}

impl TryFrom<u32> for Power {
    type Error = Error;

    fn try_from(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Power::One),
            2 => Ok(Power::Two),
            other => Err(Error::UnsupportedP(other)),
        }
    }
}

impl From<Power> for u32 {
    fn from(p: Power) -> u32 {
        p.exponent()
    }
}

impl std::fmt::Display for Power {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.exponent())
    }
}

/// Tolerance used when checking that a family of weights sums to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_normalized<I: IntoIterator<Item = f64>>(weights: I) -> Result<()> {
    let mut acc = CompensatedSum::new();
    for w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::DegenerateWeights);
        }
        acc.add(w);
    }
    let total = acc.value();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightsNotNormalized(total));
    }
    Ok(())
}
