//! Piecewise-constant functions of time, used both for the mob intensity
//! M(t) and for the contact-rate schedule ε(t) derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous piecewise-constant function of time.
///
/// `values` has one more entry than `breakpoints`: the function takes
/// `values[0]` before the first breakpoint and `values[i + 1]` from
/// `breakpoints[i]` (inclusive) onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseSchedule {
    /// A schedule that is `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "schedule needs {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "schedule breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(
                "schedule breakpoints must be finite".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("schedule values must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at time `t`; breakpoints belong to the interval they open.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        self.values[idx]
    }

    /// Applies `f` to every value, keeping the breakpoints.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
