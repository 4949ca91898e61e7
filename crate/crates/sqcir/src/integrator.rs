//! Fixed-step fourth-order Runge-Kutta integration of the reduced and
//! networked systems over a time grid, with the closed-form
//! total-population solution as a conservation oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    rhs_network, rhs_reduced, ModelParams, NetworkParams, NetworkState, StateVector,
};
use crate::schedule::PiecewiseSchedule;

/// Components smaller in magnitude than this are clamped to zero when a
/// step undershoots; anything more negative is treated as a step-size
/// failure rather than rounding.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Method {
    #[default]
    #[serde(rename = "rk4")]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub t0: f64,
    pub tf: f64,
    /// Step size; steps are additionally split at schedule breakpoints.
    pub h: f64,
    #[serde(default)]
    pub method: Method,
}

impl IntegratorConfig {
    pub fn new(t0: f64, tf: f64, h: f64) -> Result<Self> {
        let cfg = Self {
            t0,
            tf,
            h,
            method: Method::Rk4,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.tf.is_finite() && self.h.is_finite()) {
            return Err(Error::ConfigInvalid(
                "integrator bounds must be finite".into(),
            ));
        }
        if self.tf <= self.t0 {
            return Err(Error::ConfigInvalid(format!(
                "integrator tf must exceed t0, got t0 = {}, tf = {}",
                self.t0, self.tf
            )));
        }
        if self.h <= 0.0 {
            return Err(Error::ConfigInvalid(format!(
                "integrator h must be > 0, got {}",
                self.h
            )));
        }
        if self.h > self.tf - self.t0 {
            return Err(Error::ConfigInvalid(format!(
                "integrator h = {} exceeds the horizon {}",
                self.h,
                self.tf - self.t0
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }
}

/// Time grid, states, and the contact rate in force at each grid point.
///
/// `epsilon_used[k]` is the schedule value applied to the step starting
/// at `times[k]` (for the final point, the value at `tf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub epsilon_used: Vec<f64>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &S {
        self.states.last().expect("trajectory is never empty")
    }
}

/// State representation the RK4 core can advance.
pub trait OdeState: Clone {
    /// y + h * k, componentwise.
    fn add_scaled(&self, h: f64, k: &Self) -> Self;
    /// Classic RK4 combination y + h/6 (k1 + 2 k2 + 2 k3 + k4).
    fn rk4_combine(&self, h: f64, k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self;
    fn all_finite(&self) -> bool;
    /// Clamps tiny negative undershoot to zero; reports the first
    /// component below `-tol`, if any, as (name, value).
    fn clamp_negative(&mut self, tol: f64) -> Option<(&'static str, f64)>;
}

impl OdeState for StateVector {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        let y = self.as_array();
        let kk = k.as_array();
        let mut out = [0.0; 5];
        for c in 0..5 {
            out[c] = y[c] + h * kk[c];
        }
        Self::from_array(out)
    }

    fn rk4_combine(&self, h: f64, k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self {
        let y = self.as_array();
        let (a, b, c4, d) = (k1.as_array(), k2.as_array(), k3.as_array(), k4.as_array());
        let mut out = [0.0; 5];
        for c in 0..5 {
            out[c] = y[c] + h / 6.0 * (a[c] + 2.0 * b[c] + 2.0 * c4[c] + d[c]);
        }
        Self::from_array(out)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }

    fn clamp_negative(&mut self, tol: f64) -> Option<(&'static str, f64)> {
        let mut a = self.as_array();
        for (c, v) in a.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v >= -tol {
                    *v = 0.0;
                } else {
                    return Some((StateVector::COMPONENT_NAMES[c], *v));
                }
            }
        }
        *self = Self::from_array(a);
        None
    }
}

impl OdeState for NetworkState {
    fn add_scaled(&self, h: f64, k: &Self) -> Self {
        Self::new(
            self.regions
                .iter()
                .zip(&k.regions)
                .map(|(y, kk)| y.add_scaled(h, kk))
                .collect(),
        )
    }

    fn rk4_combine(&self, h: f64, k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self {
        let regions = (0..self.regions.len())
            .map(|i| {
                self.regions[i].rk4_combine(
                    h,
                    &k1.regions[i],
                    &k2.regions[i],
                    &k3.regions[i],
                    &k4.regions[i],
                )
            })
            .collect();
        Self::new(regions)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }

    fn clamp_negative(&mut self, tol: f64) -> Option<(&'static str, f64)> {
        for region in &mut self.regions {
            if let Some(hit) = region.clamp_negative(tol) {
                return Some(hit);
            }
        }
        None
    }
}

/// Step boundaries for one schedule segment: `n` uniform steps of `h`
/// with the last one shortened to land on `b` exactly. A fractional
/// remainder below `1e-6 * h` is merged into the last step instead of
/// becoming a degenerate sliver.
fn segment_step_count(a: f64, b: f64, h: f64) -> usize {
    let n = ((b - a) / h - 1e-6).ceil();
    n.max(1.0) as usize
}

fn rk4_run<S: OdeState>(
    initial: &S,
    cfg: &IntegratorConfig,
    schedule: &PiecewiseSchedule,
    rhs: impl Fn(&S, f64) -> S,
) -> Result<Trajectory<S>> {
    cfg.validate()?;
    let Method::Rk4 = cfg.method;

    // Steps never straddle a schedule breakpoint, so the piecewise-constant
    // rate is exact: split the horizon at every breakpoint inside it.
    let mut cuts: Vec<f64> = vec![cfg.t0];
    for &b in schedule.breakpoints() {
        if b > cfg.t0 && b < cfg.tf {
            cuts.push(b);
        }
    }
    cuts.push(cfg.tf);

    let mut times = vec![cfg.t0];
    let mut states = vec![initial.clone()];
    let mut y = initial.clone();

    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let eps = schedule.value_at(a);
        let n = segment_step_count(a, b, cfg.h);
        for step in 0..n {
            let t_start = a + step as f64 * cfg.h;
            let t_end = if step + 1 == n {
                b
            } else {
                a + (step + 1) as f64 * cfg.h
            };
            let h = t_end - t_start;

            let k1 = rhs(&y, eps);
            let k2 = rhs(&y.add_scaled(h / 2.0, &k1), eps);
            let k3 = rhs(&y.add_scaled(h / 2.0, &k2), eps);
            let k4 = rhs(&y.add_scaled(h, &k3), eps);
            let mut next = y.rk4_combine(h, &k1, &k2, &k3, &k4);

            if !next.all_finite() {
                return Err(Error::Divergence { t: t_end });
            }
            if let Some((component, value)) = next.clamp_negative(NEGATIVE_CLAMP_TOL) {
                return Err(Error::StepTooLarge {
                    component,
                    value,
                    t: t_end,
                });
            }

            y = next.clone();
            times.push(t_end);
            states.push(next);
        }
    }

    let epsilon_used = times.iter().map(|&t| schedule.value_at(t)).collect();
    Ok(Trajectory {
        times,
        states,
        epsilon_used,
    })
}

/// Integrates the reduced system from `initial` over the configured grid,
/// holding ε at the schedule value of each step's start.
pub fn integrate(
    initial: &StateVector,
    params: &ModelParams,
    cfg: &IntegratorConfig,
    schedule: &PiecewiseSchedule,
) -> Result<Trajectory<StateVector>> {
    if !initial.is_finite() || !initial.is_nonnegative() {
        return Err(Error::InvalidInput(
            "initial state must be finite and nonnegative".into(),
        ));
    }
    rk4_run(initial, cfg, schedule, |y, eps| rhs_reduced(y, params, eps))
}

/// Integrates the mobility-coupled system.
pub fn integrate_network(
    initial: &NetworkState,
    net: &NetworkParams,
    cfg: &IntegratorConfig,
    schedule: &PiecewiseSchedule,
) -> Result<Trajectory<NetworkState>> {
    if initial.regions.len() != net.k() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} regions, network has {}",
            initial.regions.len(),
            net.k()
        )));
    }
    if !initial.is_finite() || !initial.is_nonnegative() {
        return Err(Error::InvalidInput(
            "initial state must be finite and nonnegative".into(),
        ));
    }
    rk4_run(initial, cfg, schedule, |y, eps| rhs_network(y, net, eps))
}

/// Closed-form total population N(t) = Λ/Φ + (N(0) − Λ/Φ) e^{−Φt}, the
/// exact solution of dN/dt = Λ − ΦN.
pub fn closed_form_total(n0: f64, params: &ModelParams, t: f64) -> f64 {
    let cap = params.carrying_capacity();
    cap + (n0 - cap) * (-params.phi * t).exp()
}
