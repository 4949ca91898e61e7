//! Least-squares parameter estimation from cumulative-incidence series:
//! the model-side incidence curve, the sum-of-squares objective, a
//! bounded multi-start Nelder-Mead search, error metrics, and a
//! synthetic-series generator for round-trip validation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::{ModelParams, StateVector};
use crate::rng::{derive_stream, SplitMix64};
use crate::schedule::PiecewiseSchedule;

/// Objective value returned for out-of-bounds or non-evaluable points,
/// before the squared bound violation is added.
pub const PENALTY_FLOOR: f64 = 1e12;

/// How the observed counts are interpreted on the model side; recorded
/// in every fit report.
pub const INCIDENCE_DEFINITION: &str =
    "cumulative inflow to I: trapezoidal integral of delta * C(t) * I(t)";

/// Dated cumulative-incidence observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl ObservedSeries {
    pub fn new(times: Vec<f64>, cumulative: Vec<f64>) -> Result<Self> {
        let s = Self { times, cumulative };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.cumulative.len() {
            return Err(Error::InvalidInput(format!(
                "series has {} times but {} counts",
                self.times.len(),
                self.cumulative.len()
            )));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "observation times must be strictly increasing".into(),
            ));
        }
        if self.cumulative.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidInput(
                "cumulative counts must be finite and >= 0".into(),
            ));
        }
        if self.cumulative.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(
                "cumulative counts must be nondecreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Fittable parameter names, spelled out as in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Lambda,
    Alpha,
    Epsilon,
    Delta,
    Mu,
    Nu,
    Phi,
}

impl ParamName {
    pub fn apply(self, params: &mut ModelParams, value: f64) {
        match self {
            ParamName::Lambda => params.lambda = value,
            ParamName::Alpha => params.alpha = value,
            ParamName::Epsilon => params.epsilon0 = value,
            ParamName::Delta => params.delta = value,
            ParamName::Mu => params.mu = value,
            ParamName::Nu => params.nu = value,
            ParamName::Phi => params.phi = value,
        }
    }

    pub fn get(self, params: &ModelParams) -> f64 {
        match self {
            ParamName::Lambda => params.lambda,
            ParamName::Alpha => params.alpha,
            ParamName::Epsilon => params.epsilon0,
            ParamName::Delta => params.delta,
            ParamName::Mu => params.mu,
            ParamName::Nu => params.nu,
            ParamName::Phi => params.phi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamName::Lambda => "lambda",
            ParamName::Alpha => "alpha",
            ParamName::Epsilon => "epsilon",
            ParamName::Delta => "delta",
            ParamName::Mu => "mu",
            ParamName::Nu => "nu",
            ParamName::Phi => "phi",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(ParamName::Lambda),
            "alpha" => Ok(ParamName::Alpha),
            "epsilon" => Ok(ParamName::Epsilon),
            "delta" => Ok(ParamName::Delta),
            "mu" => Ok(ParamName::Mu),
            "nu" => Ok(ParamName::Nu),
            "phi" => Ok(ParamName::Phi),
            other => Err(Error::InvalidInput(format!(
                "unknown parameter {other:?}; expected one of \
                 lambda, alpha, epsilon, delta, mu, nu, phi"
            ))),
        }
    }
}

/// Search specification: which parameters vary, inside which bounds,
/// with everything else fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub free: Vec<ParamName>,
    /// Per-free-parameter [lo, hi], aligned with `free`.
    pub bounds: Vec<(f64, f64)>,
    pub fixed: ModelParams,
    pub initial_state: StateVector,
    pub n_starts: usize,
    pub max_evals: usize,
    /// Simplex diameter below which a start counts as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl FitConfig {
    pub const DEFAULT_N_STARTS: usize = 8;
    pub const DEFAULT_MAX_EVALS: usize = 5000;
    pub const DEFAULT_TOLERANCE: f64 = 1e-8;

    pub fn new(
        free: Vec<ParamName>,
        bounds: Vec<(f64, f64)>,
        fixed: ModelParams,
        initial_state: StateVector,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            free,
            bounds,
            fixed,
            initial_state,
            n_starts: Self::DEFAULT_N_STARTS,
            max_evals: Self::DEFAULT_MAX_EVALS,
            tolerance: Self::DEFAULT_TOLERANCE,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::InvalidInput(
                "fit needs at least one free parameter".into(),
            ));
        }
        if self.free.len() != self.bounds.len() {
            return Err(Error::InvalidInput(format!(
                "{} free parameters but {} bounds",
                self.free.len(),
                self.bounds.len()
            )));
        }
        for (name, &(lo, hi)) in self.free.iter().zip(&self.bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "bounds for {name} must be finite with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        for (k, a) in self.free.iter().enumerate() {
            if self.free[k + 1..].contains(a) {
                return Err(Error::InvalidInput(format!(
                    "{a} listed twice in free parameters"
                )));
            }
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidInput("fit needs n_starts >= 1".into()));
        }
        if self.max_evals < self.free.len() + 2 {
            return Err(Error::InvalidInput(
                "max_evals too small for one simplex".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be > 0".into()));
        }
        Ok(())
    }

    /// The fixed parameter set with `theta` substituted for the free ones.
    pub fn assemble(&self, theta: &[f64]) -> ModelParams {
        let mut p = self.fixed;
        for (name, &v) in self.free.iter().zip(theta) {
            name.apply(&mut p, v);
        }
        p
    }
}

/// Cumulative incidence according to the model at each observation time:
/// the running trapezoidal integral of δ C I along the trajectory,
/// integrated at the configured step with ε held at its baseline.
pub fn model_cumulative_incidence(
    params: &ModelParams,
    initial: &StateVector,
    times: &[f64],
    icfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one observation time".into(),
        ));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "observation times must be strictly increasing".into(),
        ));
    }
    if times[0] < icfg.t0 || *times.last().unwrap() > icfg.tf {
        return Err(Error::InvalidInput(format!(
            "observation times must lie within [{}, {}]",
            icfg.t0, icfg.tf
        )));
    }

    let sched = PiecewiseSchedule::constant(params.epsilon0);
    let mut out = Vec::with_capacity(times.len());
    let mut cum = 0.0;
    let mut state = *initial;
    let mut t_prev = icfg.t0;
    for &t in times {
        if t > t_prev {
            let seg = IntegratorConfig {
                t0: t_prev,
                tf: t,
                h: icfg.h.min(t - t_prev),
                method: icfg.method,
            };
            let traj = integrate(&state, params, &seg, &sched)?;
            for k in 0..traj.times.len() - 1 {
                let dt = traj.times[k + 1] - traj.times[k];
                let a = &traj.states[k];
                let b = &traj.states[k + 1];
                cum += dt / 2.0 * (params.delta * a.c * a.i + params.delta * b.c * b.i);
            }
            state = *traj.final_state();
            t_prev = t;
        }
        out.push(cum);
    }
    Ok(out)
}

/// Sum of squared residuals between the observed series and the model
/// series at the candidate `theta`. Out-of-bounds candidates and
/// non-evaluable models return a penalty instead of erroring so the
/// simplex search stays total.
pub fn sse_objective(
    theta: &[f64],
    observed: &ObservedSeries,
    fitcfg: &FitConfig,
    icfg: &IntegratorConfig,
) -> f64 {
    let mut violation = 0.0;
    for (&v, &(lo, hi)) in theta.iter().zip(&fitcfg.bounds) {
        if v < lo {
            violation += (lo - v) * (lo - v);
        } else if v > hi {
            violation += (v - hi) * (v - hi);
        }
    }
    if violation > 0.0 {
        return PENALTY_FLOOR + violation;
    }

    let params = fitcfg.assemble(theta);
    match model_cumulative_incidence(&params, &fitcfg.initial_state, &observed.times, icfg) {
        Ok(predicted) => {
            let sse: f64 = observed
                .cumulative
                .iter()
                .zip(&predicted)
                .map(|(o, p)| (o - p) * (o - p))
                .sum();
            if sse.is_finite() {
                sse
            } else {
                PENALTY_FLOOR
            }
        }
        Err(_) => PENALTY_FLOOR,
    }
}

/// 2-norm relative error and mean absolute error between an observed and
/// a predicted series of equal length.
pub fn error_metrics(observed: &[f64], predicted: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ or are empty: {} vs {}",
            observed.len(),
            predicted.len()
        )));
    }
    let n = observed.len() as f64;
    let mae = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).abs())
        .sum::<f64>()
        / n;
    let norm_pred = predicted.iter().map(|p| p * p).sum::<f64>().sqrt();
    if norm_pred == 0.0 {
        return Err(Error::UndefinedRelativeError { mae });
    }
    let norm_diff = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum::<f64>()
        .sqrt();
    Ok((norm_diff / norm_pred, mae))
}

/// One fitted parameter at the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
}

/// Best point found by the multi-start search, with its quality metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Vec<FittedParam>,
    /// Full parameter set with the fitted values substituted in.
    pub params: ModelParams,
    /// Sum of squared residuals at the optimum.
    pub objective: f64,
    /// 2-norm relative error at the optimum.
    pub e_rel: f64,
    /// Mean absolute error at the optimum.
    pub mae: f64,
    /// Objective evaluations across all starts.
    pub n_evals: usize,
    /// Whether the winning start's simplex shrank below tolerance.
    pub converged: bool,
    pub incidence_definition: String,
}

struct StartOutcome {
    start: usize,
    theta: Vec<f64>,
    objective: f64,
    evals: usize,
    converged: bool,
}

/// Multi-start Nelder-Mead minimization of [`sse_objective`].
///
/// Start `j` samples its initial point uniformly inside the bounds from
/// the stream `derive_stream(seed, j)`; starts run in parallel and the
/// lowest objective wins, ties broken by the lowest start index.
pub fn fit(
    observed: &ObservedSeries,
    fitcfg: &FitConfig,
    icfg: &IntegratorConfig,
) -> Result<FitResult> {
    observed.validate()?;
    if observed.is_empty() {
        return Err(Error::InvalidInput("observed series is empty".into()));
    }
    fitcfg.validate()?;
    icfg.validate()?;

    let outcomes: Vec<StartOutcome> = (0..fitcfg.n_starts)
        .into_par_iter()
        .map(|j| {
            let mut rng = SplitMix64::new(derive_stream(fitcfg.seed, j as u64));
            let x0: Vec<f64> = fitcfg
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.uniform(lo, hi))
                .collect();
            let f = |theta: &[f64]| sse_objective(theta, observed, fitcfg, icfg);
            let nm = nelder_mead(&f, &x0, &fitcfg.bounds, fitcfg.max_evals, fitcfg.tolerance);
            StartOutcome {
                start: j,
                theta: nm.theta,
                objective: nm.objective,
                evals: nm.evals,
                converged: nm.converged,
            }
        })
        .collect();

    let total_evals: usize = outcomes.iter().map(|o| o.evals).sum();
    let best = outcomes
        .into_iter()
        .min_by(|a, b| {
            (a.objective, a.start)
                .partial_cmp(&(b.objective, b.start))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("n_starts >= 1");

    if best.objective >= PENALTY_FLOOR {
        return Err(Error::FitFailed(format!(
            "no start produced an evaluable model (best objective {:.3e} at theta {:?})",
            best.objective, best.theta
        )));
    }

    let params = fitcfg.assemble(&best.theta);
    let predicted =
        model_cumulative_incidence(&params, &fitcfg.initial_state, &observed.times, icfg)?;
    let (e_rel, mae) = error_metrics(&observed.cumulative, &predicted)?;

    Ok(FitResult {
        theta: fitcfg
            .free
            .iter()
            .zip(&best.theta)
            .map(|(name, &value)| FittedParam {
                name: name.name().to_string(),
                value,
            })
            .collect(),
        params,
        objective: best.objective,
        e_rel,
        mae,
        n_evals: total_evals,
        converged: best.converged,
        incidence_definition: INCIDENCE_DEFINITION.to_string(),
    })
}

struct NmOutcome {
    theta: Vec<f64>,
    objective: f64,
    evals: usize,
    converged: bool,
}

/// Nelder-Mead with reflection 1, expansion 2, contraction 0.5, shrink
/// 0.5. Convergence is declared when every vertex sits within
/// `tolerance` (max-norm) of the best one.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    bounds: &[(f64, f64)],
    max_evals: usize,
    tolerance: f64,
) -> NmOutcome {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let d = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    // initial simplex: x0 plus a 10%-of-range step along each axis,
    // flipped inward when it would leave the box
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for j in 0..d {
        let (lo, hi) = bounds[j];
        let step = 0.1 * (hi - lo);
        let mut v = x0.to_vec();
        v[j] = if v[j] + step <= hi {
            v[j] + step
        } else {
            v[j] - step
        };
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let diameter = |simplex: &[(Vec<f64>, f64)]| -> f64 {
        let best = &simplex[0].0;
        simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(best)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if diameter(&simplex) <= tolerance {
            let (theta, objective) = simplex.swap_remove(0);
            return NmOutcome {
                theta,
                objective,
                evals,
                converged: true,
            };
        }
        if evals >= max_evals {
            let (theta, objective) = simplex.swap_remove(0);
            return NmOutcome {
                theta,
                objective,
                evals,
                converged: false,
            };
        }

        let worst = simplex[d].clone();
        let second_worst_f = simplex[d - 1].1;
        let best_f = simplex[0].1;
        let centroid: Vec<f64> = (0..d)
            .map(|c| simplex[..d].iter().map(|(v, _)| v[c]).sum::<f64>() / d as f64)
            .collect();

        let point_at = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = point_at(REFLECT);
        let f_reflected = eval(&reflected, &mut evals);

        if f_reflected < best_f {
            let expanded = point_at(EXPAND);
            let f_expanded = eval(&expanded, &mut evals);
            simplex[d] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
        } else if f_reflected < second_worst_f {
            simplex[d] = (reflected, f_reflected);
        } else {
            let contracted = if f_reflected < worst.1 {
                point_at(CONTRACT) // outside contraction
            } else {
                point_at(-CONTRACT) // inside contraction
            };
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < worst.1.min(f_reflected) {
                simplex[d] = (contracted, f_contracted);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for k in 1..=d {
                    let v: Vec<f64> = simplex[k]
                        .0
                        .iter()
                        .zip(&best)
                        .map(|(x, b)| b + SHRINK * (x - b))
                        .collect();
                    let fv = eval(&v, &mut evals);
                    simplex[k] = (v, fv);
                }
            }
        }
    }
}

/// Model series plus seeded Gaussian noise, clamped nondecreasing and
/// nonnegative. Replaces field observations for round-trip validation.
pub fn generate_synthetic(
    params: &ModelParams,
    initial: &StateVector,
    times: &[f64],
    noise_sd: f64,
    seed: u64,
    icfg: &IntegratorConfig,
) -> Result<ObservedSeries> {
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let clean = model_cumulative_incidence(params, initial, times, icfg)?;
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(clean.len());
    let mut prev: f64 = 0.0;
    for v in clean {
        let noisy = if noise_sd > 0.0 {
            v + noise_sd * rng.gaussian()
        } else {
            v
        };
        let clamped = noisy.max(prev).max(0.0);
        out.push(clamped);
        prev = clamped;
    }
    ObservedSeries::new(times.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    fn table1() -> ModelParams {
        Preset::Table1.params()
    }

    fn default_initial(p: &ModelParams) -> StateVector {
        StateVector::new(p.carrying_capacity() - 3.0, 1.0, 1.0, 1.0, 0.0)
    }

    fn daily(n: usize) -> Vec<f64> {
        (1..=n).map(|k| k as f64).collect()
    }

    fn icfg(tf: f64) -> IntegratorConfig {
        IntegratorConfig::new(0.0, tf, 0.01).unwrap()
    }

    #[test]
    fn incidence_zero_without_seeds_or_delta() {
        let p = table1();
        let cfg = icfg(10.0);
        let no_seeds = StateVector::new(100.0, 1.0, 0.0, 0.0, 0.0);
        let series = model_cumulative_incidence(&p, &no_seeds, &daily(10), &cfg).unwrap();
        assert!(series.iter().all(|&v| v == 0.0));

        let mut no_delta = p;
        no_delta.delta = 0.0;
        let series =
            model_cumulative_incidence(&no_delta, &default_initial(&p), &daily(10), &cfg).unwrap();
        assert!(series.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incidence_is_nondecreasing() {
        let p = table1();
        let series =
            model_cumulative_incidence(&p, &default_initial(&p), &daily(30), &icfg(30.0)).unwrap();
        assert!(series.windows(2).all(|w| w[0] <= w[1]));
        assert!(*series.last().unwrap() > 0.0);
    }

    fn fit_config(free: Vec<ParamName>, bounds: Vec<(f64, f64)>, seed: u64) -> FitConfig {
        let p = table1();
        FitConfig::new(free, bounds, p, default_initial(&p), seed).unwrap()
    }

    #[test]
    fn objective_vanishes_on_self_generated_data() {
        let p = table1();
        let cfg = icfg(20.0);
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(20), 0.0, 1, &cfg).unwrap();
        let fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 1);
        let sse = sse_objective(&[p.epsilon0], &observed, &fc, &cfg);
        assert!(sse <= 1e-10, "sse = {sse:.3e}");
    }

    #[test]
    fn objective_of_constant_offset() {
        let p = table1();
        let cfg = icfg(15.0);
        let times = daily(15);
        let clean = model_cumulative_incidence(&p, &default_initial(&p), &times, &cfg).unwrap();
        let shifted: Vec<f64> = clean.iter().map(|v| v + 2.0).collect();
        let observed = ObservedSeries::new(times, shifted).unwrap();
        let fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 1);
        let sse = sse_objective(&[p.epsilon0], &observed, &fc, &cfg);
        assert!((sse - 15.0 * 4.0).abs() <= 1e-6, "sse = {sse}");
    }

    #[test]
    fn objective_ignores_joint_reordering() {
        let p = table1();
        let cfg = icfg(10.0);
        let times = daily(10);
        let clean = model_cumulative_incidence(&p, &default_initial(&p), &times, &cfg).unwrap();
        let observed = ObservedSeries::new(times.clone(), clean.clone()).unwrap();
        // same pairs, scrambled; bypasses the constructor on purpose
        let mut permuted = ObservedSeries {
            times,
            cumulative: clean,
        };
        permuted.times.reverse();
        permuted.cumulative.reverse();
        let fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 1);
        let a = sse_objective(&[0.05], &observed, &fc, &cfg);
        // reversed times fail the model-side ordering check, so compare
        // through the residual algebra instead: SSE is a sum over pairs
        let params = fc.assemble(&[0.05]);
        let predicted =
            model_cumulative_incidence(&params, &fc.initial_state, &observed.times, &cfg).unwrap();
        let by_hand: f64 = permuted
            .cumulative
            .iter()
            .rev()
            .zip(&predicted)
            .map(|(o, p)| (o - p) * (o - p))
            .sum();
        assert!((a - by_hand).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn out_of_bounds_theta_is_penalized() {
        let p = table1();
        let cfg = icfg(5.0);
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(5), 0.0, 1, &cfg).unwrap();
        let fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 1);
        let sse = sse_objective(&[0.3], &observed, &fc, &cfg);
        assert!(sse >= PENALTY_FLOOR);
        assert!((sse - (PENALTY_FLOOR + 0.1 * 0.1)).abs() <= 1e-3);
    }

    #[test]
    fn error_metric_examples() {
        let (e_rel, mae) = error_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((e_rel, mae), (0.0, 0.0));

        let (e_rel, mae) = error_metrics(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((mae - 1.0).abs() <= 1e-15);
        assert!((e_rel - (5.0f64).sqrt() / (3.0f64).sqrt()).abs() <= 1e-12);
        assert!((e_rel - 1.29099).abs() <= 1e-5);
        assert!(mae <= 2.0); // never exceeds the max-abs residual

        match error_metrics(&[1.0, 2.0], &[0.0, 0.0]) {
            Err(Error::UndefinedRelativeError { mae }) => assert!((mae - 1.5).abs() <= 1e-15),
            other => panic!("expected undefined e_rel, got {other:?}"),
        }
    }

    #[test]
    fn synthetic_series_behaves() {
        let p = table1();
        let cfg = icfg(20.0);
        let init = default_initial(&p);
        let clean = generate_synthetic(&p, &init, &daily(20), 0.0, 7, &cfg).unwrap();
        let model = model_cumulative_incidence(&p, &init, &daily(20), &cfg).unwrap();
        assert_eq!(clean.cumulative, model);

        let a = generate_synthetic(&p, &init, &daily(20), 5.0, 7, &cfg).unwrap();
        let b = generate_synthetic(&p, &init, &daily(20), 5.0, 7, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.cumulative.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.cumulative.iter().all(|&v| v >= 0.0));
        assert_ne!(a.cumulative, clean.cumulative);
    }

    #[test]
    fn single_parameter_round_trip() {
        let p = table1();
        let cfg = icfg(20.0);
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(20), 0.0, 3, &cfg).unwrap();
        let mut fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 17);
        fc.n_starts = 3;
        let result = fit(&observed, &fc, &cfg).unwrap();
        let eps_hat = result.theta[0].value;
        assert!(
            (eps_hat - 0.03).abs() / 0.03 <= 1e-3,
            "recovered {eps_hat}, objective {:.3e}",
            result.objective
        );
        assert!(result.converged);
        assert!(result.objective <= 1e-6);
    }

    #[test]
    fn two_parameter_round_trip() {
        let p = table1();
        let cfg = IntegratorConfig::new(0.0, 30.0, 0.02).unwrap();
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(30), 0.0, 5, &cfg).unwrap();
        let fc = FitConfig::new(
            vec![ParamName::Epsilon, ParamName::Delta],
            vec![(0.005, 0.1), (0.02, 0.3)],
            p,
            default_initial(&p),
            23,
        )
        .unwrap();
        let result = fit(&observed, &fc, &cfg).unwrap();
        let eps_hat = result.theta[0].value;
        let delta_hat = result.theta[1].value;
        assert!(
            (eps_hat - 0.03).abs() / 0.03 <= 0.10,
            "epsilon off: {eps_hat}"
        );
        assert!(
            (delta_hat - 0.10).abs() / 0.10 <= 0.10,
            "delta off: {delta_hat}"
        );
    }

    #[test]
    fn bounds_excluding_truth_pin_the_boundary() {
        let p = table1();
        let cfg = icfg(20.0);
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(20), 0.0, 3, &cfg).unwrap();
        let mut fc = fit_config(vec![ParamName::Epsilon], vec![(0.05, 0.2)], 9);
        fc.n_starts = 3;
        let result = fit(&observed, &fc, &cfg).unwrap();
        let eps_hat = result.theta[0].value;
        assert!(
            (eps_hat - 0.05).abs() <= 1e-4,
            "expected the lower boundary, got {eps_hat}"
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let p = table1();
        let cfg = icfg(15.0);
        let observed =
            generate_synthetic(&p, &default_initial(&p), &daily(15), 3.0, 21, &cfg).unwrap();
        let mut fc = fit_config(vec![ParamName::Epsilon], vec![(0.001, 0.2)], 4);
        fc.n_starts = 4;
        let a = fit(&observed, &fc, &cfg).unwrap();
        let b = fit(&observed, &fc, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
