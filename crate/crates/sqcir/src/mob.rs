//! Stochastic mob-intensity process M(t), the contact-rate schedule it
//! induces, per-run epidemic metrics, and seeded Monte Carlo ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::model::{ModelParams, StateVector};
use crate::rng::{derive_stream, SplitMix64};
use crate::schedule::PiecewiseSchedule;

/// Default threshold (in individuals) above which the infected level
/// counts toward the epidemic duration.
pub const DEFAULT_DURATION_THRESHOLD: f64 = 1.0;

fn default_arrival_rate() -> f64 {
    0.02
}
fn default_amplitude_hi() -> f64 {
    1.5
}
fn default_event_duration() -> f64 {
    10.0
}

/// Mob-event process: Poisson arrivals, uniform amplitude in
/// [amplitude_lo, amplitude_hi], each event holding its M value for
/// `event_duration`; overlapping events take the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobProcessConfig {
    /// Mob events per unit time.
    #[serde(default = "default_arrival_rate")]
    pub arrival_rate: f64,
    #[serde(default)]
    pub amplitude_lo: f64,
    #[serde(default = "default_amplitude_hi")]
    pub amplitude_hi: f64,
    #[serde(default = "default_event_duration")]
    pub event_duration: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MobProcessConfig {
    fn default() -> Self {
        Self {
            arrival_rate: default_arrival_rate(),
            amplitude_lo: 0.0,
            amplitude_hi: default_amplitude_hi(),
            event_duration: default_event_duration(),
            seed: 0,
        }
    }
}

impl MobProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "mob arrival_rate must be finite and >= 0, got {}",
                self.arrival_rate
            )));
        }
        if !(0.0 <= self.amplitude_lo
            && self.amplitude_lo <= self.amplitude_hi
            && self.amplitude_hi <= 1.5)
        {
            return Err(Error::ConfigInvalid(format!(
                "mob amplitudes must satisfy 0 <= lo <= hi <= 1.5, got [{}, {}]",
                self.amplitude_lo, self.amplitude_hi
            )));
        }
        if !(self.event_duration.is_finite() && self.event_duration > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "mob event_duration must be > 0, got {}",
                self.event_duration
            )));
        }
        Ok(())
    }
}

/// Samples the piecewise-constant intensity M(t) on [t0, tf].
///
/// Event start times come from inverting exponential gaps at
/// `arrival_rate`; each event draws its amplitude uniformly and holds it
/// for `event_duration` (truncated at the horizon end). Where events
/// overlap, M is their maximum. Identical seeds give identical
/// schedules.
pub fn sample_mob_process(cfg: &MobProcessConfig, t0: f64, tf: f64) -> Result<PiecewiseSchedule> {
    cfg.validate()?;
    if !(tf > t0) {
        return Err(Error::InvalidInput(format!(
            "mob horizon must be positive, got [{t0}, {tf}]"
        )));
    }

    let mut rng = SplitMix64::new(cfg.seed);
    let mut events: Vec<(f64, f64, f64)> = Vec::new(); // (start, end, amplitude)
    let mut t = t0;
    loop {
        t += rng.exponential(cfg.arrival_rate);
        if !(t < tf) {
            break;
        }
        let amplitude = rng.uniform(cfg.amplitude_lo, cfg.amplitude_hi);
        events.push((t, (t + cfg.event_duration).min(tf), amplitude));
    }

    if events.is_empty() {
        return Ok(PiecewiseSchedule::constant(0.0));
    }

    // Sweep the event endpoints and take the max amplitude on each piece.
    let mut cuts: Vec<f64> = events
        .iter()
        .flat_map(|&(s, e, _)| [s, e])
        .filter(|&x| x > t0 && x < tf)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(t0);
    bounds.extend_from_slice(&cuts);
    bounds.push(tf);

    let mut values = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let m = events
            .iter()
            .filter(|&&(s, e, _)| s < hi && e > lo)
            .map(|&(_, _, a)| a)
            .fold(0.0f64, f64::max);
        values.push(m);
    }

    PiecewiseSchedule::new(cuts, values)
}

/// Contact-rate schedule ε(t) = ε0 (1 + M(t)), on the same breakpoints
/// as the intensity process.
pub fn epsilon_schedule(params: &ModelParams, m: &PiecewiseSchedule) -> PiecewiseSchedule {
    m.map_values(|v| params.epsilon0 * (1.0 + v))
}

/// Epidemic summary metrics of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Largest infected level on the grid.
    pub peak_infected: f64,
    /// First time the peak is attained.
    pub peak_time: f64,
    /// Measure of { t : I(t) >= threshold } under linear interpolation.
    pub duration: f64,
    /// Time average of the recovery inflow μC + νI over the duration set.
    pub avg_recovery_rate: f64,
    /// Cumulative inflow to I: the trapezoidal integral of δ C I.
    pub total_infections: f64,
}

impl RunMetrics {
    pub const ZERO: Self = Self {
        peak_infected: 0.0,
        peak_time: 0.0,
        duration: 0.0,
        avg_recovery_rate: 0.0,
        total_infections: 0.0,
    };

    fn as_array(&self) -> [f64; 5] {
        [
            self.peak_infected,
            self.peak_time,
            self.duration,
            self.avg_recovery_rate,
            self.total_infections,
        ]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            peak_infected: a[0],
            peak_time: a[1],
            duration: a[2],
            avg_recovery_rate: a[3],
            total_infections: a[4],
        }
    }
}

/// Extracts the epidemic metrics from a single-region trajectory.
///
/// Duration is the exact measure of the set where the piecewise-linear
/// interpolant of I sits at or above `duration_threshold`; the average
/// recovery rate is the time average of μC + νI over that same set.
pub fn compute_run_metrics(
    traj: &Trajectory<StateVector>,
    params: &ModelParams,
    duration_threshold: f64,
) -> RunMetrics {
    assert!(!traj.is_empty(), "trajectory must be nonempty");
    let times = &traj.times;
    let states = &traj.states;

    let mut peak = 0.0;
    let mut peak_time = times[0];
    for (&t, st) in times.iter().zip(states) {
        if st.i > peak {
            peak = st.i;
            peak_time = t;
        }
    }

    let mut duration = 0.0;
    let mut recovery_integral = 0.0;
    let mut total_infections = 0.0;
    for k in 0..times.len() - 1 {
        let dt = times[k + 1] - times[k];
        let (a, b) = (&states[k], &states[k + 1]);

        let inflow_a = params.delta * a.c * a.i;
        let inflow_b = params.delta * b.c * b.i;
        total_infections += dt / 2.0 * (inflow_a + inflow_b);

        let rec_a = params.mu * a.c + params.nu * a.i;
        let rec_b = params.mu * b.c + params.nu * b.i;
        let above_a = a.i >= duration_threshold;
        let above_b = b.i >= duration_threshold;
        match (above_a, above_b) {
            (true, true) => {
                duration += dt;
                recovery_integral += dt / 2.0 * (rec_a + rec_b);
            }
            (false, false) => {}
            _ => {
                // linear crossing of the threshold inside this interval
                let f = (duration_threshold - a.i) / (b.i - a.i);
                let rec_cross = rec_a + f * (rec_b - rec_a);
                if above_b {
                    let span = dt * (1.0 - f);
                    duration += span;
                    recovery_integral += span / 2.0 * (rec_cross + rec_b);
                } else {
                    let span = dt * f;
                    duration += span;
                    recovery_integral += span / 2.0 * (rec_a + rec_cross);
                }
            }
        }
    }

    RunMetrics {
        peak_infected: peak,
        peak_time,
        duration,
        avg_recovery_rate: if duration > 0.0 {
            recovery_integral / duration
        } else {
            0.0
        },
        total_infections,
    }
}

/// Outcome of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: usize,
    /// Stream seed derived from (ensemble seed, run index).
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

/// Per-run metrics, their mean and standard deviation, and the M ≡ 0
/// baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub per_run: Vec<RunOutcome>,
    /// Metric means over the successful runs.
    pub mean: RunMetrics,
    /// Sample standard deviation over the successful runs.
    pub stddev: RunMetrics,
    pub baseline: RunMetrics,
    pub n_runs: usize,
    pub n_failed: usize,
}

/// Runs `n_runs` mob-event simulations plus the baseline. Run `r` uses
/// the stream seed `derive_stream(mob.seed, r)`, so the ensemble is a
/// pure function of its configuration; runs execute in parallel and are
/// reported in run order.
pub fn run_ensemble(
    initial: &StateVector,
    params: &ModelParams,
    mob: &MobProcessConfig,
    cfg: &IntegratorConfig,
    n_runs: usize,
) -> Result<EnsembleReport> {
    if n_runs == 0 {
        return Err(Error::InvalidInput(
            "ensemble needs at least one run".into(),
        ));
    }
    mob.validate()?;
    cfg.validate()?;

    let baseline_traj = integrate(
        initial,
        params,
        cfg,
        &PiecewiseSchedule::constant(params.epsilon0),
    )?;
    let baseline = compute_run_metrics(&baseline_traj, params, DEFAULT_DURATION_THRESHOLD);

    let per_run: Vec<RunOutcome> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_stream(mob.seed, r as u64);
            let run_cfg = MobProcessConfig { seed, ..*mob };
            let result = sample_mob_process(&run_cfg, cfg.t0, cfg.tf).and_then(|m| {
                let eps = epsilon_schedule(params, &m);
                let traj = integrate(initial, params, cfg, &eps)?;
                Ok(compute_run_metrics(
                    &traj,
                    params,
                    DEFAULT_DURATION_THRESHOLD,
                ))
            });
            match result {
                Ok(metrics) => RunOutcome {
                    run: r,
                    seed,
                    metrics: Some(metrics),
                    error: None,
                },
                Err(e) => RunOutcome {
                    run: r,
                    seed,
                    metrics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let successes: Vec<[f64; 5]> = per_run
        .iter()
        .filter_map(|o| o.metrics.as_ref().map(RunMetrics::as_array))
        .collect();
    let n_ok = successes.len();
    let mut mean = [0.0; 5];
    let mut stddev = [0.0; 5];
    if n_ok > 0 {
        for m in &successes {
            for (acc, v) in mean.iter_mut().zip(m) {
                *acc += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= n_ok as f64;
        }
        if n_ok > 1 {
            for m in &successes {
                for c in 0..5 {
                    let d = m[c] - mean[c];
                    stddev[c] += d * d;
                }
            }
            for v in stddev.iter_mut() {
                *v = (*v / (n_ok - 1) as f64).sqrt();
            }
        }
    }

    Ok(EnsembleReport {
        n_failed: n_runs - n_ok,
        per_run,
        mean: RunMetrics::from_array(mean),
        stddev: RunMetrics::from_array(stddev),
        baseline,
        n_runs,
    })
}
