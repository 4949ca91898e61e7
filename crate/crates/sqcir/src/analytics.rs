//! Closed-form quantities of the SQCIR system: reproduction numbers,
//! equilibria, the Jacobian and its spectrum at the mob-free equilibrium,
//! critical thresholds, sensitivity indices, and the bifurcation sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::{rhs_reduced, ModelParams, StateVector};
use crate::schedule::PiecewiseSchedule;

/// Residual target for the Newton refinement of the endemic equilibrium.
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-12;
/// Maximum Newton iterations.
pub const NEWTON_MAX_ITER: usize = 200;
/// Maximum step halvings per Newton iteration.
pub const NEWTON_MAX_HALVINGS: usize = 40;
/// Long-run infected level above which a sweep row counts as persistent.
pub const PERSISTENCE_THRESHOLD: f64 = 1e-3;
/// Fraction of the horizon (from the end) averaged for long-run levels.
pub const LONG_RUN_FRACTION: f64 = 0.1;

/// Basic reproduction number in its threshold form R0 = Λε/(Φ(Φ+ν)).
pub fn r0_paper(params: &ModelParams) -> Result<f64> {
    let denom = params.phi * (params.phi + params.nu);
    if denom == 0.0 {
        return Err(Error::InvalidParameters(
            "phi * (phi + nu) must be nonzero for R0".into(),
        ));
    }
    Ok(params.lambda * params.epsilon0 / denom)
}

/// Basic reproduction number recomputed from the next-generation
/// matrices: the spectral radius of F V⁻¹ with F = [[Λε/Φ, 0], [0, 0]]
/// and V = diag(Φ+μ, Φ+ν), which works out to Λε/(Φ(Φ+μ)).
///
/// This differs from [`r0_paper`] whenever μ ≠ ν; both are reported and
/// the spectral classification stays authoritative.
pub fn r0_next_generation(params: &ModelParams) -> Result<f64> {
    if params.phi == 0.0 {
        return Err(Error::InvalidParameters(
            "phi must be nonzero for R0".into(),
        ));
    }
    let f = [
        [params.lambda * params.epsilon0 / params.phi, 0.0],
        [0.0, 0.0],
    ];
    let v = [[params.phi + params.mu, 0.0], [0.0, params.phi + params.nu]];
    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    if det == 0.0 {
        return Err(Error::InvalidParameters(
            "transition matrix V is singular".into(),
        ));
    }
    let v_inv = [
        [v[1][1] / det, -v[0][1] / det],
        [-v[1][0] / det, v[0][0] / det],
    ];
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = f[i][0] * v_inv[0][j] + f[i][1] * v_inv[1][j];
        }
    }
    Ok(spectral_radius_2x2(&m))
}

fn spectral_radius_2x2(m: &[[f64; 2]; 2]) -> f64 {
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = trace * trace - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        ((trace + root) / 2.0)
            .abs()
            .max(((trace - root) / 2.0).abs())
    } else {
        // complex pair; both eigenvalues have modulus sqrt(det)
        det.sqrt()
    }
}

/// Time-varying reproduction number at mob intensity `m`, i.e.
/// [`r0_paper`] with ε scaled by (1 + m).
pub fn effective_r(params: &ModelParams, m: f64) -> Result<f64> {
    let mut scaled = *params;
    scaled.epsilon0 = params.epsilon0 * (1.0 + m);
    r0_paper(&scaled)
}

/// Mob-free equilibrium (Λ/Φ, 0, 0, 0, 0).
pub fn mob_free_equilibrium(params: &ModelParams) -> StateVector {
    StateVector::new(params.carrying_capacity(), 0.0, 0.0, 0.0, 0.0)
}

/// Endemic equilibrium in closed form.
///
/// C* = (ν+Φ)/δ and S* = (ε(ν+Φ)+δΦ)/(αδ) follow from the I- and
/// Q-equations; Q* from the S-equation; I* = (ε(S*+Q*)−μ−Φ)/δ from the
/// C-equation; R* = (μC*+νI*)/Φ from the R-equation. Components may be
/// negative when no feasible endemic state exists; see
/// [`equilibrium_feasible`].
pub fn endemic_equilibrium_closed(params: &ModelParams) -> Result<StateVector> {
    let ModelParams {
        lambda,
        alpha,
        epsilon0: eps,
        delta,
        mu,
        nu,
        phi,
    } = *params;
    if alpha <= 0.0 || delta <= 0.0 {
        return Err(Error::DegenerateParameters(
            "endemic equilibrium needs alpha > 0 and delta > 0".into(),
        ));
    }
    let d = eps * (nu + phi) + delta * phi;
    let s = d / (alpha * delta);
    let q = lambda * delta / d - eps * (nu + phi) / (alpha * delta) - phi / alpha;
    let c = (nu + phi) / delta;
    let i = (eps * (s + q) - mu - phi) / delta;
    let r = (mu * c + nu * i) / phi;
    let state = StateVector::new(s, q, c, i, r);
    if !state.is_finite() {
        return Err(Error::DegenerateParameters(format!(
            "endemic equilibrium is not finite for these parameters: {state:?}"
        )));
    }
    Ok(state)
}

/// Whether an equilibrium point lies in Σ, with a rounding allowance for
/// the N = Λ/Φ boundary that exact equilibria sit on.
pub fn equilibrium_feasible(state: &StateVector, params: &ModelParams) -> bool {
    let slack = 1e-9;
    let cap = params.carrying_capacity();
    state.as_array().iter().all(|&v| v >= -slack * (1.0 + cap))
        && state.total_population() <= cap * (1.0 + slack)
}

/// Refines `guess` to a root of the reduced system by damped Newton
/// iteration with the analytic Jacobian. Converges when the max-abs
/// residual drops to [`NEWTON_RESIDUAL_TOL`]; the step is halved up to
/// [`NEWTON_MAX_HALVINGS`] times whenever the residual would increase.
pub fn endemic_equilibrium_numeric(
    params: &ModelParams,
    guess: &StateVector,
) -> Result<StateVector> {
    if !guess.is_finite() {
        return Err(Error::InvalidInput(
            "guess has a non-finite component".into(),
        ));
    }
    let residual = |y: &StateVector| {
        rhs_reduced(y, params, params.epsilon0)
            .as_array()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };

    let mut y = *guess;
    let mut res = residual(&y);
    for iter in 0..NEWTON_MAX_ITER {
        if res <= NEWTON_RESIDUAL_TOL {
            return Ok(y);
        }
        let j = jacobian(&y, params);
        let rhs = rhs_reduced(&y, params, params.epsilon0).as_array();
        let neg_r = [-rhs[0], -rhs[1], -rhs[2], -rhs[3], -rhs[4]];
        let step = solve5(&j, &neg_r).ok_or(Error::NoConvergence {
            iterations: iter,
            residual: res,
        })?;

        let mut scale = 1.0;
        let mut advanced = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let mut trial = y.as_array();
            for (t, d) in trial.iter_mut().zip(step) {
                *t += scale * d;
            }
            let trial = StateVector::from_array(trial);
            if trial.is_finite() {
                let trial_res = residual(&trial);
                if trial_res < res {
                    y = trial;
                    res = trial_res;
                    advanced = true;
                    break;
                }
            }
            scale /= 2.0;
        }
        if !advanced {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: res,
            });
        }
    }
    if res <= NEWTON_RESIDUAL_TOL {
        Ok(y)
    } else {
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: res,
        })
    }
}

/// Analytic Jacobian of the reduced system at `state`, using the
/// baseline contact rate.
pub fn jacobian(state: &StateVector, params: &ModelParams) -> [[f64; 5]; 5] {
    let StateVector { s, q, c, i, .. } = *state;
    let ModelParams {
        alpha,
        epsilon0: eps,
        delta,
        mu,
        nu,
        phi,
        ..
    } = *params;
    [
        [-c * eps - phi - q * alpha, -s * alpha, -s * eps, 0.0, 0.0],
        [q * alpha, -c * eps - phi + s * alpha, -q * eps, 0.0, 0.0],
        [
            c * eps,
            c * eps,
            -i * delta - phi + q * eps + s * eps - mu,
            -c * delta,
            0.0,
        ],
        [0.0, 0.0, i * delta, c * delta - phi - nu, 0.0],
        [0.0, 0.0, mu, nu, -phi],
    ]
}

/// The five closed-form eigenvalues of the Jacobian at the mob-free
/// equilibrium: {−Φ, −Φ, (Λα−Φ²)/Φ, (Λε−Φ²−Φμ)/Φ, −Φ−ν}. The evaluated
/// Jacobian is triangular up to a row permutation, so these are exactly
/// its diagonal.
pub fn eigenvalues_at_mfe(params: &ModelParams) -> [f64; 5] {
    let ModelParams {
        lambda,
        alpha,
        epsilon0: eps,
        mu,
        nu,
        phi,
        ..
    } = *params;
    [
        -phi,
        -phi,
        (lambda * alpha - phi * phi) / phi,
        (lambda * eps - phi * phi - phi * mu) / phi,
        -phi - nu,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Reproduction numbers, the MFE spectrum, and the resulting
/// classification. `criterion_agreement` records whether the R0 < 1
/// threshold criterion and the spectral classification coincide; the
/// spectrum is authoritative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub r0_paper: f64,
    pub r0_ngm: f64,
    pub eigenvalues_mfe: [f64; 5],
    pub classification: Stability,
    pub criterion_agreement: bool,
}

pub fn classify_stability(params: &ModelParams) -> Result<StabilityReport> {
    let r0 = r0_paper(params)?;
    let r0_ngm = r0_next_generation(params)?;
    let eigenvalues = eigenvalues_at_mfe(params);
    let max_eig = eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let classification = if max_eig < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(StabilityReport {
        r0_paper: r0,
        r0_ngm,
        eigenvalues_mfe: eigenvalues,
        classification,
        criterion_agreement: (r0 < 1.0) == (classification == Stability::Stable),
    })
}

/// Critical parameter values at which R0 crosses one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// ε_c = Φ(Φ+ν)/Λ.
    pub epsilon_c: f64,
    /// Λ_c = Φ(Φ+ν)/ε.
    pub lambda_c: f64,
    /// Positive root of Φ² + νΦ − εΛ = 0, the unique Φ with R0 = 1.
    pub phi_c: f64,
}

pub fn critical_thresholds(params: &ModelParams) -> Result<ThresholdReport> {
    if params.lambda <= 0.0 || params.epsilon0 <= 0.0 || params.phi <= 0.0 {
        return Err(Error::InvalidParameters(
            "thresholds need lambda, epsilon and phi all > 0".into(),
        ));
    }
    let epsilon_c = params.phi * (params.phi + params.nu) / params.lambda;
    let lambda_c = params.phi * (params.phi + params.nu) / params.epsilon0;
    let disc = params.nu * params.nu + 4.0 * params.epsilon0 * params.lambda;
    let phi_c = (-params.nu + disc.sqrt()) / 2.0;
    Ok(ThresholdReport {
        epsilon_c,
        lambda_c,
        phi_c,
    })
}

/// Elasticities Π of R0 with respect to each parameter it involves:
/// Π_Λ = Π_ε = 1, Π_Φ = −(2Φ+ν)/(Φ+ν), Π_ν = −ν/(Φ+ν).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub pi_lambda: f64,
    pub pi_epsilon: f64,
    pub pi_phi: f64,
    pub pi_nu: f64,
}

pub fn sensitivity_indices(params: &ModelParams) -> Result<SensitivityReport> {
    let denom = params.phi + params.nu;
    if params.phi <= 0.0 || denom <= 0.0 {
        return Err(Error::InvalidParameters(
            "sensitivity indices need phi > 0 and phi + nu > 0".into(),
        ));
    }
    Ok(SensitivityReport {
        pi_lambda: 1.0,
        pi_epsilon: 1.0,
        pi_phi: -(2.0 * params.phi + params.nu) / denom,
        pi_nu: -params.nu / denom,
    })
}

/// Both equilibria plus the Newton-refined endemic point and its
/// residual under the reduced system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub mfe: StateVector,
    pub endemic_closed: StateVector,
    pub endemic_numeric: StateVector,
    /// Max-abs right-hand side at `endemic_numeric`.
    pub endemic_residual: f64,
    /// Whether the endemic point lies in Σ.
    pub endemic_feasible: bool,
}

pub fn equilibrium_report(params: &ModelParams) -> Result<EquilibriumReport> {
    let mfe = mob_free_equilibrium(params);
    let closed = endemic_equilibrium_closed(params)?;
    let numeric = endemic_equilibrium_numeric(params, &closed)?;
    let residual = rhs_reduced(&numeric, params, params.epsilon0)
        .as_array()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(EquilibriumReport {
        mfe,
        endemic_closed: closed,
        endemic_numeric: numeric,
        endemic_residual: residual,
        endemic_feasible: equilibrium_feasible(&closed, params),
    })
}

/// One row of the contact-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRow {
    pub epsilon: f64,
    pub r0_paper: f64,
    /// Time-averaged C over the final tenth of the horizon.
    pub long_run_c: Option<f64>,
    /// Time-averaged I over the final tenth of the horizon.
    pub long_run_i: Option<f64>,
    pub persisted: bool,
    /// Integration failure for this grid point, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationTable {
    pub rows: Vec<BifurcationRow>,
}

/// Sweeps ε over `n_steps` evenly spaced values in [eps_lo, eps_hi],
/// integrating to the end of the horizon at each point and recording
/// long-run C and I levels. Grid points are independent and evaluated in
/// parallel; rows come back ordered by ε.
pub fn bifurcation_sweep(
    params: &ModelParams,
    initial: &StateVector,
    eps_lo: f64,
    eps_hi: f64,
    n_steps: usize,
    cfg: &IntegratorConfig,
) -> Result<BifurcationTable> {
    if !(eps_lo >= 0.0 && eps_lo < eps_hi) {
        return Err(Error::InvalidInput(format!(
            "sweep needs 0 <= eps_lo < eps_hi, got [{eps_lo}, {eps_hi}]"
        )));
    }
    if n_steps < 2 {
        return Err(Error::InvalidInput("sweep needs at least 2 steps".into()));
    }
    cfg.validate()?;

    let rows: Vec<BifurcationRow> = (0..n_steps)
        .into_par_iter()
        .map(|j| {
            let eps = eps_lo + j as f64 * (eps_hi - eps_lo) / (n_steps - 1) as f64;
            let mut swept = *params;
            swept.epsilon0 = eps;
            let r0 = r0_paper(&swept).unwrap_or(f64::MAX);
            match integrate(initial, params, cfg, &PiecewiseSchedule::constant(eps)) {
                Ok(traj) => {
                    let (c_bar, i_bar) = long_run_means(&traj.times, &traj.states, cfg);
                    BifurcationRow {
                        epsilon: eps,
                        r0_paper: r0,
                        long_run_c: Some(c_bar),
                        long_run_i: Some(i_bar),
                        persisted: i_bar > PERSISTENCE_THRESHOLD,
                        error: None,
                    }
                }
                Err(e) => BifurcationRow {
                    epsilon: eps,
                    r0_paper: r0,
                    long_run_c: None,
                    long_run_i: None,
                    persisted: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok(BifurcationTable { rows })
}

/// Trapezoidal time averages of C and I over the final
/// [`LONG_RUN_FRACTION`] of the horizon.
fn long_run_means(times: &[f64], states: &[StateVector], cfg: &IntegratorConfig) -> (f64, f64) {
    let w0 = cfg.tf - LONG_RUN_FRACTION * cfg.span();
    let window = cfg.tf - w0;
    let mut c_int = 0.0;
    let mut i_int = 0.0;
    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        if t1 <= w0 {
            continue;
        }
        let (a, b) = (&states[k], &states[k + 1]);
        // interpolate the left endpoint when the window starts mid-interval
        let (lo, c_lo, i_lo) = if t0 < w0 {
            let f = (w0 - t0) / (t1 - t0);
            (w0, a.c + f * (b.c - a.c), a.i + f * (b.i - a.i))
        } else {
            (t0, a.c, a.i)
        };
        let dt = t1 - lo;
        c_int += dt / 2.0 * (c_lo + b.c);
        i_int += dt / 2.0 * (i_lo + b.i);
    }
    (c_int / window, i_int / window)
}

/// Gaussian elimination with partial pivoting for the 5x5 Newton system.
fn solve5(a: &[[f64; 5]; 5], b: &[f64; 5]) -> Option<[f64; 5]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..5 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let mut acc = rhs[row];
        for k in row + 1..5 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
