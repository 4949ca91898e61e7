//! Configuration files, CSV input/output, and JSON reports.
//!
//! Config files are strict JSON: unknown keys are rejected, a preset
//! expands first, and field-level overrides apply on top. Reports embed
//! the fully resolved configuration so any output can be reproduced from
//! its own echo.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::BifurcationTable;
use crate::error::{Error, Result};
use crate::fit::ObservedSeries;
use crate::integrator::{IntegratorConfig, Method, Trajectory};
use crate::mob::{EnsembleReport, MobProcessConfig};
use crate::model::{ModelParams, NetworkParams, NetworkState, StateVector};
use crate::presets::Preset;

/// Fully resolved network section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub k: usize,
    pub t_matrix: Vec<Vec<f64>>,
    pub per_region: Vec<ModelParams>,
    pub initial: Vec<StateVector>,
}

impl NetworkConfig {
    pub fn to_params(&self) -> Result<NetworkParams> {
        NetworkParams::new(self.t_matrix.clone(), self.per_region.clone())
    }

    pub fn initial_state(&self) -> NetworkState {
        NetworkState::new(self.initial.clone())
    }
}

/// A resolved, validated run configuration. Serializing it yields a
/// config file that loads back to the same values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub params: ModelParams,
    pub initial: StateVector,
    pub integrator: IntegratorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mob: Option<MobProcessConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
}

/// Default initial state when a config omits it: everything at rest but
/// one individual in each active compartment, susceptible pool set so
/// the total sits at the carrying value Λ/Φ.
pub fn default_initial(params: &ModelParams) -> StateVector {
    StateVector::new(
        (params.carrying_capacity() - 3.0).max(0.0),
        1.0,
        1.0,
        1.0,
        0.0,
    )
}

fn default_t0() -> f64 {
    0.0
}
fn default_tf() -> f64 {
    300.0
}
fn default_h() -> f64 {
    0.01
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default = "default_t0")]
    t0: f64,
    #[serde(default = "default_tf")]
    tf: f64,
    #[serde(default = "default_h")]
    h: f64,
    #[serde(default)]
    method: Method,
}

impl Default for RawIntegrator {
    fn default() -> Self {
        Self {
            t0: default_t0(),
            tf: default_tf(),
            h: default_h(),
            method: Method::Rk4,
        }
    }
}

/// Partial parameter overrides; any subset of the seven rates.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda: Option<f64>,
    alpha: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    mu: Option<f64>,
    nu: Option<f64>,
    phi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    k: usize,
    t_matrix: Vec<Vec<f64>>,
    per_region: Option<Vec<ModelParams>>,
    initial: Option<Vec<StateVector>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    params: Option<RawParams>,
    initial: Option<StateVector>,
    integrator: Option<RawIntegrator>,
    mob: Option<MobProcessConfig>,
    network: Option<RawNetwork>,
}

/// Loads and validates a JSON run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawConfig = serde_json::from_str(&text).map_err(|e| Error::ConfigParse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve_config(raw)
}

/// Parses a config from a JSON string; used by `load_config` and tests.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        path: "<inline>".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve_config(raw)
}

fn resolve_config(raw: RawConfig) -> Result<RunConfig> {
    let preset = raw
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()?;

    let overrides = raw.params.unwrap_or_default();
    let params = match preset {
        Some(p) => {
            let mut base = p.params();
            apply_overrides(&mut base, &overrides);
            base
        }
        None => full_params(&overrides)?,
    };
    params
        .validate()
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;

    let initial = raw.initial.unwrap_or_else(|| default_initial(&params));
    if !initial.is_finite() || !initial.is_nonnegative() {
        return Err(Error::ConfigInvalid(
            "initial state must be finite and nonnegative".into(),
        ));
    }

    let raw_int = raw.integrator.unwrap_or_default();
    let integrator = IntegratorConfig {
        t0: raw_int.t0,
        tf: raw_int.tf,
        h: raw_int.h,
        method: raw_int.method,
    };
    integrator.validate()?;

    if let Some(mob) = &raw.mob {
        mob.validate()?;
    }

    let network = match raw.network {
        None => None,
        Some(net) => {
            if net.k == 0 {
                return Err(Error::ConfigInvalid("network k must be >= 1".into()));
            }
            let per_region = match net.per_region {
                Some(list) => {
                    if list.len() != net.k {
                        return Err(Error::ConfigInvalid(format!(
                            "network per_region has {} entries for k = {}",
                            list.len(),
                            net.k
                        )));
                    }
                    list
                }
                None => vec![params; net.k],
            };
            let initial_states = match net.initial {
                Some(list) => {
                    if list.len() != net.k {
                        return Err(Error::ConfigInvalid(format!(
                            "network initial has {} entries for k = {}",
                            list.len(),
                            net.k
                        )));
                    }
                    list
                }
                None => per_region.iter().map(default_initial).collect(),
            };
            let cfg = NetworkConfig {
                k: net.k,
                t_matrix: net.t_matrix,
                per_region,
                initial: initial_states,
            };
            // full dimension/sign validation
            cfg.to_params()
                .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
            for st in &cfg.initial {
                if !st.is_finite() || !st.is_nonnegative() {
                    return Err(Error::ConfigInvalid(
                        "network initial states must be finite and nonnegative".into(),
                    ));
                }
            }
            Some(cfg)
        }
    };

    Ok(RunConfig {
        preset,
        params,
        initial,
        integrator,
        mob: raw.mob,
        network,
    })
}

fn apply_overrides(base: &mut ModelParams, o: &RawParams) {
    if let Some(v) = o.lambda {
        base.lambda = v;
    }
    if let Some(v) = o.alpha {
        base.alpha = v;
    }
    if let Some(v) = o.epsilon {
        base.epsilon0 = v;
    }
    if let Some(v) = o.delta {
        base.delta = v;
    }
    if let Some(v) = o.mu {
        base.mu = v;
    }
    if let Some(v) = o.nu {
        base.nu = v;
    }
    if let Some(v) = o.phi {
        base.phi = v;
    }
}

fn full_params(o: &RawParams) -> Result<ModelParams> {
    let mut missing = Vec::new();
    let mut need = |name: &'static str, v: Option<f64>| -> f64 {
        match v {
            Some(x) => x,
            None => {
                missing.push(name);
                f64::NAN
            }
        }
    };
    let params = ModelParams {
        lambda: need("lambda", o.lambda),
        alpha: need("alpha", o.alpha),
        epsilon0: need("epsilon", o.epsilon),
        delta: need("delta", o.delta),
        mu: need("mu", o.mu),
        nu: need("nu", o.nu),
        phi: need("phi", o.phi),
    };
    if !missing.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "no preset given and params section is incomplete; missing: {}",
            missing.join(", ")
        )));
    }
    Ok(params)
}

/// Formats with `sig` significant digits, plain decimal where reasonable
/// and scientific otherwise, trailing zeros trimmed.
pub fn format_sig(v: f64, sig: usize) -> String {
    debug_assert!(sig >= 1);
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let formatted = format!("{:.*e}", sig - 1, v);
        match formatted.find('e') {
            Some(pos) => {
                let (mantissa, exponent) = formatted.split_at(pos);
                let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
                format!("{mantissa}{exponent}")
            }
            None => formatted,
        }
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let formatted = format!("{:.*}", decimals, v);
        if formatted.contains('.') {
            formatted
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            formatted
        }
    }
}

/// Number of significant digits written to CSV outputs.
pub const CSV_SIG_DIGITS: usize = 10;

fn g10(v: f64) -> String {
    format_sig(v, CSV_SIG_DIGITS)
}

/// Writes a single-region trajectory as CSV with header
/// `t,S,Q,C,I,R,epsilon`.
pub fn write_trajectory_csv(
    traj: &Trajectory<StateVector>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "t,S,Q,C,I,R,epsilon")?;
    for ((t, st), eps) in traj.times.iter().zip(&traj.states).zip(&traj.epsilon_used) {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            g10(*t),
            g10(st.s),
            g10(st.q),
            g10(st.c),
            g10(st.i),
            g10(st.r),
            g10(*eps)
        )?;
    }
    Ok(())
}

/// Writes a network trajectory as CSV with a region column:
/// `t,region,S,Q,C,I,R,epsilon`.
pub fn write_network_trajectory_csv(
    traj: &Trajectory<NetworkState>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "t,region,S,Q,C,I,R,epsilon")?;
    for ((t, ns), eps) in traj.times.iter().zip(&traj.states).zip(&traj.epsilon_used) {
        for (region, st) in ns.regions.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                g10(*t),
                region,
                g10(st.s),
                g10(st.q),
                g10(st.c),
                g10(st.i),
                g10(st.r),
                g10(*eps)
            )?;
        }
    }
    Ok(())
}

/// Writes an observed series as CSV with header `t,cumulative`.
pub fn write_series_csv(series: &ObservedSeries, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "t,cumulative")?;
    for (t, c) in series.times.iter().zip(&series.cumulative) {
        writeln!(w, "{},{}", g10(*t), g10(*c))?;
    }
    Ok(())
}

/// Writes the sweep table as CSV with header
/// `epsilon,r0_paper,long_run_C,long_run_I,persisted,error`.
pub fn write_bifurcation_csv(table: &BifurcationTable, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "epsilon,r0_paper,long_run_C,long_run_I,persisted,error")?;
    for row in &table.rows {
        let opt = |v: Option<f64>| v.map(g10).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            g10(row.epsilon),
            g10(row.r0_paper),
            opt(row.long_run_c),
            opt(row.long_run_i),
            row.persisted,
            row.error.as_deref().unwrap_or("").replace(',', ";")
        )?;
    }
    Ok(())
}

/// Writes per-run ensemble metrics as CSV.
pub fn write_ensemble_runs_csv(report: &EnsembleReport, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "run,seed,peak_infected,peak_time,duration,avg_recovery_rate,total_infections,error"
    )?;
    for outcome in &report.per_run {
        match &outcome.metrics {
            Some(m) => writeln!(
                w,
                "{},{},{},{},{},{},{},",
                outcome.run,
                outcome.seed,
                g10(m.peak_infected),
                g10(m.peak_time),
                g10(m.duration),
                g10(m.avg_recovery_rate),
                g10(m.total_infections)
            )?,
            None => writeln!(
                w,
                "{},{},,,,,,{}",
                outcome.run,
                outcome.seed,
                outcome.error.as_deref().unwrap_or("").replace(',', ";")
            )?,
        }
    }
    Ok(())
}

/// Loads a `t,cumulative` CSV series, validating order and signs.
/// Errors cite 1-based line numbers.
pub fn load_series(path: impl AsRef<Path>) -> Result<ObservedSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_series(&text, &path.display().to_string())
}

/// Parses a `t,cumulative` CSV body; see [`load_series`].
pub fn parse_series(text: &str, path: &str) -> Result<ObservedSeries> {
    let err = |line: usize, message: String| Error::SeriesParse {
        path: path.to_string(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, raw)) => {
                let trimmed = raw.trim();
                if trimmed.is_empty() {
                    continue;
                }
                break (idx + 1, trimmed.to_string());
            }
            None => {
                return Err(err(
                    1,
                    "empty input: expected header \"t,cumulative\"".into(),
                ))
            }
        }
    };
    if header.1 != "t,cumulative" {
        return Err(err(
            header.0,
            format!("expected header \"t,cumulative\", got {:?}", header.1),
        ));
    }

    let mut times = Vec::new();
    let mut cumulative = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (t_str, c_str) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a.trim(), b.trim()),
            _ => return Err(err(line_no, format!("expected 2 fields, got {trimmed:?}"))),
        };
        let t: f64 = t_str
            .parse()
            .map_err(|_| err(line_no, format!("bad time value {t_str:?}")))?;
        let c: f64 = c_str
            .parse()
            .map_err(|_| err(line_no, format!("bad cumulative value {c_str:?}")))?;
        if !t.is_finite() || !c.is_finite() {
            return Err(err(line_no, "values must be finite".into()));
        }
        if c < 0.0 {
            return Err(err(line_no, format!("cumulative count is negative: {c}")));
        }
        if let Some(&prev_t) = times.last() {
            if t <= prev_t {
                return Err(err(
                    line_no,
                    format!("times must be strictly increasing: {prev_t} then {t}"),
                ));
            }
        }
        if let Some(&prev_c) = cumulative.last() {
            if c < prev_c {
                return Err(err(
                    line_no,
                    format!("cumulative count decreases: {prev_c} then {c}"),
                ));
            }
        }
        times.push(t);
        cumulative.push(c);
    }
    if times.is_empty() {
        return Err(err(header.0, "no data rows".into()));
    }
    ObservedSeries::new(times, cumulative)
}

/// Report envelope: artifact version plus the effective configuration,
/// with the payload flattened alongside.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub version: &'static str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub body: T,
}

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(config: &'a RunConfig, body: T) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            config,
            body,
        }
    }
}

/// Pretty-prints any serializable report as JSON with a trailing newline.
pub fn render_report<T: Serialize>(report: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes rendered text to a file, mapping failures to the offending path.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a single-region trajectory CSV to a file.
pub fn write_trajectory(traj: &Trajectory<StateVector>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf).expect("formatting into a Vec cannot fail");
    write_text(path, &String::from_utf8(buf).expect("csv is utf-8"))
}

/// Writes a network trajectory CSV to a file.
pub fn write_network_trajectory(
    traj: &Trajectory<NetworkState>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_network_trajectory_csv(traj, &mut buf).expect("formatting into a Vec cannot fail");
    write_text(path, &String::from_utf8(buf).expect("csv is utf-8"))
}

/// Renders a report as pretty JSON and writes it to a file.
pub fn write_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &render_report(report)?)
}
