//! `sqcir` command line: simulate trajectories, compute the analysis
//! report, sweep the contact rate, run mob-event ensembles, fit
//! parameters to observed series, and generate synthetic data.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on runtime
//! failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sqcir::analytics::{
    bifurcation_sweep, classify_stability, critical_thresholds, equilibrium_report,
    sensitivity_indices, EquilibriumReport, SensitivityReport, StabilityReport, ThresholdReport,
};
use sqcir::error::Error;
use sqcir::fit::{fit, FitConfig, FitResult, ParamName};
use sqcir::integrator::{integrate, integrate_network, Trajectory};
use sqcir::io::{
    load_config, load_series, render_report, write_bifurcation_csv, write_ensemble_runs_csv,
    write_network_trajectory_csv, write_series_csv, write_text, write_trajectory_csv, Report,
    RunConfig,
};
use sqcir::mob::{epsilon_schedule, run_ensemble, sample_mob_process};
use sqcir::model::{NetworkState, StateVector};
use sqcir::schedule::PiecewiseSchedule;

#[derive(Parser)]
#[command(
    name = "sqcir",
    version,
    about = "SQCIR mob-propagation model: simulation, analysis, ensembles, and fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and emit the trajectory as CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Equilibria, reproduction numbers, spectrum, thresholds, and
    /// sensitivities as one JSON report.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the contact rate and emit long-run levels as CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to sweep (only "epsilon" is supported).
        #[arg(long, value_name = "NAME", default_value = "epsilon")]
        param: String,
        /// Lower end of the sweep.
        #[arg(long, value_name = "X")]
        from: f64,
        /// Upper end of the sweep.
        #[arg(long, value_name = "Y")]
        to: f64,
        /// Number of grid points.
        #[arg(long, value_name = "N")]
        steps: usize,
    },
    /// Monte Carlo mob-event ensemble; JSON report, plus a per-run CSV
    /// next to --out when given.
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of ensemble runs.
        #[arg(long, value_name = "N")]
        runs: usize,
        /// Overrides the mob process seed from the config.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Least-squares fit of selected parameters to an observed series.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Observed series CSV with header "t,cumulative".
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Comma-separated parameters to fit, e.g. "epsilon" or "epsilon,delta".
        #[arg(long, value_name = "LIST")]
        free: String,
        /// Seed for the multi-start sampler.
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic observed series at daily cadence.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
        /// Gaussian noise standard deviation in counts.
        #[arg(long, value_name = "SD", default_value_t = 0.0)]
        noise: f64,
        /// Noise seed.
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl ToString) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { common } => simulate(&common),
        Command::Analyze { common } => analyze(&common),
        Command::Sweep {
            common,
            param,
            from,
            to,
            steps,
        } => sweep(&common, &param, from, to, steps),
        Command::Mc { common, runs, seed } => mc(&common, runs, seed),
        Command::Fit {
            common,
            data,
            free,
            seed,
        } => run_fit(&common, &data, &free, seed),
        Command::GenData {
            common,
            noise,
            seed,
        } => gen_data(&common, noise, seed),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, text).map_err(CliError::runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Runtime(e.to_string()))
                }
                _ => Ok(()),
            }
        }
    }
}

/// The contact-rate schedule for a run: modulated by a seeded mob
/// process when the config has a `mob` section, constant otherwise.
fn schedule_for(cfg: &RunConfig) -> Result<PiecewiseSchedule, Error> {
    match &cfg.mob {
        Some(mob) => {
            let m = sample_mob_process(mob, cfg.integrator.t0, cfg.integrator.tf)?;
            Ok(epsilon_schedule(&cfg.params, &m))
        }
        None => Ok(PiecewiseSchedule::constant(cfg.params.epsilon0)),
    }
}

fn simulate(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&common.config).map_err(CliError::usage)?;
    let sched = schedule_for(&cfg).map_err(CliError::runtime)?;
    let mut buf = Vec::new();
    match &cfg.network {
        Some(net_cfg) => {
            let net = net_cfg.to_params().map_err(CliError::usage)?;
            let traj: Trajectory<NetworkState> =
                integrate_network(&net_cfg.initial_state(), &net, &cfg.integrator, &sched)
                    .map_err(CliError::runtime)?;
            write_network_trajectory_csv(&traj, &mut buf).map_err(CliError::runtime)?;
        }
        None => {
            let traj: Trajectory<StateVector> =
                integrate(&cfg.initial, &cfg.params, &cfg.integrator, &sched)
                    .map_err(CliError::runtime)?;
            write_trajectory_csv(&traj, &mut buf).map_err(CliError::runtime)?;
        }
    }
    emit(&common.out, &String::from_utf8(buf).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct AnalyzeBody {
    equilibrium: EquilibriumReport,
    stability: StabilityReport,
    thresholds: ThresholdReport,
    sensitivity: SensitivityReport,
}

fn analyze(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&common.config).map_err(CliError::usage)?;
    let body = AnalyzeBody {
        equilibrium: equilibrium_report(&cfg.params).map_err(CliError::runtime)?,
        stability: classify_stability(&cfg.params).map_err(CliError::runtime)?,
        thresholds: critical_thresholds(&cfg.params).map_err(CliError::runtime)?,
        sensitivity: sensitivity_indices(&cfg.params).map_err(CliError::runtime)?,
    };
    let text = render_report(&Report::new(&cfg, body)).map_err(CliError::runtime)?;
    emit(&common.out, &text)
}

fn sweep(
    common: &CommonArgs,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<(), CliError> {
    if param != "epsilon" {
        return Err(CliError::Usage(format!(
            "unsupported sweep parameter {param:?}; only \"epsilon\" is available"
        )));
    }
    let cfg = load_config(&common.config).map_err(CliError::usage)?;
    let table = bifurcation_sweep(&cfg.params, &cfg.initial, from, to, steps, &cfg.integrator)
        .map_err(CliError::usage)?;
    let mut buf = Vec::new();
    write_bifurcation_csv(&table, &mut buf).map_err(CliError::runtime)?;
    emit(&common.out, &String::from_utf8(buf).expect("csv is utf-8"))
}

#[derive(Serialize)]
struct McBody {
    runs: usize,
    seed: u64,
    ensemble: sqcir::mob::EnsembleReport,
}

fn mc(common: &CommonArgs, runs: usize, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = load_config(&common.config).map_err(CliError::usage)?;
    let mut mob = cfg.mob.unwrap_or_default();
    if let Some(s) = seed {
        mob.seed = s;
    }
    cfg.mob = Some(mob);
    let report = run_ensemble(&cfg.initial, &cfg.params, &mob, &cfg.integrator, runs)
        .map_err(CliError::runtime)?;

    if let Some(out) = &common.out {
        let mut buf = Vec::new();
        write_ensemble_runs_csv(&report, &mut buf).map_err(CliError::runtime)?;
        let csv_path = runs_csv_path(out);
        write_text(&csv_path, &String::from_utf8(buf).expect("csv is utf-8"))
            .map_err(CliError::runtime)?;
    }

    let body = McBody {
        runs,
        seed: mob.seed,
        ensemble: report,
    };
    let text = render_report(&Report::new(&cfg, body)).map_err(CliError::runtime)?;
    emit(&common.out, &text)
}

/// `report.json` -> `report.runs.csv`.
fn runs_csv_path(out: &Path) -> PathBuf {
    out.with_extension("runs.csv")
}

#[derive(Serialize)]
struct FitSettings {
    free: Vec<String>,
    bounds: Vec<(f64, f64)>,
    n_starts: usize,
    max_evals: usize,
    tolerance: f64,
    seed: u64,
    data: String,
}

#[derive(Serialize)]
struct FitBody {
    settings: FitSettings,
    fit: FitResult,
}

/// Default search box for a parameter fitted via the CLI: a factor of
/// ten around its configured value, or [1e-6, 1] when that value is 0.
fn default_bounds(value: f64) -> (f64, f64) {
    if value > 0.0 {
        (value / 10.0, value * 10.0)
    } else {
        (1e-6, 1.0)
    }
}

fn run_fit(common: &CommonArgs, data: &Path, free: &str, seed: u64) -> Result<(), CliError> {
    let cfg = load_config(&common.config).map_err(CliError::usage)?;
    let observed = load_series(data).map_err(CliError::usage)?;

    let names: Vec<ParamName> = free
        .split(',')
        .map(|tok| tok.trim().parse::<ParamName>())
        .collect::<Result<_, _>>()
        .map_err(CliError::usage)?;
    let bounds: Vec<(f64, f64)> = names
        .iter()
        .map(|n| default_bounds(n.get(&cfg.params)))
        .collect();

    let fitcfg =
        FitConfig::new(names, bounds, cfg.params, cfg.initial, seed).map_err(CliError::usage)?;
    let result = fit(&observed, &fitcfg, &cfg.integrator).map_err(CliError::runtime)?;

    let body = FitBody {
        settings: FitSettings {
            free: fitcfg.free.iter().map(|n| n.name().to_string()).collect(),
            bounds: fitcfg.bounds.clone(),
            n_starts: fitcfg.n_starts,
            max_evals: fitcfg.max_evals,
            tolerance: fitcfg.tolerance,
            seed: fitcfg.seed,
            data: data.display().to_string(),
        },
        fit: result,
    };
    let text = render_report(&Report::new(&cfg, body)).map_err(CliError::runtime)?;
    emit(&common.out, &text)
}

fn gen_data(common: &CommonArgs, noise: f64, seed: u64) -> Result<(), CliError> {
    let cfg = load_config(&common.config).map_err(CliError::usage)?;
    let span = cfg.integrator.span();
    if span < 1.0 {
        return Err(CliError::Usage(format!(
            "horizon {span} is shorter than the daily observation cadence"
        )));
    }
    let times: Vec<f64> = (1..=span.floor() as usize)
        .map(|k| cfg.integrator.t0 + k as f64)
        .collect();
    let series = sqcir::fit::generate_synthetic(
        &cfg.params,
        &cfg.initial,
        &times,
        noise,
        seed,
        &cfg.integrator,
    )
    .map_err(CliError::runtime)?;
    let mut buf = Vec::new();
    write_series_csv(&series, &mut buf).map_err(CliError::runtime)?;
    emit(&common.out, &String::from_utf8(buf).expect("csv is utf-8"))
}
