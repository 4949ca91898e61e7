//! Acceptance suite: one test per criterion, each printing a summary
//! line with the measured values (visible with `--nocapture`).
//!
//! Run with `cargo test -p sqcir-cli --test acceptance`.

use std::path::PathBuf;
use std::process::Command;

use sqcir::analytics::{
    bifurcation_sweep, classify_stability, critical_thresholds, eigenvalues_at_mfe,
    endemic_equilibrium_closed, endemic_equilibrium_numeric, r0_paper, sensitivity_indices,
    Stability,
};
use sqcir::fit::{fit, generate_synthetic, FitConfig, ParamName};
use sqcir::integrator::{closed_form_total, integrate, integrate_network, IntegratorConfig};
use sqcir::io::default_initial;
use sqcir::mob::{compute_run_metrics, run_ensemble, MobProcessConfig};
use sqcir::model::{derivative_reduced, ModelParams, NetworkParams, NetworkState, StateVector};
use sqcir::presets::Preset;
use sqcir::schedule::PiecewiseSchedule;

fn table1() -> ModelParams {
    Preset::Table1.params()
}

fn fig_peak() -> ModelParams {
    Preset::FigPeak.params()
}

fn sqcir_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqcir"))
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// Criterion 1: `analyze` on the table1 preset reports both reproduction
/// numbers, the stated formula exactly and the next-generation value to
/// 1e-9.
#[test]
fn criterion_01_r0_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tmp(&dir, "table1.json", r#"{"preset":"table1"}"#);
    let output = sqcir_bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success(), "analyze failed: {output:?}");
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let r0 = v["stability"]["r0_paper"].as_f64().unwrap();
    let r0_ngm = v["stability"]["r0_ngm"].as_f64().unwrap();
    println!("criterion 1: r0_paper = {r0:.15}, r0_ngm = {r0_ngm:.12}");
    assert!((r0 - 200.0).abs() <= 1e-12, "r0_paper = {r0}");
    assert!((r0_ngm - 1200.0 / 11.0).abs() <= 1e-9, "r0_ngm = {r0_ngm}");
}

fn conservation_max_error(h: f64) -> f64 {
    let p = table1();
    let initial = StateVector::new(97.0, 1.0, 1.0, 1.0, 0.0);
    let cfg = IntegratorConfig::new(0.0, 300.0, h).unwrap();
    let traj = integrate(&initial, &p, &cfg, &PiecewiseSchedule::constant(p.epsilon0)).unwrap();
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            let n = closed_form_total(100.0, &p, t);
            (s.total_population() - n).abs() / n
        })
        .fold(0.0, f64::max)
}

/// Criterion 2, first clause: the simulated total population tracks the
/// closed form at every grid point to 1e-6 relative.
#[test]
fn criterion_02a_conservation_tracks_closed_form() {
    let worst = conservation_max_error(0.01);
    println!("criterion 2a: max relative conservation error at h=0.01 is {worst:.3e}");
    assert!(worst <= 1e-6, "conservation error {worst:.3e}");
}

/// Criterion 2, second clause: halving the step is required to shrink
/// the conservation error by at least 12x.
///
/// The total population obeys dN/dt = Λ − ΦN exactly (every bilinear
/// term cancels in the component sum), so the RK4 truncation error on N
/// is of order (Φh)^5 per step — around 1e-20 here, far below one f64
/// ulp of N. The measured error is therefore accumulated rounding noise
/// at ~1e-15, which does not shrink when h is halved.
#[test]
fn criterion_02b_halving_h_improves_conservation_12x() {
    let coarse = conservation_max_error(0.01);
    let fine = conservation_max_error(0.005);
    let ratio = coarse / fine;
    println!(
        "criterion 2b: max error {coarse:.3e} (h=0.01) vs {fine:.3e} (h=0.005), ratio {ratio:.2}"
    );
    assert!(
        ratio >= 12.0,
        "halving h changed the conservation error by {ratio:.2}x, required >= 12x \
         (both errors sit at f64 rounding noise; see the order-4 state-error test \
         in the integrator module for the genuine convergence-rate check)"
    );
}

/// Criterion 3: the MFE spectrum matches the closed forms to 1e-9, the
/// verdict is unstable, and it agrees with the R0 criterion.
#[test]
fn criterion_03_mfe_spectrum() {
    let eig = eigenvalues_at_mfe(&table1());
    let expect = [-0.01, -0.01, 55.99, 11.89, -0.06];
    println!("criterion 3: eigenvalues = {eig:?}");
    for (got, want) in eig.iter().zip(expect) {
        assert!((got - want).abs() <= 1e-9, "eigenvalue {got} vs {want}");
    }
    let report = classify_stability(&table1()).unwrap();
    assert_eq!(report.classification, Stability::Unstable);
    assert!(report.criterion_agreement);
}

/// Criterion 4: critical thresholds and their defining identities.
#[test]
fn criterion_04_thresholds() {
    let p = table1();
    let t = critical_thresholds(&p).unwrap();
    println!(
        "criterion 4: eps_c = {:.6e}, lambda_c = {:.6e}, phi_c = {:.10}",
        t.epsilon_c, t.lambda_c, t.phi_c
    );
    assert!((t.epsilon_c - 0.00015).abs() <= 1e-12);
    assert!((t.lambda_c - 0.02).abs() <= 1e-12);
    assert!((t.phi_c * (t.phi_c + p.nu) - p.epsilon0 * p.lambda).abs() <= 1e-12);
}

/// Criterion 5: sensitivity indices on table1 match the expected values
/// to 1e-5 and the finite-difference elasticities of R0 to 1e-6.
#[test]
fn criterion_05_sensitivity() {
    let p = table1();
    let s = sensitivity_indices(&p).unwrap();
    let closed = [s.pi_lambda, s.pi_epsilon, s.pi_phi, s.pi_nu];
    println!("criterion 5: indices = {closed:?}");
    let expected = [1.0, 1.0, -1.16667, -0.83333];
    for (got, want) in closed.iter().zip(expected) {
        assert!((got - want).abs() <= 1e-5, "index {got} vs {want}");
    }

    let r0 = r0_paper(&p).unwrap();
    let fd = |set: &dyn Fn(&mut ModelParams, f64), rho: f64| {
        let h = 1e-5 * rho;
        let mut hi = p;
        let mut lo = p;
        set(&mut hi, rho + h);
        set(&mut lo, rho - h);
        (r0_paper(&hi).unwrap() - r0_paper(&lo).unwrap()) / (2.0 * h) * (rho / r0)
    };
    let fds = [
        fd(&|q, v| q.lambda = v, p.lambda),
        fd(&|q, v| q.epsilon0 = v, p.epsilon0),
        fd(&|q, v| q.phi = v, p.phi),
        fd(&|q, v| q.nu = v, p.nu),
    ];
    for (c, f) in closed.iter().zip(fds) {
        assert!((c - f).abs() <= 1e-6, "closed {c} vs fd {f}");
    }
}

/// Criterion 6: the closed-form endemic equilibrium on fig-peak, its
/// Newton refinement, and their agreement.
#[test]
fn criterion_06_endemic_equilibrium() {
    let p = fig_peak();
    let closed = endemic_equilibrium_closed(&p).unwrap();
    let refined = endemic_equilibrium_numeric(&p, &closed).unwrap();
    let residual = derivative_reduced(&refined, &p, p.epsilon0)
        .unwrap()
        .as_array()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "criterion 6: C* = {:.17}, residual = {residual:.3e}",
        closed.c
    );
    assert!(
        (closed.c - 0.574).abs() <= 2.0 * f64::EPSILON,
        "C* = {}",
        closed.c
    );
    assert!(residual <= 1e-10, "residual {residual:.3e}");
    for (name, a, b) in [
        ("S", closed.s, refined.s),
        ("Q", closed.q, refined.q),
        ("I", closed.i, refined.i),
    ] {
        assert!(
            (a - b).abs() / b.abs() <= 1e-6,
            "{name}: closed {a} vs numeric {b}"
        );
    }
}

/// Criterion 7: a 40-point contact-rate sweep shows no persistence below
/// the critical value, and R0 crosses one exactly there.
#[test]
fn criterion_07_bifurcation_sweep() {
    let p = table1();
    let initial = default_initial(&p);
    let cfg = IntegratorConfig::new(0.0, 300.0, 0.01).unwrap();
    let table = bifurcation_sweep(&p, &initial, 0.00005, 0.0006, 40, &cfg).unwrap();
    let eps_c = critical_thresholds(&p).unwrap().epsilon_c;

    let below: Vec<_> = table.rows.iter().filter(|r| r.epsilon < eps_c).collect();
    println!(
        "criterion 7: {} of 40 rows below eps_c = {eps_c:.2e}; max long-run I below = {:.3e}",
        below.len(),
        below
            .iter()
            .filter_map(|r| r.long_run_i)
            .fold(0.0, f64::max)
    );
    assert!(!below.is_empty());
    for row in &table.rows {
        assert!(row.error.is_none(), "sweep row failed: {:?}", row.error);
        if row.epsilon < eps_c {
            assert!(
                !row.persisted,
                "persistence below eps_c at eps = {}",
                row.epsilon
            );
        }
    }
    for w in table.rows.windows(2) {
        assert!(w[0].r0_paper < w[1].r0_paper, "r0 column must increase");
    }
    let mut at_eps_c = p;
    at_eps_c.epsilon0 = eps_c;
    assert!((r0_paper(&at_eps_c).unwrap() - 1.0).abs() <= 1e-12);
}

/// Criterion 8: the quiet fig-peak run reproduces the reference baseline
/// peak, and a 20-run mob ensemble pushes both the mean peak and the
/// mean total infections strictly above it.
#[test]
fn criterion_08_mob_event_direction() {
    let p = fig_peak();
    // Reference initial state: a moderate susceptible pool; the peak then
    // forms by slow approach to the endemic level at the horizon end.
    let initial = StateVector::new(50.0, 1.0, 1.0, 1.0, 0.0);
    let cfg = IntegratorConfig::new(0.0, 150.0, 0.01).unwrap();

    let baseline_traj =
        integrate(&initial, &p, &cfg, &PiecewiseSchedule::constant(p.epsilon0)).unwrap();
    let baseline = compute_run_metrics(&baseline_traj, &p, 1.0);
    println!(
        "criterion 8: baseline peak {:.4} at t = {:.2} (target 65.21 within 5%)",
        baseline.peak_infected, baseline.peak_time
    );
    assert!(
        (baseline.peak_infected - 65.21).abs() / 65.21 <= 0.05,
        "baseline peak {} not within 5% of 65.21",
        baseline.peak_infected
    );
    assert!(
        baseline.peak_time >= 135.0,
        "peak at t = {}, expected near the horizon end",
        baseline.peak_time
    );

    let mob = MobProcessConfig {
        arrival_rate: 0.02,
        amplitude_lo: 0.0,
        amplitude_hi: 1.5,
        event_duration: 10.0,
        seed: 7,
    };
    let report = run_ensemble(&initial, &p, &mob, &cfg, 20).unwrap();
    println!(
        "criterion 8: ensemble mean peak {:.4} vs baseline {:.4}; mean total {:.2} vs {:.2}; {} failed runs",
        report.mean.peak_infected,
        report.baseline.peak_infected,
        report.mean.total_infections,
        report.baseline.total_infections,
        report.n_failed
    );
    assert_eq!(report.n_failed, 0);
    assert!(report.mean.peak_infected > report.baseline.peak_infected);
    assert!(report.mean.total_infections > report.baseline.total_infections);
}

/// Criterion 9: a noiseless synthetic series identifies the contact rate
/// to 0.1% relative; 2% observation noise still recovers it within 10%.
#[test]
fn criterion_09_fit_round_trip() {
    let p = table1();
    let initial = default_initial(&p);
    let cfg = IntegratorConfig::new(0.0, 60.0, 0.01).unwrap();
    let times: Vec<f64> = (1..=60).map(|k| k as f64).collect();

    let clean = generate_synthetic(&p, &initial, &times, 0.0, 1, &cfg).unwrap();
    let fitcfg =
        FitConfig::new(vec![ParamName::Epsilon], vec![(0.001, 0.2)], p, initial, 11).unwrap();
    let result = fit(&clean, &fitcfg, &cfg).unwrap();
    let eps_hat = result.theta[0].value;
    println!(
        "criterion 9: noiseless epsilon = {eps_hat:.8} (true 0.03), e_rel = {:.3e}",
        result.e_rel
    );
    assert!(
        (eps_hat - 0.03).abs() / 0.03 <= 1e-3,
        "noiseless recovery {eps_hat}"
    );
    assert!(result.e_rel <= 0.05, "e_rel = {}", result.e_rel);

    let noise_sd = 0.02 * clean.cumulative.last().unwrap();
    let noisy = generate_synthetic(&p, &initial, &times, noise_sd, 2, &cfg).unwrap();
    let result = fit(&noisy, &fitcfg, &cfg).unwrap();
    let eps_noisy = result.theta[0].value;
    println!("criterion 9: noisy epsilon = {eps_noisy:.6} (noise sd = {noise_sd:.2})");
    assert!(
        (eps_noisy - 0.03).abs() / 0.03 <= 0.10,
        "noisy recovery {eps_noisy}"
    );
}

/// Criterion 10: mobility coupling conserves the aggregate population
/// against the closed form, and zero coupling reproduces independent
/// runs bit-exactly.
#[test]
fn criterion_10_mobility() {
    let base = table1();
    let mut regions = Vec::new();
    for lambda in [4.0, 1.5, 2.5] {
        let mut p = base;
        p.lambda = lambda;
        regions.push(p);
    }
    let inits = vec![
        StateVector::new(80.0, 1.0, 1.0, 1.0, 0.0),
        StateVector::new(40.0, 2.0, 0.5, 0.0, 3.0),
        StateVector::new(15.0, 0.0, 1.5, 2.0, 0.0),
    ];
    let n0: f64 = inits.iter().map(StateVector::total_population).sum();
    let cfg = IntegratorConfig::new(0.0, 200.0, 0.01).unwrap();
    let sched = PiecewiseSchedule::constant(base.epsilon0);

    let coupling = vec![
        vec![0.0, 0.04, 0.01],
        vec![0.03, 0.0, 0.07],
        vec![0.02, 0.05, 0.0],
    ];
    let net = NetworkParams::new(coupling, regions.clone()).unwrap();
    let traj = integrate_network(&NetworkState::new(inits.clone()), &net, &cfg, &sched).unwrap();
    let mut aggregate = base;
    aggregate.lambda = 4.0 + 1.5 + 2.5;
    let worst = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            let expect = closed_form_total(n0, &aggregate, t);
            (s.total_population() - expect).abs() / expect
        })
        .fold(0.0, f64::max);
    println!("criterion 10: worst aggregate conservation error {worst:.3e}");
    assert!(worst <= 1e-6);

    let decoupled = NetworkParams::new(vec![vec![0.0; 3]; 3], regions.clone()).unwrap();
    let coupled_zero =
        integrate_network(&NetworkState::new(inits.clone()), &decoupled, &cfg, &sched).unwrap();
    for (r, init) in inits.iter().enumerate() {
        let solo = integrate(init, &regions[r], &cfg, &sched).unwrap();
        assert_eq!(coupled_zero.times, solo.times);
        for (ns, s) in coupled_zero.states.iter().zip(&solo.states) {
            assert_eq!(ns.regions[r], *s, "region {r} not bit-identical");
        }
    }
    println!("criterion 10: zero-coupling runs are bit-identical to solo runs");
}

/// Criterion 11: repeated `mc` and `fit` invocations with fixed seeds
/// produce byte-identical reports.
#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tmp(
        &dir,
        "figpeak.json",
        r#"{"preset":"fig-peak",
            "initial":{"s":50,"q":1,"c":1,"i":1,"r":0},
            "integrator":{"t0":0,"tf":150,"h":0.01}}"#,
    );

    let mc_out_a = dir.path().join("mc_a.json");
    let mc_out_b = dir.path().join("mc_b.json");
    for out in [&mc_out_a, &mc_out_b] {
        let status = sqcir_bin()
            .args(["mc", "--runs", "20", "--seed", "7", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&mc_out_a).unwrap();
    let b = std::fs::read(&mc_out_b).unwrap();
    assert!(!a.is_empty() && a == b, "mc reports differ between runs");
    let csv_a = std::fs::read(dir.path().join("mc_a.runs.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("mc_b.runs.csv")).unwrap();
    assert!(!csv_a.is_empty() && csv_a == csv_b, "mc run CSVs differ");

    let fit_config = write_tmp(
        &dir,
        "table1_fit.json",
        r#"{"preset":"table1","integrator":{"t0":0,"tf":60,"h":0.01}}"#,
    );
    let data = dir.path().join("observed.csv");
    let status = sqcir_bin()
        .args(["gen-data", "--noise", "5", "--seed", "3", "--config"])
        .arg(&fit_config)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());

    let mut fit_outputs = Vec::new();
    for _ in 0..2 {
        let output = sqcir_bin()
            .args(["fit", "--free", "epsilon", "--seed", "5", "--config"])
            .arg(&fit_config)
            .arg("--data")
            .arg(&data)
            .output()
            .unwrap();
        assert!(output.status.success(), "fit failed: {output:?}");
        fit_outputs.push(output.stdout);
    }
    assert!(
        !fit_outputs[0].is_empty() && fit_outputs[0] == fit_outputs[1],
        "fit reports differ between runs"
    );
    println!("criterion 11: mc and fit outputs are byte-identical across reruns");
}
