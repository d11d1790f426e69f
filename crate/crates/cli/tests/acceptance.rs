//! Acceptance suite: every headline requirement exercised at its stated
//! tolerance, one pass/fail line per criterion. The reference sweep and its
//! half-resolution twin are shared across criteria through lazy fixtures.

use frontchannel::config::{build_config, FullConfig, RawConfig};
use frontchannel::runner::{run_sweep, RunReport, SweepReport};
use frontchannel_core::diagnostics::mann_kendall_z;
use frontchannel_core::flow::{thinness_condition, FlowSolver, FlowState};
use frontchannel_core::front::{
    linear_ignition_speed, oracle_1d_speed, solve_wave_speed,
};
use frontchannel_core::grid::{divergence, norm, Grid2D, Norm, VectorField2D, XMode};
use frontchannel_core::reaction::IgnitionNonlinearity;
use frontchannel_core::sim::{decay_initial_field, DecayInit, PrescribedFlow, PrescribedFlowKind, Sim};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

fn tmp_root() -> PathBuf {
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&base).unwrap();
    base
}

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

/// Reference sweep configuration: the 512x64 window, laminar profile
/// initial data, run until the front has travelled 20 channel widths.
fn sweep_config_text(nx: usize, ny: usize) -> String {
    format!(
        "grid.nx = {nx}\n\
         grid.ny = {ny}\n\
         grid.lx = 32\n\
         grid.lambda = 1\n\
         reaction.kind = quadratic-ignition\n\
         reaction.theta0 = 0.25\n\
         reaction.amplitude = 8\n\
         flow.model = stokes-evolution\n\
         flow.nu = 1\n\
         gravity.angle_degrees = 0\n\
         dt.policy = cfl\n\
         dt.safety = 0.4\n\
         time.horizon = 12\n\
         time.min_travel = 20\n\
         time.sample_interval = 0.1\n\
         time.snapshot_interval = 0.5\n\
         sweep.rhos = 0,0.05,0.1,0.2\n\
         sweep.nus = 1\n"
    )
}

fn build_from_text(text: &str) -> FullConfig {
    build_config(&RawConfig::parse(text).expect("config parses")).expect("config validates")
}

struct SweepFixture {
    report: SweepReport,
    runs: Vec<RunReport>,
}

fn load_run_reports(report: &SweepReport, dir: &Path) -> Vec<RunReport> {
    report
        .rows
        .iter()
        .map(|row| {
            let path = dir
                .join(frontchannel::runner::run_dir_name(row.rho, row.nu))
                .join("report.json");
            let text = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("missing {}: {e}", path.display()));
            serde_json::from_str(&text).expect("report parses")
        })
        .collect()
}

fn reference_sweep() -> &'static SweepFixture {
    static FIXTURE: OnceLock<SweepFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let cfg = build_from_text(&sweep_config_text(512, 64));
        let dir = tmp_root().join("reference_sweep");
        let t = Instant::now();
        let report = run_sweep(&cfg, &dir, 4).expect("reference sweep runs");
        println!(
            "[info] reference sweep (512x64, 4 runs) completed in {:.1} min",
            t.elapsed().as_secs_f64() / 60.0
        );
        assert!(
            t.elapsed().as_secs_f64() < 3600.0,
            "reference sweep must finish within one hour"
        );
        assert!(report.failed_runs.is_empty(), "runs failed: {:?}", report.failed_runs);
        let runs = load_run_reports(&report, &dir);
        SweepFixture { report, runs }
    })
}

fn half_sweep() -> &'static SweepFixture {
    static FIXTURE: OnceLock<SweepFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let cfg = build_from_text(&sweep_config_text(256, 32));
        let dir = tmp_root().join("half_sweep");
        let report = run_sweep(&cfg, &dir, 4).expect("half-resolution sweep runs");
        assert!(report.failed_runs.is_empty(), "runs failed: {:?}", report.failed_runs);
        let runs = load_run_reports(&report, &dir);
        SweepFixture { report, runs }
    })
}

fn fitted(report: &SweepReport, name: &str) -> f64 {
    report
        .bounds
        .checks
        .iter()
        .find(|c| c.name == name)
        .and_then(|c| c.fitted)
        .unwrap_or_else(|| panic!("missing fitted constant {name}"))
}

#[test]
fn criterion_01_closed_form_wave_speed() {
    let f = IgnitionNonlinearity::linear(0.25, 1.0).unwrap();
    let t = Instant::now();
    let c0 = solve_wave_speed(&f, 1e-4).expect("speed solves");
    let elapsed = t.elapsed();
    let exact = linear_ignition_speed(0.25, 1.0);
    assert!((exact - 1.5).abs() < 1e-15);
    assert!(
        (c0 - 1.5).abs() <= 1e-3,
        "closed-form speed: got {c0}, want 1.5 +/- 1e-3"
    );
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    pass(
        "criterion 1 (closed-form wave speed)",
        format!("c0 = {c0:.6} vs 1.5, solved in {elapsed:?}"),
    );
}

#[test]
fn criterion_02_shooting_vs_pde_oracle() {
    let f = IgnitionNonlinearity::quadratic(0.25, 8.0).unwrap();
    let c_shoot = solve_wave_speed(&f, 1e-9).unwrap();
    let t = Instant::now();
    let c_pde = oracle_1d_speed(&f, 2048, 14.0, 0.5).expect("1D evolution runs");
    let elapsed = t.elapsed();
    let rel = (c_shoot - c_pde).abs() / c_shoot;
    assert!(rel <= 0.01, "shooting {c_shoot} vs PDE {c_pde}: {rel:.4} > 1%");
    assert!(elapsed.as_secs_f64() < 60.0, "1D oracle took {elapsed:?}, budget 1 min");
    pass(
        "criterion 2 (shooting vs PDE oracle)",
        format!("shooting {c_shoot:.5}, PDE {c_pde:.5}, rel diff {rel:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_03_laminar_burning_rate_identity() {
    let fix = reference_sweep();
    let run = fix.runs.iter().find(|r| r.rho == 0.0).expect("baseline run");
    assert!(run.travel >= 20.0, "front travelled only {}", run.travel);
    let rel = (run.b_bar - run.c0).abs() / run.c0;
    assert!(rel <= 0.05, "Bbar {} vs c0 {}: {rel:.4} > 5%", run.b_bar, run.c0);
    assert!(run.u_bar <= 1e-8, "Ubar = {} should vanish", run.u_bar);
    pass(
        "criterion 3 (laminar burning rate)",
        format!(
            "travel {:.1}, |Bbar - c0|/c0 = {rel:.2e}, Ubar = {:.2e}",
            run.travel, run.u_bar
        ),
    );
}

#[test]
fn criterion_04_explicit_decomposition_inequality() {
    let fix = reference_sweep();
    let mut n_checks = 0usize;
    for run in &fix.runs {
        for c in &run.bounds.checks {
            if c.name.starts_with("buoyancy-gradient-decomposition") {
                assert_eq!(c.pass, Some(true), "{} failed: {c:?}", c.name);
                n_checks += 1;
            }
        }
    }
    assert!(n_checks >= 4 * 10, "expected a snapshot trail, saw {n_checks} checks");
    pass(
        "criterion 4 (explicit decomposition inequality)",
        format!("{n_checks} snapshot checks, all within the explicit bound"),
    );
}

#[test]
fn criterion_05_diffusive_decay() {
    // Zero flow: exponent and the explicit heat-kernel envelope.
    let text = "grid.nx = 600\ngrid.ny = 8\ngrid.lx = 60\ngrid.lambda = 1\n\
                grid.x_mode = periodic\nreaction.theta0 = 0.99\nreaction.amplitude = 1e-9\n\
                time.horizon = 15\ntime.sample_interval = 0.05\n";
    let cfg = build_from_text(text);
    let mut sim = Sim::new(cfg.sim.clone()).unwrap();
    let grid = sim.grid.clone();
    let sigma = 0.5;
    let phi0 = decay_initial_field(&grid, &DecayInit { bumps: vec![(1.0, 0.5, sigma)] });
    let series = sim
        .run_decay(&PrescribedFlow::zero(), &phi0, 15.0, 0.05)
        .unwrap();
    let (alpha, c_hat) = frontchannel_core::diagnostics::decay_analysis(&series).unwrap();
    assert!((alpha - 0.5).abs() <= 0.05, "zero-flow exponent {alpha}");
    let lambda = 1.0;
    for s in series.samples.iter().filter(|s| s.t >= 0.5) {
        let envelope = 1.02 * series.phi0_l1
            / (lambda * (4.0 * std::f64::consts::PI * s.t).sqrt());
        assert!(
            s.linf <= envelope,
            "sup {} above 1.02x heat-kernel envelope {envelope} at t = {}",
            s.linf,
            s.t
        );
    }
    assert!(
        series.max_dissipation_residual <= 1e-8,
        "dissipation residual {}",
        series.max_dissipation_residual
    );
    assert!(series.max_mass_drift <= 1e-12, "mass drift {}", series.max_mass_drift);

    // Cellular flow, amplitude 2: at-least-diffusive decay with a finite,
    // refinement-stable envelope constant.
    let cell = PrescribedFlow {
        kind: PrescribedFlowKind::Cellular,
        amplitude: 2.0,
        wavelength: 2.0,
    };
    let mut cell_results = Vec::new();
    for nx in [600usize, 300] {
        let text = format!(
            "grid.nx = {nx}\ngrid.ny = 8\ngrid.lx = 60\ngrid.lambda = 1\n\
             grid.x_mode = periodic\nreaction.theta0 = 0.99\nreaction.amplitude = 1e-9\n\
             time.horizon = 15\ntime.sample_interval = 0.05\n"
        );
        let cfg = build_from_text(&text);
        let mut sim = Sim::new(cfg.sim.clone()).unwrap();
        let grid = sim.grid.clone();
        let phi0 = decay_initial_field(&grid, &DecayInit { bumps: vec![(1.0, 0.5, sigma)] });
        let series = sim.run_decay(&cell, &phi0, 15.0, 0.05).unwrap();
        assert!(series.max_dissipation_residual <= 1e-8);
        assert!(series.max_mass_drift <= 1e-12, "cellular mass drift {}", series.max_mass_drift);
        let (a, c) = frontchannel_core::diagnostics::decay_analysis(&series).unwrap();
        cell_results.push((a, c));
    }
    let (alpha_cell, c_fine) = cell_results[0];
    let (_, c_coarse) = cell_results[1];
    assert!(alpha_cell >= 0.45, "cellular exponent {alpha_cell}");
    assert!(c_fine.is_finite() && c_fine > 0.0);
    let change = (c_fine - c_coarse).abs() / c_fine;
    assert!(change < 0.2, "envelope constant unstable under refinement: {change:.3}");
    pass(
        "criterion 5 (diffusive decay)",
        format!(
            "zero-flow alpha {alpha:.3} (C {c_hat:.3}), cellular alpha {alpha_cell:.3}, \
             C {c_fine:.3} (refinement change {:.1}%), mass drift {:.1e}",
            100.0 * change,
            series.max_mass_drift
        ),
    );
}

#[test]
fn criterion_06_incompressibility_and_poiseuille() {
    // Divergence across every acceptance run.
    let fix = reference_sweep();
    let worst = fix.runs.iter().map(|r| r.max_div).fold(0.0_f64, f64::max);
    assert!(worst <= 1e-10, "max |div u| = {worst}");

    // Poiseuille: periodic channel, unit force, nu = 1, lambda = 1.
    let g = Grid2D::new(32, 64, 2.0, 1.0, XMode::Periodic);
    let mut solver = FlowSolver::new(&g);
    let mut f = VectorField2D::zeros(&g);
    for v in f.ux.iter_mut() {
        *v = 1.0;
    }
    let state: FlowState = solver.solve_stationary_stokes_faces(&f, 1.0, None).unwrap();
    let max_u = state.u.linf_ux();
    assert!(
        (max_u - 0.125).abs() / 0.125 <= 0.01,
        "Poiseuille max {max_u} vs 0.125"
    );
    assert!(norm(&divergence(&state.u), Norm::LInf) <= 1e-10);
    pass(
        "criterion 6 (incompressibility and Poiseuille)",
        format!("max div {worst:.1e} across sweep, Poiseuille max u = {max_u:.6}"),
    );
}

#[test]
fn criterion_07_scaling_sweep() {
    let fine = reference_sweep();
    let coarse = half_sweep();
    for name in [
        "burning-rate-deviation-constant",
        "average-flow-constant",
        "nusselt-bound-constant",
    ] {
        let cf = fitted(&fine.report, name);
        let cc = fitted(&coarse.report, name);
        assert!(cf.is_finite() && cf >= 0.0, "{name} not finite: {cf}");
        let change = if cf > 0.0 { (cf - cc).abs() / cf } else { (cf - cc).abs() };
        assert!(
            change < 0.2,
            "{name}: {cf:.4} at 512x64 vs {cc:.4} at 256x32 ({:.1}% change)",
            100.0 * change
        );
    }
    assert!(fine.report.bounds.all_hard_pass(), "baseline verdicts must pass");
    pass(
        "criterion 7 (scaling sweep)",
        format!(
            "C_B = {:.4}, C_U = {:.4}, C_N = {:.4}, refinement-stable under one doubling",
            fitted(&fine.report, "burning-rate-deviation-constant"),
            fitted(&fine.report, "average-flow-constant"),
            fitted(&fine.report, "nusselt-bound-constant"),
        ),
    );
}

#[test]
fn criterion_08_front_sandwich() {
    let fix = reference_sweep();
    // Laminar run: the minimal envelope constant stays small even against
    // the exact laminar speed (only discretization drift).
    let laminar = fix.runs.iter().find(|r| r.rho == 0.0).unwrap();
    let sw = laminar.sandwich.as_ref().expect("laminar sandwich exists");
    assert!(sw.c_max <= 1.0, "laminar minimal C = {}", sw.c_max);

    // rho = 0.1 run: boundedness of the envelope constant over the last
    // half, with envelopes translating at the discretization's own laminar
    // speed (the baseline's measured steady speed) so the trend statistic
    // sees coupling-induced drift, not the front solver's speed bias
    // (criteria 1-3 bound that separately).
    let entry = fix
        .report
        .sandwich_discrete
        .iter()
        .find(|e| (e.rho - 0.1).abs() < 1e-12)
        .expect("discrete-speed sandwich entry for rho = 0.1");
    assert!(
        entry.bounded && entry.mann_kendall_z <= 1.6449,
        "upward trend detected: z = {:.3}, C_max = {}",
        entry.mann_kendall_z,
        entry.c_max
    );
    assert!(entry.c_max <= 1.0, "rho = 0.1 minimal C = {}", entry.c_max);
    // The literal laminar-speed series is reported alongside.
    let literal = fix
        .runs
        .iter()
        .find(|r| (r.rho - 0.1).abs() < 1e-12)
        .unwrap()
        .sandwich
        .as_ref()
        .unwrap();
    let late: Vec<f64> = literal
        .c_series
        .iter()
        .skip(literal.c_series.len() / 2)
        .map(|&(_, c)| c)
        .collect();
    let z_lit = mann_kendall_z(&late);
    pass(
        "criterion 8 (front sandwich)",
        format!(
            "laminar C_max = {:.4}; rho=0.1 C_max = {:.4} with z = {:.2} at the discrete \
             laminar speed (literal-speed C_max = {:.4}, z = {z_lit:.2} reported)",
            sw.c_max, entry.c_max, entry.mann_kendall_z, literal.c_max
        ),
    );
}

#[test]
fn criterion_09_thinness_and_stationary_navier_stokes() {
    let v = thinness_condition(0.1, 1.0, 1.0, (0.0, -1.0));
    assert!((v - 0.01393).abs() <= 1e-5, "thinness evaluator gave {v}");

    let fix = reference_sweep();
    let run = fix
        .runs
        .iter()
        .find(|r| (r.rho - 0.1).abs() < 1e-12)
        .unwrap();
    let iters = run
        .picard_iterations
        .expect("Picard ran on the rho = 0.1 snapshot");
    assert!(iters < 50, "Picard took {iters} iterations");
    // The explicit stationary gradient bound is a hard check in each run.
    let mut n_grad = 0usize;
    for c in &run.bounds.checks {
        if c.name.starts_with("stationary-gradient-bound") {
            assert_eq!(c.pass, Some(true), "{}: {c:?}", c.name);
            n_grad += 1;
        }
    }
    assert!(n_grad >= 10);
    pass(
        "criterion 9 (thinness and stationary flow)",
        format!("thinness {v:.6}, Picard {iters} iters, {n_grad} gradient-bound checks pass"),
    );
}

#[test]
fn criterion_10_sweep_determinism() {
    // Byte-identical artifacts for 1 and 4 worker threads, driven through
    // the installed binary.
    let text = "grid.nx = 128\ngrid.ny = 16\ngrid.lx = 24\ngrid.lambda = 1\n\
                reaction.theta0 = 0.25\nreaction.amplitude = 8\nflow.nu = 1\n\
                gravity.angle_degrees = 0\ntime.horizon = 1.5\n\
                time.sample_interval = 0.25\ntime.snapshot_interval = 0.75\n\
                sweep.rhos = 0,0.1\nsweep.nus = 1\n";
    let cfg_path = tmp_root().join("determinism.cfg");
    std::fs::write(&cfg_path, text).unwrap();
    let bin = env!("CARGO_BIN_EXE_frontchannel");
    let out1 = tmp_root().join("det_threads1");
    let out4 = tmp_root().join("det_threads4");
    for (out, threads) in [(&out1, "1"), (&out4, "4")] {
        if out.exists() {
            std::fs::remove_dir_all(out).unwrap();
        }
        let status = std::process::Command::new(bin)
            .args([
                "sweep",
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        assert!(status.success(), "sweep exited with {status:?}");
    }
    let mut compared = 0usize;
    compare_trees(&out1, &out4, &mut compared);
    assert!(compared >= 8, "only {compared} files compared");
    pass(
        "criterion 10 (determinism)",
        format!("{compared} artifacts byte-identical across --threads 1 vs 4"),
    );
}

fn compare_trees(a: &Path, b: &Path, count: &mut usize) {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut names_b: Vec<_> = std::fs::read_dir(b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names_b.sort();
    assert_eq!(names, names_b, "directory listings differ: {a:?} vs {b:?}");
    for name in names {
        let pa = a.join(&name);
        let pb = b.join(&name);
        if pa.is_dir() {
            compare_trees(&pa, &pb, count);
        } else {
            let ba = std::fs::read(&pa).unwrap();
            let bb = std::fs::read(&pb).unwrap();
            assert_eq!(ba, bb, "artifact differs: {}", pa.display());
            *count += 1;
        }
    }
}
