//! Run orchestration: single front runs, decay runs, the parallel
//! `(rho, nu)` sweep with bit-deterministic artifacts, and the verifier
//! that replays every check from a run directory.

use crate::config::{build_config, config_hash, ConfigError, FullConfig, RawConfig};
use crate::outputs;
use frontchannel_core::diagnostics::{
    average_relations_check, buoyancy_decomposition_check, decay_analysis, initial_shift,
    sandwich_check, sweep_scaling_check, time_averages, BoundReport, CheckRecord,
    SandwichReport, SandwichSnapshot, SweepRow,
};
use frontchannel_core::flow::{
    gradient_bound_sides, sup_bound_report, thinness_condition, FlowSolver, SupBoundReport,
};
use frontchannel_core::front::{reconstruct_profile, solve_wave_speed, FrontProfile};
use frontchannel_core::sim::{decay_initial_field, FrontRunResult, Sim, SimState};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerics(String),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerics(m) => write!(f, "numerical failure: {m}"),
            RunError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn numerics<E: fmt::Display>(e: E) -> RunError {
    RunError::Numerics(e.to_string())
}

/// Profile resolution used by every run; fine enough that interpolation
/// error sits far below the envelope tolerances.
pub const PROFILE_SAMPLES: usize = 8001;
pub const SPEED_TOL: f64 = 1e-9;

/// Per-run report written as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub rho: f64,
    pub nu: f64,
    pub c0: f64,
    pub thinness: f64,
    pub t_final: f64,
    pub travel: f64,
    pub b_bar: f64,
    pub n_bar: f64,
    pub u_bar: f64,
    /// Least-squares front speed over the last half of the run: the
    /// discretization's own laminar speed (plus coupling effects).
    pub late_speed: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub max_div: f64,
    pub max_energy_predictor: f64,
    pub max_energy_literal: f64,
    pub bounds: BoundReport,
    pub sandwich: Option<SandwichReport>,
    pub sup_bound: Option<SupBoundReport>,
    pub picard_iterations: Option<usize>,
}

impl RunReport {
    pub fn all_hard_pass(&self) -> bool {
        self.bounds.all_hard_pass()
    }
}

/// Run one coupled front simulation and write all artifacts into `dir`.
pub fn run_front_to_dir(cfg: &FullConfig, dir: &Path) -> Result<RunReport, RunError> {
    let c0 = solve_wave_speed(&cfg.sim.reaction, SPEED_TOL).map_err(numerics)?;
    let profile = reconstruct_profile(c0, &cfg.sim.reaction, PROFILE_SAMPLES).map_err(numerics)?;
    let mut sim = Sim::new(cfg.sim.clone()).map_err(numerics)?;
    let result = sim.run_front(&profile).map_err(numerics)?;
    let report = analyze_front_run(cfg, &mut sim, &profile, &result)?;

    std::fs::create_dir_all(dir)?;
    outputs::write_text(&dir.join("config.txt"), &cfg.canonical)?;
    outputs::write_text(&dir.join("series.csv"), &outputs::series_to_csv(&result.series))?;
    for state in &result.monitors.snapshot_states {
        let name = format!("snap_{:012}.bin", (state.t * 1e6).round() as u64);
        let path = dir.join("snapshots").join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut bytes = Vec::new();
        state.write_checkpoint(&mut bytes).map_err(numerics)?;
        std::fs::write(path, bytes)?;
    }
    outputs::write_json(&dir.join("report.json"), &report)?;
    // Plot data: running burning-rate average and front position.
    outputs::write_text(
        &dir.join("bbar_vs_t.dat"),
        &outputs::two_column_dat(result.series.samples.iter().map(|s| (s.t, s.b_bar))),
    )?;
    outputs::write_text(
        &dir.join("bbar_vs_t.plt"),
        &outputs::plot_script("bbar_vs_t.dat", "running burning-rate average", "t", "Bbar", false),
    )?;
    outputs::write_text(
        &dir.join("front_pos_vs_t.dat"),
        &outputs::two_column_dat(result.series.samples.iter().map(|s| (s.t, s.front_pos))),
    )?;
    outputs::write_text(
        &dir.join("front_pos_vs_t.plt"),
        &outputs::plot_script("front_pos_vs_t.dat", "front position", "t", "position", false),
    )?;
    Ok(report)
}

/// All checks for one completed front run.
fn analyze_front_run(
    cfg: &FullConfig,
    sim: &mut Sim,
    profile: &FrontProfile,
    result: &FrontRunResult,
) -> Result<RunReport, RunError> {
    let rho = cfg.sim.gravity.rho;
    let nu = cfg.sim.nu;
    let lambda = cfg.sim.grid.lambda;
    let (b_bar, n_bar, u_bar) = time_averages(&result.series).map_err(numerics)?;
    let mut bounds = BoundReport::default();

    bounds.push(CheckRecord::hard(
        "incompressibility",
        result.monitors.max_div,
        1e-10,
        "max |div u| after every flow step",
    ));
    bounds.push(CheckRecord::hard(
        "maximum-principle",
        result.monitors.theta_max.max(0.0) - 1.0,
        1e-3,
        "theta stays below 1 + 1e-3",
    ));
    bounds.push(CheckRecord::hard(
        "minimum-principle",
        -result.monitors.theta_min.min(0.0),
        1e-3,
        "theta stays above -1e-3",
    ));
    bounds.push(CheckRecord::hard(
        "energy-dissipation-predictor",
        result.monitors.max_energy_predictor,
        1e-8,
        "backward-Euler dissipation inequality at the viscous predictor, every step",
    ));
    if rho == 0.0 {
        bounds.push(CheckRecord::hard(
            "energy-dissipation-literal",
            result.monitors.max_energy_literal,
            1e-8,
            "projected-velocity energy inequality (provable for unforced runs)",
        ));
        bounds.push(CheckRecord::hard(
            "baseline-burning-rate",
            (b_bar - profile.c0).abs() / profile.c0,
            0.05,
            "laminar run recovers the laminar speed within 5%",
        ));
        bounds.push(CheckRecord::hard(
            "baseline-average-flow",
            u_bar,
            1e-8,
            "rho = 0 flow stays at rest",
        ));
    } else {
        bounds.push(CheckRecord::fitted(
            "energy-dissipation-literal-max",
            result.monitors.max_energy_literal,
            "worst projected-velocity energy residual over the run (reported)",
        ));
    }

    // Explicit-constant decomposition on every stored snapshot.
    for state in &result.monitors.snapshot_states {
        let mut rec = buoyancy_decomposition_check(&state.theta, &cfg.sim.gravity, lambda);
        rec.name = format!("buoyancy-gradient-decomposition@t={:.3}", state.t);
        bounds.push(rec);
    }

    // Explicit gradient bound for the stationary Stokes solve per snapshot.
    for state in &result.monitors.snapshot_states {
        let stokes = sim
            .solver
            .solve_stationary_stokes(&state.theta, &cfg.sim.gravity, nu)
            .map_err(numerics)?;
        let (l, r) = gradient_bound_sides(&stokes, &state.theta, &cfg.sim.gravity);
        bounds.push(CheckRecord::hard(
            &format!("stationary-gradient-bound@t={:.3}", state.t),
            l,
            r + 1e-12 * rho.max(1.0),
            "||grad u|| <= (rho/nu) C_P (C_PW + |g2| lambda/sqrt3) ||grad theta||",
        ));
    }

    bounds.merge(average_relations_check(&result.series, profile.c0));

    // Sandwich: envelopes anchored so the profile's own level-1/2 crossing
    // sits at the measured initial front position.
    let sandwich = if result.snapshots.len() >= 2 {
        let pos0 = result.pos0 - profile_half_crossing(profile);
        let x0 = initial_shift(&result.snapshots[0], profile, pos0).map_err(numerics)?;
        let t_min = 0.2 * result.final_state.t;
        match sandwich_check(&result.series, &result.snapshots, profile, profile.c0, pos0, x0, t_min) {
            Ok(rep) => Some(rep),
            Err(e) => {
                bounds.push(CheckRecord::hard(
                    "front-sandwich-feasible",
                    1.0,
                    0.0,
                    &format!("sandwich infeasible: {e}"),
                ));
                None
            }
        }
    } else {
        None
    };

    // Stationary solves on the final snapshot: sup-norm bookkeeping and,
    // inside the contraction regime, Picard convergence of the stationary
    // Navier-Stokes solve.
    let thinness = thinness_condition(rho, nu, lambda, cfg.sim.gravity.g_hat);
    let (sup_bound, picard_iterations) = if rho > 0.0 {
        let theta = &result.final_state.theta;
        let stokes = sim
            .solver
            .solve_stationary_stokes(theta, &cfg.sim.gravity, nu)
            .map_err(numerics)?;
        let f = frontchannel_core::flow::buoyancy_faces(theta, &cfg.sim.gravity);
        let sup = sup_bound_report(&stokes, &f);
        let picard = if thinness < 1.0 {
            let (_, iters) = sim
                .solver
                .solve_stationary_navier_stokes(theta, &cfg.sim.gravity, nu)
                .map_err(numerics)?;
            bounds.push(CheckRecord::hard(
                "picard-convergence",
                iters as f64,
                50.0,
                "stationary Navier-Stokes Picard iterations under the thinness condition",
            ));
            Some(iters)
        } else {
            None
        };
        (Some(sup), picard)
    } else {
        (None, None)
    };

    Ok(RunReport {
        config_hash: config_hash(&cfg.canonical),
        rho,
        nu,
        c0: profile.c0,
        thinness,
        t_final: result.final_state.t,
        travel: result
            .series
            .last()
            .map(|s| s.front_pos - result.pos0)
            .unwrap_or(0.0),
        b_bar,
        n_bar,
        u_bar,
        late_speed: late_front_speed(&result.series),
        theta_min: result.monitors.theta_min,
        theta_max: result.monitors.theta_max,
        max_div: result.monitors.max_div,
        max_energy_predictor: result.monitors.max_energy_predictor,
        max_energy_literal: result.monitors.max_energy_literal,
        bounds,
        sandwich,
        sup_bound,
        picard_iterations,
    })
}

/// Least-squares slope of the front position over the last half of a
/// series: the steady propagation speed of the discretized system.
pub fn late_front_speed(series: &frontchannel_core::diagnostics::DiagnosticsSeries) -> f64 {
    let s = &series.samples;
    if s.len() < 3 {
        return f64::NAN;
    }
    let t_end = s[s.len() - 1].t;
    let late: Vec<(f64, f64)> = s
        .iter()
        .filter(|r| r.t >= 0.5 * t_end)
        .map(|r| (r.t, r.front_pos))
        .collect();
    let n = late.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, p) in &late {
        sx += t;
        sy += p;
        sxx += t * t;
        sxy += t * p;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Re-run the sandwich analysis from a run directory's stored artifacts
/// with an explicit envelope drift speed.
pub fn sandwich_from_run_dir(
    dir: &Path,
    profile: &FrontProfile,
    drift_speed: f64,
) -> Result<SandwichReport, RunError> {
    let series = outputs::series_from_csv(&std::fs::read_to_string(dir.join("series.csv"))?)?;
    let snap_dir = dir.join("snapshots");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&snap_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    let mut snaps = Vec::new();
    let mut first_state: Option<SimState> = None;
    for path in names {
        let bytes = std::fs::read(&path)?;
        let state = SimState::read_checkpoint(&mut bytes.as_slice()).map_err(numerics)?;
        snaps.push(SandwichSnapshot::from_field(&state.theta, state.t, state.shift));
        if first_state.is_none() {
            first_state = Some(state);
        }
    }
    let first = first_state.ok_or_else(|| RunError::Numerics("no snapshots stored".into()))?;
    let pos0 = frontchannel_core::sim::front_position_of(&first.theta, first.shift)
        .map_err(numerics)?
        - profile_half_crossing(profile);
    let x0 = initial_shift(&snaps[0], profile, pos0).map_err(numerics)?;
    let t_end = snaps.last().map(|s| s.t).unwrap_or(0.0);
    sandwich_check(&series, &snaps, profile, drift_speed, pos0, x0, 0.2 * t_end).map_err(numerics)
}

/// Abscissa where the tabulated profile crosses 1/2.
pub fn profile_half_crossing(p: &FrontProfile) -> f64 {
    for k in 0..p.len() - 1 {
        if p.phi[k] >= 0.5 && p.phi[k + 1] < 0.5 {
            let w = (p.phi[k] - 0.5) / (p.phi[k] - p.phi[k + 1]);
            return p.x_at(k) + w * p.h;
        }
    }
    0.0
}

/// Decay-run report written as `decay_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub config_hash: String,
    pub alpha: f64,
    pub c_hat: f64,
    pub phi0_l1: f64,
    pub max_dissipation_residual: f64,
    pub max_mass_drift: f64,
    pub bounds: BoundReport,
}

pub fn run_decay_to_dir(cfg: &FullConfig, dir: &Path) -> Result<DecayReport, RunError> {
    let mut sim = Sim::new(cfg.sim.clone()).map_err(numerics)?;
    let grid = sim.grid.clone();
    let phi0 = decay_initial_field(&grid, &cfg.decay_init);
    let series = sim
        .run_decay(
            &cfg.decay_flow,
            &phi0,
            cfg.sim.horizon,
            cfg.sim.sample_interval,
        )
        .map_err(numerics)?;
    let (alpha, c_hat) = decay_analysis(&series).map_err(numerics)?;

    let mut bounds = BoundReport::default();
    bounds.push(CheckRecord::hard(
        "implicit-diffusion-dissipation",
        series.max_dissipation_residual,
        1e-8,
        "per-substep L2 dissipation inequality",
    ));
    let nonnegative = cfg.decay_init.bumps.iter().all(|&(a, _, _)| a >= 0.0);
    if cfg.sim.grid.periodic_x && nonnegative {
        bounds.push(CheckRecord::hard(
            "l1-conservation",
            series.max_mass_drift,
            1e-12,
            "relative drift of the conserved mass of nonnegative data",
        ));
    }
    bounds.push(CheckRecord::fitted("decay-exponent", alpha, "late-window log-log slope"));
    bounds.push(CheckRecord::fitted(
        "decay-envelope-constant",
        c_hat,
        "max over samples of sqrt(t)||phi||_inf / ||phi0||_L1",
    ));

    std::fs::create_dir_all(dir)?;
    outputs::write_text(&dir.join("config.txt"), &cfg.canonical)?;
    outputs::write_text(&dir.join("decay_series.csv"), &outputs::decay_to_csv(&series))?;
    outputs::write_text(
        &dir.join("decay_loglog.dat"),
        &outputs::two_column_dat(
            series
                .samples
                .iter()
                .filter(|s| s.t > 0.0 && s.linf > 0.0)
                .map(|s| (s.t, s.linf)),
        ),
    )?;
    outputs::write_text(
        &dir.join("decay_loglog.plt"),
        &outputs::plot_script("decay_loglog.dat", "sup-norm decay", "t", "||phi||_inf", true),
    )?;
    let report = DecayReport {
        config_hash: config_hash(&cfg.canonical),
        alpha,
        c_hat,
        phi0_l1: series.phi0_l1,
        max_dissipation_residual: series.max_dissipation_residual,
        max_mass_drift: series.max_mass_drift,
        bounds,
    };
    outputs::write_json(&dir.join("decay_report.json"), &report)?;
    Ok(report)
}

/// Per-run sandwich summary with envelopes translating at the measured
/// discrete laminar speed of the sweep's own baseline run, isolating
/// coupling-induced drift from the discretization's speed bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteSandwichEntry {
    pub rho: f64,
    pub nu: f64,
    pub c_max: f64,
    pub mann_kendall_z: f64,
    pub bounded: bool,
}

/// Sweep outcome: per-run reports in sweep order plus the combined report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub c0: f64,
    /// Steady front speed of the rho = 0 baseline at this discretization.
    pub baseline_late_speed: f64,
    pub rows: Vec<SweepRow>,
    pub failed_runs: Vec<String>,
    pub bounds: BoundReport,
    pub sandwich_discrete: Vec<DiscreteSandwichEntry>,
}

impl SweepReport {
    pub fn all_hard_pass(&self) -> bool {
        self.failed_runs.is_empty() && self.bounds.all_hard_pass()
    }
}

/// Run the `(rho, nu)` sweep with a bounded worker pool. Results are
/// bit-identical for any parallelism degree: each run writes only inside
/// its own directory and the combined artifacts are assembled in sweep
/// order after all workers join.
pub fn run_sweep(cfg: &FullConfig, out_dir: &Path, threads: usize) -> Result<SweepReport, RunError> {
    let jobs: Vec<(f64, f64)> = cfg
        .sweep_nus
        .iter()
        .flat_map(|&nu| cfg.sweep_rhos.iter().map(move |&rho| (rho, nu)))
        .collect();
    let n_jobs = jobs.len();
    let results: Mutex<Vec<Option<Result<RunReport, String>>>> =
        Mutex::new((0..n_jobs).map(|_| None).collect());
    let next_job = AtomicUsize::new(0);
    let workers = threads.max(1).min(n_jobs.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next_job.fetch_add(1, Ordering::SeqCst);
                if idx >= n_jobs {
                    break;
                }
                let (rho, nu) = jobs[idx];
                let run_cfg = sweep_member_config(cfg, rho, nu);
                let dir = out_dir.join(run_dir_name(rho, nu));
                let outcome = match run_cfg {
                    Ok(rc) => run_front_to_dir(&rc, &dir).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let mut guard = results.lock().unwrap();
                guard[idx] = Some(outcome);
            });
        }
    });

    let results = results.into_inner().unwrap();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut c0 = f64::NAN;
    let mut baseline_late_speed = f64::NAN;
    for (idx, outcome) in results.into_iter().enumerate() {
        let (rho, nu) = jobs[idx];
        match outcome.expect("worker must fill every slot") {
            Ok(report) => {
                c0 = report.c0;
                if rho == 0.0 {
                    baseline_late_speed = report.late_speed;
                }
                rows.push(SweepRow {
                    rho,
                    nu,
                    b_bar: report.b_bar,
                    n_bar: report.n_bar,
                    u_bar: report.u_bar,
                });
                if !report.all_hard_pass() {
                    failed.push(format!("{}: hard check failed", run_dir_name(rho, nu)));
                }
            }
            Err(e) => {
                let msg = format!("{}: {e}", run_dir_name(rho, nu));
                let _ = outputs::write_text(
                    &out_dir.join(run_dir_name(rho, nu)).join("error.txt"),
                    &(e + "\n"),
                );
                failed.push(msg);
            }
        }
    }

    let bounds = if rows.iter().any(|r| r.rho == 0.0) && c0.is_finite() {
        sweep_scaling_check(&rows, c0).map_err(numerics)?
    } else {
        BoundReport::default()
    };

    // Sandwich with envelopes translating at the baseline's measured
    // discrete laminar speed: the coupling-stability reading of the
    // envelope check (the discretization's own speed bias is audited by
    // the laminar criteria).
    let mut sandwich_discrete = Vec::new();
    if baseline_late_speed.is_finite() && c0.is_finite() {
        // Profile recomputed once; only the drift speed differs per entry.
        let member = sweep_member_config(cfg, 0.0, cfg.sweep_nus[0])?;
        let c0_solved = solve_wave_speed(&member.sim.reaction, SPEED_TOL).map_err(numerics)?;
        let profile =
            reconstruct_profile(c0_solved, &member.sim.reaction, PROFILE_SAMPLES)
                .map_err(numerics)?;
        for row in &rows {
            let dir = out_dir.join(run_dir_name(row.rho, row.nu));
            match sandwich_from_run_dir(&dir, &profile, baseline_late_speed) {
                Ok(rep) => sandwich_discrete.push(DiscreteSandwichEntry {
                    rho: row.rho,
                    nu: row.nu,
                    c_max: rep.c_max,
                    mann_kendall_z: rep.mann_kendall_z,
                    bounded: rep.bounded,
                }),
                Err(e) => failed.push(format!(
                    "{}: discrete-speed sandwich: {e}",
                    run_dir_name(row.rho, row.nu)
                )),
            }
        }
    }

    // Summary table in sweep order.
    let mut summary = String::from("rho,nu,Bbar,Nbar,Ubar,Bbar_minus_c0_abs\n");
    for r in &rows {
        use std::fmt::Write as _;
        let _ = writeln!(
            summary,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.rho,
            r.nu,
            r.b_bar,
            r.n_bar,
            r.u_bar,
            (r.b_bar - c0).abs()
        );
    }
    outputs::write_text(&out_dir.join("summary.csv"), &summary)?;
    outputs::write_text(
        &out_dir.join("deviation_vs_eps.dat"),
        &outputs::two_column_dat(rows.iter().filter(|r| r.rho > 0.0).map(|r| {
            let e = r.rho / r.nu + (r.rho / r.nu) * (r.rho / r.nu);
            (e, (r.b_bar - c0).abs())
        })),
    )?;
    outputs::write_text(
        &out_dir.join("deviation_vs_eps.plt"),
        &outputs::plot_script(
            "deviation_vs_eps.dat",
            "burning-rate deviation vs rho/nu + (rho/nu)^2",
            "eps",
            "|Bbar - c0|",
            true,
        ),
    )?;
    let report = SweepReport {
        config_hash: config_hash(&cfg.canonical),
        c0,
        baseline_late_speed,
        rows,
        failed_runs: failed,
        bounds,
        sandwich_discrete,
    };
    outputs::write_json(&out_dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

pub fn run_dir_name(rho: f64, nu: f64) -> String {
    format!("rho_{rho:.4}_nu_{nu:.4}")
}

fn sweep_member_config(cfg: &FullConfig, rho: f64, nu: f64) -> Result<FullConfig, ConfigError> {
    let mut text = String::new();
    // Rebuild from the canonical text with the swept keys replaced, so each
    // member run's config file stands alone.
    for line in cfg.canonical.lines() {
        let key = line.split('=').next().unwrap_or("").trim();
        if key == "gravity.rho" || key == "flow.nu" || key.starts_with("sweep.") {
            continue;
        }
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(&format!("gravity.rho = {rho}\n"));
    text.push_str(&format!("flow.nu = {nu}\n"));
    let raw = RawConfig::parse(&text)?;
    build_config(&raw)
}

/// Replay all checks from a run directory: series invariants, snapshot
/// inequalities, sandwich, baseline verdicts. Decay directories are
/// re-analyzed from their stored series. Returns the report and a
/// human-readable table.
pub fn verify_run_dir(dir: &Path) -> Result<(BoundReport, String), RunError> {
    let canonical = std::fs::read_to_string(dir.join("config.txt"))?;
    let raw = RawConfig::parse(&canonical)?;
    let cfg = build_config(&raw)?;
    if dir.join("decay_series.csv").is_file() {
        return verify_decay_dir(dir, &cfg);
    }
    let series_text = std::fs::read_to_string(dir.join("series.csv"))?;
    let series = outputs::series_from_csv(&series_text)?;
    let c0 = solve_wave_speed(&cfg.sim.reaction, SPEED_TOL).map_err(numerics)?;
    let profile = reconstruct_profile(c0, &cfg.sim.reaction, PROFILE_SAMPLES).map_err(numerics)?;

    let mut bounds = BoundReport::default();
    let max_div = series.samples.iter().map(|s| s.div_max).fold(0.0_f64, f64::max);
    bounds.push(CheckRecord::hard(
        "incompressibility",
        max_div,
        1e-10,
        "max |div u| over all sampled steps",
    ));

    // Snapshot checks.
    let mut snaps: Vec<SimState> = Vec::new();
    let snap_dir = dir.join("snapshots");
    if snap_dir.is_dir() {
        let mut names: Vec<PathBuf> = std::fs::read_dir(&snap_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        names.sort();
        for path in names {
            let bytes = std::fs::read(&path)?;
            let state = SimState::read_checkpoint(&mut bytes.as_slice()).map_err(numerics)?;
            snaps.push(state);
        }
    }
    let grid = cfg.sim.grid.build();
    let mut solver = FlowSolver::new(&grid);
    for state in &snaps {
        let mut rec =
            buoyancy_decomposition_check(&state.theta, &cfg.sim.gravity, cfg.sim.grid.lambda);
        rec.name = format!("buoyancy-gradient-decomposition@t={:.3}", state.t);
        bounds.push(rec);
        let stokes = solver
            .solve_stationary_stokes(&state.theta, &cfg.sim.gravity, cfg.sim.nu)
            .map_err(numerics)?;
        let (l, r) = gradient_bound_sides(&stokes, &state.theta, &cfg.sim.gravity);
        bounds.push(CheckRecord::hard(
            &format!("stationary-gradient-bound@t={:.3}", state.t),
            l,
            r + 1e-12 * cfg.sim.gravity.rho.max(1.0),
            "||grad u|| bound for the stationary Stokes solve",
        ));
        let mn = state.theta.min();
        let mx = state.theta.max();
        bounds.push(CheckRecord::hard(
            &format!("theta-range@t={:.3}", state.t),
            (mx - 1.0).max(-mn).max(0.0),
            1e-3,
            "temperature stays within the overshoot budget",
        ));
    }

    if cfg.sim.gravity.rho == 0.0 {
        if let Ok((b_bar, _, u_bar)) = time_averages(&series) {
            bounds.push(CheckRecord::hard(
                "baseline-burning-rate",
                (b_bar - c0).abs() / c0,
                0.05,
                "laminar run recovers the laminar speed within 5%",
            ));
            bounds.push(CheckRecord::hard("baseline-average-flow", u_bar, 1e-8, ""));
        }
    }
    bounds.merge(average_relations_check(&series, c0));

    // Sandwich from the stored snapshots.
    if snaps.len() >= 2 {
        let sandwich_snaps: Vec<SandwichSnapshot> = snaps
            .iter()
            .map(|s| SandwichSnapshot::from_field(&s.theta, s.t, s.shift))
            .collect();
        let pos0 = frontchannel_core::sim::front_position_of(&snaps[0].theta, snaps[0].shift)
            .map_err(numerics)?
            - profile_half_crossing(&profile);
        let x0 = initial_shift(&sandwich_snaps[0], &profile, pos0).map_err(numerics)?;
        let t_end = snaps.last().unwrap().t;
        match sandwich_check(&series, &sandwich_snaps, &profile, profile.c0, pos0, x0, 0.2 * t_end) {
            Ok(rep) => {
                bounds.push(CheckRecord::fitted(
                    "sandwich-envelope-constant",
                    rep.c_max,
                    "max over snapshots of the minimal envelope constant",
                ));
            }
            Err(e) => {
                bounds.push(CheckRecord::hard(
                    "front-sandwich-feasible",
                    1.0,
                    0.0,
                    &format!("sandwich infeasible: {e}"),
                ));
            }
        }
    }

    let table = render_table(&bounds);
    outputs::write_json(&dir.join("verify.json"), &bounds)?;
    Ok((bounds, table))
}

/// Decay-directory verification: re-fit the decay law from the stored
/// series and re-check the conservation column.
fn verify_decay_dir(dir: &Path, cfg: &FullConfig) -> Result<(BoundReport, String), RunError> {
    let text = std::fs::read_to_string(dir.join("decay_series.csv"))?;
    let samples = outputs::decay_from_csv(&text)?;
    let mut series = frontchannel_core::diagnostics::DecaySeries {
        samples,
        ..Default::default()
    };
    series.phi0_l1 = series.samples.first().map(|s| s.l1).unwrap_or(0.0);
    let mut bounds = BoundReport::default();
    match decay_analysis(&series) {
        Ok((alpha, c_hat)) => {
            bounds.push(CheckRecord::fitted("decay-exponent", alpha, "replayed fit"));
            bounds.push(CheckRecord::fitted("decay-envelope-constant", c_hat, "replayed fit"));
        }
        Err(e) => {
            bounds.push(CheckRecord::hard(
                "decay-fit-feasible",
                1.0,
                0.0,
                &format!("{e}"),
            ));
        }
    }
    let nonnegative = cfg.decay_init.bumps.iter().all(|&(a, _, _)| a >= 0.0);
    if cfg.sim.grid.periodic_x && nonnegative {
        let m0 = series.samples.first().map(|s| s.mass).unwrap_or(0.0);
        let drift = series
            .samples
            .iter()
            .map(|s| (s.mass - m0).abs() / m0.abs().max(1e-300))
            .fold(0.0_f64, f64::max);
        bounds.push(CheckRecord::hard(
            "l1-conservation",
            drift,
            1e-12,
            "mass column drift across the stored series",
        ));
    }
    let table = render_table(&bounds);
    outputs::write_json(&dir.join("verify.json"), &bounds)?;
    Ok((bounds, table))
}

/// Human-readable verdict table.
pub fn render_table(report: &BoundReport) -> String {
    let mut out = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(
        out,
        "{:<52} {:>13} {:>13} {:>8}",
        "check", "left/value", "right", "verdict"
    );
    for c in &report.checks {
        if c.explicit {
            let _ = writeln!(
                out,
                "{:<52} {:>13.4e} {:>13.4e} {:>8}",
                c.name,
                c.left.unwrap_or(f64::NAN),
                c.right.unwrap_or(f64::NAN),
                if c.pass == Some(true) { "pass" } else { "FAIL" }
            );
        } else {
            let _ = writeln!(
                out,
                "{:<52} {:>13.4e} {:>13} {:>8}",
                c.name,
                c.fitted.unwrap_or(f64::NAN),
                "-",
                "fitted"
            );
        }
    }
    out
}
