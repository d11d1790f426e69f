//! Command-line front end: `front`, `simulate`, `decay`, `sweep`, `verify`.
//!
//! Exit codes: 0 success, 1 hard-check failure, 2 usage/config error,
//! 3 numerical failure.

use frontchannel::config::{self, build_config, ConfigError, RawConfig};
use frontchannel::outputs;
use frontchannel::runner::{
    self, run_decay_to_dir, run_front_to_dir, run_sweep, verify_run_dir, RunError,
};
use frontchannel_core::front::{reconstruct_profile, solve_wave_speed};
use frontchannel_core::reaction::IgnitionNonlinearity;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
frontchannel - reactive front laboratory for buoyancy-coupled channel flow

USAGE:
    frontchannel <SUBCOMMAND> [FLAGS]

SUBCOMMANDS:
    front      solve the planar traveling wave: speed and profile
    simulate   run one coupled front simulation
    decay      run an advection-diffusion decay experiment
    sweep      run the (rho, nu) sweep and the scaling report
    verify     replay all checks from a run directory

GLOBAL FLAGS:
    --config PATH     key = value configuration file
    --out DIR         output directory (default: out)
    --threads N       sweep parallelism (default: env FRONTCHANNEL_THREADS or 1)
    --seed N          perturbation noise seed (front-like initial data only)

front FLAGS:
    --kind K          quadratic-ignition | linear-ignition (default quadratic-ignition)
    --theta0 X        ignition threshold in (0,1) (default 0.25)
    --amplitude A     reaction amplitude (default 8)
    --tol T           wave-speed bisection tolerance (default 1e-9)

verify FLAGS:
    --run DIR         run directory to verify (also accepted positionally)

CONFIG KEYS (defaults in parentheses):
    grid.nx (512)  grid.ny (64)  grid.lx (32)  grid.lambda (1)
    grid.x_mode (front|periodic; front)
    reaction.kind (quadratic-ignition|linear-ignition|tabulated)
    reaction.theta0 (0.25)  reaction.amplitude (8)  reaction.table_path
    flow.model (stokes-evolution|stokes-stationary|navier-stokes-stationary)
    flow.nu (1)  flow.resolve_every (1)
    gravity.rho (0)  gravity.angle_degrees (0; g = (sin a, -cos a))
    dt.policy (cfl|fixed; cfl)  dt.safety (0.4)  dt.value
    time.horizon (10)  time.sample_interval (0.25)
    time.min_travel (unset)  time.snapshot_interval (unset)
    sim.recenter_threshold (0.6)  sim.recenter_target (0.4)
    init.center_frac (0.4)  init.perturb_amplitude (0)  init.perturb_width (1)
    decay.flow (zero|cellular; zero)  decay.flow_amplitude (0)
    decay.flow_wavelength (2)  decay.bumps (amp:center:sigma[;...]; 1:0.5:0.5)
    sweep.rhos (0,0.05,0.1,0.2)  sweep.nus (1)

EXIT CODES:
    0 success    1 hard-check failure    2 usage/config error    3 numerical failure
";

struct Cli {
    subcommand: String,
    config: Option<PathBuf>,
    out: PathBuf,
    threads: usize,
    seed: Option<u64>,
    kind: String,
    theta0: f64,
    amplitude: f64,
    tol: f64,
    run_dir: Option<PathBuf>,
}

fn parse_args(args: &[String]) -> Result<Cli, String> {
    if args.is_empty() {
        return Err("missing subcommand".into());
    }
    let subcommand = args[0].clone();
    let default_threads = std::env::var("FRONTCHANNEL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    let mut cli = Cli {
        subcommand,
        config: None,
        out: PathBuf::from("out"),
        threads: default_threads,
        seed: None,
        kind: "quadratic-ignition".into(),
        theta0: 0.25,
        amplitude: 8.0,
        tol: 1e-9,
        run_dir: None,
    };
    let mut i = 1;
    while i < args.len() {
        let flag = args[i].as_str();
        let mut take = |name: &str| -> Result<String, String> {
            i += 1;
            args.get(i)
                .cloned()
                .ok_or_else(|| format!("flag {name} needs a value"))
        };
        match flag {
            "--config" => cli.config = Some(PathBuf::from(take("--config")?)),
            "--out" => cli.out = PathBuf::from(take("--out")?),
            "--threads" => {
                cli.threads = take("--threads")?
                    .parse()
                    .map_err(|_| "--threads needs an integer".to_string())?
            }
            "--seed" => {
                cli.seed = Some(
                    take("--seed")?
                        .parse()
                        .map_err(|_| "--seed needs an integer".to_string())?,
                )
            }
            "--kind" => cli.kind = take("--kind")?,
            "--theta0" => {
                cli.theta0 = take("--theta0")?
                    .parse()
                    .map_err(|_| "--theta0 needs a number".to_string())?
            }
            "--amplitude" => {
                cli.amplitude = take("--amplitude")?
                    .parse()
                    .map_err(|_| "--amplitude needs a number".to_string())?
            }
            "--tol" => {
                cli.tol = take("--tol")?
                    .parse()
                    .map_err(|_| "--tol needs a number".to_string())?
            }
            "--run" => cli.run_dir = Some(PathBuf::from(take("--run")?)),
            "--help" | "-h" => return Err("help".into()),
            other => {
                if cli.subcommand == "verify" && !other.starts_with("--") && cli.run_dir.is_none()
                {
                    cli.run_dir = Some(PathBuf::from(other));
                } else {
                    return Err(format!("unknown flag '{other}'"));
                }
            }
        }
        i += 1;
    }
    Ok(cli)
}

fn load_config(cli: &Cli) -> Result<config::FullConfig, ConfigError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        ConfigError::Validation("this subcommand needs --config PATH".into())
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let raw = RawConfig::parse(&text)?;
    let mut cfg = build_config(&raw)?;
    if let Some(seed) = cli.seed {
        cfg.sim.front_init.seed = seed;
    }
    Ok(cfg)
}

fn cmd_front(cli: &Cli) -> Result<ExitCode, RunError> {
    let f = match cli.kind.as_str() {
        "quadratic-ignition" => IgnitionNonlinearity::quadratic(cli.theta0, cli.amplitude),
        "linear-ignition" => IgnitionNonlinearity::linear(cli.theta0, cli.amplitude),
        other => {
            return Err(RunError::Config(ConfigError::Validation(format!(
                "--kind: unknown kind '{other}'"
            ))))
        }
    }
    .map_err(|e| RunError::Config(ConfigError::Validation(e.to_string())))?;
    let c0 = solve_wave_speed(&f, cli.tol).map_err(|e| RunError::Numerics(e.to_string()))?;
    let p = reconstruct_profile(c0, &f, runner::PROFILE_SAMPLES)
        .map_err(|e| RunError::Numerics(e.to_string()))?;
    // Max interior ODE residual by central differences, away from the
    // ignition kink where the wave is only C^2.
    let mut residual: f64 = 0.0;
    for k in 1..p.len() - 1 {
        if k + 2 >= p.anchor && k <= p.anchor + 2 {
            continue;
        }
        let d1 = (p.phi[k + 1] - p.phi[k - 1]) / (2.0 * p.h);
        let d2 = (p.phi[k + 1] - 2.0 * p.phi[k] + p.phi[k - 1]) / (p.h * p.h);
        residual = residual.max((-p.c0 * d1 - d2 - f.evaluate(p.phi[k])).abs());
    }
    std::fs::create_dir_all(&cli.out)?;
    let dat = outputs::two_column_dat((0..p.len()).map(|k| (p.x_at(k), p.phi[k])));
    outputs::write_text(&cli.out.join("profile.dat"), &dat)?;
    println!(
        "{}",
        serde_json::json!({ "c0": p.c0, "residual_norm": residual })
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(c) => c,
        Err(msg) => {
            if msg == "help" {
                print!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {msg}");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };

    let outcome: Result<ExitCode, RunError> = match cli.subcommand.as_str() {
        "front" => cmd_front(&cli),
        "simulate" => load_config(&cli).map_err(RunError::Config).and_then(|cfg| {
            let report = run_front_to_dir(&cfg, &cli.out)?;
            println!(
                "simulate: t = {:.3}, travel = {:.3}, Bbar = {:.6}, Ubar = {:.3e}",
                report.t_final, report.travel, report.b_bar, report.u_bar
            );
            println!("{}", runner::render_table(&report.bounds));
            Ok(if report.all_hard_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }),
        "decay" => load_config(&cli).map_err(RunError::Config).and_then(|cfg| {
            let report = run_decay_to_dir(&cfg, &cli.out)?;
            println!(
                "decay: alpha = {:.4}, C_hat = {:.4}, dissipation residual = {:.2e}",
                report.alpha, report.c_hat, report.max_dissipation_residual
            );
            println!("{}", runner::render_table(&report.bounds));
            Ok(if report.bounds.all_hard_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }),
        "sweep" => load_config(&cli).map_err(RunError::Config).and_then(|cfg| {
            let report = run_sweep(&cfg, &cli.out, cli.threads)?;
            println!("sweep: c0 = {:.6}, {} rows", report.c0, report.rows.len());
            println!("{}", runner::render_table(&report.bounds));
            for f in &report.failed_runs {
                eprintln!("failed: {f}");
            }
            Ok(if report.all_hard_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }),
        "verify" => {
            let dir = cli.run_dir.clone().unwrap_or_else(|| cli.out.clone());
            verify_run_dir(&dir).map(|(bounds, table)| {
                print!("{table}");
                if bounds.all_hard_pass() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            })
        }
        other => {
            eprintln!("error: unknown subcommand '{other}'");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };

    match outcome {
        Ok(code) => code,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(RunError::Io(e)) => {
            eprintln!("error: io: {e}");
            ExitCode::from(3)
        }
        Err(RunError::Numerics(e)) => {
            eprintln!("error: numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}
