//! Flat `key = value` configuration parsing with full validation: unknown
//! keys are rejected, duplicates are errors, and every cross-field
//! invariant is checked before a simulation is built.

use frontchannel_core::flow::GravityForcing;
use frontchannel_core::reaction::IgnitionNonlinearity;
use frontchannel_core::sim::{
    DecayInit, DtPolicy, FlowModel, FrontInit, GridSpec, PrescribedFlow, PrescribedFlowKind,
    SimConfig,
};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Validation(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KNOWN_KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.lambda",
    "grid.x_mode",
    "reaction.kind",
    "reaction.theta0",
    "reaction.amplitude",
    "reaction.table_path",
    "flow.model",
    "flow.nu",
    "flow.resolve_every",
    "gravity.rho",
    "gravity.angle_degrees",
    "dt.policy",
    "dt.safety",
    "dt.value",
    "time.horizon",
    "time.sample_interval",
    "time.min_travel",
    "time.snapshot_interval",
    "sim.recenter_threshold",
    "sim.recenter_target",
    "init.center_frac",
    "init.perturb_amplitude",
    "init.perturb_width",
    "decay.flow",
    "decay.flow_amplitude",
    "decay.flow_wavelength",
    "decay.bumps",
    "sweep.rhos",
    "sweep.nus",
];

/// Key-value view of a parsed config file, with provenance for errors.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parse `key = value` lines; `#` starts a comment; blank lines are
    /// skipped; unknown and duplicate keys are parse errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: "empty key or value".into(),
                });
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("duplicate key '{key}'"),
                });
            }
            entries.insert(key, value);
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError::Validation(format!("{key}: cannot parse '{v}' as a number"))
            }),
        }
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::Validation(format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                ConfigError::Validation(format!("{key}: cannot parse '{v}' as an integer"))
            }),
        }
    }

    /// Canonical text used for hashing and reproduction: sorted keys,
    /// normalized spacing.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Everything the CLI needs from a config file.
#[derive(Debug, Clone)]
pub struct FullConfig {
    pub sim: SimConfig,
    pub decay_init: DecayInit,
    pub decay_flow: PrescribedFlow,
    pub sweep_rhos: Vec<f64>,
    pub sweep_nus: Vec<f64>,
    pub canonical: String,
}

pub fn build_config(raw: &RawConfig) -> Result<FullConfig, ConfigError> {
    let bad = |m: String| ConfigError::Validation(m);

    let grid = GridSpec {
        nx: raw.usize_or("grid.nx", 512)?,
        ny: raw.usize_or("grid.ny", 64)?,
        lx: raw.f64_or("grid.lx", 32.0)?,
        lambda: raw.f64_or("grid.lambda", 1.0)?,
        periodic_x: match raw.get("grid.x_mode").unwrap_or("front") {
            "front" => false,
            "periodic" => true,
            other => return Err(bad(format!("grid.x_mode: unknown mode '{other}'"))),
        },
    };
    if grid.ny < 8 {
        return Err(bad("grid.ny must be at least 8".into()));
    }
    if grid.lx <= 0.0 || grid.lambda <= 0.0 {
        return Err(bad("grid extents must be positive".into()));
    }

    let theta0 = raw.f64_or("reaction.theta0", 0.25)?;
    let amplitude = raw.f64_or("reaction.amplitude", 8.0)?;
    let reaction = match raw.get("reaction.kind").unwrap_or("quadratic-ignition") {
        "quadratic-ignition" => IgnitionNonlinearity::quadratic(theta0, amplitude)
            .map_err(|e| bad(e.to_string()))?,
        "linear-ignition" => {
            IgnitionNonlinearity::linear(theta0, amplitude).map_err(|e| bad(e.to_string()))?
        }
        "tabulated" => {
            let path = raw
                .get("reaction.table_path")
                .ok_or_else(|| bad("reaction.kind = tabulated needs reaction.table_path".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(format!("reaction.table_path: {e}")))?;
            let mut table = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut parts = line.split(',');
                let th: f64 = parts
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| bad(format!("reaction table line {}: bad theta", i + 1)))?;
                let fv: f64 = parts
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| bad(format!("reaction table line {}: bad rate", i + 1)))?;
                table.push((th, fv));
            }
            IgnitionNonlinearity::tabulated(theta0, table).map_err(|e| bad(e.to_string()))?
        }
        other => return Err(bad(format!("reaction.kind: unknown kind '{other}'"))),
    };

    let flow_model = match raw.get("flow.model").unwrap_or("stokes-evolution") {
        "stokes-evolution" => FlowModel::StokesEvolution,
        "stokes-stationary" => FlowModel::StokesStationary,
        "navier-stokes-stationary" => FlowModel::NavierStokesStationary,
        other => return Err(bad(format!("flow.model: unknown model '{other}'"))),
    };
    let nu = raw.f64_or("flow.nu", 1.0)?;
    if nu <= 0.0 {
        return Err(bad("flow.nu must be positive".into()));
    }

    let rho = raw.f64_or("gravity.rho", 0.0)?;
    if rho < 0.0 {
        return Err(bad("gravity.rho must be nonnegative".into()));
    }
    let angle = raw.f64_or("gravity.angle_degrees", 0.0)?;
    let gravity = GravityForcing::from_angle_degrees(rho, angle);
    if rho > 0.0 && gravity.g2() == 0.0 {
        return Err(bad(
            "gravity.rho > 0 requires g2 != 0 (slanted channel); angle_degrees = +/-90 is axis-aligned"
                .into(),
        ));
    }

    let dt = match raw.get("dt.policy").unwrap_or("cfl") {
        "cfl" => DtPolicy::Cfl { safety: raw.f64_or("dt.safety", 0.4)? },
        "fixed" => DtPolicy::Fixed {
            dt: raw
                .f64_opt("dt.value")?
                .ok_or_else(|| bad("dt.policy = fixed needs dt.value".into()))?,
        },
        other => return Err(bad(format!("dt.policy: unknown policy '{other}'"))),
    };

    let sim = SimConfig {
        grid,
        reaction,
        flow_model,
        nu,
        gravity,
        dt,
        horizon: raw.f64_or("time.horizon", 10.0)?,
        min_travel: raw.f64_opt("time.min_travel")?,
        recenter_threshold: raw.f64_or("sim.recenter_threshold", 0.6)?,
        recenter_target: raw.f64_or("sim.recenter_target", 0.4)?,
        flow_resolve_every: raw.usize_or("flow.resolve_every", 1)?,
        sample_interval: raw.f64_or("time.sample_interval", 0.25)?,
        snapshot_interval: raw.f64_opt("time.snapshot_interval")?,
        front_init: FrontInit {
            center_frac: raw.f64_or("init.center_frac", 0.4)?,
            perturb_amplitude: raw.f64_or("init.perturb_amplitude", 0.0)?,
            perturb_width: raw.f64_or("init.perturb_width", 1.0)?,
            seed: 0,
        },
    };
    sim.validate().map_err(ConfigError::Validation)?;

    let decay_flow = PrescribedFlow {
        kind: match raw.get("decay.flow").unwrap_or("zero") {
            "zero" => PrescribedFlowKind::Zero,
            "cellular" => PrescribedFlowKind::Cellular,
            other => return Err(bad(format!("decay.flow: unknown kind '{other}'"))),
        },
        amplitude: raw.f64_or("decay.flow_amplitude", 0.0)?,
        wavelength: raw.f64_or("decay.flow_wavelength", 2.0)?,
    };
    let decay_init = DecayInit {
        bumps: match raw.get("decay.bumps") {
            None => vec![(1.0, 0.5, 0.5)],
            Some(spec) => {
                let mut bumps = Vec::new();
                for part in spec.split(';') {
                    let fields: Vec<&str> = part.split(':').collect();
                    if fields.len() != 3 {
                        return Err(bad(format!(
                            "decay.bumps component '{part}': need amp:center_frac:sigma"
                        )));
                    }
                    let vals: Result<Vec<f64>, _> =
                        fields.iter().map(|s| s.trim().parse::<f64>()).collect();
                    let vals =
                        vals.map_err(|_| bad(format!("decay.bumps: bad number in '{part}'")))?;
                    bumps.push((vals[0], vals[1], vals[2]));
                }
                bumps
            }
        },
    };

    let parse_list = |key: &str, default: Vec<f64>| -> Result<Vec<f64>, ConfigError> {
        match raw.get(key) {
            None => Ok(default),
            Some(spec) => spec
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("{key}: bad number '{s}'")))
                })
                .collect(),
        }
    };
    let sweep_rhos = parse_list("sweep.rhos", vec![0.0, 0.05, 0.1, 0.2])?;
    let sweep_nus = parse_list("sweep.nus", vec![1.0])?;
    if sweep_nus.iter().any(|&v| v <= 0.0) {
        return Err(bad("sweep.nus must all be positive".into()));
    }
    if sweep_rhos.iter().any(|&v| v < 0.0) {
        return Err(bad("sweep.rhos must be nonnegative".into()));
    }

    Ok(FullConfig {
        sim,
        decay_init,
        decay_flow,
        sweep_rhos,
        sweep_nus,
        canonical: raw.canonical_text(),
    })
}

/// FNV-1a digest of the canonicalized config text.
pub fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
