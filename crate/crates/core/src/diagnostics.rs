//! Diagnostics of the coupled runs (burning rate, Dirichlet energy of the
//! temperature, flow sup-norm, their running time averages) and the
//! verdict machinery for every checkable estimate: explicit-constant
//! inequalities pass/fail, abstract-constant inequalities get fitted
//! constants plus refinement-stability metrics.

use crate::flow::GravityForcing;
use crate::front::FrontProfile;
use crate::grid::{cross_section_average, grad_norm_sq, norm, Kahan, Norm, ScalarField};
use crate::reaction::IgnitionNonlinearity;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("field is identically zero")]
    ZeroField,
    #[error("decay fit needs >= 10 samples spanning a decade, got {samples} over {decades:.2} decades")]
    InsufficientDecade { samples: usize, decades: f64 },
    #[error("sweep is missing the rho = 0 baseline row")]
    MissingBaseline,
    #[error("no envelope constant in the search box traps the snapshot at t = {t}")]
    SandwichInfeasible { t: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

/// One sampled row of the coupled-run diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsSample {
    pub t: f64,
    /// Bulk burning rate `B(t)`.
    pub b: f64,
    /// Nusselt number `N(t)`.
    pub n: f64,
    /// `||u||_inf`.
    pub u_inf: f64,
    /// Running averages over `[0, t]`.
    pub b_bar: f64,
    pub n_bar: f64,
    pub u_bar: f64,
    /// Absolute front position (window shift included).
    pub front_pos: f64,
    /// `int theta dx dy`.
    pub mass: f64,
    pub l2_theta: f64,
    pub grad_theta_l2: f64,
    pub grad_u_l2: f64,
    pub div_max: f64,
}

/// Time series of coupled-run diagnostics with strictly increasing times.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub samples: Vec<DiagnosticsSample>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, s: DiagnosticsSample) {
        if let Some(last) = self.samples.last() {
            assert!(s.t > last.t, "sample times must be strictly increasing");
        }
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&DiagnosticsSample> {
        self.samples.last()
    }

    /// Linear interpolation of the running flow average at time `t`.
    pub fn u_bar_at(&self, t: f64) -> f64 {
        interp_column(&self.samples, t, |s| s.u_bar)
    }
}

fn interp_column(
    samples: &[DiagnosticsSample],
    t: f64,
    col: impl Fn(&DiagnosticsSample) -> f64,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    if t <= samples[0].t {
        return col(&samples[0]);
    }
    if t >= samples[samples.len() - 1].t {
        return col(&samples[samples.len() - 1]);
    }
    let k = samples.partition_point(|s| s.t <= t);
    let (a, b) = (&samples[k - 1], &samples[k]);
    let w = (t - a.t) / (b.t - a.t);
    col(a) * (1.0 - w) + col(b) * w
}

/// Bulk burning rate `B = (1/lambda) int f(theta)`.
pub fn burning_rate(theta: &ScalarField, f: &IgnitionNonlinearity, lambda: f64) -> f64 {
    let mut acc = crate::grid::LaneSum::new();
    for v in &theta.data {
        acc.add(f.evaluate(*v));
    }
    acc.sum() * theta.grid.cell_area() / lambda
}

/// Nusselt number `N = (1/lambda) ||grad theta||^2` by face-gradient
/// quadrature.
pub fn nusselt(theta: &ScalarField, lambda: f64) -> f64 {
    grad_norm_sq(theta) / lambda
}

/// Final-time trapezoidal averages `(Bbar, Nbar, Ubar)` of a series.
pub fn time_averages(series: &DiagnosticsSeries) -> Result<(f64, f64, f64), DiagnosticsError> {
    let s = &series.samples;
    if s.len() < 2 {
        return Err(DiagnosticsError::TooFewSamples { need: 2, got: s.len() });
    }
    let mut ib = 0.0;
    let mut inn = 0.0;
    let mut iu = 0.0;
    // The first sample anchors the quadrature on [0, t0] with a frozen
    // integrand when it does not sit at zero.
    let t0 = s[0].t;
    ib += s[0].b * t0;
    inn += s[0].n * t0;
    iu += s[0].u_inf * t0;
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        ib += 0.5 * dt * (w[0].b + w[1].b);
        inn += 0.5 * dt * (w[0].n + w[1].n);
        iu += 0.5 * dt * (w[0].u_inf + w[1].u_inf);
    }
    let t = s[s.len() - 1].t;
    Ok((ib / t, inn / t, iu / t))
}

/// Verdict record for one checked inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Measured left/right sides of explicit-constant checks; fitted
    /// checks carry neither.
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// True when the inequality carries explicit constants and is therefore
    /// a hard pass/fail; fitted-constant checks leave this false.
    pub explicit: bool,
    pub pass: Option<bool>,
    /// Fitted constant for abstract-constant inequalities.
    pub fitted: Option<f64>,
    /// Relative change of the fitted constant under one grid doubling, when
    /// a refinement pair was run.
    pub refinement_change: Option<f64>,
    pub note: String,
}

impl CheckRecord {
    pub fn hard(name: &str, left: f64, right: f64, note: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            left: Some(left),
            right: Some(right),
            explicit: true,
            pass: Some(left <= right),
            fitted: None,
            refinement_change: None,
            note: note.to_string(),
        }
    }

    pub fn fitted(name: &str, value: f64, note: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            left: None,
            right: None,
            explicit: false,
            pass: None,
            fitted: Some(value),
            refinement_change: None,
            note: note.to_string(),
        }
    }
}

/// Collection of verdicts; hard failures make a run fail.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundReport {
    pub checks: Vec<CheckRecord>,
}

impl BoundReport {
    pub fn push(&mut self, c: CheckRecord) {
        // Every explicit check must carry a verdict; fitted checks a value.
        debug_assert_eq!(c.explicit, c.pass.is_some());
        self.checks.push(c);
    }

    pub fn all_hard_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass.unwrap_or(true))
    }

    pub fn merge(&mut self, other: BoundReport) {
        self.checks.extend(other.checks);
    }
}

/// The explicit-constant decomposition check: the buoyancy force
/// `theta rho_vec` differs from a gradient `grad h` by a residual bounded
/// by `rho (lambda/pi + |g2| lambda/sqrt(3)) ||grad theta||`, with `h`
/// built from cross-section averages. The verdict allows `(1 + 5 dx)`
/// discretization slack.
pub fn buoyancy_decomposition_check(
    theta: &ScalarField,
    force: &GravityForcing,
    lambda: f64,
) -> CheckRecord {
    let g = theta.grid.clone();
    let (rx, ry) = force.rho_vec();
    let psi = cross_section_average(theta);
    // h(x, y) = rx * int_0^x psi + ry * y * psi(x) at cell centers.
    let mut h = ScalarField::zeros(&g);
    let mut cum = 0.0;
    for i in 0..g.nx {
        let h_center = cum + 0.5 * g.dx * psi[i];
        cum += g.dx * psi[i];
        for j in 0..g.ny {
            h.data[g.cell(i, j)] = rx * h_center + ry * g.y_center(j) * psi[i];
        }
    }
    // Residual theta*rho - grad h on interior faces; the gradient norms use
    // the same face sets.
    let gh = crate::grid::gradient(&h);
    let mut acc = Kahan::new();
    for i in 1..g.nx {
        for j in 0..g.ny {
            let tface = 0.5 * (theta.at(i - 1, j) + theta.at(i, j));
            let r = rx * tface - gh.ux[g.fx(i, j)];
            acc.add(r * r);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            let tface = 0.5 * (theta.at(i, j - 1) + theta.at(i, j));
            let r = ry * tface - gh.uy[g.fy(i, j)];
            acc.add(r * r);
        }
    }
    let residual = (acc.sum() * g.cell_area()).sqrt();
    let grad_theta = grad_norm_sq(theta).sqrt();
    let c = lambda / std::f64::consts::PI + force.g2().abs() * lambda / 3.0_f64.sqrt();
    // Rounding floor: degenerate inputs (constant theta) make both sides
    // analytically zero but leave ~1e-16 quadrature noise in the residual.
    let floor = 1e-12 * force.rho * norm(theta, Norm::LInf).max(1.0);
    let bound = force.rho * c * grad_theta * (1.0 + 5.0 * g.dx) + floor;
    CheckRecord::hard(
        "buoyancy-gradient-decomposition",
        residual,
        bound,
        "||theta rho - grad h|| <= rho (lambda/pi + |g2| lambda/sqrt3) ||grad theta|| (1 + 5 dx)",
    )
}

/// Scale-invariant Nash-inequality ratio
/// `r = ||grad phi||^2 (||phi||_L1^4 + ||phi||_L1 ||phi||_L2^3) / ||phi||_L2^6`.
pub fn nash_ratio(phi: &ScalarField) -> Result<f64, DiagnosticsError> {
    let l2 = norm(phi, Norm::L2);
    if l2 == 0.0 {
        return Err(DiagnosticsError::ZeroField);
    }
    let l1 = norm(phi, Norm::L1);
    let grad2 = grad_norm_sq(phi);
    Ok(grad2 * (l1.powi(4) + l1 * l2.powi(3)) / l2.powi(6))
}

/// One row of a decay run used by [`decay_analysis`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub grad_l2: f64,
    /// Signed integral (mass), conserved for nonnegative data.
    pub mass: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DecaySeries {
    pub samples: Vec<DecaySample>,
    /// Worst per-substep dissipation-inequality residual over the run.
    pub max_dissipation_residual: f64,
    /// Largest relative drift of the signed mass over the run.
    pub max_mass_drift: f64,
    /// L1 norm of the initial data.
    pub phi0_l1: f64,
}

/// Fit of the sup-norm decay: least-squares slope of `log ||phi||_inf`
/// against `log t` over the late-time window (upper half in log time),
/// plus the envelope constant `max_t sqrt(t) ||phi(t)||_inf / ||phi0||_L1`.
/// Returns `(alpha, c_hat)`.
pub fn decay_analysis(series: &DecaySeries) -> Result<(f64, f64), DiagnosticsError> {
    let usable: Vec<&DecaySample> = series
        .samples
        .iter()
        .filter(|s| s.t > 0.0 && s.linf > 0.0)
        .collect();
    if usable.len() < 10 {
        return Err(DiagnosticsError::InsufficientDecade {
            samples: usable.len(),
            decades: 0.0,
        });
    }
    let t_min = usable[0].t;
    let t_max = usable[usable.len() - 1].t;
    let decades = (t_max / t_min).log10();
    if decades < 1.0 {
        return Err(DiagnosticsError::InsufficientDecade {
            samples: usable.len(),
            decades,
        });
    }
    let cut = (t_min * t_max).sqrt();
    let late: Vec<(f64, f64)> = usable
        .iter()
        .filter(|s| s.t >= cut)
        .map(|s| (s.t.ln(), s.linf.ln()))
        .collect();
    let m = late.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &late {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let alpha = -slope;
    let c_hat = usable
        .iter()
        .map(|s| s.t.sqrt() * s.linf / series.phi0_l1)
        .fold(0.0_f64, f64::max);
    Ok((alpha, c_hat))
}

/// A sweep row: final-time averages at one `(rho, nu)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub nu: f64,
    pub b_bar: f64,
    pub n_bar: f64,
    pub u_bar: f64,
}

/// Fitted constants and baseline verdicts for the burning-rate / Nusselt /
/// flow bounds over a `(rho, nu)` sweep.
///
/// For each row, `eps = rho/nu + (rho/nu)^2`; the smallest constants with
/// `|Bbar - c_ref| <= C_B eps` and `Ubar <= C_U eps` over all rows are
/// reported, and `C_N` is the smallest constant with
/// `Nbar <= (C_N rho/nu + sqrt(c_ref/2 + C_N (rho/nu)^2))^2`.
///
/// The deviation reference `c_ref` is the sweep's own measured laminar
/// speed (the `rho = 0` row's average): referencing the continuum laminar
/// speed would fold the discretization's speed bias -- which shrinks under
/// refinement and is audited by the hard baseline verdict -- into every
/// fitted constant, destroying their refinement stability. Hard verdicts
/// only for the `rho = 0` baseline: `|Bbar - c0|/c0 <= 5%`, `Ubar <= 1e-8`
/// against the true laminar speed `c0`.
pub fn sweep_scaling_check(rows: &[SweepRow], c0: f64) -> Result<BoundReport, DiagnosticsError> {
    let baseline = rows
        .iter()
        .find(|r| r.rho == 0.0)
        .ok_or(DiagnosticsError::MissingBaseline)?;
    let c_ref = baseline.b_bar;
    let mut report = BoundReport::default();
    let mut c_b = 0.0_f64;
    let mut c_u = 0.0_f64;
    let mut c_n = 0.0_f64;
    for r in rows {
        let e = r.rho / r.nu + (r.rho / r.nu) * (r.rho / r.nu);
        if r.rho == 0.0 {
            report.push(CheckRecord::hard(
                "baseline-burning-rate",
                (r.b_bar - c0).abs() / c0,
                0.05,
                "laminar run must recover the laminar speed within 5%",
            ));
            report.push(CheckRecord::hard(
                "baseline-average-flow",
                r.u_bar,
                1e-8,
                "rho = 0 flow must stay at rest",
            ));
        } else {
            c_b = c_b.max((r.b_bar - c_ref).abs() / e);
            c_u = c_u.max(r.u_bar / e);
            c_n = c_n.max(nusselt_constant(r, c_ref));
        }
    }
    report.push(CheckRecord::fitted(
        "burning-rate-deviation-constant",
        c_b,
        "smallest C with |Bbar - Bbar(rho=0)| <= C (rho/nu + rho^2/nu^2) over all rows",
    ));
    report.push(CheckRecord::fitted(
        "average-flow-constant",
        c_u,
        "smallest C with Ubar <= C (rho/nu + rho^2/nu^2) over all rows",
    ));
    report.push(CheckRecord::fitted(
        "nusselt-bound-constant",
        c_n,
        "smallest C with Nbar <= (C rho/nu + sqrt(c_ref/2 + C rho^2/nu^2))^2",
    ));
    Ok(report)
}

/// Smallest `C >= 0` with `n_bar <= (C s + sqrt(c0/2 + C s^2))^2` for
/// `s = rho/nu`; the right side is monotone in `C`.
fn nusselt_constant(row: &SweepRow, c0: f64) -> f64 {
    let s = row.rho / row.nu;
    let satisfied = |c: f64| {
        let r = c * s + (c0 / 2.0 + c * s * s).sqrt();
        row.n_bar <= r * r
    };
    if satisfied(0.0) {
        return 0.0;
    }
    if s == 0.0 {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while !satisfied(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if satisfied(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest constants making the time-average relations hold at every
/// sample of the last half of the run:
/// `Nbar <= Bbar/2 + Ubar + C (1/t + 1/sqrt t)` and
/// `|Bbar - c0| <= Ubar + C (1/t + 1/sqrt t)`.
pub fn average_relations_check(series: &DiagnosticsSeries, c0: f64) -> BoundReport {
    let s = &series.samples;
    let mut report = BoundReport::default();
    if s.len() < 2 {
        return report;
    }
    let t_end = s[s.len() - 1].t;
    let mut c_nb = 0.0_f64;
    let mut c_bc = 0.0_f64;
    for row in s.iter().filter(|r| r.t >= 0.5 * t_end) {
        let w = 1.0 / row.t + 1.0 / row.t.sqrt();
        c_nb = c_nb.max((row.n_bar - 0.5 * row.b_bar - row.u_bar) / w);
        c_bc = c_bc.max(((row.b_bar - c0).abs() - row.u_bar) / w);
    }
    report.push(CheckRecord::fitted(
        "nusselt-relation-constant",
        c_nb.max(0.0),
        "smallest C with Nbar <= Bbar/2 + Ubar + C(1/t + 1/sqrt t) on the last half",
    ));
    report.push(CheckRecord::fitted(
        "burning-rate-relation-constant",
        c_bc.max(0.0),
        "smallest C with |Bbar - c0| <= Ubar + C(1/t + 1/sqrt t) on the last half",
    ));
    report
}

/// Snapshot data needed by the sandwich check: per-column extrema of theta
/// in absolute coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichSnapshot {
    pub t: f64,
    /// Absolute x of the first cell center (window shift included).
    pub x0_abs: f64,
    pub dx: f64,
    pub col_min: Vec<f64>,
    pub col_max: Vec<f64>,
}

impl SandwichSnapshot {
    pub fn from_field(theta: &ScalarField, t: f64, shift: f64) -> Self {
        let g = &theta.grid;
        let mut col_min = vec![f64::INFINITY; g.nx];
        let mut col_max = vec![f64::NEG_INFINITY; g.nx];
        for i in 0..g.nx {
            for j in 0..g.ny {
                let v = theta.at(i, j);
                col_min[i] = col_min[i].min(v);
                col_max[i] = col_max[i].max(v);
            }
        }
        SandwichSnapshot {
            t,
            x0_abs: shift + 0.5 * g.dx,
            dx: g.dx,
            col_min,
            col_max,
        }
    }
}

/// Result of the sandwich check on one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    /// Fixed shift absorbed from the initial data.
    pub x0: f64,
    /// Per-snapshot minimal envelope constants `(t, C)`.
    pub c_series: Vec<(f64, f64)>,
    pub c_max: f64,
    /// One-sided Mann-Kendall z-score for an upward trend of C over the
    /// last half of the run.
    pub mann_kendall_z: f64,
    /// True when no upward trend is detected at the 5% level.
    pub bounded: bool,
}

/// Verify the front sandwich: for each late snapshot find the minimal
/// `C >= 0` in `[0, 100]` such that
/// `Phi(x - pos0 - v t + x0 + Ubar t + C sqrt t) - C/sqrt t <= theta <=
///  Phi(x - pos0 - v t - x0 - Ubar t - C sqrt t) + C/sqrt t`
/// pointwise, where `v = drift_speed` is the envelope translation rate.
/// `pos0` anchors the envelopes at the initial front position and `x0` is
/// the fixed shift absorbed from the initial data ([`initial_shift`]).
///
/// Passing the profile's own `c0` gives the literal laminar-speed
/// envelopes; passing the measured laminar speed of the same discretization
/// isolates coupling-induced drift from the discretization's speed bias
/// (which the baseline criteria audit separately).
///
/// Feasibility is monotone in `C`, so bisection finds the minimum; the
/// report carries the Mann-Kendall trend verdict for the last half of the
/// run.
pub fn sandwich_check(
    series: &DiagnosticsSeries,
    snapshots: &[SandwichSnapshot],
    profile: &FrontProfile,
    drift_speed: f64,
    pos0: f64,
    x0: f64,
    t_min: f64,
) -> Result<SandwichReport, DiagnosticsError> {
    let c_box = 100.0;
    let mut c_series = Vec::new();
    for snap in snapshots.iter().filter(|s| s.t >= t_min) {
        let u_bar = series.u_bar_at(snap.t);
        let feasible = |c: f64| sandwich_feasible(snap, profile, drift_speed, pos0, x0, u_bar, c);
        if !feasible(c_box) {
            return Err(DiagnosticsError::SandwichInfeasible { t: snap.t });
        }
        let c = if feasible(0.0) {
            0.0
        } else {
            let mut lo = 0.0;
            let mut hi = c_box;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        c_series.push((snap.t, c));
    }
    if c_series.is_empty() {
        return Err(DiagnosticsError::TooFewSamples { need: 1, got: 0 });
    }
    let c_max = c_series.iter().map(|&(_, c)| c).fold(0.0_f64, f64::max);
    let half_start = c_series[c_series.len() / 2].0;
    let late: Vec<f64> = c_series
        .iter()
        .filter(|&&(t, _)| t >= half_start)
        .map(|&(_, c)| c)
        .collect();
    let z = mann_kendall_z(&late);
    Ok(SandwichReport {
        x0,
        c_series,
        c_max,
        mann_kendall_z: z,
        bounded: z <= 1.6449,
    })
}

fn sandwich_feasible(
    snap: &SandwichSnapshot,
    profile: &FrontProfile,
    drift_speed: f64,
    pos0: f64,
    x0: f64,
    u_bar: f64,
    c: f64,
) -> bool {
    let t = snap.t;
    let sq = t.sqrt();
    let drift = drift_speed * t;
    let widen = x0 + u_bar * t + c * sq;
    let slack = c / sq;
    for i in 0..snap.col_min.len() {
        let x = snap.x0_abs + i as f64 * snap.dx - pos0;
        let lower = profile.eval(x - drift + widen) - slack;
        let upper = profile.eval(x - drift - widen) + slack;
        if snap.col_min[i] < lower - 1e-12 || snap.col_max[i] > upper + 1e-12 {
            return false;
        }
    }
    true
}

/// Minimal fixed shift `x0` trapping the initial data between
/// `Phi(x - pos0 + x0) - slack` and `Phi(x - pos0 - x0) + slack`, with the
/// vertical slack `min(theta0/2, (1-theta0)/4)` the comparison construction
/// allows. Monotone feasibility in `x0`, so bisection applies.
pub fn initial_shift(
    snap: &SandwichSnapshot,
    profile: &FrontProfile,
    pos0: f64,
) -> Result<f64, DiagnosticsError> {
    let alpha = (profile.theta0 / 2.0).min((1.0 - profile.theta0) / 4.0);
    let feasible = |x0: f64| -> bool {
        for i in 0..snap.col_min.len() {
            let x = snap.x0_abs + i as f64 * snap.dx - pos0;
            let lower = profile.eval(x + x0) - alpha;
            let upper = profile.eval(x - x0) + alpha;
            if snap.col_min[i] < lower - 1e-12 || snap.col_max[i] > upper + 1e-12 {
                return false;
            }
        }
        true
    };
    let span = snap.dx * snap.col_min.len() as f64;
    if !feasible(span) {
        return Err(DiagnosticsError::SandwichInfeasible { t: snap.t });
    }
    if feasible(0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = span;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One-sided Mann-Kendall z-score for an upward trend (ties corrected).
pub fn mann_kendall_z(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let d = xs[j] - xs[i];
            if d > 0.0 {
                s += 1;
            } else if d < 0.0 {
                s -= 1;
            }
        }
    }
    // Tie correction over groups of identical values.
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut run = 1usize;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            if run > 1 {
                let t = run as f64;
                tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
            }
            run = 1;
        }
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    if var <= 0.0 {
        return 0.0;
    }
    let s = s as f64;
    if s > 0.0 {
        (s - 1.0) / var.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / var.sqrt()
    } else {
        0.0
    }
}
