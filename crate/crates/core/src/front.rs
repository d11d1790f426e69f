//! Laminar traveling-wave speed and profile for the planar reaction-diffusion
//! front, plus an independent 1D time-dependent speed measurement.
//!
//! The wave obeys `-c Phi' - Phi'' = f(Phi)` with `Phi(-inf) = 1`,
//! `Phi(+inf) = 0`, anchored by `Phi(0) = theta0`. Substituting
//! `q(Phi) = -Phi' >= 0` turns the speed problem into a regular shooting
//! problem on the unit interval: `q dq/dPhi = c q - f(Phi)`, which on the
//! cold segment (`f = 0`) integrates exactly to `q = c Phi`. Shooting starts
//! from `(theta0, c theta0)`; `q` collapsing to zero before the burned state
//! means `c` is too small, arriving with `q > 0` means too large, and
//! bisection pins the unique speed.

use crate::reaction::IgnitionNonlinearity;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FrontError {
    #[error("reaction rate vanishes on the reactive interval; no front exists")]
    NoFront,
    #[error("bisection bracket not found in [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64 },
    #[error("phase-plane trajectory vanished in the interior at phi = {phi}")]
    ProfileSingularity { phi: f64 },
    #[error("front left the 1D measurement window")]
    FrontLeftWindow,
}

/// Tabulated laminar front on a uniform abscissa.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub c0: f64,
    pub theta0: f64,
    /// Leftmost sample abscissa.
    pub x_left: f64,
    /// Sample spacing.
    pub h: f64,
    /// Profile values, strictly decreasing from ~1 to ~0.
    pub phi: Vec<f64>,
    /// Index of the anchor sample `x = 0` where `phi = theta0`.
    pub anchor: usize,
}

impl FrontProfile {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn x_at(&self, k: usize) -> f64 {
        self.x_left + k as f64 * self.h
    }

    pub fn x_right(&self) -> f64 {
        self.x_at(self.phi.len() - 1)
    }

    /// Linear interpolation with the exact asymptotes outside the table.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_left {
            return 1.0;
        }
        let t = (x - self.x_left) / self.h;
        let k = t.floor() as usize;
        if k + 1 >= self.phi.len() {
            return 0.0;
        }
        let w = t - k as f64;
        self.phi[k] * (1.0 - w) + self.phi[k + 1] * w
    }

    /// Quadrature of `int |Phi'|^2 dx` by central differences on the table.
    pub fn dirichlet_energy(&self) -> f64 {
        let n = self.phi.len();
        let mut acc = 0.0;
        for k in 1..n - 1 {
            let d = (self.phi[k + 1] - self.phi[k - 1]) / (2.0 * self.h);
            acc += d * d;
        }
        acc * self.h
    }
}

/// One accepted step of a phase-plane integration, with enough data for
/// cubic Hermite reconstruction of `x(Phi)`.
#[derive(Debug, Clone, Copy)]
struct PhaseSample {
    phi: f64,
    q: f64,
    /// `x(Phi)` up to an additive shift fixed later.
    x: f64,
}

enum Shot {
    /// `q` collapsed to zero at this `phi` before reaching the burned state.
    TooSmall,
    /// Reached `phi = 1 - delta` with `q_end > 0`.
    TooLarge,
}

const PHI_END_DELTA: f64 = 1e-8;
const Q_FLOOR: f64 = 1e-12;

// Cash-Karp embedded 4/5 tableau.
const CK_A: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
const CK_B: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const CK_C5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
const CK_C4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

/// Classification shot: integrate `dq/dphi = c - f/q` from `(theta0,
/// c*theta0)` toward the burned state with an embedded Cash-Karp pair.
fn shoot(f: &IgnitionNonlinearity, c: f64) -> Shot {
    let phi_end = 1.0 - PHI_END_DELTA;
    let mut phi = f.theta0;
    let mut q = c * f.theta0;
    let mut h = (1.0 - f.theta0) / 64.0;
    let tol = 1e-11;
    let mut steps = 0usize;

    let deriv = |phi: f64, q: f64| -> Option<f64> {
        if q < Q_FLOOR {
            return None;
        }
        Some(c - f.evaluate(phi) / q)
    };

    while phi < phi_end {
        steps += 1;
        if steps > 2_000_000 {
            // Pathological stall: q hugging zero with f > 0.
            return Shot::TooSmall;
        }
        if phi + h > phi_end {
            h = phi_end - phi;
        }
        let mut kq = [0.0; 6];
        let mut ok = true;
        match deriv(phi, q) {
            Some(dq) => kq[0] = dq,
            None => return Shot::TooSmall,
        }
        for s in 0..5 {
            let mut qs = q;
            for m in 0..=s {
                qs += h * CK_B[s][m] * kq[m];
            }
            match deriv(phi + CK_A[s] * h, qs) {
                Some(dq) => kq[s + 1] = dq,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            // A stage fell below the floor: halve, declare collapse once the
            // step is negligible.
            h *= 0.5;
            if h < 1e-15 {
                return Shot::TooSmall;
            }
            continue;
        }
        let mut q5 = q;
        let mut q4 = q;
        for s in 0..6 {
            q5 += h * CK_C5[s] * kq[s];
            q4 += h * CK_C4[s] * kq[s];
        }
        let err = (q5 - q4).abs() / (q.abs().max(1e-3));
        if err > tol {
            h *= 0.9 * (tol / err).powf(0.25).max(0.1);
            if h < 1e-15 {
                return Shot::TooSmall;
            }
            continue;
        }
        if q5 < Q_FLOOR {
            return Shot::TooSmall;
        }
        phi += h;
        q = q5;
        if err > 0.0 {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0);
        } else {
            h *= 5.0;
        }
    }
    Shot::TooLarge
}

/// Decay rate of the burned tail: the positive root of
/// `mu^2 + c mu - a1 = 0` with `a1 = -f'(1)`.
fn hot_tail_rate(c: f64, a1: f64) -> f64 {
    0.5 * (-c + (c * c + 4.0 * a1).sqrt())
}

/// One-sided slope magnitude of `f` at the burned state.
fn slope_at_one(f: &IgnitionNonlinearity) -> f64 {
    let e = 1e-6;
    f.evaluate(1.0 - e) / e
}

/// Integrate the unstable manifold of the burned saddle backward from
/// `phi = 1 - w0` down to `theta0`. Backward in `phi` the connection is
/// attracting, so the trace stays on the manifold to integration accuracy
/// regardless of how precisely `c` is known. Returns samples sorted by
/// increasing `phi` with `x` anchored to zero at `theta0`, together with the
/// manifold's `q` at `theta0`.
fn manifold_trace(
    f: &IgnitionNonlinearity,
    c: f64,
    collect: bool,
) -> Result<(Vec<PhaseSample>, f64), FrontError> {
    let w0 = PHI_END_DELTA;
    let mu = hot_tail_rate(c, slope_at_one(f));
    let mut phi = 1.0 - w0;
    let mut q = mu * w0;
    let mut x = 0.0;
    let mut h = w0; // negative steps taken as phi -> phi - h
    let tol = 1e-12;
    let mut trace = Vec::new();
    if collect {
        trace.push(PhaseSample { phi, q, x });
    }
    let deriv = |phi: f64, q: f64| -> Option<(f64, f64)> {
        if q < Q_FLOOR * 1e-3 {
            return None;
        }
        Some((c - f.evaluate(phi) / q, -1.0 / q))
    };
    let mut steps = 0usize;
    while phi > f.theta0 {
        steps += 1;
        if steps > 4_000_000 {
            return Err(FrontError::ProfileSingularity { phi });
        }
        // Keep segments short in x and in phi so Hermite inversion of x(phi)
        // is accurate well below the profile-node tolerance.
        h = h.min(0.005 * q).min(0.001);
        if phi - h < f.theta0 {
            h = phi - f.theta0;
        }
        let hs = -h;
        let mut kq = [0.0; 6];
        let mut kx = [0.0; 6];
        let mut ok = true;
        match deriv(phi, q) {
            Some((dq, dxx)) => {
                kq[0] = dq;
                kx[0] = dxx;
            }
            None => return Err(FrontError::ProfileSingularity { phi }),
        }
        for s in 0..5 {
            let mut qs = q;
            for m in 0..=s {
                qs += hs * CK_B[s][m] * kq[m];
            }
            match deriv(phi + CK_A[s] * hs, qs) {
                Some((dq, dxx)) => {
                    kq[s + 1] = dq;
                    kx[s + 1] = dxx;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            h *= 0.5;
            if h < 1e-16 {
                return Err(FrontError::ProfileSingularity { phi });
            }
            continue;
        }
        let mut q5 = q;
        let mut x5 = x;
        let mut q4 = q;
        for s in 0..6 {
            q5 += hs * CK_C5[s] * kq[s];
            x5 += hs * CK_C5[s] * kx[s];
            q4 += hs * CK_C4[s] * kq[s];
        }
        let err = (q5 - q4).abs() / q.abs().max(1e-6);
        if err > tol {
            h *= 0.9 * (tol / err).powf(0.25).max(0.1);
            if h < 1e-16 {
                return Err(FrontError::ProfileSingularity { phi });
            }
            continue;
        }
        if q5 <= 0.0 {
            return Err(FrontError::ProfileSingularity { phi: phi - h });
        }
        phi -= h;
        q = q5;
        x = x5;
        if collect {
            trace.push(PhaseSample { phi, q, x });
        }
        if err > 0.0 {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0);
        } else {
            h *= 5.0;
        }
    }
    // Anchor x = 0 at theta0 (the trace accumulated x from the hot end,
    // where it was 0; shift so the last point sits at the origin).
    let shift = x;
    trace.reverse();
    for s in trace.iter_mut() {
        s.x -= shift;
    }
    Ok((trace, q))
}

/// Unique laminar speed by bisection on the shooting classifier.
pub fn solve_wave_speed(f: &IgnitionNonlinearity, tol: f64) -> Result<f64, FrontError> {
    assert!(tol > 0.0, "tolerance must be positive");
    if f.is_trivial() {
        return Err(FrontError::NoFront);
    }
    let lipschitz = f.validate().map(|v| v.lipschitz).unwrap_or(1.0);
    let c_lo = 1e-6;
    let c_hi = 10.0 * lipschitz.sqrt() + 10.0;
    let too_small = |c: f64| matches!(shoot(f, c), Shot::TooSmall);
    if !too_small(c_lo) || too_small(c_hi) {
        return Err(FrontError::NonConvergence { lo: c_lo, hi: c_hi });
    }
    let mut lo = c_lo;
    let mut hi = c_hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if too_small(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return the non-collapsing side so profile reconstruction at this speed
    // is well defined; it is within tol of the bracketed speed.
    Ok(hi)
}

/// Polish the speed on the manifold-matching condition
/// `g(c) = q_manifold(theta0; c) - c*theta0` (decreasing through zero at the
/// connection). This pins `c` far more precisely than the forward shot can,
/// because the backward manifold integration is numerically stable.
fn polish_speed(f: &IgnitionNonlinearity, c0: f64) -> Result<f64, FrontError> {
    let g = |c: f64| -> Result<f64, FrontError> {
        let (_, q_end) = manifold_trace(f, c, false)?;
        Ok(q_end - c * f.theta0)
    };
    let g0 = g(c0)?;
    if g0 == 0.0 {
        return Ok(c0);
    }
    // Expand a bracket around c0 in the direction g indicates (g decreasing).
    let mut step = (c0 * 1e-9).max(1e-12);
    let (mut lo, mut hi, mut glo, mut ghi);
    if g0 > 0.0 {
        lo = c0;
        glo = g0;
        loop {
            hi = lo + step;
            ghi = g(hi)?;
            if ghi <= 0.0 {
                break;
            }
            lo = hi;
            glo = ghi;
            step *= 4.0;
            if step > c0.max(1.0) {
                return Err(FrontError::NonConvergence { lo: c0, hi });
            }
        }
    } else {
        hi = c0;
        ghi = g0;
        loop {
            lo = hi - step;
            if lo <= 0.0 {
                return Err(FrontError::NonConvergence { lo, hi: c0 });
            }
            glo = g(lo)?;
            if glo >= 0.0 {
                break;
            }
            hi = lo;
            ghi = glo;
            step *= 4.0;
        }
    }
    let _ = (glo, ghi);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Tabulate the profile: the burning side from the backward manifold
/// quadrature of `x(Phi) = -int dPhi/q`, the cold side from the exact
/// exponential `theta0 * exp(-c0 x)`, resampled on a uniform abscissa with
/// the anchor `Phi(0) = theta0` on-grid.
pub fn reconstruct_profile(
    c0: f64,
    f: &IgnitionNonlinearity,
    samples: usize,
) -> Result<FrontProfile, FrontError> {
    assert!(samples >= 64);
    let c = polish_speed(f, c0)?;
    let (trace, _) = manifold_trace(f, c, true)?;
    let x_hot = trace.last().unwrap().x; // most negative abscissa
    let mu = hot_tail_rate(c, slope_at_one(f));
    let x_cold = (f.theta0 / PHI_END_DELTA).ln() / c;
    let h = (x_cold - x_hot) / (samples - 1) as f64;
    let m_left = (-x_hot / h).floor() as usize;
    let m_right = (x_cold / h).floor() as usize;
    let x_left = -(m_left as f64) * h;
    let n = m_left + m_right + 1;

    let mut phi = vec![0.0; n];
    // Cold side: exact exponential.
    for k in m_left..n {
        let x = x_left + k as f64 * h;
        phi[k] = f.theta0 * (-c * x).exp();
    }
    // Burning side: invert the monotone x(Phi) trace (cubic Hermite per
    // accepted step, slope -1/q); past the trace use the linearized tail.
    for k in 0..m_left {
        let x = x_left + k as f64 * h;
        phi[k] = if x <= x_hot {
            1.0 - PHI_END_DELTA * (mu * (x - x_hot)).exp()
        } else {
            invert_phase_trace(&trace, x)
        };
    }
    let anchor = m_left;
    let prof = FrontProfile {
        c0: c,
        theta0: f.theta0,
        x_left,
        h,
        phi,
        anchor,
    };
    debug_assert!((prof.phi[anchor] - f.theta0).abs() < 1e-9);
    // Tail invariants.
    assert!(
        (prof.phi[0] - 1.0).abs() < 1e-6,
        "hot tail {} not within 1e-6 of 1",
        prof.phi[0]
    );
    assert!(
        prof.phi[n - 1].abs() < 1e-6,
        "cold tail {} not within 1e-6 of 0",
        prof.phi[n - 1]
    );
    Ok(prof)
}

/// Find `Phi` with `x(Phi) = x_target` on the hot side (`x_target < 0`).
fn invert_phase_trace(trace: &[PhaseSample], x_target: f64) -> f64 {
    // x decreases along the trace; locate the bracketing step.
    let mut lo = 0usize;
    let mut hi = trace.len() - 1;
    if x_target <= trace[hi].x {
        return trace[hi].phi;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if trace[mid].x >= x_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = trace[lo];
    let b = trace[hi];
    // Hermite cubic for x(Phi) on [a.phi, b.phi] with slopes -1/q.
    let dphi = b.phi - a.phi;
    let xa = a.x;
    let xb = b.x;
    let sa = -1.0 / a.q * dphi;
    let sb = -1.0 / b.q * dphi;
    let x_of = |t: f64| {
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * xa + h10 * sa + h01 * xb + h11 * sb
    };
    let mut tlo = 0.0;
    let mut thi = 1.0;
    for _ in 0..60 {
        let tm = 0.5 * (tlo + thi);
        if x_of(tm) >= x_target {
            tlo = tm;
        } else {
            thi = tm;
        }
    }
    let t = 0.5 * (tlo + thi);
    a.phi + t * dphi
}

/// Quadrature of `int f(Phi(x)) dx` over the tabulated profile; equals the
/// laminar speed for a true traveling wave.
pub fn laminar_burning_rate(p: &FrontProfile, f: &IgnitionNonlinearity) -> f64 {
    let mut acc = 0.0;
    for (k, &v) in p.phi.iter().enumerate() {
        let w = if k == 0 || k + 1 == p.phi.len() { 0.5 } else { 1.0 };
        acc += w * f.evaluate(v);
    }
    acc * p.h
}

/// Measured front speed from direct time integration of the 1D equation
/// `theta_t - theta_xx = f(theta)` on a recentered window: implicit
/// diffusion, explicit reaction, least-squares slope of the level-1/2
/// crossing over the last half of the run.
///
/// `smoothing_width` controls the initial logistic step; the measured speed
/// is insensitive to it.
pub fn oracle_1d_speed(
    f: &IgnitionNonlinearity,
    n: usize,
    horizon: f64,
    smoothing_width: f64,
) -> Result<f64, FrontError> {
    assert!(n >= 512, "resolution too coarse for the 1D front oracle");
    assert!(horizon > 0.0);
    let length = 60.0;
    let dx = length / n as f64;
    let lipschitz = f.validate().map(|v| v.lipschitz).unwrap_or(1.0).max(1e-9);
    let dt = 0.4 * (dx * dx / 4.0).min(1.0 / lipschitz);
    let x_center = 0.4 * length;

    let mut theta: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            1.0 / (1.0 + ((x - x_center) / smoothing_width).exp())
        })
        .collect();
    let mut shift = 0.0;

    // Thomas factorization of (I - dt Dxx) with Dirichlet ghost values
    // (left 1, right 0) is constant in time; precompute the sweep.
    let r = dt / (dx * dx);
    let diag_mid = 1.0 + 2.0 * r;
    let diag_end = 1.0 + 3.0 * r;
    let off = -r;
    let mut cp = vec![0.0; n];
    let mut denom = vec![0.0; n];
    {
        let mut beta = diag_end;
        denom[0] = beta;
        for i in 1..n {
            cp[i - 1] = off / beta;
            let d = if i == n - 1 { diag_end } else { diag_mid };
            beta = d - off * cp[i - 1];
            denom[i] = beta;
        }
    }
    let mut rhs = vec![0.0; n];

    let crossing = |theta: &[f64]| -> Option<f64> {
        for i in 0..n - 1 {
            if (theta[i] - 0.5) > 0.0 && (theta[i + 1] - 0.5) <= 0.0 {
                let w = (theta[i] - 0.5) / (theta[i] - theta[i + 1]);
                return Some((i as f64 + 0.5 + w) * dx);
            }
        }
        None
    };

    let n_steps = (horizon / dt).ceil() as usize;
    let sample_every = (n_steps / 2000).max(1);
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut t = 0.0;

    for step in 0..n_steps {
        // Implicit diffusion with pinned end values.
        rhs.copy_from_slice(&theta);
        rhs[0] += 2.0 * r; // left value 1
        rhs[0] /= denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= cp[i] * rhs[i + 1];
        }
        theta.copy_from_slice(&rhs);
        // Explicit reaction.
        for v in theta.iter_mut() {
            *v += dt * f.evaluate(*v);
        }
        t += dt;

        let pos = crossing(&theta).ok_or(FrontError::FrontLeftWindow)?;
        if pos > 0.6 * length {
            let k = ((pos - 0.4 * length) / dx).round() as usize;
            for i in 0..n {
                theta[i] = if i + k < n { theta[i + k] } else { 0.0 };
            }
            shift += k as f64 * dx;
        }
        if pos < 0.05 * length || pos > 0.95 * length {
            return Err(FrontError::FrontLeftWindow);
        }
        if step % sample_every == 0 {
            let p = crossing(&theta).ok_or(FrontError::FrontLeftWindow)?;
            samples.push((t, shift + p));
        }
    }

    // Least-squares slope over the last half.
    let half = samples.len() / 2;
    let late = &samples[half..];
    let m = late.len() as f64;
    let (mut st, mut sp, mut stt, mut stp) = (0.0, 0.0, 0.0, 0.0);
    for &(ti, pi) in late {
        st += ti;
        sp += pi;
        stt += ti * ti;
        stp += ti * pi;
    }
    Ok((m * stp - st * sp) / (m * stt - st * st))
}

/// Closed-form speed for the linear-ignition rate `A (1 - theta)` obtained
/// by matching the exponential cold tail to the hot-side solution:
/// `c = (1 - theta0) sqrt(A / theta0)`.
pub fn linear_ignition_speed(theta0: f64, amplitude: f64) -> f64 {
    (1.0 - theta0) * (amplitude / theta0).sqrt()
}
