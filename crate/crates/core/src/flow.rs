//! Flow solvers for the buoyancy-driven channel: Helmholtz projection,
//! time-dependent Stokes stepping, stationary Stokes, and stationary
//! Navier-Stokes via Picard iteration, all with no-slip walls.

use crate::grid::{
    divergence, grad_norm_sq, grad_norm_sq_vec, gradient, norm, Grid2D, Norm, ScalarField,
    VectorField2D, XMode,
};
use crate::solvers::{apply_vector_laplacian, ChannelSolvers};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("pressure Poisson solve left divergence {residual:e} above tolerance")]
    PoissonNonConvergence { residual: f64 },
    #[error("viscous solve produced non-finite values")]
    ViscousSolveNonConvergence,
    #[error("stationary solve residual {residual:e} after {iters} iterations")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("Picard iteration diverged at iteration {iter} (norm kept doubling)")]
    IterationDiverged { iter: usize },
    #[error("non-finite input field")]
    NonFinite,
}

/// Buoyancy forcing `theta * rho_vec` with `rho_vec = rho * g_hat`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GravityForcing {
    pub rho: f64,
    pub g_hat: (f64, f64),
}

impl GravityForcing {
    /// `g_hat` must be unit length to 1e-12; `rho >= 0`.
    pub fn new(rho: f64, g_hat: (f64, f64)) -> Self {
        assert!(rho >= 0.0, "Rayleigh number must be nonnegative");
        let len = (g_hat.0 * g_hat.0 + g_hat.1 * g_hat.1).sqrt();
        assert!(
            (len - 1.0).abs() < 1e-12,
            "gravity direction must be unit length, |g| = {len}"
        );
        GravityForcing { rho, g_hat }
    }

    /// Gravity direction from an angle in degrees:
    /// `g_hat = (sin a, -cos a)`, so 0 degrees points straight down.
    /// Components that vanish analytically (axis-aligned angles) are
    /// snapped to exact zeros so the slantedness test is sharp.
    pub fn from_angle_degrees(rho: f64, angle: f64) -> Self {
        let a = angle.to_radians();
        let mut gx = a.sin();
        let mut gy = -a.cos();
        if gx.abs() < 1e-12 {
            gx = 0.0;
        }
        if gy.abs() < 1e-12 {
            gy = 0.0;
        }
        let len = (gx * gx + gy * gy).sqrt();
        Self::new(rho, (gx / len, gy / len))
    }

    pub fn zero() -> Self {
        GravityForcing { rho: 0.0, g_hat: (0.0, -1.0) }
    }

    pub fn rho_vec(&self) -> (f64, f64) {
        (self.rho * self.g_hat.0, self.rho * self.g_hat.1)
    }

    /// Transverse gravity component; the slanted-channel condition is
    /// `g2 != 0` whenever `rho > 0`.
    pub fn g2(&self) -> f64 {
        self.g_hat.1
    }
}

/// Velocity/pressure pair with the viscosity it was solved at.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: VectorField2D,
    /// Cell-centered, mean-zero.
    pub p: ScalarField,
    pub nu: f64,
}

impl FlowState {
    pub fn at_rest(grid: &Arc<Grid2D>, nu: f64) -> Self {
        assert!(nu > 0.0, "viscosity must be positive");
        FlowState {
            u: VectorField2D::zeros(grid),
            p: ScalarField::zeros(grid),
            nu,
        }
    }
}

/// Sample the cell scalar `theta` times `rho_vec` onto faces (arithmetic
/// interpolation); faces pinned by boundary conditions carry zero force.
pub fn buoyancy_faces(theta: &ScalarField, force: &GravityForcing) -> VectorField2D {
    let g = theta.grid.clone();
    let (rx, ry) = force.rho_vec();
    let mut out = VectorField2D::zeros(&g);
    for i in 1..g.nx {
        for j in 0..g.ny {
            out.ux[g.fx(i, j)] = rx * 0.5 * (theta.at(i - 1, j) + theta.at(i, j));
        }
    }
    if g.x_mode == XMode::Periodic {
        for j in 0..g.ny {
            let v = rx * 0.5 * (theta.at(g.nx - 1, j) + theta.at(0, j));
            out.ux[g.fx(0, j)] = v;
            out.ux[g.fx(g.nx, j)] = v;
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            out.uy[g.fy(i, j)] = ry * 0.5 * (theta.at(i, j - 1) + theta.at(i, j));
        }
    }
    out
}

/// The flow solver: owns the spectral solver workspaces for one grid.
pub struct FlowSolver {
    pub grid: Arc<Grid2D>,
    solvers: ChannelSolvers,
}

impl FlowSolver {
    pub fn new(grid: &Arc<Grid2D>) -> Self {
        FlowSolver {
            grid: grid.clone(),
            solvers: ChannelSolvers::new(grid),
        }
    }

    pub fn scalar_solvers(&mut self) -> &mut ChannelSolvers {
        &mut self.solvers
    }

    /// Helmholtz projection onto discretely divergence-free fields: solve
    /// `Lap q = div u_star` (mean removed), subtract `grad q`. Returns the
    /// projected field and `q`.
    pub fn project_divergence_free(
        &mut self,
        u_star: &VectorField2D,
    ) -> Result<(VectorField2D, ScalarField), FlowError> {
        if !u_star.is_finite() {
            return Err(FlowError::NonFinite);
        }
        let div = divergence(u_star);
        if norm(&div, Norm::LInf) == 0.0 {
            // Already solenoidal (commonly: everything is exactly zero).
            return Ok((u_star.clone(), ScalarField::zeros(&self.grid)));
        }
        let q = self.solvers.poisson_neumann(&div);
        let gq = gradient(&q);
        let mut u = u_star.clone();
        for (a, b) in u.ux.iter_mut().zip(gq.ux.iter()) {
            *a -= b;
        }
        for (a, b) in u.uy.iter_mut().zip(gq.uy.iter()) {
            *a -= b;
        }
        u.enforce_wall_faces();
        u.sync_periodic();
        let residual = norm(&divergence(&u), Norm::LInf);
        if residual > 1e-11 {
            return Err(FlowError::PoissonNonConvergence { residual });
        }
        Ok((u, q))
    }

    /// One backward-Euler step of the Stokes system with buoyancy force:
    /// viscous solve of `(I - dt nu Lap) u* = u + dt P(theta rho_vec)`, then
    /// projection. Projecting the force first keeps discrete-gradient
    /// forcing exactly invisible, matching the continuous system where such
    /// forces are absorbed by the pressure.
    pub fn step_stokes(
        &mut self,
        state: &FlowState,
        theta: &ScalarField,
        force: &GravityForcing,
        dt: f64,
    ) -> Result<FlowState, FlowError> {
        self.step_stokes_with_energy(state, theta, force, dt)
            .map(|(s, _)| s)
    }

    /// [`FlowSolver::step_stokes`] plus the per-step energy budget used by
    /// the dissipation-inequality monitors.
    pub fn step_stokes_with_energy(
        &mut self,
        state: &FlowState,
        theta: &ScalarField,
        force: &GravityForcing,
        dt: f64,
    ) -> Result<(FlowState, StepEnergy), FlowError> {
        assert!(dt > 0.0);
        let f = buoyancy_faces(theta, force);
        // Exact early-out: from rest with zero force every solve below
        // returns zeros bit-for-bit; skip the work.
        if state.u.linf() == 0.0 && f.linf() == 0.0 {
            let next = FlowState {
                u: state.u.clone(),
                p: ScalarField::zeros(&self.grid),
                nu: state.nu,
            };
            return Ok((next, StepEnergy::default()));
        }
        let (pf, _) = self.project_divergence_free(&f)?;
        let nu = state.nu;
        let beta = 1.0 / (dt * nu);
        let g = self.grid.clone();
        let mut rhs_x = vec![0.0; (g.nx + 1) * g.ny];
        let mut rhs_y = vec![0.0; g.nx * (g.ny + 1)];
        for (o, (a, b)) in rhs_x.iter_mut().zip(state.u.ux.iter().zip(pf.ux.iter())) {
            *o = beta * (a + dt * b);
        }
        for (o, (a, b)) in rhs_y.iter_mut().zip(state.u.uy.iter().zip(pf.uy.iter())) {
            *o = beta * (a + dt * b);
        }
        let mut u_star = VectorField2D::zeros(&g);
        u_star.ux = self.solvers.ux_helmholtz(beta, &rhs_x);
        u_star.uy = self.solvers.uy_helmholtz(beta, &rhs_y);
        if !u_star.is_finite() {
            return Err(FlowError::ViscousSolveNonConvergence);
        }
        let k0_sq = {
            let n = state.u.l2();
            n * n
        };
        let kstar_sq = {
            let n = u_star.l2();
            n * n
        };
        let diss_star_sq = grad_norm_sq_vec(&u_star);
        let work_star = pf.inner(&u_star);
        let (u, q) = self.project_divergence_free(&u_star)?;
        let mut p = q;
        for v in p.data.iter_mut() {
            *v /= dt;
        }
        let k1_sq = {
            let n = u.l2();
            n * n
        };
        let diss_after_sq = grad_norm_sq_vec(&u);
        let work_after = f.inner(&u);
        let energy = StepEnergy {
            dt,
            nu,
            k0_sq,
            kstar_sq,
            k1_sq,
            diss_star_sq,
            diss_after_sq,
            work_star,
            work_after,
        };
        Ok((FlowState { u, p, nu }, energy))
    }

    /// Residual `||-nu Lap u + grad p - f||_L2` over active faces.
    pub fn stationary_residual(&self, state: &FlowState, f: &VectorField2D) -> f64 {
        let lap = apply_vector_laplacian(&state.u);
        let gp = gradient(&state.p);
        let g = &self.grid;
        let mut r = VectorField2D::zeros(g);
        for k in 0..r.ux.len() {
            r.ux[k] = -state.nu * lap.ux[k] + gp.ux[k] - f.ux[k];
        }
        for k in 0..r.uy.len() {
            r.uy[k] = -state.nu * lap.uy[k] + gp.uy[k] - f.uy[k];
        }
        // Only faces carrying unknowns count.
        let periodic = g.x_mode == XMode::Periodic;
        if !periodic {
            for j in 0..g.ny {
                r.ux[g.fx(0, j)] = 0.0;
                r.ux[g.fx(g.nx, j)] = 0.0;
            }
        }
        for i in 0..g.nx {
            r.uy[g.fy(i, 0)] = 0.0;
            r.uy[g.fy(i, g.ny)] = 0.0;
        }
        r.sync_periodic();
        r.l2()
    }

    /// Apply `A^{-1} = (-nu Lap)^{-1}` with no-slip constraints to a face
    /// field.
    fn viscous_inverse(&mut self, f: &VectorField2D, nu: f64) -> VectorField2D {
        let g = self.grid.clone();
        let mut out = VectorField2D::zeros(&g);
        out.ux = self.solvers.ux_helmholtz(0.0, &f.ux);
        out.uy = self.solvers.uy_helmholtz(0.0, &f.uy);
        let inv_nu = 1.0 / nu;
        for v in out.ux.iter_mut() {
            *v *= inv_nu;
        }
        for v in out.uy.iter_mut() {
            *v *= inv_nu;
        }
        out.sync_periodic();
        out
    }

    /// One Schur-complement solve of the Stokes saddle problem for a force
    /// `f`: CG on `S p = -div A^{-1} f` with `S = -div A^{-1} grad`, then
    /// `u = P A^{-1}(f - grad p)`. The Schur system is well conditioned, so
    /// CG converges fast; the iteration cap is `10 (nx + ny)`.
    fn schur_stokes_pass(
        &mut self,
        f: &VectorField2D,
        nu: f64,
        p0: ScalarField,
    ) -> Result<FlowState, FlowError> {
        let g = self.grid.clone();
        let n_cells = g.n_cells();
        let demean = |s: &mut ScalarField| {
            let m = crate::grid::integral(s) / (g.lx * g.lambda);
            for v in s.data.iter_mut() {
                *v -= m;
            }
        };
        let w = self.viscous_inverse(f, nu);
        let mut b = divergence(&w);
        for v in b.data.iter_mut() {
            *v = -*v;
        }
        demean(&mut b);
        let b_norm = norm(&b, Norm::L2);

        let mut p = p0;
        demean(&mut p);
        let apply = |me: &mut Self, s: &ScalarField| -> ScalarField {
            let gp = gradient(s);
            let z = me.viscous_inverse(&gp, nu);
            let mut out = divergence(&z);
            for v in out.data.iter_mut() {
                *v = -*v;
            }
            out
        };

        if b_norm > 0.0 {
            let mut r = apply(self, &p);
            for (rv, bv) in r.data.iter_mut().zip(b.data.iter()) {
                *rv = bv - *rv;
            }
            demean(&mut r);
            let mut d = r.clone();
            let mut rs = crate::grid::inner(&r, &r);
            let tol_sq = (1e-13 * b_norm) * (1e-13 * b_norm) * (g.lx * g.lambda);
            let cap = 10 * (g.nx + g.ny);
            let mut it = 0;
            while rs > tol_sq && it < cap {
                let ad = apply(self, &d);
                let alpha = rs / crate::grid::inner(&d, &ad);
                for k in 0..n_cells {
                    p.data[k] += alpha * d.data[k];
                    r.data[k] -= alpha * ad.data[k];
                }
                let rs_new = crate::grid::inner(&r, &r);
                let beta = rs_new / rs;
                for k in 0..n_cells {
                    d.data[k] = r.data[k] + beta * d.data[k];
                }
                rs = rs_new;
                it += 1;
            }
            demean(&mut p);
        }

        // u = A^{-1}(f - grad p), projection pins the divergence exactly.
        let gp = gradient(&p);
        let mut rhs = f.clone();
        for (a, bb) in rhs.ux.iter_mut().zip(gp.ux.iter()) {
            *a -= bb;
        }
        for (a, bb) in rhs.uy.iter_mut().zip(gp.uy.iter()) {
            *a -= bb;
        }
        rhs.enforce_wall_faces();
        rhs.sync_periodic();
        let u_raw = self.viscous_inverse(&rhs, nu);
        if !u_raw.is_finite() {
            return Err(FlowError::ViscousSolveNonConvergence);
        }
        let (u, _) = self.project_divergence_free(&u_raw)?;
        Ok(FlowState { u, p, nu })
    }

    /// Stationary Stokes `-nu Lap u + grad p = f, div u = 0` for a given
    /// face force: a Schur-complement pass followed by defect-correction
    /// passes on the momentum residual (the final projection perturbs it
    /// slightly near the tolerance). Residual target: 1e-8 relative to
    /// `||f||`.
    pub fn solve_stationary_stokes_faces(
        &mut self,
        f: &VectorField2D,
        nu: f64,
        warm: Option<FlowState>,
    ) -> Result<FlowState, FlowError> {
        assert!(nu > 0.0);
        let g = self.grid.clone();
        let f_l2 = f.l2();
        if f_l2 == 0.0 {
            return Ok(FlowState::at_rest(&g, nu));
        }
        let p0 = warm.map(|s| s.p).unwrap_or_else(|| ScalarField::zeros(&g));
        let mut state = self.schur_stokes_pass(f, nu, p0)?;
        let mut res = self.stationary_residual(&state, f);
        for _refine in 0..3 {
            if res <= 1e-8 * f_l2 {
                return Ok(state);
            }
            // Defect correction: solve the saddle problem for the residual
            // force and add the correction.
            let lap = apply_vector_laplacian(&state.u);
            let gp = gradient(&state.p);
            let mut defect = f.clone();
            for k in 0..defect.ux.len() {
                defect.ux[k] -= -nu * lap.ux[k] + gp.ux[k];
            }
            for k in 0..defect.uy.len() {
                defect.uy[k] -= -nu * lap.uy[k] + gp.uy[k];
            }
            defect.enforce_wall_faces();
            defect.sync_periodic();
            let corr = self.schur_stokes_pass(&defect, nu, ScalarField::zeros(&g))?;
            for (a, b) in state.u.ux.iter_mut().zip(corr.u.ux.iter()) {
                *a += b;
            }
            for (a, b) in state.u.uy.iter_mut().zip(corr.u.uy.iter()) {
                *a += b;
            }
            for (a, b) in state.p.data.iter_mut().zip(corr.p.data.iter()) {
                *a += b;
            }
            res = self.stationary_residual(&state, f);
        }
        if res <= 1e-8 * f_l2 {
            Ok(state)
        } else {
            Err(FlowError::NonConvergence {
                iters: 4,
                residual: res / f_l2,
            })
        }
    }

    /// Stationary Stokes driven by the buoyancy force `theta * rho_vec`.
    pub fn solve_stationary_stokes(
        &mut self,
        theta: &ScalarField,
        force: &GravityForcing,
        nu: f64,
    ) -> Result<FlowState, FlowError> {
        let f = buoyancy_faces(theta, force);
        self.solve_stationary_stokes_faces(&f, nu, None)
    }

    /// Stationary Navier-Stokes by Picard iteration: each step freezes the
    /// advection term from the previous iterate as extra forcing and solves
    /// stationary Stokes. Contraction is expected precisely when the
    /// thinness condition is satisfied. Returns the state and the Picard
    /// iteration count.
    pub fn solve_stationary_navier_stokes(
        &mut self,
        theta: &ScalarField,
        force: &GravityForcing,
        nu: f64,
    ) -> Result<(FlowState, usize), FlowError> {
        let g = self.grid.clone();
        let f = buoyancy_faces(theta, force);
        let mut state = FlowState::at_rest(&g, nu);
        let mut prev_norm = 0.0_f64;
        let mut doubling_streak = 0usize;
        let max_picard = 200;
        for it in 1..=max_picard {
            let adv = convective_term(&state.u);
            let mut rhs = f.clone();
            for (o, a) in rhs.ux.iter_mut().zip(adv.ux.iter()) {
                *o -= a;
            }
            for (o, a) in rhs.uy.iter_mut().zip(adv.uy.iter()) {
                *o -= a;
            }
            rhs.enforce_wall_faces();
            rhs.sync_periodic();
            let next = self.solve_stationary_stokes_faces(&rhs, nu, Some(state.clone()))?;
            let diff = {
                let mut d = next.u.clone();
                for (a, b) in d.ux.iter_mut().zip(state.u.ux.iter()) {
                    *a -= b;
                }
                for (a, b) in d.uy.iter_mut().zip(state.u.uy.iter()) {
                    *a -= b;
                }
                d.l2()
            };
            let n = next.u.l2();
            if n > 2.0 * prev_norm && prev_norm > 0.0 {
                doubling_streak += 1;
                if doubling_streak >= 10 {
                    return Err(FlowError::IterationDiverged { iter: it });
                }
            } else {
                doubling_streak = 0;
            }
            prev_norm = n;
            state = next;
            if diff < 1e-8 {
                return Ok((state, it));
            }
        }
        Err(FlowError::NonConvergence {
            iters: max_picard,
            residual: f64::NAN,
        })
    }
}

/// MAC discretization of `u . grad u` with centered differences and 4-point
/// transverse interpolation; ghosts follow no-slip walls and the grid's
/// x-end mode.
pub fn convective_term(v: &VectorField2D) -> VectorField2D {
    let g = v.grid.clone();
    let (nx, ny) = (g.nx, g.ny);
    let periodic = g.x_mode == XMode::Periodic;
    let idx = 1.0 / g.dx;
    let idy = 1.0 / g.dy;
    let mut out = VectorField2D::zeros(&g);

    let ux = |i: isize, j: isize| -> f64 {
        // Antimirror wall ghosts; x handled by wrap or pinned ends.
        let (jj, sign) = if j < 0 {
            (0, -1.0)
        } else if j as usize >= ny {
            (ny - 1, -1.0)
        } else {
            (j as usize, 1.0)
        };
        let ii = if periodic {
            (i.rem_euclid(nx as isize)) as usize
        } else {
            i.clamp(0, nx as isize) as usize
        };
        sign * v.ux[g.fx(ii, jj)]
    };
    let uy = |i: isize, j: isize| -> f64 {
        let jj = j.clamp(0, ny as isize) as usize;
        if periodic {
            let ii = (i.rem_euclid(nx as isize)) as usize;
            v.uy[g.fy(ii, jj)]
        } else if i < 0 {
            -v.uy[g.fy(0, jj)]
        } else if i as usize >= nx {
            -v.uy[g.fy(nx - 1, jj)]
        } else {
            v.uy[g.fy(i as usize, jj)]
        }
    };

    let lo = if periodic { 0 } else { 1 };
    for i in lo..nx {
        for j in 0..ny {
            let (is, js) = (i as isize, j as isize);
            let c = ux(is, js);
            let dudx = (ux(is + 1, js) - ux(is - 1, js)) * 0.5 * idx;
            let dudy = (ux(is, js + 1) - ux(is, js - 1)) * 0.5 * idy;
            let vbar =
                0.25 * (uy(is - 1, js) + uy(is - 1, js + 1) + uy(is, js) + uy(is, js + 1));
            out.ux[g.fx(i, j)] = c * dudx + vbar * dudy;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            let (is, js) = (i as isize, j as isize);
            let c = uy(is, js);
            let dvdy = (uy(is, js + 1) - uy(is, js - 1)) * 0.5 * idy;
            let dvdx = (uy(is + 1, js) - uy(is - 1, js)) * 0.5 * idx;
            let ubar =
                0.25 * (ux(is, js - 1) + ux(is, js) + ux(is + 1, js - 1) + ux(is + 1, js));
            out.uy[g.fy(i, j)] = ubar * dvdx + c * dvdy;
        }
    }
    out.sync_periodic();
    out
}

/// The explicit thinness number for the 2D channel of width `lambda`:
/// `(sqrt(3)/2) * rho/(nu sqrt(pi nu)) * sqrt(lambda) * C_P *
///  (C_PW + sqrt(g2^2 lambda^2 / 3))` with the interval constants
/// `C_P = C_PW = lambda/pi`. Below 1, the stationary Navier-Stokes fixed
/// point argument contracts.
pub fn thinness_condition(rho: f64, nu: f64, lambda: f64, g_hat: (f64, f64)) -> f64 {
    assert!(nu > 0.0 && lambda > 0.0);
    let len = (g_hat.0 * g_hat.0 + g_hat.1 * g_hat.1).sqrt();
    assert!((len - 1.0).abs() < 1e-12, "gravity direction must be unit");
    let c_p = lambda / std::f64::consts::PI;
    let c_pw = lambda / std::f64::consts::PI;
    let cross = (g_hat.1 * g_hat.1 * lambda * lambda / 3.0).sqrt();
    (3.0_f64.sqrt() / 2.0) * (rho / (nu * (std::f64::consts::PI * nu).sqrt()))
        * lambda.sqrt()
        * c_p
        * (c_pw + cross)
}

/// Sup-norm bound bookkeeping for a stationary Stokes solve with force `g`:
/// the measured `||u||_inf`, the gradient and force norms, the
/// viscosity-explicit combination `sqrt(2/(nu pi)) ||grad u||^(1/2)
/// ||g||^(1/2)`, and the implied residual constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupBoundReport {
    pub u_inf: f64,
    pub grad_u_l2: f64,
    pub force_l2: f64,
    pub xie_term: f64,
    /// `(||u||_inf - xie_term) / ||grad u||`; reported, not asserted, since
    /// the cross-section constant is not pinned by theory.
    pub implied_constant: f64,
}

pub fn sup_bound_report(state: &FlowState, force_faces: &VectorField2D) -> SupBoundReport {
    let u_inf = state.u.linf();
    let grad_u_l2 = grad_norm_sq_vec(&state.u).sqrt();
    let force_l2 = force_faces.l2();
    let xie_term =
        (2.0 / (state.nu * std::f64::consts::PI)).sqrt() * grad_u_l2.sqrt() * force_l2.sqrt();
    let implied_constant = if grad_u_l2 > 0.0 {
        (u_inf - xie_term) / grad_u_l2
    } else {
        0.0
    };
    SupBoundReport {
        u_inf,
        grad_u_l2,
        force_l2,
        xie_term,
        implied_constant,
    }
}

/// Energy bookkeeping for one Stokes step. Squared quantities throughout.
///
/// The backward-Euler energy balance, tested at the viscous predictor `u*`
/// where it is an identity minus nonnegative dissipation terms, gives the
/// provable per-step inequality ([`StepEnergy::predictor_residual`] <= 0 up
/// to solver rounding). The headline inequality written with the projected
/// velocity ([`StepEnergy::literal_residual`]) additionally carries the
/// projection's effect on the Dirichlet seminorm, which transient growth
/// can push slightly positive; it is reported, and vanishes for decaying
/// flows.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepEnergy {
    pub dt: f64,
    pub nu: f64,
    pub k0_sq: f64,
    pub kstar_sq: f64,
    pub k1_sq: f64,
    pub diss_star_sq: f64,
    pub diss_after_sq: f64,
    pub work_star: f64,
    pub work_after: f64,
}

impl StepEnergy {
    /// `(||u*||^2 - ||u0||^2)/(2 dt) + nu ||grad u*||^2 - <P f, u*>`;
    /// nonpositive up to rounding for every backward-Euler viscous step.
    pub fn predictor_residual(&self) -> f64 {
        if self.dt == 0.0 {
            return 0.0;
        }
        (self.kstar_sq - self.k0_sq) / (2.0 * self.dt) + self.nu * self.diss_star_sq
            - self.work_star
    }

    /// `(||u1||^2 - ||u0||^2)/dt + nu ||grad u1||^2 - <theta rho_vec, u1>`.
    pub fn literal_residual(&self) -> f64 {
        if self.dt == 0.0 {
            return 0.0;
        }
        (self.k1_sq - self.k0_sq) / self.dt + self.nu * self.diss_after_sq - self.work_after
    }
}

/// Left side minus right side of the discrete per-step energy inequality
/// `(||u1||^2 - ||u0||^2)/dt + nu ||grad u1||^2 <= <theta rho_vec, u1>`,
/// computed from the two states alone.
pub fn stokes_energy_residual(
    before: &FlowState,
    after: &FlowState,
    theta: &ScalarField,
    force: &GravityForcing,
    dt: f64,
) -> f64 {
    let f = buoyancy_faces(theta, force);
    let e1 = after.u.l2();
    let e0 = before.u.l2();
    let grad2 = grad_norm_sq_vec(&after.u);
    let work = f.inner(&after.u);
    (e1 * e1 - e0 * e0) / dt + after.nu * grad2 - work
}

/// Sides of the explicit gradient bound for the stationary Stokes solution
/// with buoyancy forcing:
/// `||grad u|| <= (rho/nu) C_P (C_PW + sqrt(g2^2 lambda^2/3)) ||grad theta||`
/// with the interval constants `C_P = C_PW = lambda/pi`. Returns
/// `(left, right)`.
pub fn gradient_bound_sides(
    state: &FlowState,
    theta: &ScalarField,
    force: &GravityForcing,
) -> (f64, f64) {
    let lambda = theta.grid.lambda;
    let c_p = lambda / std::f64::consts::PI;
    let c_pw = lambda / std::f64::consts::PI;
    let cross = (force.g2() * force.g2() * lambda * lambda / 3.0).sqrt();
    let left = grad_norm_sq_vec(&state.u).sqrt();
    let right = (force.rho / state.nu) * c_p * (c_pw + cross) * grad_norm_sq(theta).sqrt();
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid2D, WallPolicy};

    fn rnd_seq(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    #[test]
    fn projection_is_idempotent_and_kills_gradients() {
        let g = Grid2D::new(32, 16, 2.0, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let mut rnd = rnd_seq(3);

        let mut v = VectorField2D::zeros(&g);
        for x in v.ux.iter_mut() {
            *x = rnd();
        }
        for x in v.uy.iter_mut() {
            *x = rnd();
        }
        v.enforce_wall_faces();
        let (pv, _) = fs.project_divergence_free(&v).unwrap();
        let (ppv, _) = fs.project_divergence_free(&pv).unwrap();
        let mut d = ppv.clone();
        for (a, b) in d.ux.iter_mut().zip(pv.ux.iter()) {
            *a -= b;
        }
        for (a, b) in d.uy.iter_mut().zip(pv.uy.iter()) {
            *a -= b;
        }
        assert!(d.linf() < 1e-10, "projection not idempotent: {}", d.linf());

        // A pure gradient projects to ~zero.
        let mut s = ScalarField::zeros(&g);
        for x in s.data.iter_mut() {
            *x = rnd();
        }
        let gs = gradient(&s);
        let (pg, _) = fs.project_divergence_free(&gs).unwrap();
        assert!(pg.linf() < 1e-10 / g.dx, "gradient survived: {}", pg.linf());

        let dmax = norm(&divergence(&pv), Norm::LInf);
        assert!(dmax < 1e-10, "divergence {dmax}");
    }

    #[test]
    fn stokes_step_keeps_rest_states_at_rest() {
        let g = Grid2D::new(24, 12, 2.0, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let state = FlowState::at_rest(&g, 1.0);

        // Zero temperature: exact zeros.
        let theta = ScalarField::zeros(&g);
        let next = fs
            .step_stokes(&state, &theta, &GravityForcing::from_angle_degrees(0.5, 0.0), 1e-2)
            .unwrap();
        assert_eq!(next.u.linf(), 0.0);

        // Constant temperature: the force is a discrete gradient, removed by
        // the projection; u stays at rest to solver tolerance.
        let theta_c = ScalarField::constant(&g, 0.7);
        let next = fs
            .step_stokes(&state, &theta_c, &GravityForcing::from_angle_degrees(0.5, 0.0), 1e-2)
            .unwrap();
        assert!(next.u.linf() < 1e-12, "constant force leaked: {}", next.u.linf());
    }

    #[test]
    fn stokes_step_dissipates_without_forcing() {
        let g = Grid2D::new(24, 12, 1.5, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let mut rnd = rnd_seq(17);
        let mut v = VectorField2D::zeros(&g);
        for x in v.ux.iter_mut() {
            *x = rnd();
        }
        for x in v.uy.iter_mut() {
            *x = rnd();
        }
        v.enforce_wall_faces();
        let (u0, _) = fs.project_divergence_free(&v).unwrap();
        let mut state = FlowState { u: u0, p: ScalarField::zeros(&g), nu: 0.7 };
        let theta = ScalarField::zeros(&g);
        let force = GravityForcing::zero();
        let mut prev = state.u.l2();
        for _ in 0..5 {
            let next = fs.step_stokes(&state, &theta, &force, 5e-3).unwrap();
            let n = next.u.l2();
            assert!(n <= prev * (1.0 + 1e-12), "energy grew: {n} > {prev}");
            // The literal discrete energy inequality with 1e-8 slack.
            let r = stokes_energy_residual(&state, &next, &theta, &force, 5e-3);
            assert!(r <= 1e-8, "energy residual {r}");
            prev = n;
            state = next;
        }
    }

    #[test]
    fn poiseuille_stationary_stokes() {
        // Periodic channel, unit force along x, nu = 1, lambda = 1:
        // u1(y) = y(1-y)/2, max 0.125.
        let g = Grid2D::new(32, 64, 2.0, 1.0, XMode::Periodic);
        let mut fs = FlowSolver::new(&g);
        let mut f = VectorField2D::zeros(&g);
        for v in f.ux.iter_mut() {
            *v = 1.0;
        }
        let state = fs.solve_stationary_stokes_faces(&f, 1.0, None).unwrap();
        let max_u = state.u.linf_ux();
        assert!(
            (max_u - 0.125).abs() / 0.125 < 0.01,
            "Poiseuille max {max_u}, expected 0.125 within 1%"
        );
        let res = fs.stationary_residual(&state, &f);
        assert!(res <= 1e-8 * f.l2(), "residual {res}");
        assert!(norm(&divergence(&state.u), Norm::LInf) < 1e-10);
    }

    #[test]
    fn stationary_stokes_is_linear_in_theta() {
        let g = Grid2D::new(24, 16, 2.0, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let force = GravityForcing::from_angle_degrees(0.3, 0.0);
        let theta = ScalarField::from_fn(&g, |x, _| (-(x - 1.0) * (x - 1.0) * 4.0).exp());
        let s1 = fs.solve_stationary_stokes(&theta, &force, 1.0).unwrap();
        let mut theta2 = theta.clone();
        for v in theta2.data.iter_mut() {
            *v *= 2.0;
        }
        let s2 = fs.solve_stationary_stokes(&theta2, &force, 1.0).unwrap();
        let mut d = s2.u.clone();
        for (a, b) in d.ux.iter_mut().zip(s1.u.ux.iter()) {
            *a -= 2.0 * b;
        }
        for (a, b) in d.uy.iter_mut().zip(s1.u.uy.iter()) {
            *a -= 2.0 * b;
        }
        let scale = s2.u.linf().max(1e-300);
        assert!(d.linf() / scale < 1e-6, "not linear: {}", d.linf() / scale);
    }

    #[test]
    fn stationary_stokes_zero_theta_is_rest() {
        let g = Grid2D::new(16, 8, 1.0, 0.5, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let theta = ScalarField::zeros(&g);
        let s = fs
            .solve_stationary_stokes(&theta, &GravityForcing::from_angle_degrees(1.0, 0.0), 1.0)
            .unwrap();
        assert_eq!(s.u.linf(), 0.0);
        assert_eq!(norm(&s.p, Norm::LInf), 0.0);
    }

    #[test]
    fn navier_stokes_matches_stokes_for_poiseuille() {
        // Unidirectional flow: u . grad u vanishes identically, so the
        // Picard fixed point coincides with the Stokes answer.
        let g = Grid2D::new(32, 32, 2.0, 1.0, XMode::Periodic);
        let mut fs = FlowSolver::new(&g);
        let mut f = VectorField2D::zeros(&g);
        for v in f.ux.iter_mut() {
            *v = 1.0;
        }
        let stokes = fs.solve_stationary_stokes_faces(&f, 1.0, None).unwrap();
        let mut state = FlowState::at_rest(&g, 1.0);
        for _ in 0..10 {
            let adv = convective_term(&state.u);
            let mut rhs = f.clone();
            for (o, a) in rhs.ux.iter_mut().zip(adv.ux.iter()) {
                *o -= a;
            }
            for (o, a) in rhs.uy.iter_mut().zip(adv.uy.iter()) {
                *o -= a;
            }
            rhs.enforce_wall_faces();
            rhs.sync_periodic();
            state = fs.solve_stationary_stokes_faces(&rhs, 1.0, Some(state)).unwrap();
        }
        let mut d = state.u.clone();
        for (a, b) in d.ux.iter_mut().zip(stokes.u.ux.iter()) {
            *a -= b;
        }
        for (a, b) in d.uy.iter_mut().zip(stokes.u.uy.iter()) {
            *a -= b;
        }
        assert!(d.linf() < 1e-6, "NS deviated from Stokes by {}", d.linf());
    }

    #[test]
    fn navier_stokes_converges_on_front_snapshot() {
        let g = Grid2D::new(48, 16, 6.0, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let mut theta = ScalarField::from_fn(&g, |x, _| 1.0 / (1.0 + ((x - 2.5) * 3.0).exp()));
        theta.walls = WallPolicy::NeumannWalls;
        theta.left = 1.0;
        theta.right = 0.0;
        let force = GravityForcing::from_angle_degrees(0.1, 0.0);
        assert!(thinness_condition(0.1, 1.0, 1.0, force.g_hat) < 1.0);
        let (state, iters) = fs.solve_stationary_navier_stokes(&theta, &force, 1.0).unwrap();
        assert!(iters < 50, "Picard took {iters} iterations");
        assert!(norm(&divergence(&state.u), Norm::LInf) < 1e-10);
        // The explicit gradient bound holds for the Stokes solve (hard).
        let stokes = fs.solve_stationary_stokes(&theta, &force, 1.0).unwrap();
        let (ls, rs) = gradient_bound_sides(&stokes, &theta, &force);
        assert!(ls <= rs, "gradient bound violated: {ls} > {rs}");
    }

    #[test]
    fn thinness_reference_value() {
        // rho=0.1, nu=1, lambda=1, g=(0,-1): direct formula evaluation with
        // C_P = C_PW = 1/pi and cross term 1/sqrt(3).
        let v = thinness_condition(0.1, 1.0, 1.0, (0.0, -1.0));
        let pi = std::f64::consts::PI;
        let expect = (3.0_f64.sqrt() / 2.0) * (0.1 / pi.sqrt()) * (1.0 / pi)
            * (1.0 / pi + 1.0 / 3.0_f64.sqrt());
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.01393).abs() < 1e-5, "thinness {v}");
        assert_eq!(thinness_condition(0.0, 1.0, 1.0, (0.0, -1.0)), 0.0);
        let v2 = thinness_condition(0.2, 1.0, 1.0, (0.0, -1.0));
        assert!((v2 - 2.0 * v).abs() < 1e-15);
    }

    #[test]
    fn sup_bound_report_scales_consistently() {
        let g = Grid2D::new(32, 64, 2.0, 1.0, XMode::Periodic);
        let mut fs = FlowSolver::new(&g);
        let mut f = VectorField2D::zeros(&g);
        for v in f.ux.iter_mut() {
            *v = 1.0;
        }
        let s1 = fs.solve_stationary_stokes_faces(&f, 1.0, None).unwrap();
        let r1 = sup_bound_report(&s1, &f);
        assert!(r1.u_inf > 0.0 && r1.xie_term > 0.0);

        let mut f4 = f.clone();
        for v in f4.ux.iter_mut() {
            *v *= 4.0;
        }
        let s4 = fs.solve_stationary_stokes_faces(&f4, 1.0, None).unwrap();
        let r4 = sup_bound_report(&s4, &f4);
        // Stokes linearity: u_inf and grad scale by 4, hence so does the
        // Xie combination sqrt(grad)*sqrt(force).
        assert!((r4.u_inf / r1.u_inf - 4.0).abs() < 1e-6);
        assert!((r4.grad_u_l2 / r1.grad_u_l2 - 4.0).abs() < 1e-6);
        assert!((r4.xie_term / r1.xie_term - 4.0).abs() < 1e-6);
        let zero = sup_bound_report(&FlowState::at_rest(&g, 1.0), &VectorField2D::zeros(&g));
        assert_eq!(zero.u_inf, 0.0);
        assert_eq!(zero.xie_term, 0.0);
    }

    #[test]
    fn sup_bound_constant_stable_under_refinement() {
        // The implied residual constant of the sup-norm bound is a grid
        // functional; it must settle under transverse refinement.
        let mut constants = Vec::new();
        for ny in [48usize, 96] {
            let g = Grid2D::new(32, ny, 2.0, 1.0, XMode::Periodic);
            let mut fs = FlowSolver::new(&g);
            let mut f = VectorField2D::zeros(&g);
            for v in f.ux.iter_mut() {
                *v = 1.0;
            }
            let s = fs.solve_stationary_stokes_faces(&f, 1.0, None).unwrap();
            constants.push(sup_bound_report(&s, &f).implied_constant);
        }
        let change = (constants[1] - constants[0]).abs() / constants[1].abs();
        assert!(
            change < 0.2,
            "implied constant moved {:.1}% under refinement: {constants:?}",
            100.0 * change
        );
    }

    #[test]
    fn energy_inequality_under_forcing() {
        // Forced spin-up from rest: the backward-Euler dissipation
        // inequality at the viscous predictor holds with 1e-8 slack every
        // step; the projected-velocity form picks up a small transient
        // surplus and is only reported.
        let g = Grid2D::new(48, 32, 3.0, 1.0, XMode::Front);
        let mut fs = FlowSolver::new(&g);
        let mut theta = ScalarField::from_fn(&g, |x, _| 1.0 / (1.0 + ((x - 1.2) * 4.0).exp()));
        theta.left = 1.0;
        let force = GravityForcing::from_angle_degrees(0.2, 0.0);
        let mut state = FlowState::at_rest(&g, 1.0);
        let dt = 4e-4;
        let mut worst_literal = f64::NEG_INFINITY;
        for _ in 0..40 {
            let (next, energy) = fs
                .step_stokes_with_energy(&state, &theta, &force, dt)
                .unwrap();
            assert!(
                energy.predictor_residual() <= 1e-8,
                "dissipation inequality violated by {}",
                energy.predictor_residual()
            );
            worst_literal = worst_literal.max(energy.literal_residual());
            state = next;
        }
        assert!(state.u.linf() > 0.0, "buoyancy should drive flow");
        assert!(norm(&divergence(&state.u), Norm::LInf) < 1e-10);
        // The projected form exceeds the budget only by the transient
        // surplus, which stays small relative to the forcing work scale.
        assert!(worst_literal < 1e-4, "literal residual {worst_literal}");
    }
}
