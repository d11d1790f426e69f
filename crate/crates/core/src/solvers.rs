//! Direct solvers for the separable Helmholtz and Poisson systems on the
//! channel grid.
//!
//! Every implicit operator in this crate has the form `beta*I - Lap` with
//! boundary conditions that factor into an x-part and a transverse part, so
//! the systems are solved exactly: diagonalize in the transverse direction
//! (the cross-section is small) and run a tridiagonal solve per mode along
//! the channel. The solves are deterministic and accurate to rounding, which
//! is what the incompressibility, conservation and determinism requirements
//! of the simulations rest on.

use crate::grid::{Grid2D, Kahan, ScalarField, VectorField2D, WallPolicy, XMode};
use std::sync::Arc;

/// Eigen-decomposition of a 1D second-difference operator on the
/// cross-section, as a dense (modes x n) basis with per-mode weights.
///
/// All three bases used here have definite parity about the midline,
/// `basis[k][n-1-j] = s_k basis[k][j]` with `s_k = +/-1`; the transforms
/// fold the data into even/odd halves and touch only half of each row.
#[derive(Debug, Clone)]
pub struct YTransform {
    pub n: usize,
    pub modes: usize,
    /// Row-major `basis[k*n + j]`.
    basis: Vec<f64>,
    /// Inverse rows `inv[j*modes + k] = w_k * basis[k*n + j]`.
    inv: Vec<f64>,
    /// Parity sign of each mode about the midline.
    parity: Vec<f64>,
    /// Mode indices by parity and the packed inverse rows for each class.
    even_idx: Vec<usize>,
    odd_idx: Vec<usize>,
    inv_even: Vec<f64>,
    inv_odd: Vec<f64>,
    /// Eigenvalue of the second-difference operator (includes `1/dy^2`),
    /// nonpositive.
    pub eig: Vec<f64>,
}

impl YTransform {
    /// Cell-centered with mirror (Neumann) wall ghosts: cosine modes
    /// `cos(pi k (j+1/2)/n)`, eigenvalues `-(2/dy^2)(1 - cos(pi k / n))`.
    pub fn cell_neumann(n: usize, dy: f64) -> Self {
        let mut basis = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        for k in 0..n {
            let th = std::f64::consts::PI * k as f64 / n as f64;
            eig[k] = -(2.0 / (dy * dy)) * (1.0 - th.cos());
            for j in 0..n {
                basis[k * n + j] = (th * (j as f64 + 0.5)).cos();
            }
        }
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let w = if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
                inv[j * n + k] = w * basis[k * n + j];
            }
        }
        let parity = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        YTransform {
            n,
            modes: n,
            basis,
            inv,
            parity,
            even_idx: Vec::new(),
            odd_idx: Vec::new(),
            inv_even: Vec::new(),
            inv_odd: Vec::new(),
            eig,
        }
        .pack_parity()
    }

    /// Face-centered tangential component with antimirror (no-slip) wall
    /// ghosts: `sin(pi (k+1)(j+1/2)/n)`.
    pub fn face_tangential(n: usize, dy: f64) -> Self {
        let mut basis = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        for k in 0..n {
            let th = std::f64::consts::PI * (k + 1) as f64 / n as f64;
            eig[k] = -(2.0 / (dy * dy)) * (1.0 - th.cos());
            for j in 0..n {
                basis[k * n + j] = (th * (j as f64 + 0.5)).sin();
            }
        }
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                // The Nyquist mode (k+1 == n) has squared norm n, others n/2.
                let w = if k + 1 == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
                inv[j * n + k] = w * basis[k * n + j];
            }
        }
        // sin(pi (k+1)(n - j - 1/2)/n) = (-1)^k sin(pi (k+1)(j+1/2)/n).
        let parity = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        YTransform {
            n,
            modes: n,
            basis,
            inv,
            parity,
            even_idx: Vec::new(),
            odd_idx: Vec::new(),
            inv_even: Vec::new(),
            inv_odd: Vec::new(),
            eig,
        }
        .pack_parity()
    }

    /// Node-centered normal component pinned to zero at the walls: interior
    /// nodes `j = 1..n-1`, modes `sin(pi (k+1) j / n)`.
    pub fn node_normal(n: usize, dy: f64) -> Self {
        let m = n - 1;
        let mut basis = vec![0.0; m * m];
        let mut eig = vec![0.0; m];
        for k in 0..m {
            let th = std::f64::consts::PI * (k + 1) as f64 / n as f64;
            eig[k] = -(2.0 / (dy * dy)) * (1.0 - th.cos());
            for j in 0..m {
                basis[k * m + j] = (th * (j + 1) as f64).sin();
            }
        }
        let mut inv = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                inv[j * m + k] = (2.0 / n as f64) * basis[k * m + j];
            }
        }
        // sin(pi (k+1)(n-1-j)/n)... mirroring interior node j+1 to n-1-j
        // flips the sign for even k: parity (-1)^k.
        let parity = (0..m).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        YTransform {
            n: m,
            modes: m,
            basis,
            inv,
            parity,
            even_idx: Vec::new(),
            odd_idx: Vec::new(),
            inv_even: Vec::new(),
            inv_odd: Vec::new(),
            eig,
        }
        .pack_parity()
    }

    /// Transform columns to mode space, writing transposed: `out[k*ncol + c]`.
    /// `input` holds `ncol` columns of length `n` at stride `n`. Folds the
    /// column into even/odd halves so each mode row is only half-read.
    pub fn forward(&self, input: &[f64], ncol: usize, out: &mut [f64]) {
        debug_assert_eq!(input.len(), ncol * self.n);
        debug_assert_eq!(out.len(), ncol * self.modes);
        let n = self.n;
        let half = n / 2;
        let odd_n = n % 2 == 1;
        let mut even = vec![0.0; half + 1];
        let mut odd = vec![0.0; half];
        for c in 0..ncol {
            let col = &input[c * n..(c + 1) * n];
            for j in 0..half {
                even[j] = col[j] + col[n - 1 - j];
                odd[j] = col[j] - col[n - 1 - j];
            }
            if odd_n {
                even[half] = col[half];
            }
            for k in 0..self.modes {
                let row = &self.basis[k * n..k * n + half];
                let src = if self.parity[k] > 0.0 { &even[..half] } else { &odd[..half] };
                let mut acc = 0.0;
                for j in 0..half {
                    acc += row[j] * src[j];
                }
                if odd_n && self.parity[k] > 0.0 {
                    acc += self.basis[k * n + half] * even[half];
                }
                out[k * ncol + c] = acc;
            }
        }
    }

    /// Inverse of [`YTransform::forward`]: mode-major input `t[k*ncol + c]`
    /// back to columns `out[c*n + j]`, using the same parity fold with
    /// packed even/odd inverse rows.
    pub fn inverse(&self, t: &[f64], ncol: usize, out: &mut [f64]) {
        debug_assert_eq!(t.len(), ncol * self.modes);
        debug_assert_eq!(out.len(), ncol * self.n);
        let n = self.n;
        let half = n / 2;
        let odd_n = n % 2 == 1;
        let ne = self.even_idx.len();
        let no = self.odd_idx.len();
        let mut ge = vec![0.0; ne];
        let mut go = vec![0.0; no];
        for c in 0..ncol {
            for (m, &k) in self.even_idx.iter().enumerate() {
                ge[m] = t[k * ncol + c];
            }
            for (m, &k) in self.odd_idx.iter().enumerate() {
                go[m] = t[k * ncol + c];
            }
            let col = &mut out[c * n..(c + 1) * n];
            for j in 0..half {
                let re = &self.inv_even[j * ne..(j + 1) * ne];
                let ro = &self.inv_odd[j * no..(j + 1) * no];
                let mut pe = 0.0;
                for m in 0..ne {
                    pe += re[m] * ge[m];
                }
                let mut po = 0.0;
                for m in 0..no {
                    po += ro[m] * go[m];
                }
                col[j] = pe + po;
                col[n - 1 - j] = pe - po;
            }
            if odd_n {
                let re = &self.inv_even[half * ne..(half + 1) * ne];
                let mut acc = 0.0;
                for m in 0..ne {
                    acc += re[m] * ge[m];
                }
                col[half] = acc;
            }
        }
    }

    /// Build the packed parity-split inverse rows; called by constructors.
    fn pack_parity(mut self) -> Self {
        let n = self.n;
        let half = n / 2;
        let odd_n = n % 2 == 1;
        self.even_idx = (0..self.modes).filter(|&k| self.parity[k] > 0.0).collect();
        self.odd_idx = (0..self.modes).filter(|&k| self.parity[k] < 0.0).collect();
        let ne = self.even_idx.len();
        let no = self.odd_idx.len();
        let rows = half + usize::from(odd_n);
        self.inv_even = vec![0.0; rows * ne];
        self.inv_odd = vec![0.0; half * no];
        for j in 0..rows {
            for (m, &k) in self.even_idx.iter().enumerate() {
                self.inv_even[j * ne + m] = self.inv[j * self.modes + k];
            }
        }
        for j in 0..half {
            for (m, &k) in self.odd_idx.iter().enumerate() {
                self.inv_odd[j * no + m] = self.inv[j * self.modes + k];
            }
        }
        self
    }
}

/// End condition of a 1D x-line operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XEnds {
    /// Mirror ghosts (no-flux): pressure.
    Neumann,
    /// Ghost value condition `ghost = -interior` (homogeneous value pinned at
    /// the boundary half-cell): scalars in front mode, tangential velocity.
    ValueGhost,
    /// Unknowns at nodes with the boundary node pinned to zero: the normal
    /// velocity component at x-end faces. The line passed in excludes the
    /// pinned nodes.
    NodeDirichlet,
    /// Periodic wrap.
    Periodic,
}

/// Solves `(diag_add - Dxx) u = r` on one x-line, where `Dxx` is the
/// second-difference operator `1/dx^2 (u_{i-1} - 2u_i + u_{i+1})` closed by
/// `ends`. `diag_add >= 0`; the singular case (`diag_add == 0` with Neumann
/// or periodic ends) must go through [`integrate_singular_line`] instead.
pub struct LineSolver {
    pub nx: usize,
    pub idx2: f64,
    pub ends: XEnds,
    // scratch
    cp: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

impl LineSolver {
    pub fn new(nx: usize, dx: f64, ends: XEnds) -> Self {
        LineSolver {
            nx,
            idx2: 1.0 / (dx * dx),
            ends,
            cp: vec![0.0; nx],
            z1: vec![0.0; nx],
            z2: vec![0.0; nx],
        }
    }

    fn diag(&self, i: usize, diag_add: f64) -> f64 {
        let base = diag_add + 2.0 * self.idx2;
        match self.ends {
            XEnds::Neumann => {
                if i == 0 || i == self.nx - 1 {
                    diag_add + self.idx2
                } else {
                    base
                }
            }
            XEnds::ValueGhost => {
                if i == 0 || i == self.nx - 1 {
                    diag_add + 3.0 * self.idx2
                } else {
                    base
                }
            }
            XEnds::NodeDirichlet | XEnds::Periodic => base,
        }
    }

    /// Thomas elimination for the open (non-periodic) line.
    fn solve_open(&mut self, diag_add: f64, rhs: &mut [f64]) {
        let n = self.nx;
        let off = -self.idx2;
        let mut beta = self.diag(0, diag_add);
        rhs[0] /= beta;
        for i in 1..n {
            self.cp[i - 1] = off / beta;
            beta = self.diag(i, diag_add) - off * self.cp[i - 1];
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.cp[i] * rhs[i + 1];
        }
    }

    /// Periodic solve via Woodbury on the two wrap couplings.
    fn solve_periodic(&mut self, diag_add: f64, rhs: &mut [f64]) {
        let n = self.nx;
        let off = -self.idx2;
        // M = T + off*(e0 e_{n-1}^T + e_{n-1} e0^T), T the open operator.
        self.z1[..n].fill(0.0);
        self.z2[..n].fill(0.0);
        self.z1[0] = 1.0;
        self.z2[n - 1] = 1.0;
        // Solve the three systems against T.
        let save_ends = self.ends;
        self.ends = XEnds::NodeDirichlet; // plain (2,-1) line, no end tweak
        let mut z1 = std::mem::take(&mut self.z1);
        let mut z2 = std::mem::take(&mut self.z2);
        self.solve_open(diag_add, rhs);
        self.solve_open(diag_add, &mut z1);
        self.solve_open(diag_add, &mut z2);
        self.ends = save_ends;
        // cap = I + V^T T^-1 U, with U = off*[e0, e_{n-1}], V = [e_{n-1}, e0].
        let a11 = 1.0 + off * z1[n - 1];
        let a12 = off * z2[n - 1];
        let a21 = off * z1[0];
        let a22 = 1.0 + off * z2[0];
        let det = a11 * a22 - a12 * a21;
        let b1 = rhs[n - 1];
        let b2 = rhs[0];
        let c1 = (a22 * b1 - a12 * b2) / det;
        let c2 = (-a21 * b1 + a11 * b2) / det;
        for i in 0..n {
            rhs[i] -= off * (z1[i] * c1 + z2[i] * c2);
        }
        self.z1 = z1;
        self.z2 = z2;
    }

    pub fn solve(&mut self, diag_add: f64, rhs: &mut [f64]) {
        debug_assert!(diag_add >= 0.0);
        match self.ends {
            XEnds::Periodic => self.solve_periodic(diag_add, rhs),
            _ => self.solve_open(diag_add, rhs),
        }
    }
}

/// Double cumulative sum for the singular (mean-free) Poisson line
/// `Dxx q = r` with Neumann or periodic ends; returns a mean-zero solution.
pub fn integrate_singular_line(rhs: &mut [f64], dx: f64, ends: XEnds) {
    let n = rhs.len();
    // Face fluxes F_{i+1/2} = F_{i-1/2} + dx * r_i.
    let mut flux = vec![0.0; n];
    let mut acc = Kahan::new();
    for i in 0..n {
        acc.add(dx * rhs[i]);
        flux[i] = acc.sum();
    }
    if ends == XEnds::Periodic {
        // Choose the flux constant so q closes up around the wrap.
        let mean: f64 = flux.iter().sum::<f64>() / n as f64;
        for f in flux.iter_mut() {
            *f -= mean;
        }
    }
    // q_{i+1} = q_i + dx * F_{i+1/2}, q_0 = 0, then de-mean.
    let mut q = 0.0;
    let mut qsum = Kahan::new();
    for i in 0..n {
        rhs[i] = q;
        qsum.add(q);
        q += dx * flux[i];
    }
    let mean = qsum.sum() / n as f64;
    for v in rhs.iter_mut() {
        *v -= mean;
    }
}

/// Exact solvers for all separable implicit systems on one grid.
pub struct ChannelSolvers {
    pub grid: Arc<Grid2D>,
    cell_y: YTransform,
    ux_y: YTransform,
    uy_y: YTransform,
    cell_line_front: LineSolver,
    cell_line_neumann: LineSolver,
    cell_line_periodic: LineSolver,
    ux_line: LineSolver,
    uy_line: LineSolver,
    // mode-major scratch
    tmode: Vec<f64>,
}

impl ChannelSolvers {
    pub fn new(grid: &Arc<Grid2D>) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let periodic = grid.x_mode == XMode::Periodic;
        let ux_unknowns = if periodic { nx } else { nx - 1 };
        ChannelSolvers {
            grid: grid.clone(),
            cell_y: YTransform::cell_neumann(ny, grid.dy),
            ux_y: YTransform::face_tangential(ny, grid.dy),
            uy_y: YTransform::node_normal(ny, grid.dy),
            cell_line_front: LineSolver::new(nx, grid.dx, XEnds::ValueGhost),
            cell_line_neumann: LineSolver::new(nx, grid.dx, XEnds::Neumann),
            cell_line_periodic: LineSolver::new(nx, grid.dx, XEnds::Periodic),
            ux_line: LineSolver::new(
                ux_unknowns,
                grid.dx,
                if periodic { XEnds::Periodic } else { XEnds::NodeDirichlet },
            ),
            uy_line: LineSolver::new(
                nx,
                grid.dx,
                if periodic { XEnds::Periodic } else { XEnds::ValueGhost },
            ),
            tmode: vec![0.0; (nx + 1) * (ny + 1)],
        }
    }

    /// Solve `(beta*I - Lap) out = rhs` for a Neumann-wall scalar whose
    /// x-ends follow the grid mode with homogeneous pinned values.
    /// Inhomogeneous end values must be folded into `rhs` by the caller
    /// (add `2*value/dx^2 * coeff` at the end columns).
    pub fn scalar_helmholtz(&mut self, beta: f64, rhs: &ScalarField) -> ScalarField {
        assert_eq!(rhs.walls, WallPolicy::NeumannWalls);
        let g = self.grid.clone();
        let (nx, ny) = (g.nx, g.ny);
        let t = &mut self.tmode[..nx * ny];
        self.cell_y.forward(&rhs.data, nx, t);
        let line_solver = match g.x_mode {
            XMode::Periodic => &mut self.cell_line_periodic,
            XMode::Front => &mut self.cell_line_front,
        };
        for k in 0..ny {
            let diag_add = beta - self.cell_y.eig[k];
            let row = &mut t[k * nx..(k + 1) * nx];
            line_solver.solve(diag_add, row);
        }
        let mut out = ScalarField::zeros(&g);
        self.cell_y.inverse(t, nx, &mut out.data);
        out.walls = rhs.walls;
        out
    }

    /// Mean-zero solution of `Lap q = rhs - mean(rhs)` with no-flux ends and
    /// walls (periodic wrap in periodic mode).
    pub fn poisson_neumann(&mut self, rhs: &ScalarField) -> ScalarField {
        let g = self.grid.clone();
        let (nx, ny) = (g.nx, g.ny);
        // Remove the mean for Neumann compatibility, flip sign so each line
        // system is (diag_add - Dxx) with diag_add = -eig_k >= 0.
        let mean = {
            let mut acc = Kahan::new();
            for v in &rhs.data {
                acc.add(*v);
            }
            acc.sum() / (nx * ny) as f64
        };
        let mut b = ScalarField::zeros(&g);
        for (o, v) in b.data.iter_mut().zip(rhs.data.iter()) {
            *o = -(v - mean);
        }
        let t = &mut self.tmode[..nx * ny];
        self.cell_y.forward(&b.data, nx, t);
        let line_solver = match g.x_mode {
            XMode::Periodic => &mut self.cell_line_periodic,
            XMode::Front => &mut self.cell_line_neumann,
        };
        for k in 0..ny {
            let row = &mut t[k * nx..(k + 1) * nx];
            if k == 0 {
                // Singular mean-free mode: direct double integration of
                // Dxx q = r (note the sign flip back).
                for v in row.iter_mut() {
                    *v = -*v;
                }
                let ends = match g.x_mode {
                    XMode::Periodic => XEnds::Periodic,
                    XMode::Front => XEnds::Neumann,
                };
                integrate_singular_line(row, g.dx, ends);
            } else {
                line_solver.solve(-self.cell_y.eig[k], row);
            }
        }
        let mut out = ScalarField::zeros(&g);
        self.cell_y.inverse(t, nx, &mut out.data);
        // Gauge: mean-zero.
        let m = {
            let mut acc = Kahan::new();
            for v in &out.data {
                acc.add(*v);
            }
            acc.sum() / (nx * ny) as f64
        };
        for v in out.data.iter_mut() {
            *v -= m;
        }
        out
    }

    /// Solve `(beta*I - Lap) out = rhs` for the x-velocity face component
    /// under no-slip ghosts; end faces are pinned to zero in front mode.
    /// `rhs` and the return use the ux face layout.
    pub fn ux_helmholtz(&mut self, beta: f64, rhs: &[f64]) -> Vec<f64> {
        let g = self.grid.clone();
        let (nx, ny) = (g.nx, g.ny);
        debug_assert_eq!(rhs.len(), (nx + 1) * ny);
        let periodic = g.x_mode == XMode::Periodic;
        let ncol = if periodic { nx } else { nx - 1 };
        // Active columns: periodic 0..nx (duplicate dropped), front 1..nx.
        let start = if periodic { 0 } else { 1 };
        let mut cols = vec![0.0; ncol * ny];
        for c in 0..ncol {
            let i = start + c;
            cols[c * ny..(c + 1) * ny].copy_from_slice(&rhs[g.fx(i, 0)..g.fx(i, 0) + ny]);
        }
        let t = &mut self.tmode[..ncol * ny];
        self.ux_y.forward(&cols, ncol, t);
        for k in 0..ny {
            let diag_add = beta - self.ux_y.eig[k];
            let row = &mut t[k * ncol..(k + 1) * ncol];
            self.ux_line.solve(diag_add, row);
        }
        self.ux_y.inverse(t, ncol, &mut cols);
        let mut out = vec![0.0; (nx + 1) * ny];
        for c in 0..ncol {
            let i = start + c;
            out[g.fx(i, 0)..g.fx(i, 0) + ny].copy_from_slice(&cols[c * ny..(c + 1) * ny]);
        }
        if periodic {
            for j in 0..ny {
                out[g.fx(nx, j)] = out[g.fx(0, j)];
            }
        }
        out
    }

    /// Solve `(beta*I - Lap) out = rhs` for the transverse velocity face
    /// component; wall faces pinned to zero, antimirror ghosts at front
    /// x-ends. `rhs` and the return use the uy face layout.
    pub fn uy_helmholtz(&mut self, beta: f64, rhs: &[f64]) -> Vec<f64> {
        let g = self.grid.clone();
        let (nx, ny) = (g.nx, g.ny);
        debug_assert_eq!(rhs.len(), nx * (ny + 1));
        let m = ny - 1; // interior nodes
        let mut cols = vec![0.0; nx * m];
        for i in 0..nx {
            for j in 0..m {
                cols[i * m + j] = rhs[g.fy(i, j + 1)];
            }
        }
        let t = &mut self.tmode[..nx * m];
        self.uy_y.forward(&cols, nx, t);
        for k in 0..m {
            let diag_add = beta - self.uy_y.eig[k];
            let row = &mut t[k * nx..(k + 1) * nx];
            self.uy_line.solve(diag_add, row);
        }
        self.uy_y.inverse(t, nx, &mut cols);
        let mut out = vec![0.0; nx * (ny + 1)];
        for i in 0..nx {
            for j in 0..m {
                out[g.fy(i, j + 1)] = cols[i * m + j];
            }
        }
        out
    }
}

/// Apply the no-slip viscous Laplacian to a MAC field (ghost-aware),
/// returning a face field. Used by residual evaluators and tests; must be
/// the exact operator the tensor solvers invert.
pub fn apply_vector_laplacian(v: &VectorField2D) -> VectorField2D {
    let g = v.grid.clone();
    let (nx, ny) = (g.nx, g.ny);
    let idx2 = 1.0 / (g.dx * g.dx);
    let idy2 = 1.0 / (g.dy * g.dy);
    let periodic = g.x_mode == XMode::Periodic;
    let mut out = VectorField2D::zeros(&g);

    // ux component: active faces are 0..nx-1 (periodic, duplicate column
    // provides the wrap neighbor) or the interior 1..nx-1 (front mode, end
    // faces pinned to zero).
    let lo = if periodic { 0 } else { 1 };
    for i in lo..nx {
        for j in 0..ny {
            let c = v.ux[g.fx(i, j)];
            let w = if i == 0 { v.ux[g.fx(nx - 1, j)] } else { v.ux[g.fx(i - 1, j)] };
            let e = v.ux[g.fx(i + 1, j)];
            let b = if j == 0 { -c } else { v.ux[g.fx(i, j - 1)] };
            let t = if j == ny - 1 { -c } else { v.ux[g.fx(i, j + 1)] };
            out.ux[g.fx(i, j)] = (w - 2.0 * c + e) * idx2 + (b - 2.0 * c + t) * idy2;
        }
    }
    out.sync_periodic();

    // uy component, interior nodes.
    for i in 0..nx {
        for j in 1..ny {
            let c = v.uy[g.fy(i, j)];
            let w = if i == 0 {
                if periodic { v.uy[g.fy(nx - 1, j)] } else { -c }
            } else {
                v.uy[g.fy(i - 1, j)]
            };
            let e = if i == nx - 1 {
                if periodic { v.uy[g.fy(0, j)] } else { -c }
            } else {
                v.uy[g.fy(i + 1, j)]
            };
            let b = v.uy[g.fy(i, j - 1)];
            let t = v.uy[g.fy(i, j + 1)];
            out.uy[g.fy(i, j)] = (w - 2.0 * c + e) * idx2 + (b - 2.0 * c + t) * idy2;
        }
    }
    out
}
