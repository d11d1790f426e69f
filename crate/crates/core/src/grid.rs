//! Staggered (MAC) discretization of the truncated channel `[0, L_x] x [0, lambda]`.
//!
//! Scalars live at cell centers, the x-velocity component on vertical faces
//! and the transverse component on horizontal faces, so that the discrete
//! divergence of a projected field vanishes to rounding.
//!
//! Layouts (row = x index `i`, `j` contiguous):
//! * cells:    `i*ny + j`,       `i in 0..nx`,   center `((i+1/2)dx, (j+1/2)dy)`
//! * ux faces: `i*ny + j`,       `i in 0..=nx`,  position `(i dx, (j+1/2)dy)`
//! * uy faces: `i*(ny+1) + j`,   `j in 0..=ny`,  position `((i+1/2)dx, j dy)`
//!
//! In periodic x-mode the column `ux(nx, .)` duplicates `ux(0, .)`; every
//! mutating operation keeps the two in sync.

use std::sync::Arc;

/// End-condition mode along the unbounded channel direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XMode {
    /// Dirichlet-like ends for scalars (values pinned at the window ends),
    /// zero velocity at the end faces. The mode used by front simulations.
    Front,
    /// Periodic wrap, used by operator and conservation tests only.
    Periodic,
}

/// Wall (transverse boundary) policy for a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallPolicy {
    /// No-flux walls: ghost mirrors the adjacent interior value.
    NeumannWalls,
    /// Homogeneous Dirichlet walls: ghost negates the adjacent value.
    DirichletWalls,
}

#[derive(Debug, Clone)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub lambda: f64,
    pub dx: f64,
    pub dy: f64,
    pub x_mode: XMode,
}

impl Grid2D {
    /// Panics if the cell counts are zero, the cross-section is unresolved
    /// (`ny < 8`) or the extents are not positive.
    pub fn new(nx: usize, ny: usize, lx: f64, lambda: f64, x_mode: XMode) -> Arc<Self> {
        assert!(nx >= 2, "nx must be at least 2");
        assert!(ny >= 8, "cross-section must be resolved: ny >= 8");
        assert!(lx > 0.0 && lambda > 0.0, "extents must be positive");
        Arc::new(Grid2D {
            nx,
            ny,
            lx,
            lambda,
            dx: lx / nx as f64,
            dy: lambda / ny as f64,
            x_mode,
        })
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn fx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn fy(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell-center x coordinate.
    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Cell-center transverse coordinate.
    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Which norm to take of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

/// Cell-centered scalar field with a wall policy and x-end values.
///
/// `left`/`right` are the pinned end values used in front mode
/// (ignored under periodic wrap).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid2D>,
    pub data: Vec<f64>,
    pub walls: WallPolicy,
    pub left: f64,
    pub right: f64,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        ScalarField {
            grid: grid.clone(),
            data: vec![0.0; grid.n_cells()],
            walls: WallPolicy::NeumannWalls,
            left: 0.0,
            right: 0.0,
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut s = ScalarField::zeros(grid);
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                s.data[grid.cell(i, j)] = f(grid.x_center(i), grid.y_center(j));
            }
        }
        s
    }

    pub fn constant(grid: &Arc<Grid2D>, c: f64) -> Self {
        let mut s = ScalarField::zeros(grid);
        s.data.fill(c);
        s.left = c;
        s.right = c;
        s
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.cell(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Ghost value just outside the bottom wall (`j = -1`).
    #[inline]
    fn ghost_bottom(&self, i: usize) -> f64 {
        match self.walls {
            WallPolicy::NeumannWalls => self.at(i, 0),
            WallPolicy::DirichletWalls => -self.at(i, 0),
        }
    }

    /// Ghost value just outside the top wall (`j = ny`).
    #[inline]
    fn ghost_top(&self, i: usize) -> f64 {
        let ny = self.grid.ny;
        match self.walls {
            WallPolicy::NeumannWalls => self.at(i, ny - 1),
            WallPolicy::DirichletWalls => -self.at(i, ny - 1),
        }
    }

    /// Ghost value just left of the window (`i = -1`).
    #[inline]
    fn ghost_left(&self, j: usize) -> f64 {
        match self.grid.x_mode {
            XMode::Periodic => self.at(self.grid.nx - 1, j),
            XMode::Front => 2.0 * self.left - self.at(0, j),
        }
    }

    /// Ghost value just right of the window (`i = nx`).
    #[inline]
    fn ghost_right(&self, j: usize) -> f64 {
        match self.grid.x_mode {
            XMode::Periodic => self.at(0, j),
            XMode::Front => 2.0 * self.right - self.at(self.grid.nx - 1, j),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// MAC-staggered velocity field.
#[derive(Debug, Clone)]
pub struct VectorField2D {
    pub grid: Arc<Grid2D>,
    /// x-component on vertical faces, `(nx+1) * ny` values.
    pub ux: Vec<f64>,
    /// transverse component on horizontal faces, `nx * (ny+1)` values.
    pub uy: Vec<f64>,
}

impl VectorField2D {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        VectorField2D {
            grid: grid.clone(),
            ux: vec![0.0; (grid.nx + 1) * grid.ny],
            uy: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Sample analytic components at all face positions (wall faces
    /// included); in periodic mode the duplicate column is synced. Call
    /// [`VectorField2D::enforce_wall_faces`] afterwards when the field is
    /// meant to satisfy no-penetration.
    pub fn from_fn(
        grid: &Arc<Grid2D>,
        mut fx: impl FnMut(f64, f64) -> f64,
        mut fy: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut v = VectorField2D::zeros(grid);
        for i in 0..=grid.nx {
            for j in 0..grid.ny {
                v.ux[grid.fx(i, j)] = fx(i as f64 * grid.dx, grid.y_center(j));
            }
        }
        for i in 0..grid.nx {
            for j in 0..=grid.ny {
                v.uy[grid.fy(i, j)] = fy(grid.x_center(i), j as f64 * grid.dy);
            }
        }
        v.sync_periodic();
        v
    }

    /// Keep the duplicated `ux` column consistent in periodic mode.
    pub fn sync_periodic(&mut self) {
        if self.grid.x_mode == XMode::Periodic {
            let nx = self.grid.nx;
            for j in 0..self.grid.ny {
                self.ux[self.grid.fx(nx, j)] = self.ux[self.grid.fx(0, j)];
            }
        }
    }

    /// Zero the wall-normal faces (no penetration). Tangential no-slip is a
    /// ghost property enforced by the operators, not stored.
    pub fn enforce_wall_faces(&mut self) {
        let g = &self.grid;
        for i in 0..g.nx {
            self.uy[g.fy(i, 0)] = 0.0;
            self.uy[g.fy(i, g.ny)] = 0.0;
        }
        if g.x_mode == XMode::Front {
            for j in 0..g.ny {
                self.ux[g.fx(0, j)] = 0.0;
                self.ux[g.fx(g.nx, j)] = 0.0;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(self.uy.iter()).all(|v| v.is_finite())
    }

    /// Max absolute face value over both components.
    pub fn linf(&self) -> f64 {
        let mx = self.ux.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let my = self.uy.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        mx.max(my)
    }

    /// Max absolute `ux` face value.
    pub fn linf_ux(&self) -> f64 {
        self.ux.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max absolute `uy` face value.
    pub fn linf_uy(&self) -> f64 {
        self.uy.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `L2` norm over active faces (the duplicate periodic column counted once).
    pub fn l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Face-weighted inner product over active faces.
    pub fn inner(&self, other: &VectorField2D) -> f64 {
        let g = &self.grid;
        let ux_hi = match g.x_mode {
            XMode::Periodic => g.nx, // skip duplicate column
            XMode::Front => g.nx + 1,
        };
        let mut acc = LaneSum::new();
        for i in 0..ux_hi {
            for j in 0..g.ny {
                let k = g.fx(i, j);
                acc.add(self.ux[k] * other.ux[k]);
            }
        }
        for i in 0..g.nx {
            for j in 0..=g.ny {
                let k = g.fy(i, j);
                acc.add(self.uy[k] * other.uy[k]);
            }
        }
        acc.sum() * g.cell_area()
    }
}

/// Neumaier-compensated accumulator; fixed order makes reductions
/// bit-reproducible and accurate enough for the 1e-12 conservation checks.
#[derive(Debug, Clone, Copy)]
pub struct Kahan {
    s: f64,
    c: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan { s: 0.0, c: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl Default for Kahan {
    fn default() -> Self {
        Self::new()
    }
}

/// Eight-lane accumulator for hot-path reductions: deterministic (fixed
/// lane assignment and combine order) and an order of magnitude faster than
/// the compensated sum, at plain f64 accuracy per lane. Used where ~1e-14
/// relative accuracy suffices.
#[derive(Debug, Clone, Copy)]
pub struct LaneSum {
    lanes: [f64; 8],
    i: usize,
}

impl LaneSum {
    #[inline]
    pub fn new() -> Self {
        LaneSum { lanes: [0.0; 8], i: 0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        self.lanes[self.i & 7] += v;
        self.i += 1;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        let l = &self.lanes;
        ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
    }
}

impl Default for LaneSum {
    fn default() -> Self {
        Self::new()
    }
}

/// Standard 5-point discrete Laplacian with ghost cells implementing the
/// field's wall policy and the grid's x-end condition.
pub fn laplacian(s: &ScalarField) -> ScalarField {
    let g = s.grid.clone();
    let (nx, ny) = (g.nx, g.ny);
    let idx2 = 1.0 / (g.dx * g.dx);
    let idy2 = 1.0 / (g.dy * g.dy);
    let mut out = ScalarField::zeros(&g);
    out.walls = s.walls;
    for i in 0..nx {
        for j in 0..ny {
            let c = s.at(i, j);
            let w = if i == 0 { s.ghost_left(j) } else { s.at(i - 1, j) };
            let e = if i == nx - 1 { s.ghost_right(j) } else { s.at(i + 1, j) };
            let b = if j == 0 { s.ghost_bottom(i) } else { s.at(i, j - 1) };
            let t = if j == ny - 1 { s.ghost_top(i) } else { s.at(i, j + 1) };
            out.data[g.cell(i, j)] = (w - 2.0 * c + e) * idx2 + (b - 2.0 * c + t) * idy2;
        }
    }
    out
}

/// Cell-centered discrete divergence of a MAC field; exact adjoint
/// (up to sign) of [`gradient`] on the same grid.
pub fn divergence(v: &VectorField2D) -> ScalarField {
    let g = v.grid.clone();
    let idx = 1.0 / g.dx;
    let idy = 1.0 / g.dy;
    let mut out = ScalarField::zeros(&g);
    for i in 0..g.nx {
        for j in 0..g.ny {
            out.data[g.cell(i, j)] = (v.ux[g.fx(i + 1, j)] - v.ux[g.fx(i, j)]) * idx
                + (v.uy[g.fy(i, j + 1)] - v.uy[g.fy(i, j)]) * idy;
        }
    }
    out
}

/// Face-centered differences of a cell scalar. Wall faces and (in front
/// mode) x-end faces are zero, which is what makes the summation-by-parts
/// identity with [`divergence`] exact.
pub fn gradient(s: &ScalarField) -> VectorField2D {
    let g = s.grid.clone();
    let idx = 1.0 / g.dx;
    let idy = 1.0 / g.dy;
    let mut out = VectorField2D::zeros(&g);
    for i in 1..g.nx {
        for j in 0..g.ny {
            out.ux[g.fx(i, j)] = (s.at(i, j) - s.at(i - 1, j)) * idx;
        }
    }
    if g.x_mode == XMode::Periodic {
        for j in 0..g.ny {
            let d = (s.at(0, j) - s.at(g.nx - 1, j)) * idx;
            out.ux[g.fx(0, j)] = d;
            out.ux[g.fx(g.nx, j)] = d;
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            out.uy[g.fy(i, j)] = (s.at(i, j) - s.at(i, j - 1)) * idy;
        }
    }
    out
}

/// `L1`, `L2` or `Linf` norm with the cell measure `dx*dy`;
/// summation runs in a fixed deterministic order.
pub fn norm(s: &ScalarField, kind: Norm) -> f64 {
    match kind {
        Norm::L1 => {
            let mut acc = Kahan::new();
            for v in &s.data {
                acc.add(v.abs());
            }
            acc.sum() * s.grid.cell_area()
        }
        Norm::L2 => {
            let mut acc = Kahan::new();
            for v in &s.data {
                acc.add(v * v);
            }
            (acc.sum() * s.grid.cell_area()).sqrt()
        }
        Norm::LInf => s.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    }
}

/// Signed integral (not a norm): `sum s * dx * dy`.
pub fn integral(s: &ScalarField) -> f64 {
    let mut acc = Kahan::new();
    for v in &s.data {
        acc.add(*v);
    }
    acc.sum() * s.grid.cell_area()
}

/// Cell inner product `<a, b> = sum a*b*dx*dy`.
pub fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    debug_assert_eq!(a.data.len(), b.data.len());
    let mut acc = Kahan::new();
    for (x, y) in a.data.iter().zip(b.data.iter()) {
        acc.add(x * y);
    }
    acc.sum() * a.grid.cell_area()
}

/// Per-column mean over the cross-section; length `nx`.
pub fn cross_section_average(s: &ScalarField) -> Vec<f64> {
    let g = &s.grid;
    let inv = 1.0 / g.ny as f64;
    (0..g.nx)
        .map(|i| {
            let mut acc = Kahan::new();
            for j in 0..g.ny {
                acc.add(s.at(i, j));
            }
            acc.sum() * inv
        })
        .collect()
}

/// Squared discrete Dirichlet energy of a scalar over interior faces
/// (x-pairs and transverse pairs), `sum |grad s|^2 dx dy`. Wall and x-end
/// faces are excluded; under Neumann walls they carry no gradient, and the
/// quantity matches the face-gradient quadrature used by the diagnostics.
pub fn grad_norm_sq(s: &ScalarField) -> f64 {
    let g = &s.grid;
    let idx = 1.0 / g.dx;
    let idy = 1.0 / g.dy;
    let mut acc = LaneSum::new();
    for i in 1..g.nx {
        for j in 0..g.ny {
            let d = (s.at(i, j) - s.at(i - 1, j)) * idx;
            acc.add(d * d);
        }
    }
    if g.x_mode == XMode::Periodic {
        for j in 0..g.ny {
            let d = (s.at(0, j) - s.at(g.nx - 1, j)) * idx;
            acc.add(d * d);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            let d = (s.at(i, j) - s.at(i, j - 1)) * idy;
            acc.add(d * d);
        }
    }
    acc.sum() * g.cell_area()
}

/// Squared discrete Dirichlet energy of a MAC field, ghost-aware so that
/// `<-Lap u, u> = grad_norm_sq_vec(u)` exactly for the no-slip viscous
/// operator (wall ghosts antimirror the tangential component).
pub fn grad_norm_sq_vec(v: &VectorField2D) -> f64 {
    let g = &v.grid;
    let idx = 1.0 / g.dx;
    let idy = 1.0 / g.dy;
    let mut acc = LaneSum::new();

    // ux: x-differences between consecutive stored faces.
    let ux_hi = match g.x_mode {
        XMode::Periodic => g.nx,
        XMode::Front => g.nx,
    };
    for i in 0..ux_hi {
        for j in 0..g.ny {
            let d = (v.ux[g.fx(i + 1, j)] - v.ux[g.fx(i, j)]) * idx;
            acc.add(d * d);
        }
    }
    // ux: transverse differences; antimirror wall ghosts double the one-sided
    // difference at the walls.
    let ux_cols = match g.x_mode {
        XMode::Periodic => g.nx,
        XMode::Front => g.nx + 1,
    };
    for i in 0..ux_cols {
        for j in 0..g.ny - 1 {
            let d = (v.ux[g.fx(i, j + 1)] - v.ux[g.fx(i, j)]) * idy;
            acc.add(d * d);
        }
        let bottom = v.ux[g.fx(i, 0)];
        let top = v.ux[g.fx(i, g.ny - 1)];
        acc.add(2.0 * bottom * bottom * idy * idy);
        acc.add(2.0 * top * top * idy * idy);
    }

    // uy: transverse differences between stored faces (walls included).
    for i in 0..g.nx {
        for j in 0..g.ny {
            let d = (v.uy[g.fy(i, j + 1)] - v.uy[g.fy(i, j)]) * idy;
            acc.add(d * d);
        }
    }
    // uy: x-differences; front mode antimirrors at the x-ends.
    for i in 0..g.nx - 1 {
        for j in 0..=g.ny {
            let d = (v.uy[g.fy(i + 1, j)] - v.uy[g.fy(i, j)]) * idx;
            acc.add(d * d);
        }
    }
    match g.x_mode {
        XMode::Periodic => {
            for j in 0..=g.ny {
                let d = (v.uy[g.fy(0, j)] - v.uy[g.fy(g.nx - 1, j)]) * idx;
                acc.add(d * d);
            }
        }
        XMode::Front => {
            for j in 0..=g.ny {
                let first = v.uy[g.fy(0, j)];
                let last = v.uy[g.fy(g.nx - 1, j)];
                acc.add(2.0 * first * first * idx * idx);
                acc.add(2.0 * last * last * idx * idx);
            }
        }
    }
    acc.sum() * g.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, mode: XMode) -> Arc<Grid2D> {
        Grid2D::new(nx, ny, 2.0, 1.0, mode)
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = grid(32, 16, XMode::Periodic);
        let s = ScalarField::constant(&g, 3.75);
        let l = laplacian(&s);
        for v in &l.data {
            assert!(v.abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn laplacian_sine_is_discrete_eigenfield() {
        // sin(2 pi x / Lx) in periodic mode is an eigenfield of the 5-point
        // stencil with eigenvalue -(2/dx^2)(1 - cos(2 pi dx / Lx)).
        let g = grid(64, 8, XMode::Periodic);
        let s = ScalarField::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * x / g.lx).sin());
        let l = laplacian(&s);
        let eig = -(2.0 / (g.dx * g.dx))
            * (1.0 - (2.0 * std::f64::consts::PI * g.dx / g.lx).cos());
        for (lv, sv) in l.data.iter().zip(s.data.iter()) {
            assert!((lv - eig * sv).abs() < 1e-10, "lap {lv} vs {}", eig * sv);
        }
    }

    #[test]
    fn laplacian_linear_with_neumann_walls_mirrors_at_walls() {
        // A field linear in the transverse coordinate: interior rows vanish,
        // wall-adjacent rows feel the mirror ghost.
        let g = grid(8, 16, XMode::Periodic);
        let s = ScalarField::from_fn(&g, |_, y| 2.0 * y);
        let l = laplacian(&s);
        let idy2 = 1.0 / (g.dy * g.dy);
        for i in 0..g.nx {
            for j in 0..g.ny {
                let v = l.at(i, j);
                if j == 0 {
                    // ghost = value(0): (v0 - 2 v0 + v1)/dy^2 = dy*2/dy^2
                    assert!((v - 2.0 * g.dy * idy2).abs() < 1e-9);
                } else if j == g.ny - 1 {
                    assert!((v + 2.0 * g.dy * idy2).abs() < 1e-9);
                } else {
                    assert!(v.abs() < 1e-9, "interior row should vanish, got {v}");
                }
            }
        }
    }

    #[test]
    fn divergence_of_uniform_field_is_zero() {
        let g = grid(16, 8, XMode::Periodic);
        let v = VectorField2D::from_fn(&g, |_, _| 1.25, |_, _| 0.0);
        let d = divergence(&v);
        for val in &d.data {
            assert!(val.abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_of_linear_solenoidal_field_is_machine_zero() {
        // v = (x, -y): exactly linear components cancel on the staggered grid.
        let g = Grid2D::new(16, 16, 2.0, 1.0, XMode::Front);
        let v = VectorField2D::from_fn(&g, |x, _| x, |_, y| -y);
        let d = divergence(&v);
        for val in &d.data {
            assert!(val.abs() < 1e-12, "got {val}");
        }
    }

    #[test]
    fn divergence_of_x_field_is_ones() {
        let g = Grid2D::new(16, 16, 2.0, 1.0, XMode::Front);
        let v = VectorField2D::from_fn(&g, |x, _| x, |_, _| 0.0);
        let d = divergence(&v);
        for val in &d.data {
            assert!((val - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid(16, 8, XMode::Front);
        let s = ScalarField::constant(&g, 7.0);
        let v = gradient(&s);
        assert!(v.linf() < 1e-13);
    }

    #[test]
    fn gradient_of_x_is_one_on_interior_faces() {
        let g = Grid2D::new(16, 8, 2.0, 1.0, XMode::Front);
        let s = ScalarField::from_fn(&g, |x, _| x);
        let v = gradient(&s);
        for i in 1..g.nx {
            for j in 0..g.ny {
                assert!((v.ux[g.fx(i, j)] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summation_by_parts_adjointness() {
        // <grad s, v> + <s, div v> = 0 for v with zero wall-normal and end
        // faces, checked on deterministic pseudo-random fields.
        for mode in [XMode::Front, XMode::Periodic] {
            let g = Grid2D::new(24, 12, 1.7, 0.9, mode);
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut rnd = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let mut s = ScalarField::zeros(&g);
            for v in s.data.iter_mut() {
                *v = rnd();
            }
            let mut v = VectorField2D::zeros(&g);
            for val in v.ux.iter_mut() {
                *val = rnd();
            }
            for val in v.uy.iter_mut() {
                *val = rnd();
            }
            v.enforce_wall_faces();
            v.sync_periodic();

            let gs = gradient(&s);
            let dv = divergence(&v);
            let a = gs.inner(&v);
            let b = inner(&s, &dv);
            let scale = a.abs().max(b.abs()).max(1e-30);
            assert!(
                (a + b).abs() / scale < 1e-12,
                "SBP violated in {mode:?}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn norms_on_reference_fields() {
        let g = Grid2D::new(64, 16, 2.0, 1.0, XMode::Periodic);
        let ones = ScalarField::constant(&g, 1.0);
        assert!((norm(&ones, Norm::L1) - g.lx * g.lambda).abs() < 1e-12);

        let mut spike = ScalarField::zeros(&g);
        spike.data[g.cell(3, 5)] = -4.5;
        assert!((norm(&spike, Norm::LInf) - 4.5).abs() < 1e-15);

        // L2 of sin(2 pi x / Lx) -> sqrt(Lx * lambda / 2) up to quadrature.
        let s = ScalarField::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * x / g.lx).sin());
        let expect = (g.lx * g.lambda / 2.0).sqrt();
        let got = norm(&s, Norm::L2);
        assert!(
            (got - expect).abs() < 1e-6,
            "quadrature of sine L2: {got} vs {expect}"
        );
    }

    #[test]
    fn cross_section_average_basics() {
        let g = Grid2D::new(16, 16, 2.0, 1.0, XMode::Front);
        // Independent of the cross-section: returns the x-slice.
        let s = ScalarField::from_fn(&g, |x, _| x * x);
        let psi = cross_section_average(&s);
        for (i, p) in psi.iter().enumerate() {
            assert!((p - g.x_center(i) * g.x_center(i)).abs() < 1e-12);
        }
        // Odd about the midline: zero profile.
        let odd = ScalarField::from_fn(&g, |_, y| y - g.lambda / 2.0);
        for p in cross_section_average(&odd) {
            assert!(p.abs() < 1e-12);
        }
    }

    #[test]
    fn cross_section_contraction() {
        // |Omega| * ||psi||^2 <= ||s||^2 exactly in the discrete products.
        let g = Grid2D::new(20, 10, 1.3, 0.7, XMode::Front);
        let mut state = 12345u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut s = ScalarField::zeros(&g);
        for v in s.data.iter_mut() {
            *v = rnd();
        }
        let psi = cross_section_average(&s);
        let psi_sq: f64 = psi.iter().map(|p| p * p).sum::<f64>() * g.dx;
        let l2 = norm(&s, Norm::L2);
        assert!(g.lambda * psi_sq <= l2 * l2 * (1.0 + 1e-13));
    }

    #[test]
    fn laplacian_second_order_convergence() {
        // Smooth analytic field; observed order >= 1.8 over a dyadic triple.
        let f = |x: f64, y: f64| (x).sin() * (1.0 + 0.5 * (std::f64::consts::PI * y).cos());
        let exact = |x: f64, y: f64| {
            -(x).sin() * (1.0 + 0.5 * (std::f64::consts::PI * y).cos())
                - (x).sin() * 0.5 * std::f64::consts::PI * std::f64::consts::PI
                    * (std::f64::consts::PI * y).cos()
        };
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = Grid2D::new(2 * n, n, 2.0, 1.0, XMode::Front);
            let mut s = ScalarField::from_fn(&g, f);
            s.walls = WallPolicy::NeumannWalls;
            // Neumann-compatible in y requires zero normal derivative at the
            // walls: the cos(pi y) factor satisfies it.
            s.left = 0.0;
            s.right = 0.0;
            let l = laplacian(&s);
            let mut emax = 0.0_f64;
            // Interior cells only: end ghosts are first-order at the exact
            // Dirichlet values, interior is the second-order claim.
            for i in 2..g.nx - 2 {
                for j in 0..g.ny {
                    let e = (l.at(i, j) - exact(g.x_center(i), g.y_center(j))).abs();
                    emax = emax.max(e);
                }
            }
            errs.push(emax);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(
            order1 > 1.8 && order2 > 1.8,
            "observed orders {order1:.2}, {order2:.2} (errors {errs:?})"
        );
    }
}
