//! Numerical laboratory for reactive front propagation in a 2D channel under
//! Stokes-Boussinesq coupling: discretization, laminar-front solvers, flow
//! solvers, the coupled simulation loop, and the diagnostic/verification
//! machinery for the quantitative front-stability estimates.

pub mod diagnostics;
pub mod flow;
pub mod front;
pub mod grid;
pub mod reaction;
pub mod sim;
pub mod solvers;

pub use grid::{Grid2D, Norm, ScalarField, VectorField2D, WallPolicy, XMode};
pub use reaction::{IgnitionNonlinearity, ReactionKind};
