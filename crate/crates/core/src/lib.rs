//! Numerical laboratory for the Isobe–Kakinuma shallow-water model.
//!
//! * [`spectral`]: periodic Fourier grid, derivatives, multipliers, dealiased products.
//! * [`operators`]: the model's elliptic operators, nonlinear terms, energies and
//!   the preconditioned CG solve for the coupled potential pair.
//! * [`ik_solver`]: RK4 time stepping of the model with constraint reprojection.
//! * [`dtn_ww`]: exact and expanded Dirichlet-to-Neumann operators and the
//!   Zakharov–Craig–Sulem water-wave solver used as reference.
//! * [`consistency`]: remainder terms and residuals of model solutions plugged
//!   into the water-wave equations, plus the linear dispersion table.

pub mod consistency;
pub mod dtn_ww;
pub mod error;
pub mod ik_solver;
pub mod operators;
pub mod random;
pub mod spectral;

pub use error::{GridError, SolverError};
pub use spectral::{Multiplier, PeriodicGrid, RealField};
