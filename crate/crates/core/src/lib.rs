//! Staggered-grid finite volume schemes for the barotropic Euler equations
//! with gravity in the low Mach number regime.
//!
//! The main entry point is [`wb_solver::Solver`], a semi-implicit,
//! well-balanced scheme on MAC grids. `anelastic_solver` implements the
//! limit scheme as `ε → 0` and `rusanov_ref` an explicit colocated
//! comparator.

pub mod anelastic_solver;
pub mod diagnostics;
pub mod fluxes;
pub mod linalg;
pub mod mac_grid;
pub mod rusanov_ref;
pub mod thermo_hydro;
pub mod wb_solver;

pub use mac_grid::{build_grid, BcKind, BoundaryConditions, CellField, Domain, FaceField, MacGrid};
pub use thermo_hydro::{hydrostatic_from_potential, GasLaw, HydrostaticState};
pub use wb_solver::{init_state, FluidState, SchemeParams, Solver, SolverError, StepReport};
