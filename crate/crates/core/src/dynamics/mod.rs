//! Spatial discretisation, nonlinearity families, and time integration of the
//! pathwise system in `(u, v)` variables.

pub mod grid;
pub mod integrate;
pub mod nonlinearity;
pub mod ops;
pub mod spec;
pub mod transform;

pub use grid::{Field, Grid, State};
pub use integrate::{rhs, solve, step, BlowUp, SolveOptions, Stepper, Trajectory};
pub use nonlinearity::{make_power_nonlinearity, Nonlinearity, NonlinearityKind};
pub use ops::laplacian;
pub use spec::{sigma_of, validate_spec, Forcing, Physics, ProblemSpec, ValidationReport};
pub use transform::{ut_from_z, v_from_z, z_from_v};
