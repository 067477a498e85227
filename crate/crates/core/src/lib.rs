//! Pathwise simulation of a damped stochastic wave equation with
//! multiplicative noise, together with energy audits and pullback-attractor
//! diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod io;
pub mod noise;
pub mod pullback;
pub mod refine;

pub use dynamics::{
    make_power_nonlinearity, solve, Field, Forcing, Grid, Nonlinearity, Physics, ProblemSpec,
    SolveOptions, State, Trajectory,
};
pub use config::{parse_config, RunConfig};
pub use energy::{energy_e, production_g, EnergyAudit, EnergyBreakdown};
pub use error::{Error, Result};
pub use noise::{generate_wiener, shift_path, Driver, OUSample, WienerPath};
pub use pullback::{
    absorbing_radius, estimate_attractor, hausdorff_semidistance, pullback_evolve, tail_mass,
    AbsorbingSet, InitialFamily, PullbackRun,
};
