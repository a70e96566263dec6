//! Numerical laboratory for parabolic equations with singular drifts
//! `∂_t u − νΔu + b·∇u = f` under homogeneous Dirichlet data.
//!
//! The crate discretizes balls (through the radial reduction), intervals and
//! rectangles, integrates the equation with a monotone implicit scheme and
//! checks energy, L₁-decay, maximum-principle and stability inequalities at
//! the discrete level, alongside the explicit non-uniqueness and instability
//! examples in closed form.

pub mod analytic;
pub mod banded;
pub mod drift;
pub mod error;
pub mod fields;
pub mod grid;
pub mod harness;
pub mod operator;
pub mod solver;
pub mod table;

pub use drift::{check_nonspectral, mollify, DriftSpec, MollifierConfig, NonSpectralReport, SampledDrift};
pub use error::{Error, Result};
pub use fields::{LevelSetReport, NormSeries, ScalarField, TimeNorm, Trajectory};
pub use grid::{build_grid, Domain, SpaceGrid, SubdomainSchedule, TimeGrid};
pub use harness::{ExperimentReport, Verdict};
pub use solver::{solve_dual, solve_primal, AdvectionScheme, ProblemSpec, SolveResult, SolverConfig, Source};
pub use table::{fmt_g17, Table};
