//! Numerical toolkit for systems of Caputo fractional boundary value problems
//!
//! ```text
//!   D^α₁ u + f₁(t,u,v) = 0,   u'(0) = 0,  β₁ D^(α₁-1) u(1) + u(η₁) = 0
//!   D^α₂ v + f₂(t,u,v) = 0,   v'(0) = 0,  β₂ D^(α₂-1) v(1) + v(η₂) = 0
//! ```
//!
//! The system is equivalent to a Hammerstein integral system with the Green's
//! kernels built in [`kernel`]. On top of those kernels the crate computes the
//! threshold constants of the fixed point index conditions ([`quad`]), checks
//! those conditions for user nonlinearities ([`certify`]), and solves the
//! discretized integral system by damped Picard iteration ([`solver`]).
//! Nonlinearities are plain-text expressions ([`exprlang`]), and problems are
//! described by JSON files ([`config`]).

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod exprlang;
pub mod kernel;
pub mod problem;
pub mod quad;
pub mod report;
pub mod solver;
pub mod specialfn;

pub use certify::{Box3, Certificate, ConditionKind, ConditionResult, ExtremumEstimate, Pattern};
pub use exprlang::{parse_expr, Expr};
pub use kernel::{KernelModel, ProblemParams};
pub use problem::Problem;
pub use quad::{ConstantsReport, QuadratureSpec};
pub use solver::{ConeReport, Grid, GridSolution};
