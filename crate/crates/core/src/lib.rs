//! Mild solutions of semilinear evolution equations u' = Au + F(t, u) on
//! finite-dimensional discretizations, and their behaviour under singular
//! perturbation of the generator.
//!
//! - [`operator`]: generators, matrix exponentials, resolvents, limit projections
//! - [`mild`]: Picard iteration in the Bielecki norm, exponential Euler
//! - [`models`]: shadow systems, thin-layer diffusion, neurotransmitter pools
//! - [`convergence`]: error metrics, sweeps, regular/irregular classification
//! - [`config`]: experiment descriptions in TOML or JSON

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convergence;
pub mod error;
pub mod mild;
pub mod models;
pub mod norm;
pub mod operator;

pub use convergence::{
    classify, error_metrics, folk_property_harness, sweep, Classification, ConvergenceReport, ErrorTriple, SolverChoice, SweepSetup,
    Thresholds,
};
pub use error::{MildError, Result};
pub use mild::{
    contraction_diagnostics, expeuler_solve, picard_solve, BieleckiWeight, Nonlinearity, PicardOptions, PicardSolution, ProbeSetup,
    Trajectory,
};
pub use models::{LimitSystem, ModelPair, ParamKind, ScalarReaction};
pub use norm::{Norm, NormKind, StateVector};
pub use operator::{dissipativity_check, expm_apply, limit_projection, resolvent_apply, Generator, GridMeta, Projection};
