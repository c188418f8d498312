//! Numerical laboratory for the harmonic-gauge vacuum evolution system with
//! viscosity regularization.
//!
//! The crate builds singular Cauchy data (a C^{1,δ}-but-not-C² profile glued
//! into a flat metric by a mollifier), evolves it with a heat-kernel Picard
//! iteration for the viscosity-extended first-order system, and provides the
//! diagnostics needed to check the interesting claims at desk scale:
//! contraction of the iteration map, viscosity-uniform kernel bounds,
//! curvature blow-up at the origin with a predictable exponent, constraint
//! propagation, and finite generalized-affine-parameter accessibility of the
//! singular point.
//!
//! Module map:
//!
//! - [`grid`]: periodic box, spectral derivatives, discrete Sobolev/Hölder norms
//! - [`tensor`]: pointwise metric algebra — inverse, Christoffels, Ricci,
//!   quadratic source, signature
//! - [`fields`]: symmetric component fields, metric slices, space-time histories
//! - [`data`]: mollifiers, the singular profile, admissible Cauchy data
//! - [`kernel`]: heat kernel, spatial and space-time convolutions, uniform bounds
//! - [`gauge_wave`]: exact harmonic-gauge testbed solution
//! - [`picard`]: the fixed-point iteration, viscosity sweep, residual evaluation
//! - [`diagnostics`]: curvature history, blow-up fits, g.a.p. lengths, monitors
//! - [`config`] / [`report`] / [`io`]: run configuration, serialized outputs,
//!   raw grid dumps and checkpoints

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod gauge_wave;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod picard;
pub mod report;
pub mod tensor;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
