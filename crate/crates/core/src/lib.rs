//! Simulation and verification toolkit for point processes and interacting
//! particle diffusions on configuration spaces over a flat periodic box.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`]: torus geometry (minimal image, windows).
//! - [`configuration`]: finite point configurations and pairings.
//! - [`intensity`]: intensity measures, (mixed) Poisson sampling and quadrature.
//! - [`potential`]: pair potentials, conditional energies and cell lists.
//! - [`gibbs`]: grand canonical and canonical Metropolis–Hastings samplers.
//! - [`calculus`]: lifted gradient, divergence and Laplacian on cylinder functions.
//! - [`dynamics`]: free and interacting diffusions plus semigroup checks.
//! - [`metric`]: the optimal-matching configuration distance.
//! - [`verify`]: Monte Carlo estimators and identity tests, including the named suites.
//! - [`io`]: text formats, run configuration and hashing.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod configuration;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod gibbs;
pub mod intensity;
pub mod io;
pub mod metric;
pub mod potential;
pub mod rng;
pub mod verify;

pub use calculus::{
    BumpFunction, BumpSum, CylinderFunction, Outer, TangentVector, VectorField,
};
pub use configuration::Configuration;
pub use domain::{Point, TorusDomain, Window};
pub use error::{Error, Result};
pub use gibbs::{CorrelationEstimate, GibbsSpec, McmcParams};

pub use intensity::{IntensityMeasure, MixingLaw, SmoothDensity};
pub use metric::MatchingResult;

pub use potential::{EnergyBreakdown, PairPotential};
pub use verify::EstimatorResult;

