// Index loops over square separation matrices read better than iterator
// chains here.
#![allow(clippy::needless_range_loop, clippy::manual_is_multiple_of)]

//! Finite antipodal spaces and their Moebius-space fillings.
//!
//! The crate models compact semi-metric boundaries at desk scale as
//! labelled separation matrices, builds the associated filling in its
//! log-derivative chart (discrepancy, antipodal flow, antipodalization,
//! geodesics, rays, retractions), measures closeness of boundaries with
//! rough isometries and of fillings with sampled Gromov-Hausdorff
//! distances, and drives the two convergence experiments: boundary nets to
//! filled balls, and sphere components back to finite boundaries.

pub mod boundary;
pub mod error;
pub mod filling;
pub mod gallery;
pub mod moebius;
pub mod report;
pub mod rng;
pub mod rough;
pub mod semimetric;
pub mod suite;

pub use error::{Error, Result};
pub use moebius::{Chart, MoebiusPoint, TauVector};
pub use semimetric::{AntipodalSpace, FiniteSemiMetric};
