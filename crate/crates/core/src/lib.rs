//! Computational toolkit for calibrated 3-dimensional singular surfaces in R^6.
//!
//! The modules build on one another: [`forms6`] provides exterior algebra,
//! [`unitary_planes`] special Lagrangian planes, [`hl_cone`] the Harvey-Lawson
//! cone and its intersections with planes, [`form_orbit`] the GL(6) orbit of
//! the special Lagrangian form, [`gluing`] the calibrated bridge along one
//! singular segment, and [`graph_embed`] the placement of whole graphs.

pub mod cli_report;
pub mod error;
pub mod form_orbit;
pub mod forms6;
pub mod gluing;
pub mod graph_embed;
pub mod hl_cone;
pub mod linalg;
pub mod unitary_planes;

pub use error::{Error, Result};
