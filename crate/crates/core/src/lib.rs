//! Discrete metric-measure geometry.
//!
//! The crate computes p-modulus of curve families on weighted graphs with
//! full primal-dual certificates, turns dual curve measures into Alberti
//! representations, generates the standard example spaces (grids,
//! Sierpinski carpets, slit carpets, the Heisenberg group) and runs the
//! rescaling and product-splitting tests on Euclidean point clouds.

pub mod alberti;
pub mod curves;
pub mod error;
pub mod io;
pub mod metric;
pub mod modulus;
pub mod spaces;
pub mod splitting;

pub use error::{ModspaceError, Result};
