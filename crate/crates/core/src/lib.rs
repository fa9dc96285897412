//! Numerical laboratory for Morse-Bott-Smale vertical flows.
//!
//! The crate evaluates characteristic forms of connections and
//! superconnections at points, integrates them over parametrized model
//! spaces, flows sections by closed-form Morse-Bott flows and compares the
//! flowed forms with residue-weighted limit currents.
//!
//! Module map:
//! - [`algebra`]: small dense complex matrices, Pfaffian, Cayley transform.
//! - [`exterior`]: point-evaluated exterior algebra and form-valued matrices.
//! - [`spaces`]: charts, parametrizations, bundles with connection.
//! - [`flows`]: closed-form flows and critical-stratum classifiers.
//! - [`resolution`]: local blow-up models of broken trajectories.
//! - [`charforms`]: Chern, Pfaffian, odd Chern, Maslov and Mathai-Quillen forms.
//! - [`integrate`]: oriented quadrature, fiber integrals, transgression pairings.
//! - [`currents`]: signed zero sets, Maslov crossings, weak-convergence reports.
//! - [`models`]: the concrete bundles and families used by the scenarios.

// Index loops mirror the formulas; negated comparisons deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod charforms;
pub mod currents;
pub mod error;
pub mod exterior;
pub mod flows;
pub mod integrate;
pub mod models;
pub mod resolution;
pub mod spaces;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Library version, echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
