//! Multi-frequency, multi-task Bayesian compressive sensing for 2D subsurface
//! microwave imaging of pixel-sparse targets.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of
//! the pipeline:
//!
//! * [`scenario`]: background medium, inversion grid, antenna layout,
//!   frequency plan and the built-in phantoms.
//! * [`greens`]: cell-integrated 2D Green's kernels and the real-valued
//!   operator recast used by the sparse solver.
//! * [`forward`]: a method-of-moments forward solver producing synthetic
//!   multi-view, multi-frequency scattered data, plus noise injection.
//! * [`ingest`]: spectral extraction from time-domain radargrams.
//! * [`sbl`]: the fast multi-task relevance vector machine.
//! * [`invert`]: the MF-MT, FH-MT and FH-ST inversion strategies.
//! * [`metrics`]: reconstruction errors and SNR sweeps.
//!
//! File formats, configuration and the command line live in the `mtbcs`
//! companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod forward;
pub mod greens;
pub mod ingest;
pub mod invert;
pub mod linalg;
pub mod metrics;
pub mod sbl;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Vacuum permittivity [F/m].
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Speed of light in vacuum [m/s].
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability [H/m], consistent with [`EPS0`] and [`C0`].
pub const MU0: f64 = 1.0 / (C0 * C0 * EPS0);
