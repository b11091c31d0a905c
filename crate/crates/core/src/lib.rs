//! Semi-analytic 2-D electromagnetic engine for indoor MIMO studies.
//!
//! The library models a rectangular room whose four walls share one of four
//! boundary types (free space, PEC, drywall slab, binary PEC/drywall grating),
//! evaluates the TE_z Green's function of each configuration, assembles MIMO
//! channel matrices from field couplings, and provides the downstream analyses:
//! water-filled spectral efficiency, capacity maps, eigenmode inspection,
//! envelope-fading identification (Rician/Hoyt), and angular spectra of
//! scattered fields.
//!
//! Everything is deterministic: grid sweeps may run on a thread pool (feature
//! `parallel`, on by default), but per-point path sums always accumulate in a
//! fixed order, so results are bit-identical for any worker count.

// Validation guards are written `!(x > 0.0)` on purpose: the negated form
// also rejects NaN, which the suggested `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants in tests keep every digit of the computation that
// produced them, even past f64's shortest round-trip representation.
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod field;
pub mod geom;
pub mod greens;
pub mod io;
pub mod linalg;
pub mod mimo;
pub mod par;
pub mod scenario;
pub mod specfun;
pub mod spectrum;
pub mod stats;
pub mod wall;

pub use error::{Error, Result};

// Re-exported so downstream crates build excitation vectors against the
// exact complex type this crate's signatures use.
pub use num_complex;
