//! Topology-preserving image segmentation guided by harmonic Beltrami
//! signatures (HBS).
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] builds the triangulated rectangular computation domain and its
//!   discrete differential operators.
//! * [`qc`] computes Beltrami coefficients of piecewise-linear maps and
//!   reconstructs maps from coefficients with the linear Beltrami solver.
//! * [`hbs`] turns a closed contour into its signature (conformal welding,
//!   harmonic extension, normalization) and back into a shape.
//! * [`segmentation`] alternates the deformation-fitting and
//!   coefficient-refinement subproblems.
//! * [`imaging`] and [`metrics`] provide image I/O, synthetic scenes and
//!   mask comparison.
//!
//! Inner loops run on rayon when the `parallel` feature is enabled (the
//! default); every reduction uses a fixed chunking so results are
//! bit-identical with and without it.

pub mod error;
pub mod geometry;
pub mod hbs;
pub mod imaging;
pub mod mesh;
pub mod metrics;
pub mod par;
pub mod qc;
pub mod segmentation;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
