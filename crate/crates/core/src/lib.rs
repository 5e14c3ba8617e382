//! Effective conductivity of stationary random media by periodization.
//!
//! The library computes effective conductivity tensors of random media
//! restricted to finite tori: a stationary field is sampled on the window
//! `[0,N)^d`, wrapped periodically, and the periodic cell problems are solved
//! on the resulting torus. Alongside the tensor computations it provides the
//! exact orthogonal splitting of square-integrable vector fields into
//! potential, solenoidal and constant parts, plus diagnostics measuring how
//! fast the periodized decomposition stabilizes as the window grows.
//!
//! Modules:
//! - [`lattice`]: grids, field containers, discrete differential operators,
//!   normalized inner products, binary/CSV field serialization.
//! - [`weyl`]: spectral (FFT) orthogonal decomposition, potential and stream
//!   recovery, decomposition-stability diagnostics.
//! - [`media`]: seeded translation-consistent random-medium generators and
//!   the Birkhoff averaging-quality diagnostic.
//! - [`solvers`]: matrix-free CG / restarted GMRES / normal-equation least
//!   squares with constant-mode deflation and FFT preconditioning.
//! - [`homogenize`]: primal and dual discrete tensors, the conforming-cell
//!   discretization of the continuous operator, the non-symmetric
//!   (divergence-free flow) case and the polarization functional.
//!
//! All operations are deterministic: identical inputs produce identical
//! outputs regardless of thread count. The `parallel` feature (default)
//! enables rayon data parallelism; disabling it yields a sequential build
//! with bit-identical results.

pub mod config;
pub mod fft;
pub mod homogenize;
pub mod lattice;
pub mod linalg;
pub mod media;
pub mod par;
pub mod solvers;
pub mod weyl;

pub use lattice::{MatrixField, ScalarField, SkewMatrixField, TorusGrid, VectorField};
