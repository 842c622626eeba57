//! Quasiconformal analysis of planar deformation sequences.
//!
//! A sequence of deformations of a rectangular image domain is encoded as a
//! complex *Beltrami descriptor*: one column per frame, one row per mesh face,
//! each entry the Beltrami coefficient of the deformation restricted to that
//! face. The descriptor separates into a low-rank part (periodic motion) and a
//! sparse part (localized irregular motion) via complex RPCA, and either part
//! maps back to actual deformations through the linear Beltrami solver.
//!
//! Module layout mirrors the processing stages:
//!
//! - [`mesh`]: regular triangulation of the pixel grid and per-face calculus.
//! - [`beltrami`]: Beltrami coefficients, Wirtinger derivatives, distortion.
//! - [`lbs`]: linear Beltrami solver (field -> boundary-fixed map).
//! - [`descriptor`]: descriptor assembly, comparison, and inversion.
//! - [`rpca`]: complex robust PCA via ADMM with a capped penalty schedule.
//! - [`synth`]: synthetic periodic sequences with ground-truth maps.
//! - [`pipeline`]: end-to-end runs, image warping, file formats, reports.

pub mod beltrami;
pub mod descriptor;
mod error;
pub mod lbs;
pub mod mesh;
pub mod pipeline;
pub mod rpca;
pub mod synth;
#[cfg(test)]
mod test_util;

pub use error::{Error, Result};
pub use num_complex::Complex64;
