//! Plug-and-play ADMM with a residual-driven penalty schedule, and tools
//! that turn a recorded run into explicit summable bounds on its residuals.
//!
//! * [`linalg`]: vectors, iterate triples and the normalized triple distance.
//! * [`denoise`]: σ-parameterized denoisers and residue-bound estimation.
//! * [`fidelity`]: forward operators, quadratic data terms, the prox solve.
//! * [`solver`]: the iteration itself and its trace.
//! * [`sequence`]: piecewise geometric bounds and Cauchy certificates.
//! * [`harness`]: presets, file formats and the command implementations.

pub mod denoise;
pub mod error;
pub mod fidelity;
pub mod harness;
pub mod image;
pub mod linalg;
pub mod sequence;
pub mod solver;

pub use error::{Error, Result};
pub use image::ImageGrid;
pub use linalg::{metric_distance, IterateTriple, RealVector};
