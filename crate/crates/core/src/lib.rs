//! Matrix information geometry (MIG) signal detectors in nonhomogeneous clutter.
//!
//! Sample data is modeled as a diagonally loaded Hermitian positive-definite
//! (HPD) matrix, the clutter covariance is estimated as a geometric mean of
//! secondary HPD observations, and detection compares the cell under test
//! against that mean with one of four geometric measures (AIRM, LEM, JBLD,
//! SKLD). An unsupervised projection onto a lower-dimensional HPD manifold,
//! learned by Riemannian gradient descent on the complex Stiefel manifold,
//! sharpens the discrimination.
//!
//! Module map:
//! - [`matlin`]: complex Hermitian linear-algebra kernel (spectral functions,
//!   Cholesky, the log-derivative kernel).
//! - [`geometry`]: squared distances/divergences for the four measures.
//! - [`means`]: geometric means and the data variance.
//! - [`projection`]: Stiefel projection learning (loss, gradients, RGD).
//! - [`scenario`]: clutter/target/interference simulation and training sets.
//! - [`detector`]: observation construction, test statistics, threshold and
//!   detection-probability estimation.
//!
//! With the `parallel` feature (default) the Monte Carlo trial loops and
//! per-element sums run on a rayon pool; reductions keep a fixed order, so
//! serial and parallel runs produce bit-identical results.

pub mod detector;
pub mod error;
mod exec;
pub mod geometry;
pub mod matlin;
pub mod means;
pub mod projection;
pub mod scenario;

pub use error::{ErrorKind, MigError, Result};
pub use geometry::GeometricMeasure;
pub use matlin::{ComplexMatrix, ComplexVector, HermitianMatrix, HpdMatrix};
