//! Geometric measures on the HPD manifold.
//!
//! Four squared distances/divergences between HPD matrices:
//! - AIRM, the affine-invariant Riemannian metric: `‖Log(X^{-1/2} Y X^{-1/2})‖²
//!   = Σ ln²λ_i` over the eigenvalues of `X^{-1/2} Y X^{-1/2}`;
//! - LEM, the Log-Euclidean metric: `‖Log X − Log Y‖²`;
//! - JBLD, the Jensen-Bregman LogDet divergence:
//!   `ln det((X+Y)/2) − ½ ln det(XY)`;
//! - SKLD, the symmetrized Kullback-Leibler divergence:
//!   `½ tr(Y⁻¹X + X⁻¹Y − 2I)`.
//!
//! AIRM, JBLD and SKLD are invariant under congruence by any invertible
//! matrix; LEM is invariant under unitary congruence.

use std::fmt;
use std::str::FromStr;


use crate::error::{MigError, Result};
use crate::matlin::{self, HpdMatrix};

/// Selector for the geometric measure used by distances, means, gradients
/// and detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometricMeasure {
    Airm,
    Lem,
    Jbld,
    Skld,
}

impl GeometricMeasure {
    pub const ALL: [GeometricMeasure; 4] = [
        GeometricMeasure::Airm,
        GeometricMeasure::Lem,
        GeometricMeasure::Jbld,
        GeometricMeasure::Skld,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometricMeasure::Airm => "airm",
            GeometricMeasure::Lem => "lem",
            GeometricMeasure::Jbld => "jbld",
            GeometricMeasure::Skld => "skld",
        }
    }
}

impl fmt::Display for GeometricMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeometricMeasure {
    type Err = MigError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "airm" => Ok(GeometricMeasure::Airm),
            "lem" => Ok(GeometricMeasure::Lem),
            "jbld" => Ok(GeometricMeasure::Jbld),
            "skld" => Ok(GeometricMeasure::Skld),
            other => Err(MigError::InvalidParameter(format!(
                "unknown geometric measure `{other}` (expected airm, lem, jbld or skld)"
            ))),
        }
    }
}

fn check_same_order(x: &HpdMatrix, y: &HpdMatrix) -> Result<()> {
    if x.order() != y.order() {
        return Err(MigError::DimensionMismatch {
            context: "sq_dist",
            left: x.order(),
            right: y.order(),
        });
    }
    Ok(())
}

/// Round-off below zero is clamped; anything more negative is a bug.
fn clamp_nonnegative(value: f64) -> f64 {
    if value < 0.0 {
        debug_assert!(value > -1e-9, "distance fell below round-off: {value}");
        0.0
    } else {
        value
    }
}

/// Squared distance (AIRM, LEM) or divergence (JBLD, SKLD) between two HPD
/// matrices of equal order. Always nonnegative.
pub fn sq_dist(measure: GeometricMeasure, x: &HpdMatrix, y: &HpdMatrix) -> Result<f64> {
    check_same_order(x, y)?;
    let value = match measure {
        GeometricMeasure::Airm => airm_sq(x, y)?,
        GeometricMeasure::Lem => lem_sq(x, y)?,
        GeometricMeasure::Jbld => jbld(x, y)?,
        GeometricMeasure::Skld => skld(x, y)?,
    };
    Ok(clamp_nonnegative(value))
}

fn airm_sq(x: &HpdMatrix, y: &HpdMatrix) -> Result<f64> {
    let xis = matlin::matrix_inv_sqrt(x)?;
    let whitened = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
        &(xis.as_matrix() * y.as_matrix() * xis.as_matrix()),
    ));
    let spec = whitened.spectral()?;
    let mut acc = 0.0;
    for &lambda in spec.eigenvalues() {
        if lambda <= 0.0 {
            return Err(MigError::NotPositiveDefinite {
                eigenvalue: lambda,
                largest: spec.eigenvalues()[0],
            });
        }
        let l = lambda.ln();
        acc += l * l;
    }
    Ok(acc)
}

fn lem_sq(x: &HpdMatrix, y: &HpdMatrix) -> Result<f64> {
    let lx = matlin::matrix_log(x)?;
    let ly = matlin::matrix_log(y)?;
    let diff = lx.as_matrix() - ly.as_matrix();
    Ok(diff.norm_squared())
}

fn jbld(x: &HpdMatrix, y: &HpdMatrix) -> Result<f64> {
    let mid = HpdMatrix::from_matrix_unchecked((x.as_matrix() + y.as_matrix()).scale(0.5));
    let ld_mid = matlin::log_det(&mid)?;
    let ld_x = matlin::log_det(x)?;
    let ld_y = matlin::log_det(y)?;
    Ok(ld_mid - 0.5 * (ld_x + ld_y))
}

fn skld(x: &HpdMatrix, y: &HpdMatrix) -> Result<f64> {
    let n = x.order() as f64;
    let cx = matlin::cholesky_pd(x.as_matrix()).ok_or(MigError::CholeskyFailed)?;
    let cy = matlin::cholesky_pd(y.as_matrix()).ok_or(MigError::CholeskyFailed)?;
    // tr(Y^{-1} X) and tr(X^{-1} Y) via triangular solves
    let tr_yx = cy.solve(x.as_matrix()).trace().re;
    let tr_xy = cx.solve(y.as_matrix()).trace().re;
    Ok(0.5 * (tr_yx + tr_xy) - n)
}
