//! Discriminative manifold projection learned on the complex Stiefel
//! manifold.
//!
//! The projection `f_W(R) = W^H R W` maps order-`n` HPD matrices to order `m`
//! with `W` constrained to `St(m, C^n) = {W : W^H W = I}`. Learning maximizes
//! the data variance around the compressed set's geometric mean `Ẑ` by
//! alternating two steps: Riemannian gradient descent on the loss
//! `ψ(W) = −(1/(J+K)) Σ d²(W^H R_i W, Ẑ)` for fixed `Ẑ`, and an exact
//! re-solve of `Ẑ` as the geometric mean of the compressed set.
//!
//! The Riemannian gradient on the Stiefel manifold is
//! `grad ψ = ∇ψ − W sym(W^H ∇ψ)`; steps stay on the manifold through a thin
//! QR retraction, which agrees with the exponential map to first order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MigError, Result};
use crate::exec;
use crate::geometry::GeometricMeasure;
use crate::matlin::{self, ComplexMatrix, HermitianMatrix, HpdMatrix};
use crate::means::{self, HpdSet, MeanConfig};

/// Orthonormality defect allowed on Stiefel points.
pub const STIEFEL_TOL: f64 = 1e-10;

/// An `n×m` complex matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelMatrix(ComplexMatrix);

impl StiefelMatrix {
    pub fn new(w: ComplexMatrix) -> Result<Self> {
        if w.nrows() < w.ncols() || w.ncols() == 0 {
            return Err(MigError::InvalidParameter(format!(
                "Stiefel matrix needs 1 <= m <= n, got n = {}, m = {}",
                w.nrows(),
                w.ncols()
            )));
        }
        let defect = Self::defect_of(&w);
        if !(defect <= STIEFEL_TOL) {
            return Err(MigError::InvalidParameter(format!(
                "columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self(w))
    }

    /// First `m` columns of the order-`n` identity (coordinate projection).
    pub fn identity_embedding(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(MigError::InvalidParameter(format!(
                "identity embedding needs 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        Ok(Self(ComplexMatrix::identity(n, m)))
    }

    /// Thin QR of a complex Gaussian matrix: a uniformly random Stiefel point.
    pub fn random(n: usize, m: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        if m == 0 || m > n {
            return Err(MigError::InvalidParameter(format!(
                "random Stiefel point needs 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        let g = matlin::random_gaussian(n, m, rng);
        let q = g.qr().q();
        Ok(Self(q))
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `‖W^H W − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        Self::defect_of(&self.0)
    }

    fn defect_of(w: &ComplexMatrix) -> f64 {
        let m = w.ncols();
        (w.ad_mul(w) - ComplexMatrix::identity(m, m)).norm()
    }
}

/// Iteration controls for [`learn_projection`].
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub outer_iterations: usize,
    /// Gradient-descent steps per outer iteration (fixed `Ẑ`).
    pub rgd_iterations: usize,
    pub initial_step: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    /// Relative change of the variance objective that stops the outer loop.
    pub tolerance: f64,
    /// Seed for the random Stiefel initialization.
    pub seed: u64,
    pub mean: MeanConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 50,
            rgd_iterations: 20,
            initial_step: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            tolerance: 1e-8,
            seed: 0,
            mean: MeanConfig::default(),
        }
    }
}

impl LearnerConfig {
    fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.rgd_iterations == 0 {
            return Err(MigError::InvalidParameter(
                "iteration counts must be positive".into(),
            ));
        }
        if !(self.initial_step > 0.0) {
            return Err(MigError::InvalidParameter(
                "initial step must be positive".into(),
            ));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(MigError::InvalidParameter(
                "armijo shrink must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_slope > 0.0) || !(self.tolerance > 0.0) {
            return Err(MigError::InvalidParameter(
                "armijo slope and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a projection-learning run.
#[derive(Debug, Clone)]
pub struct LearnedProjection {
    pub w: StiefelMatrix,
    pub measure: GeometricMeasure,
    /// Variance of the compressed data around its geometric mean at the
    /// returned `W`.
    pub final_variance: f64,
    /// Variance after each outer iteration (index 0 is the initialization);
    /// nondecreasing up to round-off.
    pub objective_trace: Vec<f64>,
    /// Set when the training data was degenerate (all elements identical);
    /// the returned `W` is then the untouched initialization.
    pub degenerate: bool,
}

/// Compresses an HPD matrix: `W^H R W`, HPD of order `m`.
pub fn compress(w: &StiefelMatrix, r: &HpdMatrix) -> Result<HpdMatrix> {
    if r.order() != w.ambient_dim() {
        return Err(MigError::DimensionMismatch {
            context: "compress",
            left: r.order(),
            right: w.ambient_dim(),
        });
    }
    // orthonormal columns and eigenvalue interlacing keep the result HPD;
    // validate anyway since this is the public entry point
    HpdMatrix::new(compress_unchecked(w.as_matrix(), r).into_matrix())
}

fn compress_unchecked(w: &ComplexMatrix, r: &HpdMatrix) -> HpdMatrix {
    let rw = r.as_matrix() * w;
    HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(&w.ad_mul(&rw)))
}

/// Loss `ψ(W) = −(1/(J+K)) Σ d²(W^H R_i W, Z)` at a Stiefel point.
pub fn psi_loss(
    measure: GeometricMeasure,
    w: &StiefelMatrix,
    data: &HpdSet,
    z: &HpdMatrix,
) -> Result<f64> {
    psi_loss_unconstrained(measure, w.as_matrix(), data, z)
}

/// Same loss at an arbitrary full-rank `W`; the Euclidean gradient is defined
/// through unconstrained perturbations, so finite-difference checks need the
/// off-manifold loss as well.
pub fn psi_loss_unconstrained(
    measure: GeometricMeasure,
    w: &ComplexMatrix,
    data: &HpdSet,
    z: &HpdMatrix,
) -> Result<f64> {
    check_shapes(measure, w, data, z)?;
    let ctx = ZContext::new(measure, z)?;
    psi_with_context(&ctx, w, data)
}

/// Euclidean gradient `∇ψ(W)` for the chosen measure.
pub fn euclid_grad(
    measure: GeometricMeasure,
    w: &StiefelMatrix,
    data: &HpdSet,
    z: &HpdMatrix,
) -> Result<ComplexMatrix> {
    check_shapes(measure, w.as_matrix(), data, z)?;
    let ctx = ZContext::new(measure, z)?;
    euclid_grad_with_context(&ctx, w.as_matrix(), data)
}

/// Projects a Euclidean gradient onto the tangent space at `W`:
/// `G − W sym(W^H G)` with `sym(A) = (A + A^H)/2`.
pub fn riem_grad(w: &StiefelMatrix, g: &ComplexMatrix) -> Result<ComplexMatrix> {
    if g.nrows() != w.ambient_dim() || g.ncols() != w.target_dim() {
        return Err(MigError::DimensionMismatch {
            context: "riem_grad",
            left: g.nrows() * g.ncols(),
            right: w.ambient_dim() * w.target_dim(),
        });
    }
    let wg = w.as_matrix().ad_mul(g);
    let sym = (&wg + wg.adjoint()).scale(0.5);
    Ok(g - w.as_matrix() * sym)
}

/// Moves along a tangent direction and returns to the manifold through the
/// thin QR factorization of `W + step·D`, with the triangular factor's
/// diagonal rotated to be positive real so the retraction is continuous at
/// `step = 0`.
pub fn retract(w: &StiefelMatrix, d: &ComplexMatrix, step: f64) -> Result<StiefelMatrix> {
    if d.nrows() != w.ambient_dim() || d.ncols() != w.target_dim() {
        return Err(MigError::DimensionMismatch {
            context: "retract",
            left: d.nrows() * d.ncols(),
            right: w.ambient_dim() * w.target_dim(),
        });
    }
    let moved = w.as_matrix() + d.scale(step);
    let scale = moved.norm();
    let qr = moved.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        let diag = r[(j, j)];
        let mag = diag.norm();
        if mag <= 1e-14 * scale {
            return Err(MigError::RankDeficient { column: j });
        }
        let phase = diag / Complex64::from(mag);
        for i in 0..q.nrows() {
            q[(i, j)] *= phase;
        }
    }
    StiefelMatrix::new(q)
}

/// Learns the projection by the two-step alternation. Returns the final
/// Stiefel point with its variance trace; the trace is nondecreasing because
/// an outer step that would lower the full objective is rolled back and the
/// loop stops.
pub fn learn_projection(
    measure: GeometricMeasure,
    data: &HpdSet,
    m: usize,
    cfg: &LearnerConfig,
) -> Result<LearnedProjection> {
    cfg.validate()?;
    let n = data.order();
    if m == 0 || m > n {
        return Err(MigError::InvalidParameter(format!(
            "target dimension must satisfy 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w0 = StiefelMatrix::random(n, m, &mut rng)?;

    if data_is_degenerate(data) {
        return Ok(LearnedProjection {
            w: w0,
            measure,
            final_variance: 0.0,
            objective_trace: vec![0.0],
            degenerate: true,
        });
    }

    let mut w = w0;
    let (mut z, mut var) = solve_mean(measure, &w, data, &cfg.mean)?;
    let mut trace = vec![var];

    for _ in 0..cfg.outer_iterations {
        let previous_w = w.clone();
        let previous_z = z.clone();

        let ctx = ZContext::new(measure, &z)?;
        rgd_descend(&ctx, &mut w, data, cfg, -var)?;

        let (z_next, var_next) = solve_mean(measure, &w, data, &cfg.mean)?;
        if var_next < var - 1e-12 * var.abs().max(1.0) {
            // the alternation is not guaranteed monotone in the full
            // objective; keep the best iterate and stop
            w = previous_w;
            z = previous_z;
            break;
        }
        let gain = var_next - var;
        z = z_next;
        var = var_next;
        trace.push(var);
        if gain.abs() <= cfg.tolerance * var.abs().max(1.0) {
            break;
        }
    }
    let _ = z;

    Ok(LearnedProjection {
        w,
        measure,
        final_variance: var,
        objective_trace: trace,
        degenerate: false,
    })
}

fn data_is_degenerate(data: &HpdSet) -> bool {
    let first = &data.matrices()[0];
    let scale = first.norm().max(f64::MIN_POSITIVE);
    data.matrices()
        .iter()
        .all(|m| (m.as_matrix() - first.as_matrix()).norm() <= 1e-14 * scale)
}

/// Compresses the set, solves the geometric mean, and returns the variance.
fn solve_mean(
    measure: GeometricMeasure,
    w: &StiefelMatrix,
    data: &HpdSet,
    mean_cfg: &MeanConfig,
) -> Result<(HpdMatrix, f64)> {
    let compressed = exec::map_slice(data.matrices(), |r| compress_unchecked(w.as_matrix(), r));
    let compressed = HpdSet::new(compressed)?;
    let z = means::geometric_mean(measure, &compressed, mean_cfg)?;
    let var = means::variance(measure, &compressed, &z)?;
    Ok((z, var))
}

/// Inner RGD minimization of ψ for fixed `Ẑ` with Armijo backtracking.
fn rgd_descend(
    ctx: &ZContext,
    w: &mut StiefelMatrix,
    data: &HpdSet,
    cfg: &LearnerConfig,
    psi_start: f64,
) -> Result<()> {
    const MAX_HALVINGS: u32 = 60;
    let mut psi_current = psi_start;
    for _ in 0..cfg.rgd_iterations {
        let gradient = euclid_grad_with_context(ctx, w.as_matrix(), data)?;
        let direction = riem_grad(w, &gradient)?;
        let dir_norm_sq = direction.norm_squared();
        if dir_norm_sq.sqrt() <= 1e-12 * gradient.norm().max(f64::MIN_POSITIVE) {
            break; // stationary for this Ẑ
        }
        // the largest decrease the line search could certify is below the
        // round-off resolution of ψ: numerically stationary
        let best_decrease = cfg.armijo_slope * cfg.initial_step * dir_norm_sq;
        if best_decrease <= 16.0 * f64::EPSILON * psi_current.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let descent = direction.scale(-1.0);

        let mut eta = cfg.initial_step;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = retract(w, &descent, eta)?;
            let psi_new = psi_with_context(ctx, candidate.as_matrix(), data)?;
            if psi_new <= psi_current - cfg.armijo_slope * eta * dir_norm_sq {
                *w = candidate;
                psi_current = psi_new;
                accepted = true;
                break;
            }
            eta *= cfg.armijo_shrink;
        }
        if !accepted {
            return Err(MigError::LineSearchFailed {
                halvings: MAX_HALVINGS,
                gradient_norm: dir_norm_sq.sqrt(),
                objective: psi_current,
            });
        }
    }
    Ok(())
}

fn check_shapes(
    _measure: GeometricMeasure,
    w: &ComplexMatrix,
    data: &HpdSet,
    z: &HpdMatrix,
) -> Result<()> {
    if data.order() != w.nrows() {
        return Err(MigError::DimensionMismatch {
            context: "projection data vs W rows",
            left: data.order(),
            right: w.nrows(),
        });
    }
    if z.order() != w.ncols() {
        return Err(MigError::DimensionMismatch {
            context: "projection mean vs W columns",
            left: z.order(),
            right: w.ncols(),
        });
    }
    Ok(())
}

/// Precomputed `Ẑ` artifacts shared across the per-element terms.
struct ZContext {
    measure: GeometricMeasure,
    z: HpdMatrix,
    /// `Log Ẑ` (LEM).
    log_z: Option<HermitianMatrix>,
    /// `Ẑ⁻¹` (SKLD).
    z_inv: Option<HpdMatrix>,
    /// `ln det Ẑ` (JBLD).
    logdet_z: Option<f64>,
}

impl ZContext {
    fn new(measure: GeometricMeasure, z: &HpdMatrix) -> Result<Self> {
        let mut ctx = Self {
            measure,
            z: z.clone(),
            log_z: None,
            z_inv: None,
            logdet_z: None,
        };
        match measure {
            GeometricMeasure::Lem => ctx.log_z = Some(matlin::matrix_log(z)?),
            GeometricMeasure::Skld => ctx.z_inv = Some(matlin::matrix_inv(z)?),
            GeometricMeasure::Jbld => ctx.logdet_z = Some(matlin::log_det(z)?),
            GeometricMeasure::Airm => {}
        }
        Ok(ctx)
    }

    /// Squared distance `d²(V, Ẑ)` using the cached artifacts.
    fn sq_dist_to(&self, v: &HpdMatrix) -> Result<f64> {
        let value = match self.measure {
            GeometricMeasure::Lem => {
                let log_v = matlin::matrix_log(v)?;
                (log_v.as_matrix() - self.log_z.as_ref().expect("cached").as_matrix())
                    .norm_squared()
            }
            GeometricMeasure::Airm => {
                let (_, v_inv_sqrt) = matlin::sqrt_pair(v)?;
                let h = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
                    &(&v_inv_sqrt * self.z.as_matrix() * &v_inv_sqrt),
                ));
                let spec = h.spectral()?;
                let mut acc = 0.0;
                for &lambda in spec.eigenvalues() {
                    if lambda <= 0.0 {
                        return Err(MigError::NotPositiveDefinite {
                            eigenvalue: lambda,
                            largest: spec.eigenvalues()[0],
                        });
                    }
                    acc += lambda.ln().powi(2);
                }
                acc
            }
            GeometricMeasure::Jbld => {
                let mid =
                    HpdMatrix::from_matrix_unchecked((v.as_matrix() + self.z.as_matrix()).scale(0.5));
                matlin::log_det(&mid)?
                    - 0.5 * (matlin::log_det(v)? + self.logdet_z.expect("cached"))
            }
            GeometricMeasure::Skld => {
                let m = v.order() as f64;
                let z_inv = self.z_inv.as_ref().expect("cached");
                let cv = matlin::cholesky_pd(v.as_matrix()).ok_or(MigError::CholeskyFailed)?;
                let tr_vz = cv.solve(self.z.as_matrix()).trace().re;
                let tr_zv = z_inv.as_matrix().dotc(v.as_matrix()).re;
                0.5 * (tr_vz + tr_zv) - m
            }
        };
        Ok(value.max(0.0))
    }

    /// The Hermitian factor `M_i` in the per-element gradient contribution
    /// `R_i W M_i`, including the measure's sign and factor.
    fn grad_core(&self, v: &HpdMatrix) -> Result<ComplexMatrix> {
        match self.measure {
            GeometricMeasure::Lem => {
                // V^{-1} Log V − ∫ [(V−I)s+I]^{-1} Log Ẑ [(V−I)s+I]^{-1} ds,
                // both terms in V's eigenbasis from a single factorization
                let spec = v.spectral()?;
                let vals = spec.eigenvalues();
                if vals[vals.len() - 1] <= 0.0 {
                    return Err(MigError::NotPositiveDefinite {
                        eigenvalue: vals[vals.len() - 1],
                        largest: vals[0],
                    });
                }
                let u = spec.basis();
                let log_z = self.log_z.as_ref().expect("cached");
                let mut b = u.ad_mul(log_z.as_matrix()) * u;
                for j in 0..b.ncols() {
                    for i in 0..b.nrows() {
                        let (li, lj) = (vals[i], vals[j]);
                        let dd = if (li - lj).abs() < 1e-12 * li.max(lj) {
                            1.0 / li
                        } else {
                            (li.ln() - lj.ln()) / (li - lj)
                        };
                        b[(i, j)] *= Complex64::from(dd);
                    }
                }
                let kernel = u * b * u.adjoint();
                let inv_log = spec.map(|x| x.ln() / x);
                Ok((inv_log - kernel).scale(-4.0))
            }
            GeometricMeasure::Airm => {
                // V^{-1/2} Log(V^{-1/2} Ẑ V^{-1/2}) V^{-1/2}
                let (_, v_inv_sqrt) = matlin::sqrt_pair(v)?;
                let h = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
                    &(&v_inv_sqrt * self.z.as_matrix() * &v_inv_sqrt),
                ));
                let log_h = matlin::matrix_log(&h)?;
                Ok((&v_inv_sqrt * log_h.as_matrix() * &v_inv_sqrt).scale(4.0))
            }
            GeometricMeasure::Jbld => {
                // 2 (V + Ẑ)^{-1} − V^{-1}
                let sum = HpdMatrix::from_matrix_unchecked(v.as_matrix() + self.z.as_matrix());
                let sum_inv = matlin::cholesky_pd(sum.as_matrix())
                    .ok_or(MigError::CholeskyFailed)?
                    .inverse();
                let v_inv = matlin::cholesky_pd(v.as_matrix())
                    .ok_or(MigError::CholeskyFailed)?
                    .inverse();
                Ok((sum_inv.scale(2.0) - v_inv).scale(-1.0))
            }
            GeometricMeasure::Skld => {
                // Ẑ^{-1} − V^{-1} Ẑ V^{-1}
                let z_inv = self.z_inv.as_ref().expect("cached");
                let v_inv = matlin::cholesky_pd(v.as_matrix())
                    .ok_or(MigError::CholeskyFailed)?
                    .inverse();
                let sandwich = &v_inv * self.z.as_matrix() * &v_inv;
                Ok((z_inv.as_matrix() - sandwich).scale(-1.0))
            }
        }
    }
}

fn psi_with_context(ctx: &ZContext, w: &ComplexMatrix, data: &HpdSet) -> Result<f64> {
    let terms = exec::map_range(data.len(), |i| {
        let v = compress_unchecked(w, &data.matrices()[i]);
        ctx.sq_dist_to(&v).map_err(|e| tag_element(e, i))
    });
    let mut acc = 0.0;
    for t in terms {
        acc += t?;
    }
    Ok(-acc / data.len() as f64)
}

fn euclid_grad_with_context(
    ctx: &ZContext,
    w: &ComplexMatrix,
    data: &HpdSet,
) -> Result<ComplexMatrix> {
    let contributions = exec::map_range(data.len(), |i| -> Result<ComplexMatrix> {
        let r = &data.matrices()[i];
        let rw = r.as_matrix() * w;
        let v = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(&w.ad_mul(&rw)));
        let core = ctx.grad_core(&v).map_err(|e| tag_element(e, i))?;
        Ok(rw * core)
    });
    let mut acc = ComplexMatrix::zeros(w.nrows(), w.ncols());
    for c in contributions {
        acc += c?;
    }
    Ok(acc.scale(1.0 / data.len() as f64))
}

/// Points numeric failures back at the offending set element.
fn tag_element(e: MigError, index: usize) -> MigError {
    match e {
        MigError::NotPositiveDefinite { eigenvalue, .. } => MigError::SingularCompression {
            index,
            eigenvalue,
        },
        MigError::CholeskyFailed => MigError::SingularCompression {
            index,
            eigenvalue: f64::NAN,
        },
        other => other,
    }
}
