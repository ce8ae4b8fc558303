//! Geometric means of HPD sets and the data variance.
//!
//! The mean associated with a measure minimizes the sum of squared distances
//! over the set. LEM and SKLD means are closed-form (the SKLD mean solves the
//! algebraic Riccati equation `R̂ A R̂ = B` with `A` the mean of inverses and
//! `B` the arithmetic mean); the JBLD mean is a fixed-point iteration; the
//! AIRM (Karcher) mean is Riemannian gradient descent with step halving,
//! initialized at the LEM mean.

use crate::error::{MigError, Result};
use crate::exec;
use crate::geometry::{self, GeometricMeasure};
use crate::matlin::{self, ComplexMatrix, HermitianMatrix, HpdMatrix};

/// Solver used for the AIRM mean.
///
/// `Karcher` iterates `R̂ ← R̂^{1/2} exp((ε/K) Σ Log(R̂^{-1/2} R_k R̂^{-1/2})) R̂^{1/2}`
/// until the tangent-space gradient vanishes. `LogDomainFixedPoint` is the
/// relaxed recurrence `S ← a S + (a−1) Σ_{k≥2} Log(exp(S/2) R_k⁻¹ exp(S/2))`
/// on the log-domain iterate `S`, returning `exp(S)`; note the sum starts at
/// the second element, so its fixed point generally differs from the Karcher
/// mean unless the first element is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AirmSolver {
    #[default]
    Karcher,
    LogDomainFixedPoint,
}

/// Convergence controls for the iterative mean solvers.
#[derive(Debug, Clone)]
pub struct MeanConfig {
    pub max_iterations: usize,
    /// Relative Frobenius change of successive iterates (JBLD, log-domain
    /// AIRM) or tangent-gradient norm (Karcher) below which iteration stops.
    pub residual_tolerance: f64,
    /// Relaxation `a ∈ (1 − 1/K, 1)` for the log-domain AIRM recurrence;
    /// `None` selects `1 − 1/(2K)`.
    pub airm_relaxation: Option<f64>,
    pub airm_solver: AirmSolver,
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            residual_tolerance: 1e-10,
            airm_relaxation: None,
            airm_solver: AirmSolver::Karcher,
        }
    }
}

impl MeanConfig {
    fn validate(&self, set_len: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(MigError::InvalidParameter(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(MigError::InvalidParameter(
                "residual_tolerance must be positive".into(),
            ));
        }
        if let Some(a) = self.airm_relaxation {
            let k = set_len as f64;
            if !(a > 1.0 - 1.0 / k && a < 1.0) {
                return Err(MigError::InvalidParameter(format!(
                    "airm relaxation {a} outside (1 - 1/K, 1) for K = {set_len}"
                )));
            }
        }
        Ok(())
    }

    fn relaxation(&self, set_len: usize) -> f64 {
        self.airm_relaxation
            .unwrap_or(1.0 - 1.0 / (2.0 * set_len as f64))
    }
}

/// Nonempty collection of HPD matrices of a common order.
#[derive(Debug, Clone)]
pub struct HpdSet {
    matrices: Vec<HpdMatrix>,
}

impl HpdSet {
    pub fn new(matrices: Vec<HpdMatrix>) -> Result<Self> {
        let first = matrices.first().ok_or(MigError::EmptySet)?;
        let order = first.order();
        for m in &matrices {
            if m.order() != order {
                return Err(MigError::DimensionMismatch {
                    context: "HpdSet::new",
                    left: order,
                    right: m.order(),
                });
            }
        }
        Ok(Self { matrices })
    }

    pub fn matrices(&self) -> &[HpdMatrix] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn order(&self) -> usize {
        self.matrices[0].order()
    }
}

/// Entry-wise arithmetic mean `(1/K) Σ R_k`; also HPD.
pub fn arithmetic_mean(set: &HpdSet) -> HpdMatrix {
    let order = set.order();
    let mut acc = ComplexMatrix::zeros(order, order);
    for m in set.matrices() {
        acc += m.as_matrix();
    }
    HpdMatrix::from_matrix_unchecked(acc.scale(1.0 / set.len() as f64))
}

/// Geometric mean of the set with respect to the measure.
pub fn geometric_mean(
    measure: GeometricMeasure,
    set: &HpdSet,
    cfg: &MeanConfig,
) -> Result<HpdMatrix> {
    cfg.validate(set.len())?;
    if set.len() == 1 {
        return Ok(set.matrices()[0].clone());
    }
    let result = match measure {
        GeometricMeasure::Lem => lem_mean(set)?,
        GeometricMeasure::Skld => skld_mean(set)?,
        GeometricMeasure::Jbld => jbld_mean(set, cfg)?,
        GeometricMeasure::Airm => match cfg.airm_solver {
            AirmSolver::Karcher => karcher_mean(set, cfg)?,
            AirmSolver::LogDomainFixedPoint => airm_log_fixed_point(set, cfg)?,
        },
    };
    // the solvers produce HPD matrices by construction; validate once anyway
    HpdMatrix::new(result.into_matrix())
}

/// Mean squared distance of the set elements to `mean`.
pub fn variance(measure: GeometricMeasure, set: &HpdSet, mean: &HpdMatrix) -> Result<f64> {
    if set.order() != mean.order() {
        return Err(MigError::DimensionMismatch {
            context: "variance",
            left: set.order(),
            right: mean.order(),
        });
    }
    let terms = exec::map_slice(set.matrices(), |m| geometry::sq_dist(measure, m, mean));
    let mut acc = 0.0;
    for t in terms {
        acc += t?;
    }
    Ok(acc / set.len() as f64)
}

fn lem_mean(set: &HpdSet) -> Result<HpdMatrix> {
    let logs = exec::map_slice(set.matrices(), matlin::matrix_log);
    let order = set.order();
    let mut acc = ComplexMatrix::zeros(order, order);
    for l in logs {
        acc += l?.as_matrix();
    }
    let mean_log = HermitianMatrix::from_matrix_unchecked(acc.scale(1.0 / set.len() as f64));
    matlin::matrix_exp(&mean_log)
}

fn skld_mean(set: &HpdSet) -> Result<HpdMatrix> {
    let k = set.len() as f64;
    let order = set.order();
    let inverses = exec::map_slice(set.matrices(), matlin::matrix_inv);
    let mut a = ComplexMatrix::zeros(order, order);
    for inv in inverses {
        a += inv?.as_matrix();
    }
    let mut b = ComplexMatrix::zeros(order, order);
    for m in set.matrices() {
        b += m.as_matrix();
    }
    // normalizing both sides leaves the Riccati solution unchanged
    let a = HpdMatrix::from_matrix_unchecked(a.scale(1.0 / k));
    let b = b.scale(1.0 / k);

    let (a_sqrt, a_inv_sqrt) = matlin::sqrt_pair(&a)?;
    let inner = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(&(&a_sqrt * b * &a_sqrt)));
    let inner_sqrt = matlin::matrix_sqrt(&inner)?;
    let result = matlin::hermitian_part(&(&a_inv_sqrt * inner_sqrt.as_matrix() * &a_inv_sqrt));
    Ok(HpdMatrix::from_matrix_unchecked(result))
}

/// One application of the JBLD fixed-point map
/// `G(X) = ((1/K) Σ ((X + R_k)/2)⁻¹)⁻¹`.
fn jbld_map(set: &HpdSet, x: &HpdMatrix) -> Result<HpdMatrix> {
    let k = set.len() as f64;
    let order = set.order();
    let halves = exec::map_slice(set.matrices(), |rk| {
        let avg = HpdMatrix::from_matrix_unchecked((x.as_matrix() + rk.as_matrix()).scale(0.5));
        matlin::matrix_inv(&avg)
    });
    let mut acc = ComplexMatrix::zeros(order, order);
    for h in halves {
        acc += h?.as_matrix();
    }
    matlin::matrix_inv(&HpdMatrix::from_matrix_unchecked(acc.scale(1.0 / k)))
}

/// Anderson mixing depth for the JBLD fixed point.
const JBLD_ANDERSON_DEPTH: usize = 5;

/// Real coordinates of a complex matrix, real parts then imaginary parts.
fn realify(m: &ComplexMatrix) -> nalgebra::DVector<f64> {
    let len = m.len();
    nalgebra::DVector::from_fn(2 * len, |i, _| {
        let z = m.as_slice()[i % len];
        if i < len {
            z.re
        } else {
            z.im
        }
    })
}

/// JBLD mean by the fixed-point map with log-domain Anderson extrapolation.
///
/// The plain iteration contracts at a rate approaching one when the set
/// spans widely separated scales (power-separated training data); mixing
/// the last few map images through a small least-squares fit removes the
/// slow error modes. The mixing runs on the matrix logarithms of the
/// iterates, so extrapolation can never leave the HPD cone and the scale
/// separation becomes additive. Convergence is declared on the map residual
/// `‖G(X) − X‖/‖X‖`, which is exactly the successive-iterate change of the
/// unaccelerated iteration.
fn jbld_mean(set: &HpdSet, cfg: &MeanConfig) -> Result<HpdMatrix> {
    let mut x = arithmetic_mean(set);
    let mut s = matlin::matrix_log(&x)?;
    // most recent first: (log-domain residual, log of map image)
    let mut history: Vec<(ComplexMatrix, HermitianMatrix)> = Vec::new();

    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let gx = jbld_map(set, &x)?;
        residual = (gx.as_matrix() - x.as_matrix()).norm() / x.norm();
        if residual < cfg.residual_tolerance {
            return Ok(x);
        }
        let t = matlin::matrix_log(&gx)?;
        let res = t.as_matrix() - s.as_matrix();

        let mut next = t.clone();
        if !history.is_empty() {
            // γ minimizing ‖r_t − Σ_j γ_j (r_t − r_{t−j})‖ over the kept history
            let rhs = realify(&res);
            let diffs = nalgebra::DMatrix::<f64>::from_columns(
                &history
                    .iter()
                    .map(|(r_prev, _)| &rhs - realify(r_prev))
                    .collect::<Vec<_>>(),
            );
            if let Ok(gamma) = diffs.svd(true, true).solve(&rhs, 1e-13) {
                if gamma.iter().all(|g| g.is_finite() && g.abs() <= 1e3) {
                    let mut blend = t.as_matrix().clone();
                    for (j, (_, t_prev)) in history.iter().enumerate() {
                        blend += (t_prev.as_matrix() - t.as_matrix()).scale(gamma[j]);
                    }
                    next = HermitianMatrix::from_matrix_unchecked(matlin::hermitian_part(&blend));
                }
            }
        }
        history.insert(0, (res, t));
        history.truncate(JBLD_ANDERSON_DEPTH);
        s = next;
        x = matlin::matrix_exp(&s)?;
    }
    Err(MigError::IterationStalled {
        context: "JBLD mean fixed point",
        iterations: cfg.max_iterations,
        residual,
    })
}

struct KarcherState {
    /// Mean of the whitened logs; vanishes at the Karcher mean.
    tangent: HermitianMatrix,
    /// Karcher objective Σ d²(R_k, R̂).
    objective: f64,
}

fn karcher_evaluate(set: &HpdSet, point: &HpdMatrix) -> Result<KarcherState> {
    let (_, inv_sqrt) = matlin::sqrt_pair(point)?;
    let logs = exec::map_slice(set.matrices(), |rk| {
        let whitened = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
            &(&inv_sqrt * rk.as_matrix() * &inv_sqrt),
        ));
        matlin::matrix_log(&whitened)
    });
    let order = set.order();
    let mut acc = ComplexMatrix::zeros(order, order);
    let mut objective = 0.0;
    for l in logs {
        let l = l?;
        objective += l.as_matrix().norm_squared();
        acc += l.as_matrix();
    }
    Ok(KarcherState {
        tangent: HermitianMatrix::from_matrix_unchecked(acc.scale(1.0 / set.len() as f64)),
        objective,
    })
}

fn karcher_step(point: &HpdMatrix, tangent: &HermitianMatrix, step: f64) -> Result<HpdMatrix> {
    let (sqrt, _) = matlin::sqrt_pair(point)?;
    let scaled = HermitianMatrix::from_matrix_unchecked(tangent.as_matrix().scale(step));
    let exp = matlin::matrix_exp(&scaled)?;
    Ok(HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
        &(&sqrt * exp.as_matrix() * &sqrt),
    )))
}

fn karcher_mean(set: &HpdSet, cfg: &MeanConfig) -> Result<HpdMatrix> {
    const MAX_HALVINGS: u32 = 40;
    let mut current = lem_mean(set)?;
    let mut state = karcher_evaluate(set, &current)?;
    let mut residual = state.tangent.norm();
    for _ in 0..cfg.max_iterations {
        if residual < cfg.residual_tolerance {
            return Ok(current);
        }
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let candidate = karcher_step(&current, &state.tangent, step)?;
            let next = karcher_evaluate(set, &candidate)?;
            // allow round-off-level non-decrease so the safeguard cannot
            // stall at the solution
            if next.objective <= state.objective * (1.0 + 1e-11) {
                current = candidate;
                state = next;
                residual = state.tangent.norm();
                break;
            }
            halvings += 1;
            step *= 0.5;
            if halvings > MAX_HALVINGS {
                return Err(MigError::IterationStalled {
                    context: "Karcher mean step halving",
                    iterations: cfg.max_iterations,
                    residual,
                });
            }
        }
    }
    Err(MigError::IterationStalled {
        context: "Karcher mean",
        iterations: cfg.max_iterations,
        residual,
    })
}

/// The relaxed fixed-point recurrence with the iterate kept in the log
/// domain. Retained as an alternative to the Karcher solver; see
/// [`AirmSolver`] for why its fixed point is generally not the Karcher mean.
fn airm_log_fixed_point(set: &HpdSet, cfg: &MeanConfig) -> Result<HpdMatrix> {
    let a = cfg.relaxation(set.len());
    let order = set.order();
    let logs = exec::map_slice(set.matrices(), matlin::matrix_log);
    let mut init = ComplexMatrix::zeros(order, order);
    for l in logs {
        init += l?.as_matrix();
    }
    let mut s = init.scale(1.0 / set.len() as f64);

    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let half = matlin::matrix_exp(&HermitianMatrix::from_matrix_unchecked(s.scale(0.5)))?;
        let tail = &set.matrices()[1..];
        let terms = exec::map_slice(tail, |rk| {
            let rk_inv = matlin::matrix_inv(rk)?;
            let m = HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
                &(half.as_matrix() * rk_inv.as_matrix() * half.as_matrix()),
            ));
            matlin::matrix_log(&m)
        });
        let mut sum = ComplexMatrix::zeros(order, order);
        for t in terms {
            sum += t?.as_matrix();
        }
        let next = s.scale(a) + sum.scale(a - 1.0);
        residual = (&next - &s).norm() / s.norm().max(1e-300);
        s = next;
        if residual < cfg.residual_tolerance {
            return matlin::matrix_exp(&HermitianMatrix::from_matrix_unchecked(s));
        }
    }
    Err(MigError::IterationStalled {
        context: "AIRM log-domain fixed point",
        iterations: cfg.max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{random_hpd, random_unitary};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn scalar(v: f64) -> HpdMatrix {
        HpdMatrix::new(ComplexMatrix::from_element(1, 1, Complex64::from(v))).unwrap()
    }

    fn scalar_set(vals: &[f64]) -> HpdSet {
        HpdSet::new(vals.iter().map(|&v| scalar(v)).collect()).unwrap()
    }

    fn random_set(order: usize, count: usize, r: &mut ChaCha8Rng) -> HpdSet {
        HpdSet::new((0..count).map(|_| random_hpd(order, 2.0, r)).collect()).unwrap()
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(HpdSet::new(vec![]), Err(MigError::EmptySet)));
    }

    #[test]
    fn singleton_mean_is_the_element() {
        let mut r = rng(20);
        let p = random_hpd(4, 2.0, &mut r);
        let set = HpdSet::new(vec![p.clone()]).unwrap();
        for m in GeometricMeasure::ALL {
            let mean = geometric_mean(m, &set, &MeanConfig::default()).unwrap();
            assert!((mean.as_matrix() - p.as_matrix()).norm() <= 1e-12 * p.norm());
        }
    }

    #[test]
    fn scalar_one_four_gives_two_all_measures() {
        let set = scalar_set(&[1.0, 4.0]);
        let cfg = MeanConfig::default();
        for m in GeometricMeasure::ALL {
            let mean = geometric_mean(m, &set, &cfg).unwrap();
            assert_relative_eq!(mean.as_matrix()[(0, 0)].re, 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn log_domain_airm_variant_on_scalars() {
        // with the first element at identity the truncated sum still lands
        // on the geometric mean
        let set = scalar_set(&[1.0, 4.0]);
        let cfg = MeanConfig {
            airm_solver: AirmSolver::LogDomainFixedPoint,
            ..MeanConfig::default()
        };
        let mean = geometric_mean(GeometricMeasure::Airm, &set, &cfg).unwrap();
        assert_relative_eq!(mean.as_matrix()[(0, 0)].re, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn idempotence() {
        let mut r = rng(21);
        let p = random_hpd(4, 2.0, &mut r);
        let set = HpdSet::new(vec![p.clone(); 5]).unwrap();
        for m in GeometricMeasure::ALL {
            let mean = geometric_mean(m, &set, &MeanConfig::default()).unwrap();
            let err = (mean.as_matrix() - p.as_matrix()).norm() / p.norm();
            assert!(err <= 1e-9, "{m}: {err}");
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut r = rng(22);
        let set = random_set(4, 5, &mut r);
        let mut reversed: Vec<HpdMatrix> = set.matrices().to_vec();
        reversed.reverse();
        let reversed = HpdSet::new(reversed).unwrap();
        for m in GeometricMeasure::ALL {
            let a = geometric_mean(m, &set, &MeanConfig::default()).unwrap();
            let b = geometric_mean(m, &reversed, &MeanConfig::default()).unwrap();
            let err = (a.as_matrix() - b.as_matrix()).norm() / a.norm();
            assert!(err <= 1e-10, "{m}: {err}");
        }
    }

    #[test]
    fn skld_riccati_residual() {
        let mut r = rng(23);
        let set = random_set(5, 6, &mut r);
        let mean = geometric_mean(GeometricMeasure::Skld, &set, &MeanConfig::default()).unwrap();
        let mut a = ComplexMatrix::zeros(5, 5);
        let mut b = ComplexMatrix::zeros(5, 5);
        for m in set.matrices() {
            a += matlin::matrix_inv(m).unwrap().as_matrix();
            b += m.as_matrix();
        }
        let lhs = mean.as_matrix() * a * mean.as_matrix();
        let residual = (&lhs - &b).norm() / b.norm();
        assert!(residual <= 1e-10, "Riccati residual {residual}");
    }

    #[test]
    fn jbld_fixed_point_residual() {
        let mut r = rng(24);
        let set = random_set(4, 5, &mut r);
        let cfg = MeanConfig::default();
        let mean = geometric_mean(GeometricMeasure::Jbld, &set, &cfg).unwrap();
        // plug the mean back into the iteration map
        let mut acc = ComplexMatrix::zeros(4, 4);
        for rk in set.matrices() {
            let avg =
                HpdMatrix::from_matrix_unchecked((mean.as_matrix() + rk.as_matrix()).scale(0.5));
            acc += matlin::matrix_inv(&avg).unwrap().as_matrix();
        }
        let image = matlin::matrix_inv(&HpdMatrix::from_matrix_unchecked(
            acc.scale(1.0 / set.len() as f64),
        ))
        .unwrap();
        let residual = (image.as_matrix() - mean.as_matrix()).norm() / mean.norm();
        assert!(residual <= 1e-8, "fixed point residual {residual}");
    }

    #[test]
    fn jbld_mean_on_power_separated_clusters() {
        // two clusters five decades apart: the plain fixed point contracts
        // at a rate near one here, so this exercises the extrapolation
        let mut r = rng(55);
        let mut set = Vec::new();
        for i in 0..16 {
            let scale = if i % 2 == 0 { 1.0 } else { 1e5 };
            set.push(HpdMatrix::from_matrix_unchecked(
                random_hpd(4, 1.0, &mut r).as_matrix().scale(scale),
            ));
        }
        let set = HpdSet::new(set).unwrap();
        let cfg = MeanConfig::default();
        let mean = geometric_mean(GeometricMeasure::Jbld, &set, &cfg).unwrap();
        // verify the fixed point directly
        let image = jbld_map(&set, &mean).unwrap();
        let residual = (image.as_matrix() - mean.as_matrix()).norm() / mean.norm();
        assert!(residual <= 1e-8, "fixed-point residual {residual}");
    }

    #[test]
    fn karcher_stationarity() {
        let mut r = rng(25);
        let set = random_set(4, 6, &mut r);
        let mean = geometric_mean(GeometricMeasure::Airm, &set, &MeanConfig::default()).unwrap();
        let state = karcher_evaluate(&set, &mean).unwrap();
        let scale = (state.objective / set.len() as f64).sqrt();
        assert!(state.tangent.norm() <= 1e-6 * scale.max(1.0) * set.len() as f64);
    }

    #[test]
    fn congruence_equivariance() {
        let mut r = rng(26);
        let set = random_set(4, 4, &mut r);
        let a = random_hpd(4, 1.0, &mut r).into_matrix() + random_unitary(4, &mut r).scale(0.5);
        let transformed = HpdSet::new(
            set.matrices()
                .iter()
                .map(|m| {
                    HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
                        &(&a * m.as_matrix() * a.adjoint()),
                    ))
                })
                .collect(),
        )
        .unwrap();
        let cfg = MeanConfig::default();
        for m in [
            GeometricMeasure::Airm,
            GeometricMeasure::Jbld,
            GeometricMeasure::Skld,
        ] {
            let base = geometric_mean(m, &set, &cfg).unwrap();
            let expected = matlin::hermitian_part(&(&a * base.as_matrix() * a.adjoint()));
            let got = geometric_mean(m, &transformed, &cfg).unwrap();
            let err = (got.as_matrix() - &expected).norm() / expected.norm();
            assert!(err <= 1e-8, "{m}: congruence equivariance error {err}");
        }
    }

    #[test]
    fn lem_unitary_equivariance() {
        let mut r = rng(27);
        let set = random_set(4, 4, &mut r);
        let u = random_unitary(4, &mut r);
        let transformed = HpdSet::new(
            set.matrices()
                .iter()
                .map(|m| {
                    HpdMatrix::from_matrix_unchecked(matlin::hermitian_part(
                        &(&u * m.as_matrix() * u.adjoint()),
                    ))
                })
                .collect(),
        )
        .unwrap();
        let cfg = MeanConfig::default();
        let base = geometric_mean(GeometricMeasure::Lem, &set, &cfg).unwrap();
        let expected = matlin::hermitian_part(&(&u * base.as_matrix() * u.adjoint()));
        let got = geometric_mean(GeometricMeasure::Lem, &transformed, &cfg).unwrap();
        let err = (got.as_matrix() - &expected).norm() / expected.norm();
        assert!(err <= 1e-8);
    }

    #[test]
    fn variance_zero_on_identical_set() {
        let mut r = rng(28);
        let p = random_hpd(3, 1.0, &mut r);
        let set = HpdSet::new(vec![p.clone(); 4]).unwrap();
        for m in GeometricMeasure::ALL {
            let v = variance(m, &set, &p).unwrap();
            assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn variance_scalar_example() {
        let set = scalar_set(&[1.0, 4.0]);
        let v = variance(GeometricMeasure::Lem, &set, &scalar(2.0)).unwrap();
        assert_relative_eq!(v, 2f64.ln().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn variance_minimized_at_mean() {
        let mut r = rng(29);
        let set = random_set(3, 6, &mut r);
        let cfg = MeanConfig::default();
        for m in GeometricMeasure::ALL {
            let mean = geometric_mean(m, &set, &cfg).unwrap();
            let at_mean = variance(m, &set, &mean).unwrap();
            for _ in 0..20 {
                // random perturbed candidates around the mean
                let bump = matlin::random_hermitian(3, &mut r);
                let perturbed = matlin::hermitian_part(
                    &(mean.as_matrix() + bump.as_matrix().scale(0.05 * mean.norm())),
                );
                let Ok(perturbed) = HpdMatrix::new(perturbed) else {
                    continue;
                };
                let v = variance(m, &set, &perturbed).unwrap();
                assert!(
                    v + 1e-12 >= at_mean,
                    "{m}: perturbed variance {v} below minimum {at_mean}"
                );
            }
        }
    }

    #[test]
    fn variance_order_mismatch() {
        let set = scalar_set(&[1.0, 2.0]);
        let mean = HpdMatrix::identity(2);
        assert!(matches!(
            variance(GeometricMeasure::Lem, &set, &mean),
            Err(MigError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn relaxation_validation() {
        let set = scalar_set(&[1.0, 4.0]);
        let cfg = MeanConfig {
            airm_relaxation: Some(0.3),
            ..MeanConfig::default()
        };
        assert!(matches!(
            geometric_mean(GeometricMeasure::Airm, &set, &cfg),
            Err(MigError::InvalidParameter(_))
        ));
    }
}
