//! Complex Hermitian linear-algebra kernel.
//!
//! Everything downstream works with Hermitian positive-definite (HPD)
//! matrices, so the matrix functions here are computed spectrally: factor
//! once, transform the eigenvalues, reassemble. The log-derivative kernel
//! uses the Daleckii-Krein divided-difference closed form of the integral
//! `∫₀¹ [(V−I)s+I]⁻¹ L [(V−I)s+I]⁻¹ ds`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{MigError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative Frobenius defect allowed when validating Hermitian symmetry.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue relative to the largest; rejects
/// numerically singular inputs at construction.
pub const HPD_EIG_REL_TOL: f64 = 1e-12;
/// Eigenvalue gap below which the log divided difference switches to its
/// confluent limit, avoiding catastrophic cancellation.
const DIVIDED_DIFF_REL_TOL: f64 = 1e-12;
/// Iteration cap handed to the symmetric QR algorithm.
const EIG_MAX_ITERATIONS: usize = 10_000;

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let z = m[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(MigError::NonFiniteEntry { row, col });
            }
        }
    }
    Ok(())
}

fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / scale
}

/// Hermitian part `(M + M^H)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    let mut h = (m + m.adjoint()).scale(0.5);
    for i in 0..h.nrows() {
        h[(i, i)].im = 0.0;
    }
    h
}

/// A square complex matrix equal to its own conjugate transpose.
///
/// The stored matrix is the Hermitian part of the validated input, so the
/// symmetry holds exactly, not just within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(pub(crate) ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(MigError::DimensionMismatch {
                context: "HermitianMatrix::new",
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        check_finite(&m)?;
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_REL_TOL {
            return Err(MigError::NotHermitian { defect });
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Wraps without validating; the caller guarantees Hermitian symmetry.
    pub fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn zeros(order: usize) -> Self {
        Self(ComplexMatrix::zeros(order, order))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Spectral factorization with eigenvalues sorted in descending order.
    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(self)
    }
}

/// A Hermitian matrix whose eigenvalues are all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HpdMatrix(pub(crate) ComplexMatrix);

impl HpdMatrix {
    /// Validates Hermitian symmetry and positive-definiteness
    /// (`λ_min > 1e-12 λ_max`) before wrapping.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        Self::from_hermitian(h)
    }

    pub fn from_hermitian(h: HermitianMatrix) -> Result<Self> {
        let spec = h.spectral()?;
        let vals = spec.eigenvalues();
        let largest = vals[0];
        let smallest = vals[vals.len() - 1];
        if !(smallest > HPD_EIG_REL_TOL * largest) || largest <= 0.0 {
            return Err(MigError::NotPositiveDefinite {
                eigenvalue: smallest,
                largest,
            });
        }
        Ok(Self(h.0))
    }

    /// Wraps without validating; the caller guarantees the matrix is HPD
    /// (for example, congruences of HPD matrices by full-rank factors).
    pub fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn identity(order: usize) -> Self {
        Self(ComplexMatrix::identity(order, order))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(&HermitianMatrix(self.0.clone()))
    }
}

/// Eigenvalue factorization `H = U Λ U^H` of a Hermitian matrix.
///
/// Eigenvalues are real and sorted in descending order; `basis` columns are
/// the matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    basis: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Reassembles `U Λ U^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }

    /// Applies a real scalar function to the spectrum: `U f(Λ) U^H`.
    /// The result is Hermitian by symmetrization of the reassembly.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mut scaled = self.basis.clone();
        for (j, &v) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(v));
        }
        hermitian_part(&(scaled * self.basis.adjoint()))
    }

    fn positive_eigenvalue_check(&self) -> Result<()> {
        let smallest = *self.eigenvalues.last().expect("nonempty spectrum");
        if smallest <= 0.0 {
            return Err(MigError::NotPositiveDefinite {
                eigenvalue: smallest,
                largest: self.eigenvalues[0],
            });
        }
        Ok(())
    }
}

/// Spectral factorization of a Hermitian matrix, eigenvalues descending.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let n = h.order();
    if n == 0 {
        return Err(MigError::DegenerateInput("empty matrix"));
    }
    let se = nalgebra::SymmetricEigen::try_new(h.0.clone(), f64::EPSILON, EIG_MAX_ITERATIONS)
        .ok_or(MigError::EigNonConvergence {
            iterations: EIG_MAX_ITERATIONS,
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut basis = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition { eigenvalues, basis })
}

/// Principal matrix logarithm of an HPD matrix; the result is Hermitian.
pub fn matrix_log(p: &HpdMatrix) -> Result<HermitianMatrix> {
    let spec = p.spectral()?;
    spec.positive_eigenvalue_check()?;
    Ok(HermitianMatrix(spec.map(f64::ln)))
}

/// Matrix exponential of a Hermitian matrix; the result is HPD.
pub fn matrix_exp(h: &HermitianMatrix) -> Result<HpdMatrix> {
    let spec = h.spectral()?;
    Ok(HpdMatrix(spec.map(f64::exp)))
}

/// Principal square root of an HPD matrix.
pub fn matrix_sqrt(p: &HpdMatrix) -> Result<HpdMatrix> {
    let spec = p.spectral()?;
    spec.positive_eigenvalue_check()?;
    Ok(HpdMatrix(spec.map(f64::sqrt)))
}

/// Inverse square root of an HPD matrix.
pub fn matrix_inv_sqrt(p: &HpdMatrix) -> Result<HpdMatrix> {
    let spec = p.spectral()?;
    spec.positive_eigenvalue_check()?;
    Ok(HpdMatrix(spec.map(|x| 1.0 / x.sqrt())))
}

/// Inverse of an HPD matrix.
pub fn matrix_inv(p: &HpdMatrix) -> Result<HpdMatrix> {
    let spec = p.spectral()?;
    spec.positive_eigenvalue_check()?;
    Ok(HpdMatrix(spec.map(f64::recip)))
}

/// Square root and inverse square root from a single factorization.
pub fn sqrt_pair(p: &HpdMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let spec = p.spectral()?;
    spec.positive_eigenvalue_check()?;
    Ok((spec.map(f64::sqrt), spec.map(|x| 1.0 / x.sqrt())))
}

/// Cholesky factorization of a Hermitian matrix, `None` unless positive
/// definite. nalgebra's complex Cholesky accepts any nonzero pivot (the
/// complex square root always exists), so the pivots are validated here:
/// for a Hermitian PD input every pivot is positive real.
pub fn cholesky_pd(m: &ComplexMatrix) -> Option<Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.im.abs() < d.re) || !d.re.is_finite() {
            return None;
        }
    }
    Some(chol)
}

/// Lower-triangular Cholesky factor `L` with `L L^H = P` and positive real
/// diagonal.
pub fn chol_hpd(p: &HpdMatrix) -> Result<ComplexMatrix> {
    let chol = cholesky_pd(&p.0).ok_or(MigError::CholeskyFailed)?;
    Ok(chol.unpack())
}

/// Log-determinant of an HPD matrix via its Cholesky factor.
pub fn log_det(p: &HpdMatrix) -> Result<f64> {
    let l = chol_hpd(p)?;
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(2.0 * acc)
}

fn log_divided_difference(a: f64, b: f64) -> f64 {
    if (a - b).abs() < DIVIDED_DIFF_REL_TOL * a.max(b) {
        1.0 / a
    } else {
        (a.ln() - b.ln()) / (a - b)
    }
}

/// Directional-derivative kernel of the matrix logarithm:
/// `∫₀¹ [(V−I)s+I]⁻¹ L [(V−I)s+I]⁻¹ ds`, evaluated in closed form.
///
/// In the eigenbasis of `V` the transformed `L` entry `(i, j)` is scaled by
/// the first divided difference of `ln` at `(λ_i, λ_j)`, which collapses to
/// `1/λ_i` on the diagonal and for clustered eigenvalues.
pub fn dlog_kernel(v: &HpdMatrix, l: &HermitianMatrix) -> Result<HermitianMatrix> {
    if v.order() != l.order() {
        return Err(MigError::DimensionMismatch {
            context: "dlog_kernel",
            left: v.order(),
            right: l.order(),
        });
    }
    let spec = v.spectral()?;
    spec.positive_eigenvalue_check()?;
    let u = spec.basis();
    let vals = spec.eigenvalues();

    let mut b = u.ad_mul(&l.0) * u;
    for j in 0..b.ncols() {
        for i in 0..b.nrows() {
            b[(i, j)] *= Complex64::from(log_divided_difference(vals[i], vals[j]));
        }
    }
    Ok(HermitianMatrix(hermitian_part(&(u * b * u.adjoint()))))
}

/// Random HPD matrix with eigenvalues log-spaced so the condition number is
/// at most `10^max_log10_cond`; the eigenbasis is Haar-like from a QR of a
/// complex Gaussian matrix. Useful for tests and benchmarks.
pub fn random_hpd(order: usize, max_log10_cond: f64, rng: &mut impl Rng) -> HpdMatrix {
    let q = random_unitary(order, rng);
    let mut scaled = q.clone();
    for j in 0..order {
        let exponent = rng.gen_range(-max_log10_cond / 2.0..=max_log10_cond / 2.0);
        scaled.column_mut(j).scale_mut(10f64.powf(exponent));
    }
    HpdMatrix(hermitian_part(&(scaled * q.adjoint())))
}

/// Random Hermitian matrix with entries on the unit scale.
pub fn random_hermitian(order: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let g = random_gaussian(order, order, rng);
    HermitianMatrix(hermitian_part(&g))
}

/// Random unitary matrix from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(order: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = random_gaussian(order, order, rng);
    g.qr().q()
}

/// Matrix of iid standard complex Gaussian entries.
pub fn random_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    use rand_distr::StandardNormal;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rel_err(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    fn cdiag(vals: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(vals.len(), vals.len(), |i, j| {
            if i == j {
                Complex64::from(vals[i])
            } else {
                Complex64::from(0.0)
            }
        })
    }

    #[test]
    fn eig_identity() {
        let p = HpdMatrix::identity(3);
        let spec = p.spectral().unwrap();
        for &v in spec.eigenvalues() {
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
        let defect = (spec.basis().ad_mul(spec.basis()) - ComplexMatrix::identity(3, 3)).norm();
        assert!(defect <= 1e-10);
    }

    #[test]
    fn eig_diagonal_sorted_descending() {
        let h = HermitianMatrix::new(cdiag(&[1.0, 4.0])).unwrap();
        let spec = eig_hermitian(&h).unwrap();
        assert_relative_eq!(spec.eigenvalues()[0], 4.0, max_relative = 1e-14);
        assert_relative_eq!(spec.eigenvalues()[1], 1.0, max_relative = 1e-14);
        // basis is the identity up to column permutation and phase
        for j in 0..2 {
            let col = spec.basis().column(j);
            let expect_row = if j == 0 { 1 } else { 0 };
            assert_relative_eq!(col[expect_row].norm(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut r = rng(1);
        for _ in 0..20 {
            let h = random_hermitian(6, &mut r);
            let spec = h.spectral().unwrap();
            assert!(rel_err(&spec.reconstruct(), h.as_matrix()) <= 1e-10);
        }
    }

    #[test]
    fn eig_reconstruction_high_condition() {
        let mut r = rng(2);
        for _ in 0..10 {
            let p = random_hpd(6, 6.0, &mut r);
            let spec = p.spectral().unwrap();
            assert!(rel_err(&spec.reconstruct(), p.as_matrix()) <= 1e-10);
        }
    }

    #[test]
    fn log_identity_is_zero() {
        let l = matrix_log(&HpdMatrix::identity(4)).unwrap();
        assert!(l.norm() <= 1e-14);
    }

    #[test]
    fn log_diagonal() {
        let p = HpdMatrix::new(cdiag(&[std::f64::consts::E, std::f64::consts::E.powi(2)])).unwrap();
        let l = matrix_log(&p).unwrap();
        assert!(rel_err(l.as_matrix(), &cdiag(&[1.0, 2.0])) <= 1e-12);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut r = rng(3);
        for _ in 0..10 {
            let p = random_hpd(5, 3.0, &mut r);
            let back = matrix_exp(&matrix_log(&p).unwrap()).unwrap();
            assert!(rel_err(back.as_matrix(), p.as_matrix()) <= 1e-9);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut r = rng(4);
        let p = random_hpd(5, 3.0, &mut r);
        let s = matrix_sqrt(&p).unwrap();
        let square = s.as_matrix() * s.as_matrix();
        assert!(rel_err(&square, p.as_matrix()) <= 1e-9);
    }

    #[test]
    fn chol_identity_and_diagonal() {
        let l = chol_hpd(&HpdMatrix::identity(3)).unwrap();
        assert!(rel_err(&l, &ComplexMatrix::identity(3, 3)) <= 1e-14);
        let l = chol_hpd(&HpdMatrix::new(cdiag(&[4.0, 9.0])).unwrap()).unwrap();
        assert!(rel_err(&l, &cdiag(&[2.0, 3.0])) <= 1e-14);
    }

    #[test]
    fn chol_reconstruction() {
        let mut r = rng(5);
        for _ in 0..10 {
            let p = random_hpd(6, 6.0, &mut r);
            let l = chol_hpd(&p).unwrap();
            assert!(rel_err(&(&l * l.adjoint()), p.as_matrix()) <= 1e-10);
            for i in 0..6 {
                assert!(l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn hpd_rejects_indefinite() {
        let err = HpdMatrix::new(cdiag(&[1.0, -0.5])).unwrap_err();
        assert!(matches!(err, MigError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn hermitian_rejects_asymmetric() {
        let mut m = cdiag(&[1.0, 1.0]);
        m[(0, 1)] = Complex64::new(0.3, 0.0);
        let err = HermitianMatrix::new(m).unwrap_err();
        assert!(matches!(err, MigError::NotHermitian { .. }));
    }

    #[test]
    fn dlog_identity_returns_argument() {
        let mut r = rng(6);
        let l = random_hermitian(4, &mut r);
        let k = dlog_kernel(&HpdMatrix::identity(4), &l).unwrap();
        assert!(rel_err(k.as_matrix(), l.as_matrix()) <= 1e-12);
    }

    #[test]
    fn dlog_diagonal_case() {
        let v = HpdMatrix::new(cdiag(&[2.0, 5.0])).unwrap();
        let l = HermitianMatrix::new(cdiag(&[3.0, 7.0])).unwrap();
        let k = dlog_kernel(&v, &l).unwrap();
        assert!(rel_err(k.as_matrix(), &cdiag(&[1.5, 1.4])) <= 1e-12);
    }

    #[test]
    fn dlog_linear_in_l() {
        let mut r = rng(7);
        let v = random_hpd(5, 2.0, &mut r);
        let l1 = random_hermitian(5, &mut r);
        let l2 = random_hermitian(5, &mut r);
        let combo = HermitianMatrix::new(l1.as_matrix().scale(0.7) + l2.as_matrix().scale(-1.3))
            .unwrap();
        let lhs = dlog_kernel(&v, &combo).unwrap();
        let rhs = dlog_kernel(&v, &l1).unwrap().as_matrix().scale(0.7)
            + dlog_kernel(&v, &l2).unwrap().as_matrix().scale(-1.3);
        assert!(rel_err(lhs.as_matrix(), &rhs) <= 1e-10);
    }

    #[test]
    fn dlog_matches_quadrature() {
        let mut r = rng(8);
        for _ in 0..5 {
            let v = random_hpd(5, 3.0, &mut r);
            let l = random_hermitian(5, &mut r);
            let closed = dlog_kernel(&v, &l).unwrap();
            let quad = quadrature::dlog_by_gauss_legendre(v.as_matrix(), l.as_matrix(), 64);
            assert!(rel_err(closed.as_matrix(), &quad) <= 1e-8);
        }
    }

    #[test]
    fn dlog_consistent_with_inverse_integral() {
        // With L = V the kernel collapses to V^{-1} V = I-like scaling:
        // diag entries become 1/λ · λ = 1, matching ∫ [(V−I)s+I]^{-2} ds = V^{-1}.
        let mut r = rng(9);
        let v = random_hpd(4, 2.0, &mut r);
        let k = dlog_kernel(&v, &HermitianMatrix(v.as_matrix().clone())).unwrap();
        assert!(rel_err(k.as_matrix(), &ComplexMatrix::identity(4, 4)) <= 1e-10);
    }

    #[test]
    fn dlog_order_mismatch() {
        let v = HpdMatrix::identity(3);
        let l = HermitianMatrix::zeros(4);
        assert!(matches!(
            dlog_kernel(&v, &l),
            Err(MigError::DimensionMismatch { .. })
        ));
    }

    mod quadrature {
        use super::*;

        /// Gauss-Legendre nodes/weights on [0, 1] by Newton iteration on
        /// the Legendre polynomial; test oracle only.
        pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                // initial guess (Chebyshev-like)
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre(n, x);
                    let dx = p / dp;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        break;
                    }
                }
                let (_, dp) = legendre(n, x);
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                // map [-1, 1] -> [0, 1]
                out.push(((x + 1.0) / 2.0, w / 2.0));
            }
            out
        }

        fn legendre(n: usize, x: f64) -> (f64, f64) {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            (p1, dp)
        }

        pub fn dlog_by_gauss_legendre(
            v: &ComplexMatrix,
            l: &ComplexMatrix,
            nodes: usize,
        ) -> ComplexMatrix {
            let n = v.nrows();
            let eye = ComplexMatrix::identity(n, n);
            let mut acc = ComplexMatrix::zeros(n, n);
            for (s, w) in gauss_legendre_unit(nodes) {
                let m = (v - &eye).scale(s) + &eye;
                let inv = m.try_inverse().expect("integrand invertible on HPD path");
                acc += (&inv * l * &inv).scale(w);
            }
            acc
        }
    }
}
