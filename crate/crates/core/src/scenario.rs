//! Generative model of the nonhomogeneous environment.
//!
//! Clutter is zero-mean circular complex Gaussian with covariance
//! `C = σ_c² C₀ + σ_n² I`, where `[C₀]_{ij} = ρ^{|i−j|} exp(i 2π f_c (i−j))`
//! and `σ_c² = σ_n² · 10^{CNR/10}`. A target adds `α p` along the steering
//! vector at Doppler `f_s`; interference adds a fixed-amplitude component at
//! Doppler `f_i` to the leading secondary cells.
//!
//! All randomness flows through counter-based substreams keyed by
//! `(seed, stream, trial)`, so trials are independent and identical whether
//! executed serially or on a worker pool.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::detector::{build_hpd_observation, SteeringVector};
use crate::error::{MigError, Result};
use crate::exec;
use crate::matlin::{self, ComplexMatrix, ComplexVector, HpdMatrix};
use crate::means::HpdSet;

/// Fixed substream identifiers so independent phases of an experiment never
/// share random numbers.
pub mod streams {
    pub const TRAINING_CLUTTER: u64 = 1;
    pub const TRAINING_TARGET: u64 = 2;
    pub const THRESHOLD: u64 = 4;
    pub const PFA_CHECK: u64 = 5;
    /// Detection-probability trials for SCR grid point `i` use `PD_BASE + i`.
    pub const PD_BASE: u64 = 16;
}

/// RNG for one trial: ChaCha keyed by `seed` with the 64-bit stream nonce
/// split between `stream` and `trial`. Distinct `(stream, trial)` pairs give
/// independent sequences.
pub fn substream_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(stream < (1 << 32) && trial < (1 << 32));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | (trial & 0xFFFF_FFFF));
    rng
}

/// Interference injected into the leading secondary cells.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSpec {
    /// Number of contaminated secondary cells.
    pub count: usize,
    /// Normalized Doppler frequency of the interference.
    pub f_i: f64,
    /// Interference-to-noise ratio in dB; the amplitude is deterministic.
    pub inr_db: f64,
    /// Whether clutter-only (threshold) trials also carry the interference.
    pub in_h0: bool,
}

impl Default for InterferenceSpec {
    fn default() -> Self {
        Self {
            count: 2,
            f_i: 0.22,
            inr_db: 20.0,
            in_h0: true,
        }
    }
}

/// Full description of the simulated environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterScenario {
    /// Number of channels (matrix order).
    pub n: usize,
    pub cnr_db: f64,
    /// One-lag correlation coefficient, in (0, 1).
    pub rho: f64,
    /// Clutter normalized Doppler frequency.
    pub f_c: f64,
    /// Thermal noise power.
    pub sigma_n2: f64,
    /// Target normalized Doppler frequency.
    pub f_s: f64,
    pub interference: InterferenceSpec,
}

impl Default for ClutterScenario {
    fn default() -> Self {
        Self {
            n: 8,
            cnr_db: 25.0,
            rho: 0.95,
            f_c: 0.1,
            sigma_n2: 1.0,
            f_s: 0.2,
            interference: InterferenceSpec::default(),
        }
    }
}

impl ClutterScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(MigError::InvalidParameter(format!(
                "scenario dimension must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(MigError::InvalidParameter(format!(
                "one-lag correlation must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.sigma_n2 > 0.0) {
            return Err(MigError::InvalidParameter(
                "noise power must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Clutter power `σ_c² = σ_n² · 10^{CNR/10}`.
    pub fn sigma_c2(&self) -> f64 {
        self.sigma_n2 * 10f64.powf(self.cnr_db / 10.0)
    }

    /// Target amplitude magnitude for a given signal-to-clutter ratio:
    /// `|α|² = σ_c² · 10^{SCR/10}` with the unit-norm steering convention.
    pub fn target_magnitude(&self, scr_db: f64) -> f64 {
        (self.sigma_c2() * 10f64.powf(scr_db / 10.0)).sqrt()
    }

    /// Interference amplitude magnitude: `|β|² = σ_n² · 10^{INR/10}`.
    pub fn interference_magnitude(&self) -> f64 {
        (self.sigma_n2 * 10f64.powf(self.interference.inr_db / 10.0)).sqrt()
    }

    /// The known covariance `C = σ_c² C₀ + σ_n² I`, Hermitian Toeplitz HPD.
    pub fn clutter_cov(&self) -> Result<HpdMatrix> {
        self.validate()?;
        let sigma_c2 = self.sigma_c2();
        let n = self.n;
        let mut c = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let lag = i as f64 - j as f64;
                let mag = sigma_c2 * self.rho.powi((i as i64 - j as i64).unsigned_abs() as i32);
                let phase = 2.0 * std::f64::consts::PI * self.f_c * lag;
                c[(i, j)] = Complex64::from_polar(mag, phase);
                if i == j {
                    c[(i, j)] += Complex64::from(self.sigma_n2);
                }
            }
        }
        HpdMatrix::new(c)
    }
}

/// Clutter covariance of a scenario (free-function form of
/// [`ClutterScenario::clutter_cov`]).
pub fn clutter_cov(sc: &ClutterScenario) -> Result<HpdMatrix> {
    sc.clutter_cov()
}

/// Unit-variance circular complex Gaussian vector (real and imaginary parts
/// independent with variance one half).
fn standard_complex_gaussian(n: usize, rng: &mut impl Rng) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2,
            rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2,
        )
    })
}

/// One draw from the clutter distribution, optionally with a target
/// component `α p` and an interference component `β q`.
pub fn draw_vector(
    c: &HpdMatrix,
    target: Option<(Complex64, &SteeringVector)>,
    interference: Option<(Complex64, &SteeringVector)>,
    rng: &mut impl Rng,
) -> Result<ComplexVector> {
    let l = matlin::chol_hpd(c)?;
    let mut x = &l * standard_complex_gaussian(c.order(), rng);
    if let Some((alpha, p)) = target {
        if p.len() != c.order() {
            return Err(MigError::DimensionMismatch {
                context: "draw_vector target",
                left: p.len(),
                right: c.order(),
            });
        }
        x += p.vector().map(|e| e * alpha);
    }
    if let Some((beta, q)) = interference {
        if q.len() != c.order() {
            return Err(MigError::DimensionMismatch {
                context: "draw_vector interference",
                left: q.len(),
                right: c.order(),
            });
        }
        x += q.vector().map(|e| e * beta);
    }
    Ok(x)
}

/// Scenario with its covariance factor and steering vectors precomputed, for
/// the Monte Carlo hot path.
#[derive(Debug, Clone)]
pub struct ClutterSampler {
    scenario: ClutterScenario,
    covariance: HpdMatrix,
    chol: ComplexMatrix,
    target_steering: SteeringVector,
    interference_steering: SteeringVector,
}

impl ClutterSampler {
    pub fn new(scenario: &ClutterScenario) -> Result<Self> {
        let covariance = scenario.clutter_cov()?;
        let chol = matlin::chol_hpd(&covariance)?;
        Ok(Self {
            scenario: scenario.clone(),
            covariance,
            chol,
            target_steering: SteeringVector::new(scenario.n, scenario.f_s)?,
            interference_steering: SteeringVector::new(scenario.n, scenario.interference.f_i)?,
        })
    }

    pub fn scenario(&self) -> &ClutterScenario {
        &self.scenario
    }

    pub fn covariance(&self) -> &HpdMatrix {
        &self.covariance
    }

    pub fn target_steering(&self) -> &SteeringVector {
        &self.target_steering
    }

    fn draw_clutter(&self, rng: &mut impl Rng) -> ComplexVector {
        &self.chol * standard_complex_gaussian(self.scenario.n, rng)
    }

    /// Clutter draw with the deterministic-amplitude interference added.
    fn draw_interfered(&self, rng: &mut impl Rng) -> ComplexVector {
        let beta = Complex64::from(self.scenario.interference_magnitude());
        self.draw_clutter(rng) + self.interference_steering.vector().map(|e| e * beta)
    }

    /// Cell-under-test draw; a target at `scr_db` is injected with a
    /// uniformly random phase.
    pub fn draw_cut(&self, target_scr_db: Option<f64>, rng: &mut impl Rng) -> ComplexVector {
        match target_scr_db {
            None => self.draw_clutter(rng),
            Some(scr_db) => {
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let alpha = Complex64::from_polar(self.scenario.target_magnitude(scr_db), phase);
                self.draw_clutter(rng) + self.target_steering.vector().map(|e| e * alpha)
            }
        }
    }

    /// Secondary cell draw; the leading `interference.count` cells are
    /// contaminated when `with_interference` is set.
    pub fn draw_secondary(
        &self,
        cell: usize,
        with_interference: bool,
        rng: &mut impl Rng,
    ) -> ComplexVector {
        if with_interference && cell < self.scenario.interference.count {
            self.draw_interfered(rng)
        } else {
            self.draw_clutter(rng)
        }
    }
}

/// Raw vectors for one detection trial: the cell under test plus `K`
/// secondary cells, drawn in that fixed order from the trial's substream.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub cut: ComplexVector,
    pub secondary: Vec<ComplexVector>,
}

/// Draws a complete trial. `target_scr_db = None` is the clutter-only
/// hypothesis; interference presence follows the flag.
pub fn draw_trial(
    sampler: &ClutterSampler,
    k: usize,
    target_scr_db: Option<f64>,
    with_interference: bool,
    rng: &mut impl Rng,
) -> TrialData {
    let cut = sampler.draw_cut(target_scr_db, rng);
    let secondary = (0..k)
        .map(|cell| sampler.draw_secondary(cell, with_interference, rng))
        .collect();
    TrialData { cut, secondary }
}

/// Unsupervised training data: clutter-only observations and observations
/// carrying a target at the given SCR.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub clutter_only: HpdSet,
    pub with_target: HpdSet,
    pub scr_db: f64,
}

impl TrainingSet {
    /// All `J + K` observations, clutter-only first.
    pub fn combined(&self) -> Result<HpdSet> {
        let mut all = self.clutter_only.matrices().to_vec();
        all.extend_from_slice(self.with_target.matrices());
        HpdSet::new(all)
    }
}

/// Generates `j` clutter-only and `k` target-bearing HPD observations,
/// deterministic under `seed`.
pub fn gen_training(
    sc: &ClutterScenario,
    j: usize,
    k: usize,
    scr_db: f64,
    seed: u64,
) -> Result<TrainingSet> {
    if j == 0 || k == 0 {
        return Err(MigError::InvalidParameter(
            "training subset sizes must be positive".into(),
        ));
    }
    let sampler = ClutterSampler::new(sc)?;

    let clutter: Vec<_> = exec::map_range(j, |i| {
        let mut rng = substream_rng(seed, streams::TRAINING_CLUTTER, i as u64);
        build_hpd_observation(&sampler.draw_cut(None, &mut rng))
    });
    let target: Vec<_> = exec::map_range(k, |i| {
        let mut rng = substream_rng(seed, streams::TRAINING_TARGET, i as u64);
        build_hpd_observation(&sampler.draw_cut(Some(scr_db), &mut rng))
    });

    Ok(TrainingSet {
        clutter_only: HpdSet::new(clutter.into_iter().collect::<Result<_>>()?)?,
        with_target: HpdSet::new(target.into_iter().collect::<Result<_>>()?)?,
        scr_db,
    })
}
