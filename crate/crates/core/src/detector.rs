//! MIG detection pipeline: observations, clutter-covariance estimation, test
//! statistics, CFAR thresholding and detection-probability estimation.
//!
//! Each received vector becomes a diagonally loaded HPD observation
//! `R = r̃ r̃^H + tr(r̃ r̃^H) I` built from its lag correlation estimate. The
//! clutter covariance is the geometric mean of the secondary observations,
//! and the test compares the cell under test against it:
//! `d²(f_W(R_G), f_W(R_D)) ≷ γ`, with `f_W` the optional learned projection.
//! The adaptive matched filter (in its standard two-step GLRT form, with a
//! diagonally loaded sample covariance when secondary data is scarce) serves
//! as the baseline, plus its known-covariance variant.
//!
//! Thresholds are calibrated by Monte Carlo: clutter-only statistics are
//! sorted descending and `γ` is the value at rank `⌈pfa · n⌉`, the smallest
//! threshold whose exceedance fraction is at most `pfa`. A `DetectorBank`
//! evaluates many detectors on the same trials so per-measure covariance
//! means are shared.

use num_complex::Complex64;

use crate::error::{MigError, Result};
use crate::exec;
use crate::geometry::{self, GeometricMeasure};
use crate::matlin::{ComplexMatrix, ComplexVector, HpdMatrix};
use crate::means::{self, HpdSet, MeanConfig};
use crate::projection::{compress, StiefelMatrix};
use crate::scenario::{
    draw_trial, streams, substream_rng, ClutterSampler, ClutterScenario, TrialData,
};

/// Unit-norm steering vector `p_k = (1/√N) exp(−i 2π f_d k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    entries: ComplexVector,
    doppler: f64,
}

impl SteeringVector {
    pub fn new(n: usize, f_d: f64) -> Result<Self> {
        if n < 1 {
            return Err(MigError::InvalidParameter(
                "steering vector needs at least one channel".into(),
            ));
        }
        let scale = 1.0 / (n as f64).sqrt();
        let entries = ComplexVector::from_fn(n, |k, _| {
            Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * f_d * k as f64)
        });
        Ok(Self {
            entries,
            doppler: f_d,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doppler(&self) -> f64 {
        self.doppler
    }

    pub fn vector(&self) -> &ComplexVector {
        &self.entries
    }
}

/// Diagonally loaded HPD observation from one received vector: the lag
/// estimate `r̃_l = (1/N) Σ_i x_i conj(x_{i+l})` forms
/// `R = r̃ r̃^H + tr(r̃ r̃^H) I`, a rank-one update of a positively scaled
/// identity, hence HPD.
pub fn build_hpd_observation(x: &ComplexVector) -> Result<HpdMatrix> {
    let n = x.len();
    if n == 0 {
        return Err(MigError::DegenerateInput("empty observation vector"));
    }
    if x.norm_squared() == 0.0 {
        return Err(MigError::DegenerateInput(
            "all-zero observation vector has no diagonal loading",
        ));
    }
    let lags = ComplexVector::from_fn(n, |l, _| {
        let mut acc = Complex64::from(0.0);
        for i in 0..n - l {
            acc += x[i] * x[i + l].conj();
        }
        acc / Complex64::from(n as f64)
    });
    let power = lags.norm_squared(); // tr(r̃ r̃^H)
    let mut r = &lags * lags.adjoint();
    for i in 0..n {
        r[(i, i)] += Complex64::from(power);
        r[(i, i)].im = 0.0;
    }
    HpdMatrix::new(r)
}

/// Clutter covariance matrix estimate: the geometric mean of the secondary
/// HPD observations.
pub fn ccm_estimate(
    measure: GeometricMeasure,
    secondary: &HpdSet,
    cfg: &MeanConfig,
) -> Result<HpdMatrix> {
    means::geometric_mean(measure, secondary, cfg)
}

/// A MIG detector: measure, optional learned projection, threshold.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub id: String,
    pub measure: GeometricMeasure,
    pub projection: Option<StiefelMatrix>,
    pub threshold: f64,
}

impl DetectorSpec {
    pub fn new(
        id: impl Into<String>,
        measure: GeometricMeasure,
        projection: Option<StiefelMatrix>,
    ) -> Self {
        Self {
            id: id.into(),
            measure,
            projection,
            threshold: f64::INFINITY,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Mig {
            measure: self.measure,
            projection: self.projection.clone(),
        }
    }
}

/// Squared-measure test statistic `d²(f_W(R_G), f_W(R_D))`; without a
/// projection the distance is taken in the ambient manifold.
pub fn mig_statistic(spec: &DetectorSpec, r_g: &HpdMatrix, r_d: &HpdMatrix) -> Result<f64> {
    mig_statistic_parts(spec.measure, spec.projection.as_ref(), r_g, r_d)
}

fn mig_statistic_parts(
    measure: GeometricMeasure,
    projection: Option<&StiefelMatrix>,
    r_g: &HpdMatrix,
    r_d: &HpdMatrix,
) -> Result<f64> {
    if r_g.order() != r_d.order() {
        return Err(MigError::DimensionMismatch {
            context: "mig_statistic",
            left: r_g.order(),
            right: r_d.order(),
        });
    }
    match projection {
        None => geometry::sq_dist(measure, r_g, r_d),
        Some(w) => {
            let a = compress(w, r_g)?;
            let b = compress(w, r_d)?;
            geometry::sq_dist(measure, &a, &b)
        }
    }
}

/// Adaptive matched filter statistic `|p^H S⁻¹ x|² / (p^H S⁻¹ p)` with the
/// sample covariance `S = (1/K) Σ x_k x_k^H`. When `K < 2N` the sample
/// covariance is loaded with `1e-6 · tr(S)/N · I` so the filter stays
/// runnable down to `K = M`.
pub fn amf_statistic(
    x: &ComplexVector,
    secondary: &[ComplexVector],
    p: &SteeringVector,
) -> Result<f64> {
    let n = x.len();
    if secondary.is_empty() {
        return Err(MigError::EmptySet);
    }
    for xk in secondary {
        if xk.len() != n {
            return Err(MigError::DimensionMismatch {
                context: "amf_statistic secondary",
                left: xk.len(),
                right: n,
            });
        }
    }
    if p.len() != n {
        return Err(MigError::DimensionMismatch {
            context: "amf_statistic steering",
            left: p.len(),
            right: n,
        });
    }
    let k = secondary.len();
    let mut s = ComplexMatrix::zeros(n, n);
    for xk in secondary {
        s += xk * xk.adjoint();
    }
    s = s.scale(1.0 / k as f64);
    if k < 2 * n {
        let load = 1e-6 * s.trace().re / n as f64;
        for i in 0..n {
            s[(i, i)] += Complex64::from(load);
        }
    }
    amf_core(x, &s, p)
}

/// The matched filter evaluated with a known covariance in place of the
/// sample estimate (the clairvoyant benchmark).
pub fn amf_statistic_known_cov(
    x: &ComplexVector,
    cov: &HpdMatrix,
    p: &SteeringVector,
) -> Result<f64> {
    if cov.order() != x.len() || p.len() != x.len() {
        return Err(MigError::DimensionMismatch {
            context: "amf_statistic_known_cov",
            left: cov.order(),
            right: x.len(),
        });
    }
    amf_core(x, cov.as_matrix(), p)
}

fn amf_core(x: &ComplexVector, s: &ComplexMatrix, p: &SteeringVector) -> Result<f64> {
    let chol = crate::matlin::cholesky_pd(s).ok_or(MigError::CholeskyFailed)?;
    let s_inv_x = chol.solve(x);
    let s_inv_p = chol.solve(p.vector());
    let numerator = p.vector().dotc(&s_inv_x).norm_sqr();
    let denominator = p.vector().dotc(&s_inv_p).re;
    Ok(numerator / denominator)
}

/// One detector in a bank.
#[derive(Debug, Clone)]
pub enum DetectorKind {
    Mig {
        measure: GeometricMeasure,
        projection: Option<StiefelMatrix>,
    },
    Amf,
    AmfKnownCov,
}

#[derive(Debug, Clone)]
pub struct BankEntry {
    pub id: String,
    pub kind: DetectorKind,
}

/// Detectors evaluated together on shared trials; MIG entries with the same
/// measure share one covariance-mean solve per trial.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    entries: Vec<BankEntry>,
    mean_cfg: MeanConfig,
}

impl DetectorBank {
    pub fn new(mean_cfg: MeanConfig) -> Self {
        Self {
            entries: Vec::new(),
            mean_cfg,
        }
    }

    pub fn push(&mut self, id: impl Into<String>, kind: DetectorKind) {
        self.entries.push(BankEntry {
            id: id.into(),
            kind,
        });
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All statistics for one trial, in entry order.
    pub fn statistics(&self, sampler: &ClutterSampler, trial: &TrialData) -> Result<Vec<f64>> {
        let r_d = build_hpd_observation(&trial.cut)?;
        let secondaries: Vec<HpdMatrix> = trial
            .secondary
            .iter()
            .map(build_hpd_observation)
            .collect::<Result<_>>()?;
        let secondaries = HpdSet::new(secondaries)?;

        let mut ccm: [Option<HpdMatrix>; 4] = [None, None, None, None];
        let mut out = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let value = match &entry.kind {
                DetectorKind::Mig {
                    measure,
                    projection,
                } => {
                    let slot = measure_slot(*measure);
                    if ccm[slot].is_none() {
                        ccm[slot] = Some(ccm_estimate(*measure, &secondaries, &self.mean_cfg)?);
                    }
                    let r_g = ccm[slot].as_ref().expect("just filled");
                    mig_statistic_parts(*measure, projection.as_ref(), r_g, &r_d)?
                }
                DetectorKind::Amf => {
                    amf_statistic(&trial.cut, &trial.secondary, sampler.target_steering())?
                }
                DetectorKind::AmfKnownCov => amf_statistic_known_cov(
                    &trial.cut,
                    sampler.covariance(),
                    sampler.target_steering(),
                )?,
            };
            out.push(value);
        }
        Ok(out)
    }
}

fn measure_slot(m: GeometricMeasure) -> usize {
    match m {
        GeometricMeasure::Airm => 0,
        GeometricMeasure::Lem => 1,
        GeometricMeasure::Jbld => 2,
        GeometricMeasure::Skld => 3,
    }
}

/// Runs `n_trials` independent trials and returns the statistics grouped per
/// detector (`result[d][t]`). Trial `t` draws from substream
/// `(seed, stream, t)`, so the output does not depend on the executor.
#[allow(clippy::too_many_arguments)]
pub fn collect_statistics(
    bank: &DetectorBank,
    sampler: &ClutterSampler,
    k: usize,
    target_scr_db: Option<f64>,
    with_interference: bool,
    n_trials: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    if bank.is_empty() {
        return Err(MigError::EmptySet);
    }
    if k == 0 {
        return Err(MigError::InvalidParameter(
            "at least one secondary cell is required".into(),
        ));
    }
    let per_trial = exec::map_range(n_trials, |t| {
        let mut rng = substream_rng(seed, stream, t as u64);
        let trial = draw_trial(sampler, k, target_scr_db, with_interference, &mut rng);
        bank.statistics(sampler, &trial)
    });
    let mut grouped = vec![Vec::with_capacity(n_trials); bank.len()];
    for row in per_trial {
        for (d, v) in row?.into_iter().enumerate() {
            grouped[d].push(v);
        }
    }
    Ok(grouped)
}

/// CFAR threshold from clutter-only statistics: sort descending and take the
/// value at rank `⌈pfa · n⌉` (1-based) — the smallest `γ` whose exceedance
/// fraction is at most `pfa`.
pub fn threshold_at_pfa(statistics: &[f64], pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(MigError::InvalidParameter(format!(
            "pfa must lie in (0, 1), got {pfa}"
        )));
    }
    if statistics.is_empty() {
        return Err(MigError::EmptySet);
    }
    if statistics.iter().any(|v| v.is_nan()) {
        return Err(MigError::DegenerateInput("NaN statistic"));
    }
    let mut sorted = statistics.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let rank = (pfa * statistics.len() as f64).ceil() as usize;
    let rank = rank.clamp(1, statistics.len());
    Ok(sorted[rank - 1])
}

fn check_threshold_trials(pfa: f64, n_trials: usize) -> Result<()> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(MigError::InvalidParameter(format!(
            "pfa must lie in (0, 1), got {pfa}"
        )));
    }
    if (n_trials as f64) < 10.0 / pfa {
        return Err(MigError::InvalidParameter(format!(
            "{n_trials} threshold trials is too few for pfa = {pfa} (need at least {})",
            (10.0 / pfa).ceil()
        )));
    }
    Ok(())
}

fn h0_interference(sc: &ClutterScenario) -> bool {
    sc.interference.count > 0 && sc.interference.in_h0
}

fn h1_interference(sc: &ClutterScenario) -> bool {
    sc.interference.count > 0
}

/// Monte Carlo threshold for a single MIG detector at the target false-alarm
/// probability.
pub fn estimate_threshold(
    spec: &DetectorSpec,
    scenario: &ClutterScenario,
    k: usize,
    mean_cfg: &MeanConfig,
    pfa: f64,
    n_trials: usize,
    seed: u64,
) -> Result<f64> {
    check_threshold_trials(pfa, n_trials)?;
    let mut bank = DetectorBank::new(mean_cfg.clone());
    bank.push(spec.id.clone(), spec.kind());
    let sampler = ClutterSampler::new(scenario)?;
    let stats = collect_statistics(
        &bank,
        &sampler,
        k,
        None,
        h0_interference(scenario),
        n_trials,
        seed,
        streams::THRESHOLD,
    )?;
    threshold_at_pfa(&stats[0], pfa)
}

/// Monte Carlo detection probability of a single MIG detector at the given
/// SCR, using the threshold stored in the spec.
pub fn estimate_pd(
    spec: &DetectorSpec,
    scenario: &ClutterScenario,
    k: usize,
    mean_cfg: &MeanConfig,
    scr_db: f64,
    n_trials: usize,
    seed: u64,
) -> Result<f64> {
    if n_trials < 100 {
        return Err(MigError::InvalidParameter(format!(
            "detection-probability estimation needs at least 100 trials, got {n_trials}"
        )));
    }
    if spec.threshold.is_nan() {
        return Err(MigError::InvalidParameter(
            "detector threshold is not set".into(),
        ));
    }
    let mut bank = DetectorBank::new(mean_cfg.clone());
    bank.push(spec.id.clone(), spec.kind());
    let sampler = ClutterSampler::new(scenario)?;
    let stats = collect_statistics(
        &bank,
        &sampler,
        k,
        Some(scr_db),
        h1_interference(scenario),
        n_trials,
        seed,
        streams::PD_BASE,
    )?;
    Ok(exceedance_fraction(&stats[0], spec.threshold))
}

/// Fraction of statistics strictly above the threshold.
pub fn exceedance_fraction(statistics: &[f64], threshold: f64) -> f64 {
    if statistics.is_empty() {
        return 0.0;
    }
    let hits = statistics.iter().filter(|&&v| v > threshold).count();
    hits as f64 / statistics.len() as f64
}

/// Thresholds for every bank entry from one shared set of clutter-only
/// trials.
pub fn bank_thresholds(
    bank: &DetectorBank,
    sampler: &ClutterSampler,
    k: usize,
    pfa: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_threshold_trials(pfa, n_trials)?;
    let stats = collect_statistics(
        bank,
        sampler,
        k,
        None,
        h0_interference(sampler.scenario()),
        n_trials,
        seed,
        streams::THRESHOLD,
    )?;
    stats.iter().map(|s| threshold_at_pfa(s, pfa)).collect()
}

/// Empirical false-alarm probabilities on an independent clutter-only run.
pub fn bank_empirical_pfa(
    bank: &DetectorBank,
    sampler: &ClutterSampler,
    k: usize,
    thresholds: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let stats = collect_statistics(
        bank,
        sampler,
        k,
        None,
        h0_interference(sampler.scenario()),
        n_trials,
        seed,
        streams::PFA_CHECK,
    )?;
    Ok(stats
        .iter()
        .zip(thresholds)
        .map(|(s, &g)| exceedance_fraction(s, g))
        .collect())
}

/// Detection probabilities for every bank entry at one SCR grid point.
#[allow(clippy::too_many_arguments)]
pub fn bank_pd(
    bank: &DetectorBank,
    sampler: &ClutterSampler,
    k: usize,
    thresholds: &[f64],
    scr_db: f64,
    n_trials: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    let stats = collect_statistics(
        bank,
        sampler,
        k,
        Some(scr_db),
        h1_interference(sampler.scenario()),
        n_trials,
        seed,
        stream,
    )?;
    Ok(stats
        .iter()
        .zip(thresholds)
        .map(|(s, &g)| exceedance_fraction(s, g))
        .collect())
}
