//! Signal model: cisoids, ensembles, noise, synthesis and ground truth.

use std::cmp::Ordering;
use std::f64::consts::{LN_10, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase - TAU * ((phase + PI) / TAU).floor();
    // floor() rounding can land exactly on +π
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// One complex exponential `a·exp(j(ωt + φ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCisoid")]
pub struct Cisoid {
    /// Linear amplitude, strictly positive.
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
    /// Phase at `t = 0` in radians, wrapped into `[-π, π)`.
    pub phase: f64,
}

#[derive(Deserialize)]
struct RawCisoid {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

impl TryFrom<RawCisoid> for Cisoid {
    type Error = Error;

    fn try_from(raw: RawCisoid) -> Result<Self> {
        Cisoid::new(raw.amplitude, raw.omega, raw.phase)
    }
}

impl Cisoid {
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidInput(format!(
                "amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !omega.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidInput("omega and phase must be finite".into()));
        }
        Ok(Self {
            amplitude,
            omega,
            phase: wrap_phase(phase),
        })
    }

    /// `a²`
    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// The ground-truth component list of a signal together with its sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct CisoidEnsemble {
    components: Vec<Cisoid>,
    ts: f64,
}

#[derive(Deserialize)]
struct RawEnsemble {
    components: Vec<Cisoid>,
    ts: f64,
}

impl TryFrom<RawEnsemble> for CisoidEnsemble {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<Self> {
        CisoidEnsemble::new(raw.components, raw.ts)
    }
}

impl CisoidEnsemble {
    /// Validates `K ≥ 1`, `ts > 0` and the Nyquist guard `|ω·ts| < π`.
    pub fn new(components: Vec<Cisoid>, ts: f64) -> Result<Self> {
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sampling interval must be positive, got {ts}"
            )));
        }
        if components.is_empty() {
            return Err(Error::InvalidInput(
                "ensemble needs at least one component".into(),
            ));
        }
        if let Some(c) = components.iter().find(|c| (c.omega * ts).abs() >= PI) {
            return Err(Error::InvalidInput(format!(
                "omega {} violates the Nyquist limit π/ts = {}",
                c.omega,
                PI / ts
            )));
        }
        Ok(Self { components, ts })
    }

    pub fn components(&self) -> &[Cisoid] {
        &self.components
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Components in canonical order: ascending ω, ties broken by amplitude
    /// then phase. All sums over components run in this order so that a
    /// permuted ensemble produces bitwise-identical results.
    pub fn canonical(&self) -> Vec<Cisoid> {
        let mut sorted = self.components.clone();
        sorted.sort_by(canonical_cmp);
        sorted
    }

    /// Returns a copy with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| Cisoid::new(c.amplitude * factor, c.omega, c.phase))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components, self.ts)
    }

    /// Minimum pairwise `|ωᵢ − ωⱼ|·ts·n`; `None` for a single component.
    pub fn separation_metric(&self, n: usize) -> Option<f64> {
        let sorted = self.canonical();
        sorted
            .windows(2)
            .map(|w| (w[1].omega - w[0].omega).abs() * self.ts * n as f64)
            .min_by(f64::total_cmp)
    }
}

fn canonical_cmp(a: &Cisoid, b: &Cisoid) -> Ordering {
    a.omega
        .total_cmp(&b.omega)
        .then(a.amplitude.total_cmp(&b.amplitude))
        .then(a.phase.total_cmp(&b.phase))
}

/// The sum-parameter vector `(Σ, Ω, Re Φ, Im Φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SumParams {
    /// `Σ a_k`
    pub sigma_sum: f64,
    /// `Σ a_k² ω_k`, in rad/s times power units.
    pub omega_sum: f64,
    /// `Σ a_k² exp(jφ_k)`, serialized as `[re, im]`.
    pub phi_sum: Complex64,
}

impl SumParams {
    pub const PARAMETER_NAMES: [&'static str; 4] = ["sigma", "omega", "re_phi", "im_phi"];

    /// Flattened real vector in the order `(Σ, Ω, Re Φ, Im Φ)`.
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.sigma_sum,
            self.omega_sum,
            self.phi_sum.re,
            self.phi_sum.im,
        ]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            sigma_sum: v[0],
            omega_sum: v[1],
            phi_sum: Complex64::new(v[2], v[3]),
        }
    }

    /// Assembles the sum-parameters from a list of `(a, ω, φ)` triples, summed in
    /// the given order.
    pub fn from_components<I>(components: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        components
            .into_iter()
            .fold(SumParams::default(), |acc, (a, omega, phase)| {
                let p = a * a;
                SumParams {
                    sigma_sum: acc.sigma_sum + a,
                    omega_sum: acc.omega_sum + p * omega,
                    phi_sum: acc.phi_sum + Complex64::from_polar(p, phase),
                }
            })
    }
}

/// Exact `(Σ, Ω, Φ)` of an ensemble, summed in canonical order.
pub fn ground_truth_sum_params(ensemble: &CisoidEnsemble) -> SumParams {
    SumParams::from_components(
        ensemble
            .canonical()
            .iter()
            .map(|c| (c.amplitude, c.omega, c.phase)),
    )
}

/// `P_sig = Σ a_k²`.
pub fn total_power(ensemble: &CisoidEnsemble) -> f64 {
    ensemble.canonical().iter().map(Cisoid::power).sum()
}

/// Circular complex white Gaussian noise of total variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise variance must be nonnegative, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn noiseless() -> Self {
        Self { sigma2: 0.0 }
    }
}

/// A uniformly sampled complex observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<Complex64>,
    ts: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<Complex64>, ts: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: samples.len(),
            });
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sampling interval must be positive, got {ts}"
            )));
        }
        Ok(Self { samples, ts })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `‖x‖² / N`
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

/// Draws `n` samples of `CN(0, sigma2)` noise from a ChaCha stream keyed by `seed`.
pub fn noise_samples(n: usize, sigma2: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (sigma2 / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect()
}

/// Samples `x(n) = Σ a_k exp(j(ω_k n ts + φ_k)) + w(n)` for `n = 0..N-1`.
///
/// Components are accumulated in canonical order, so the noiseless part does
/// not depend on component order or on `seed`.
pub fn synthesize(
    ensemble: &CisoidEnsemble,
    n: usize,
    noise: NoiseModel,
    seed: u64,
) -> Result<SampledSignal> {
    if n < 2 {
        return Err(Error::TooShort { min: 2, got: n });
    }
    let ts = ensemble.ts();
    let components = ensemble.canonical();
    let mut samples: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 * ts;
            components.iter().fold(Complex64::new(0.0, 0.0), |acc, c| {
                acc + Complex64::from_polar(c.amplitude, c.omega * t + c.phase)
            })
        })
        .collect();
    if noise.sigma2 > 0.0 {
        for (s, w) in samples.iter_mut().zip(noise_samples(n, noise.sigma2, seed)) {
            *s += w;
        }
    }
    SampledSignal::new(samples, ts)
}

/// `10·log10(P_sig / σ²)`; `+∞` for a noiseless model.
pub fn snr_db(ensemble: &CisoidEnsemble, noise: NoiseModel) -> f64 {
    if noise.sigma2 <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (total_power(ensemble) / noise.sigma2).log10()
}

fn default_ts() -> f64 {
    1.0
}

/// Parameters of a random multi-tone scenario.
///
/// Amplitudes are log-normal, `a = exp(s·z)` with `z ~ N(0,1)` and
/// `s = DR·ln(10)/80` so that the ±2 standard deviation spread covers the
/// requested dynamic range `DR` in dB (40 dB gives `s = ln(10)/2`). The
/// ensemble is then rescaled so that `P_sig = 10^(snr_db/10)`, i.e. the
/// SNR is realized against the reference noise variance of 1 returned by
/// [`ScenarioConfig::noise`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub k: usize,
    /// `(low, high)` in cycles per sample, `0 ≤ low < high ≤ 0.5`.
    pub freq_range: (f64, f64),
    pub amp_dynamic_range_db: f64,
    pub n: usize,
    pub snr_db: f64,
    /// Minimum normalized gap `|ωᵢ − ωⱼ|·ts/(2π)` between any two tones.
    #[serde(default)]
    pub min_separation: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_ts")]
    pub ts: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k: 12,
            freq_range: (0.05, 0.45),
            amp_dynamic_range_db: 40.0,
            n: 2000,
            snr_db: 20.0,
            min_separation: None,
            seed: 0,
            ts: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let (low, high) = self.freq_range;
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(0.0 <= low && low < high && high <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "frequency range must satisfy 0 ≤ low < high ≤ 0.5, got ({low}, {high})"
            )));
        }
        if !(self.amp_dynamic_range_db >= 0.0) || !self.snr_db.is_finite() {
            return Err(Error::InvalidInput(
                "dynamic range must be ≥ 0 dB and SNR finite".into(),
            ));
        }
        if !(self.ts > 0.0) {
            return Err(Error::InvalidInput("ts must be positive".into()));
        }
        if let Some(gap) = self.min_separation {
            if !(gap >= 0.0) {
                return Err(Error::InvalidInput("min_separation must be ≥ 0".into()));
            }
            if (high - low) / self.k as f64 <= gap {
                return Err(Error::Infeasible(format!(
                    "{} tones with gap {gap} do not fit in ({low}, {high})",
                    self.k
                )));
            }
        }
        Ok(())
    }

    /// Log-normal spread parameter `s` for the configured dynamic range.
    pub fn log_amplitude_spread(&self) -> f64 {
        self.amp_dynamic_range_db * LN_10 / 80.0
    }

    /// Reference noise model against which `snr_db` is realized.
    pub fn noise(&self) -> NoiseModel {
        NoiseModel { sigma2: 1.0 }
    }
}

/// `k` draws of `exp(spread·z)`, `z ~ N(0, 1)` (median amplitude 1).
fn lognormal_amplitudes<R: Rng>(rng: &mut R, k: usize, spread: f64) -> Vec<f64> {
    (0..k)
        .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect()
}

/// Draws a random ensemble: uniform frequencies (optionally with a minimum
/// gap), uniform phases on `[-π, π)`, log-normal amplitudes rescaled to the
/// requested SNR. Deterministic in `config.seed`.
///
/// The minimum gap is enforced exactly by the spacing transform: draw `K`
/// uniform points on a band shortened by `(K−1)·gap`, sort, and push the
/// `i`-th point up by `i·gap`. This samples the uniform distribution
/// conditioned on the gap constraint without rejection.
pub fn random_ensemble(config: &ScenarioConfig) -> Result<CisoidEnsemble> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (low, high) = config.freq_range;
    let k = config.k;
    let gap = config.min_separation.unwrap_or(0.0);
    let free = (high - low) - (k - 1) as f64 * gap;

    let mut cycles: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * free).collect();
    cycles.sort_by(f64::total_cmp);
    let omegas: Vec<f64> = cycles
        .iter()
        .enumerate()
        .map(|(i, u)| TAU * (low + u + i as f64 * gap) / config.ts)
        .collect();

    let phases: Vec<f64> = (0..k).map(|_| -PI + TAU * rng.random::<f64>()).collect();

    let amps = lognormal_amplitudes(&mut rng, k, config.log_amplitude_spread());
    let power: f64 = amps.iter().map(|a| a * a).sum();
    let target = config.noise().sigma2 * 10f64.powf(config.snr_db / 10.0);
    let scale = (target / power).sqrt();

    let components = omegas
        .into_iter()
        .zip(phases)
        .zip(amps)
        .map(|((omega, phase), a)| Cisoid::new(a * scale, omega, phase))
        .collect::<Result<Vec<_>>>()?;
    CisoidEnsemble::new(components, config.ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ens(parts: &[(f64, f64, f64)], ts: f64) -> CisoidEnsemble {
        CisoidEnsemble::new(
            parts
                .iter()
                .map(|&(a, w, p)| Cisoid::new(a, w, p).unwrap())
                .collect(),
            ts,
        )
        .unwrap()
    }

    #[test]
    fn ground_truth_single_component() {
        let gt = ground_truth_sum_params(&ens(&[(1.0, 0.3, 0.0)], 1.0));
        assert_eq!(gt.sigma_sum, 1.0);
        assert_eq!(gt.omega_sum, 0.3);
        assert_eq!(gt.phi_sum, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ground_truth_two_components() {
        for ts in [1.0, 1e-3] {
            let gt = ground_truth_sum_params(&ens(&[(1.0, 0.1, 0.0), (2.0, 0.2, PI / 2.0)], ts));
            assert_eq!(gt.sigma_sum, 3.0);
            assert!((gt.omega_sum - 0.9).abs() < 1e-15);
            assert!((gt.phi_sum - Complex64::new(1.0, 4.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn ground_truth_permuted_is_bitwise_identical() {
        let a = ens(&[(1.0, 0.1, 0.0), (2.0, 0.2, PI / 2.0)], 1.0);
        let b = ens(&[(2.0, 0.2, PI / 2.0), (1.0, 0.1, 0.0)], 1.0);
        assert_eq!(ground_truth_sum_params(&a), ground_truth_sum_params(&b));
    }

    #[test]
    fn total_power_examples() {
        assert_eq!(
            total_power(&ens(&[(1.0, 0.1, 0.0), (2.0, 0.2, 0.0)], 1.0)),
            5.0
        );
        assert_eq!(total_power(&ens(&[(1.0, 0.1, 0.0)], 1.0)), 1.0);
        let p = total_power(&ens(
            &[(0.1, 0.1, 0.0), (0.1, 0.2, 0.0), (0.1, 0.3, 0.0)],
            1.0,
        ));
        assert!((p - 0.03).abs() < 1e-15);
    }

    #[test]
    fn phase_wraps_into_half_open_interval() {
        assert_eq!(Cisoid::new(1.0, 0.0, PI).unwrap().phase, -PI);
        assert!((Cisoid::new(1.0, 0.0, 3.0 * PI / 2.0).unwrap().phase + PI / 2.0).abs() < 1e-15);
        assert_eq!(Cisoid::new(1.0, 0.0, -PI).unwrap().phase, -PI);
    }

    #[test]
    fn rejects_invalid_components() {
        assert!(Cisoid::new(0.0, 0.1, 0.0).is_err());
        assert!(Cisoid::new(-1.0, 0.1, 0.0).is_err());
        assert!(CisoidEnsemble::new(vec![], 1.0).is_err());
        let c = Cisoid::new(1.0, PI, 0.0).unwrap();
        assert!(CisoidEnsemble::new(vec![c], 1.0).is_err());
        assert!(CisoidEnsemble::new(vec![c], 0.5).is_ok());
    }

    #[test]
    fn synth_dc_tone() {
        let s = synthesize(&ens(&[(1.0, 0.0, 0.0)], 1.0), 4, NoiseModel::noiseless(), 7).unwrap();
        assert!(s.samples().iter().all(|&x| x == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn synth_quarter_cycle() {
        let ts = 0.25;
        let s = synthesize(
            &ens(&[(1.0, PI / (2.0 * ts), 0.0)], ts),
            4,
            NoiseModel::noiseless(),
            0,
        )
        .unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (x, e) in s.samples().iter().zip(expected) {
            assert!((x - e).norm() < 1e-15);
        }
    }

    #[test]
    fn synth_rejects_short() {
        assert!(synthesize(&ens(&[(1.0, 0.0, 0.0)], 1.0), 1, NoiseModel::noiseless(), 0).is_err());
    }

    #[test]
    fn noise_generator_statistics() {
        let w = noise_samples(100_000, 1.0, 42);
        let n = w.len() as f64;
        let mean = w.iter().sum::<Complex64>() / n;
        let var = w.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        let re_power = w.iter().map(|x| x.re * x.re).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        assert!((re_power - 0.5).abs() < 0.01, "real-part power {re_power}");
    }

    #[test]
    fn snr_examples() {
        let e = ens(&[(1.0, 0.1, 0.0), (2.0, 0.2, 0.0)], 1.0);
        assert!((snr_db(&e, NoiseModel::new(0.5).unwrap()) - 10.0).abs() < 1e-12);
        let one = ens(&[(1.0, 0.1, 0.0)], 1.0);
        assert_eq!(snr_db(&one, NoiseModel::new(1.0).unwrap()), 0.0);
        assert!((snr_db(&one, NoiseModel::new(100.0).unwrap()) + 20.0).abs() < 1e-12);
        assert_eq!(snr_db(&one, NoiseModel::noiseless()), f64::INFINITY);
    }

    #[test]
    fn random_ensemble_is_reproducible() {
        let cfg = ScenarioConfig {
            seed: 99,
            ..ScenarioConfig::default()
        };
        let a = random_ensemble(&cfg).unwrap();
        let b = random_ensemble(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        let p = total_power(&a);
        assert!((p - 100.0).abs() < 1e-9);
        for c in a.components() {
            let f = c.omega / TAU;
            assert!(f > 0.05 && f < 0.45);
        }
    }

    #[test]
    fn random_ensemble_single_component() {
        let cfg = ScenarioConfig {
            k: 1,
            snr_db: 0.0,
            ..ScenarioConfig::default()
        };
        let e = random_ensemble(&cfg).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e.components()[0].amplitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_ensemble_honours_min_separation() {
        let n = 125;
        let cfg = ScenarioConfig {
            n,
            min_separation: Some(4.0 / n as f64),
            ..ScenarioConfig::default()
        };
        for seed in 0..50 {
            let e = random_ensemble(&ScenarioConfig {
                seed,
                ..cfg.clone()
            })
            .unwrap();
            let gap = e.separation_metric(1).unwrap() / TAU;
            assert!(gap >= 4.0 / n as f64 - 1e-12, "seed {seed}: gap {gap}");
        }
    }

    #[test]
    fn random_ensemble_rejects_infeasible_gap() {
        let cfg = ScenarioConfig {
            min_separation: Some(0.04),
            ..ScenarioConfig::default()
        };
        assert!(matches!(random_ensemble(&cfg), Err(Error::Infeasible(_))));
    }

    // 10⁴ log-normal draws: the 97.5th / 2.5th percentile ratio is the ±1.96σ
    // spread, 20·log10(exp(3.92·s)) = 39.2 dB for s = ln(10)/2.
    #[test]
    fn amplitude_dynamic_range_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spread = ScenarioConfig::default().log_amplitude_spread();
        let mut amps = lognormal_amplitudes(&mut rng, 10_000, spread);
        amps.sort_by(f64::total_cmp);
        let lo = amps[(0.025 * amps.len() as f64) as usize];
        let hi = amps[(0.975 * amps.len() as f64) as usize];
        let db = 20.0 * (hi / lo).log10();
        assert!((db - 40.0).abs() <= 2.0, "spread {db} dB");
    }

    #[test]
    fn amplitude_spread_inside_ensembles() {
        // Within-ensemble ratios do not depend on the SNR rescale.
        let mut ratios = Vec::new();
        for seed in 0..5_000 {
            let e = random_ensemble(&ScenarioConfig {
                k: 2,
                seed,
                ..ScenarioConfig::default()
            })
            .unwrap();
            let c = e.components();
            ratios.push((c[0].amplitude / c[1].amplitude).ln());
        }
        // difference of two N(0, s²) draws has std s·√2
        let n = ratios.len() as f64;
        let var = ratios.iter().map(|r| r * r).sum::<f64>() / n;
        let s = ScenarioConfig::default().log_amplitude_spread();
        assert!((var / (2.0 * s * s) - 1.0).abs() < 0.06, "var {var}");
    }

    fn arb_ensemble() -> impl Strategy<Value = CisoidEnsemble> {
        prop::collection::vec((0.01f64..10.0, -3.0f64..3.0, -PI..PI), 1..12).prop_map(|parts| {
            CisoidEnsemble::new(
                parts
                    .into_iter()
                    .map(|(a, w, p)| Cisoid::new(a, w, p).unwrap())
                    .collect(),
                1.0,
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn permutation_invariance(e in arb_ensemble(), rot in 0usize..12) {
            let mut comps = e.components().to_vec();
            let r = rot % comps.len();
            comps.rotate_left(r);
            comps.reverse();
            let p = CisoidEnsemble::new(comps, e.ts()).unwrap();
            prop_assert_eq!(ground_truth_sum_params(&e), ground_truth_sum_params(&p));
            prop_assert_eq!(total_power(&e).to_bits(), total_power(&p).to_bits());
            let n = NoiseModel::noiseless();
            prop_assert_eq!(synthesize(&e, 16, n, 1).unwrap(), synthesize(&p, 16, n, 2).unwrap());
        }

        #[test]
        fn amplitude_scaling(e in arb_ensemble(), c in 0.1f64..10.0) {
            let g = ground_truth_sum_params(&e);
            let s = ground_truth_sum_params(&e.scaled(c).unwrap());
            let tol = 1e-12;
            prop_assert!((s.sigma_sum - c * g.sigma_sum).abs() <= tol * (c * g.sigma_sum).abs().max(1.0));
            prop_assert!((s.omega_sum - c * c * g.omega_sum).abs() <= tol * (c * c * total_power(&e)).max(1.0) * 4.0);
            prop_assert!((s.phi_sum - g.phi_sum * c * c).norm() <= tol * (c * c * total_power(&e)).max(1.0));
            let ps = total_power(&e.scaled(c).unwrap());
            prop_assert!((ps - c * c * total_power(&e)).abs() <= tol * ps.max(1.0));
        }

        #[test]
        fn phasor_triangle_inequality(e in arb_ensemble()) {
            let g = ground_truth_sum_params(&e);
            prop_assert!(g.phi_sum.norm() <= total_power(&e) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn triangle_equality_for_equal_phases() {
        let e = ens(&[(1.0, 0.1, 0.7), (2.0, 0.5, 0.7), (0.5, -1.0, 0.7)], 1.0);
        let g = ground_truth_sum_params(&e);
        assert!((g.phi_sum.norm() - total_power(&e)).abs() < 1e-12);
    }
}
