//! Estimators of the sum-parameter vector: EGEM and the Zoom-IpFFT and
//! Root-MUSIC baselines.

mod egem;
mod ipfft;
mod lsq;
mod music;

use serde::{Deserialize, Serialize};

use crate::signal::{SampledSignal, SumParams};
use crate::spectrum::{
    climb_to_local_max, find_peaks, zoom_refine_peak, Periodogram, SpectralPeak, WindowKind,
};
use crate::{Complex64, Error, Result};

pub use egem::{egem_estimate, EgemConfig, LowpassLen};
pub use ipfft::{zoom_ipfft_estimate, zoom_ipfft_estimate_with, IPFFT_MIN_LEN};
pub use lsq::{ls_amp_phase, STEERING_CONDITION_LIMIT};
pub use music::{default_subarray_len, root_music_estimate, root_music_frequencies, MusicRoot};

/// Estimator selector shared by the bench harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Egem,
    Ipfft,
    Rootmusic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Egem, Method::Ipfft, Method::Rootmusic];

    pub fn name(self) -> &'static str {
        match self {
            Method::Egem => "egem",
            Method::Ipfft => "ipfft",
            Method::Rootmusic => "rootmusic",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "egem" => Ok(Method::Egem),
            "ipfft" | "zoom-ipfft" => Ok(Method::Ipfft),
            "rootmusic" | "root-music" | "music" => Ok(Method::Rootmusic),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// State after one EGEM iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub iteration: usize,
    pub omega_hat: f64,
    pub phi_hat: Complex64,
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: SumParams,
    pub p_hat: f64,
    pub sigma2_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_iteration_trace: Option<Vec<IterationSnapshot>>,
}

impl EstimationResult {
    pub(crate) fn zero(sigma2_hat: f64) -> Self {
        Self {
            theta_hat: SumParams::default(),
            p_hat: 0.0,
            sigma2_hat,
            iterations: 0,
            converged: false,
            per_iteration_trace: None,
        }
    }
}

/// Runs `method` with its default settings. `model_order` is required by
/// Root-MUSIC and caps the peak count of Zoom-IpFFT; EGEM ignores it.
pub fn estimate(
    signal: &SampledSignal,
    method: Method,
    model_order: Option<usize>,
) -> Result<EstimationResult> {
    match method {
        Method::Egem => egem_estimate(signal, &EgemConfig::default()),
        Method::Ipfft => zoom_ipfft_estimate(signal, model_order.unwrap_or(usize::MAX)),
        Method::Rootmusic => {
            let k = model_order
                .ok_or_else(|| Error::InvalidInput("root-MUSIC needs a model order".into()))?;
            root_music_estimate(signal, k)
        }
    }
}

/// Rules for accepting a periodogram local maximum as a spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRule {
    /// Minimum excess over the noise floor, dB.
    pub threshold_db: f64,
    /// Per-band false-alarm probability used to raise the threshold to
    /// `σ̂²·ln(M/p)` for an `M`-bin band of exponential noise bins.
    pub false_alarm: f64,
    /// Lines weaker than the strongest by more than this (dB) are treated as
    /// window sidelobes.
    pub dynamic_floor_db: f64,
}

impl Default for PeakRule {
    fn default() -> Self {
        Self {
            threshold_db: 6.0,
            false_alarm: 1e-3,
            dynamic_floor_db: 85.0,
        }
    }
}

impl PeakRule {
    pub fn threshold(&self, sigma2: f64, band_bins: usize) -> f64 {
        let fixed = sigma2 * 10f64.powf(self.threshold_db / 10.0);
        let cfar = sigma2 * (band_bins.max(1) as f64 / self.false_alarm).ln().max(0.0);
        fixed.max(cfar)
    }
}

/// Detects, climbs and zoom-refines spectral lines, strongest first, with
/// near-duplicates (same coarse bin after climbing) removed.
pub(crate) fn detect_lines(
    signal: &SampledSignal,
    pgram: &Periodogram,
    sigma2: f64,
    rule: &PeakRule,
    max_lines: usize,
) -> Result<Vec<SpectralPeak>> {
    let threshold = rule.threshold(sigma2, pgram.len() / 2);
    let candidates = find_peaks(pgram, threshold);
    let Some(&top) = candidates.first() else {
        return Ok(Vec::new());
    };
    let floor = pgram.power[top] * 10f64.powf(-rule.dynamic_floor_db / 10.0);

    let mut bins: Vec<i64> = Vec::new();
    let mut lines = Vec::new();
    for b in candidates {
        if lines.len() >= max_lines || pgram.power[b] < floor {
            break;
        }
        let coarse = climb_to_local_max(signal, pgram.coarse_bin(b), WindowKind::BlackmanHarris4)?;
        if bins.contains(&coarse) {
            continue;
        }
        bins.push(coarse);
        match zoom_refine_peak(signal, coarse, WindowKind::BlackmanHarris4) {
            Ok(peak) if peak.amp_hat > 0.0 => lines.push(peak),
            Ok(_) | Err(Error::NotAPeak { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(lines)
}

/// Sum-parameters of a list of `(a, ω, φ)` triples in canonical order
/// (by ω, then a), so the result does not depend on detection order.
pub(crate) fn assemble(mut parts: Vec<(f64, f64, f64)>) -> SumParams {
    parts.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)));
    SumParams::from_components(parts)
}
