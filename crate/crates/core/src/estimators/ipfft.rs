//! Zoom-interpolated FFT baseline.

use super::{assemble, detect_lines, EstimationResult, PeakRule};
use crate::signal::SampledSignal;
use crate::spectrum::{noise_floor_estimate, periodogram, Band, WindowKind};
use crate::{Error, Result};

pub const IPFFT_MIN_LEN: usize = 64;

/// Zoom-IpFFT with the default peak rule.
pub fn zoom_ipfft_estimate(signal: &SampledSignal, max_peaks: usize) -> Result<EstimationResult> {
    zoom_ipfft_estimate_with(signal, max_peaks, &PeakRule::default())
}

/// Blackman-Harris periodogram (2× zero-pad), lines above the noise-floor
/// threshold (strongest first, at most `max_peaks`), zoom-refined, then
/// plugged into the sum-parameter definitions. `P̂ = Σ â_k²`.
pub fn zoom_ipfft_estimate_with(
    signal: &SampledSignal,
    max_peaks: usize,
    rule: &PeakRule,
) -> Result<EstimationResult> {
    let n = signal.len();
    if n < IPFFT_MIN_LEN {
        return Err(Error::TooShort {
            min: IPFFT_MIN_LEN,
            got: n,
        });
    }
    let pgram = periodogram(signal, WindowKind::BlackmanHarris4, 2)?;
    let sigma2 = noise_floor_estimate(&pgram, Some(Band::non_negative(signal.ts())))?;
    if max_peaks == 0 || signal.mean_power() == 0.0 {
        return Ok(EstimationResult::zero(sigma2));
    }
    let lines = detect_lines(signal, &pgram, sigma2, rule, max_peaks)?;
    if lines.is_empty() {
        return Ok(EstimationResult::zero(sigma2));
    }
    let p_hat = lines.iter().map(|p| p.amp_hat * p.amp_hat).sum();
    let theta_hat = assemble(
        lines
            .iter()
            .map(|p| (p.amp_hat, p.omega_hat, p.phase_hat))
            .collect(),
    );
    Ok(EstimationResult {
        theta_hat,
        p_hat,
        sigma2_hat: sigma2,
        iterations: 1,
        converged: true,
        per_iteration_trace: None,
    })
}
