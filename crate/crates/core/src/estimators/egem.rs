//! EGEM: iterative global estimation of `(Σ, Ω, Φ)`.
//!
//! Pipeline:
//!
//! 1. `σ̂²` from the negative-frequency periodogram median (unless given) and
//!    `P̂ = max(‖x‖²/N − σ̂², 0)`.
//! 2. `ω̂⁽⁰⁾` is the noise-subtracted power-weighted centroid of the
//!    positive band; `Σ̂⁽⁰⁾` is the sum of detected line amplitudes, or
//!    `√(P̂·k_eff)` when no line clears the threshold.
//! 3. Each detected line becomes a track. Per iteration, every track (strongest
//!    first) is isolated by subtracting the others from the data,
//!    demodulated, low-passed by a length-`L` moving average and decimated by
//!    `L`; the phase slope of the weighted lag-1 autocorrelation of that
//!    baseband gives the frequency step, halved until the track's fitted
//!    amplitude does not drop, and the track's complex amplitude is
//!    re-fitted at the corrected frequency. Tracks closer than half a bin
//!    are merged.
//! 4. `ω̂ = Σ|c_k|²ω_k / Σ|c_k|²`, `Ω̂ = ω̂·P̂`, `Φ̂ = Σ|c_k|c_k`, `Σ̂ = Σ|c_k|`.
//!    When lines were tracked, `P̂` is re-split as `Σ|c_k|² + ‖x − x̂‖²/N − σ̂²`,
//!    which drops the finite-record cross terms between lines from `‖x‖²/N`.
//!
//! The complex amplitudes `c_k` are referred to `n = 0`; fitting them with
//! the exact demodulation frequency makes that equivalent to a mid-record
//! reference followed by the rotation back.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{detect_lines, EstimationResult, IterationSnapshot, PeakRule};
use crate::signal::{SampledSignal, SumParams};
use crate::spectrum::{noise_floor_estimate, periodogram, Band, WindowKind};
use crate::{Complex64, Error, Result};

/// Shortest accepted input.
pub const EGEM_MIN_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowpassLen {
    /// `max(4, ⌊N/32⌋)`
    #[default]
    Auto,
    Fixed(usize),
}

impl LowpassLen {
    fn resolve(self, n: usize) -> usize {
        match self {
            LowpassLen::Auto => (n / 32).max(4),
            LowpassLen::Fixed(l) => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgemConfig {
    pub max_iter: usize,
    /// Convergence threshold on the frequency updates in rad/s; `None` means
    /// `1e-9/ts`.
    pub freq_tol: Option<f64>,
    pub lowpass_len: LowpassLen,
    pub k_eff: f64,
    /// Known noise variance; estimated from the periodogram when absent.
    pub noise_sigma2: Option<f64>,
    pub peak_rule: PeakRule,
    pub max_tracks: usize,
    /// Use `√(N·P̂·k_eff)` rather than `√(P̂·k_eff)` as the no-line
    /// amplitude-sum fallback.
    pub literal_sigma_init: bool,
    pub trace: bool,
}

impl Default for EgemConfig {
    fn default() -> Self {
        Self {
            max_iter: 8,
            freq_tol: None,
            lowpass_len: LowpassLen::Auto,
            k_eff: 2.0,
            noise_sigma2: None,
            peak_rule: PeakRule::default(),
            max_tracks: 64,
            literal_sigma_init: false,
            trace: false,
        }
    }
}

impl EgemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=100).contains(&self.max_iter) {
            return Err(Error::InvalidInput(format!(
                "max_iter must be in 1..=100, got {}",
                self.max_iter
            )));
        }
        if let Some(tol) = self.freq_tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidInput("freq_tol must be positive".into()));
            }
        }
        if !(1.5..=3.0).contains(&self.k_eff) {
            return Err(Error::InvalidInput(format!(
                "k_eff must be in [1.5, 3], got {}",
                self.k_eff
            )));
        }
        if let Some(s2) = self.noise_sigma2 {
            if !(s2 >= 0.0) || !s2.is_finite() {
                return Err(Error::InvalidInput("noise_sigma2 must be ≥ 0".into()));
            }
        }
        if matches!(self.lowpass_len, LowpassLen::Fixed(0)) {
            return Err(Error::InvalidInput("lowpass_len must be ≥ 1".into()));
        }
        if self.max_tracks == 0 {
            return Err(Error::InvalidInput("max_tracks must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Step halvings tried before a frequency update is rejected.
const MAX_HALVINGS: usize = 6;

/// `exp(jωm)` for `m = 0..n`, by recurrence re-anchored every 64 samples.
fn rotor(omega: f64, n: usize) -> Vec<Complex64> {
    const ANCHOR: usize = 64;
    let step = Complex64::from_polar(1.0, omega);
    let mut out = Vec::with_capacity(n);
    let mut r = Complex64::new(1.0, 0.0);
    for m in 0..n {
        if m % ANCHOR == 0 {
            r = Complex64::from_polar(1.0, omega * m as f64);
        }
        out.push(r);
        r *= step;
    }
    out
}

/// Kay's weighted phase-difference frequency estimate (rad/sample) of a
/// near-single-tone sequence, via the argument of the weighted lag-1
/// autocorrelation.
fn weighted_phase_slope(y: &[Complex64]) -> f64 {
    let m = y.len() as f64;
    let half = m / 2.0;
    let z: Complex64 = y
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            let u = (t as f64 - (half - 1.0)) / half;
            w[1] * w[0].conj() * (1.0 - u * u)
        })
        .sum();
    if z.norm_sqr() > 0.0 {
        z.arg()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Track {
    /// rad/sample
    omega: f64,
    c: Complex64,
}

struct Tracker<'a> {
    x: &'a [Complex64],
    tracks: Vec<Track>,
    model: Vec<Complex64>,
    lowpass: usize,
}

impl<'a> Tracker<'a> {
    fn new(x: &'a [Complex64], tracks: Vec<Track>, lowpass: usize) -> Self {
        let mut me = Self {
            x,
            tracks,
            model: Vec::new(),
            lowpass,
        };
        me.rebuild_model();
        me
    }

    fn rebuild_model(&mut self) {
        let n = self.x.len();
        let mut model = vec![Complex64::new(0.0, 0.0); n];
        for t in &self.tracks {
            for (m, r) in model.iter_mut().zip(rotor(t.omega, n)) {
                *m += t.c * r;
            }
        }
        self.model = model;
    }

    /// One pass over all tracks, strongest first; returns the largest
    /// frequency step in rad/sample.
    fn sweep(&mut self) -> f64 {
        let n = self.x.len();
        let bin = TAU / n as f64;
        let mut order: Vec<usize> = (0..self.tracks.len()).collect();
        order.sort_by(|&a, &b| {
            self.tracks[b]
                .c
                .norm_sqr()
                .total_cmp(&self.tracks[a].c.norm_sqr())
                .then(a.cmp(&b))
        });

        let mut max_step: f64 = 0.0;
        for k in order {
            let Track { omega, c } = self.tracks[k];
            let old = rotor(omega, n);
            let residual: Vec<Complex64> = self
                .x
                .iter()
                .zip(&self.model)
                .zip(&old)
                .map(|((x, m), r)| x - m + c * r)
                .collect();

            let baseband: Vec<Complex64> = residual
                .iter()
                .zip(&old)
                .map(|(v, r)| v * r.conj())
                .collect();
            let decimated: Vec<Complex64> = baseband
                .chunks_exact(self.lowpass)
                .map(|b| b.iter().sum::<Complex64>() / self.lowpass as f64)
                .collect();
            let step = if decimated.len() >= 2 {
                (weighted_phase_slope(&decimated) / self.lowpass as f64).clamp(-bin, bin)
            } else {
                0.0
            };

            let fit = |w: f64| -> (Vec<Complex64>, Complex64) {
                let rot = rotor(w, n);
                let c = residual
                    .iter()
                    .zip(&rot)
                    .map(|(v, r)| v * r.conj())
                    .sum::<Complex64>()
                    / n as f64;
                (rot, c)
            };
            // Safeguarded step: halve until the fitted amplitude, i.e. the
            // per-track likelihood, does not decrease.
            let (mut new, mut c_new) = fit(omega);
            let mut omega_new = omega;
            let mut trial = step;
            for _ in 0..MAX_HALVINGS {
                if trial == 0.0 {
                    break;
                }
                let (rot, cand) = fit(omega + trial);
                if cand.norm_sqr() >= c_new.norm_sqr() {
                    omega_new = omega + trial;
                    new = rot;
                    c_new = cand;
                    break;
                }
                trial *= 0.5;
            }
            let step = omega_new - omega;
            for ((m, o), r) in self.model.iter_mut().zip(&old).zip(&new) {
                *m += c_new * r - c * o;
            }
            self.tracks[k] = Track {
                omega: omega_new,
                c: c_new,
            };
            max_step = max_step.max(step.abs());
        }
        max_step
    }

    /// Drops the weaker of any two tracks closer than half a bin. Returns true
    /// if anything was removed.
    fn merge(&mut self) -> bool {
        let half_bin = PI / self.x.len() as f64;
        let mut by_freq = self.tracks.clone();
        by_freq.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let mut kept: Vec<Track> = Vec::with_capacity(by_freq.len());
        for t in by_freq {
            match kept.last_mut() {
                Some(last) if t.omega - last.omega < half_bin => {
                    if t.c.norm_sqr() > last.c.norm_sqr() {
                        *last = t;
                    }
                }
                _ => kept.push(t),
            }
        }
        let merged = kept.len() != self.tracks.len();
        if merged {
            self.tracks = kept;
            self.rebuild_model();
        }
        merged
    }

    /// `Σ|c_k|² + ‖x − x̂‖²/N − σ²`, clipped at 0: the data power with the
    /// finite-record cross terms between lines removed.
    fn line_power_split(&self, sigma2: f64) -> f64 {
        let lines: f64 = self.tracks.iter().map(|t| t.c.norm_sqr()).sum();
        let residual = self
            .x
            .iter()
            .zip(&self.model)
            .map(|(x, m)| (x - m).norm_sqr())
            .sum::<f64>()
            / self.x.len() as f64;
        (lines + residual - sigma2).max(0.0)
    }

    /// `(ω̂ rad/sample, Φ̂, Σ|c|)`
    fn summary(&self) -> (f64, Complex64, f64) {
        let mut ordered = self.tracks.clone();
        ordered.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let weight: f64 = ordered.iter().map(|t| t.c.norm_sqr()).sum();
        let omega = if weight > 0.0 {
            ordered
                .iter()
                .map(|t| t.c.norm_sqr() * t.omega)
                .sum::<f64>()
                / weight
        } else {
            ordered.iter().map(|t| t.omega).sum::<f64>() / ordered.len().max(1) as f64
        };
        let phi = ordered.iter().map(|t| t.c * t.c.norm()).sum();
        let sigma = ordered.iter().map(|t| t.c.norm()).sum();
        (omega, phi, sigma)
    }
}

/// Runs EGEM on `signal`.
pub fn egem_estimate(signal: &SampledSignal, config: &EgemConfig) -> Result<EstimationResult> {
    let n = signal.len();
    if n < EGEM_MIN_LEN {
        return Err(Error::TooShort {
            min: EGEM_MIN_LEN,
            got: n,
        });
    }
    config.validate()?;
    let ts = signal.ts();
    let x = signal.samples();
    let mean_power = signal.mean_power();
    if mean_power == 0.0 {
        return Ok(EstimationResult::zero(config.noise_sigma2.unwrap_or(0.0)));
    }
    let freq_tol = config.freq_tol.unwrap_or(1e-9 / ts) * ts;

    let pgram = periodogram(signal, WindowKind::BlackmanHarris4, 2)?;
    let sigma2 = match config.noise_sigma2 {
        Some(s2) => s2,
        None => noise_floor_estimate(&pgram, Some(Band::non_negative(ts)))?,
    };
    let p_hat = (mean_power - sigma2).max(0.0);
    let omega0 = pgram
        .centroid(sigma2, 0.0, PI / ts)
        .or_else(|| pgram.centroid(sigma2, -PI / ts, PI / ts))
        .unwrap_or(0.0)
        * ts;

    let lines = detect_lines(signal, &pgram, sigma2, &config.peak_rule, config.max_tracks)?;
    let fallback_sigma = if config.literal_sigma_init {
        (n as f64 * p_hat * config.k_eff).sqrt()
    } else {
        (p_hat * config.k_eff).sqrt()
    };
    let (tracks, sigma0, phi0) = if lines.is_empty() {
        let c = x
            .iter()
            .zip(rotor(omega0, n))
            .map(|(v, r)| v * r.conj())
            .sum::<Complex64>()
            / n as f64;
        (
            vec![Track { omega: omega0, c }],
            fallback_sigma,
            Complex64::new(0.0, 0.0),
        )
    } else {
        let tracks: Vec<Track> = lines
            .iter()
            .map(|p| Track {
                omega: p.omega_hat * ts,
                c: Complex64::from_polar(p.amp_hat, p.phase_hat),
            })
            .collect();
        let sigma0 = lines.iter().map(|p| p.amp_hat).sum();
        let phi0 = lines
            .iter()
            .map(|p| Complex64::from_polar(p.amp_hat * p.amp_hat, p.phase_hat))
            .sum();
        (tracks, sigma0, phi0)
    };
    let use_track_sigma = !lines.is_empty();

    let mut trace = config.trace.then(|| {
        vec![IterationSnapshot {
            iteration: 0,
            omega_hat: omega0 / ts,
            phi_hat: phi0,
            sigma_hat: sigma0,
        }]
    });

    let lowpass = config.lowpass_len.resolve(n).min(n / 2).max(1);
    let mut tracker = Tracker::new(x, tracks, lowpass);
    let mut omega_hat = omega0;
    let mut phi_hat = phi0;
    let mut sigma_hat = sigma0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        iterations = it;
        let step = tracker.sweep();
        let merged = tracker.merge();
        let (omega_new, phi_new, sigma_tracks) = tracker.summary();
        let delta = (omega_new - omega_hat).abs();
        omega_hat = omega_new;
        phi_hat = phi_new;
        if use_track_sigma {
            sigma_hat = sigma_tracks;
        }
        if let Some(t) = trace.as_mut() {
            t.push(IterationSnapshot {
                iteration: it,
                omega_hat: omega_hat / ts,
                phi_hat,
                sigma_hat,
            });
        }
        if !merged && delta < freq_tol && step < freq_tol {
            converged = true;
            break;
        }
    }

    let p_hat = if use_track_sigma {
        tracker.line_power_split(sigma2)
    } else {
        p_hat
    };

    Ok(EstimationResult {
        theta_hat: SumParams {
            sigma_sum: sigma_hat,
            omega_sum: omega_hat / ts * p_hat,
            phi_sum: phi_hat,
        },
        p_hat,
        sigma2_hat: sigma2,
        iterations,
        converged,
        per_iteration_trace: trace,
    })
}
