//! Windows, calibrated periodograms, noise-floor estimation and zoomed peak
//! refinement.

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::signal::SampledSignal;
use crate::{Error, Result};

/// 4-term Blackman-Harris coefficients `(a0, a1, a2, a3)`.
pub const BLACKMAN_HARRIS_4: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];

/// Points in the zoomed transform grid spanning ±1 coarse bin.
pub const ZOOM_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    #[default]
    BlackmanHarris4,
}

/// Coherent (`Σw/N`) and incoherent (`Σw²/N`) gains of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGain {
    pub coherent: f64,
    pub incoherent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub coeffs: Vec<f64>,
    pub gain: WindowGain,
}

impl Window {
    fn from_coeffs(coeffs: Vec<f64>) -> Self {
        let n = coeffs.len() as f64;
        let gain = WindowGain {
            coherent: coeffs.iter().sum::<f64>() / n,
            incoherent: coeffs.iter().map(|w| w * w).sum::<f64>() / n,
        };
        Self { coeffs, gain }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.gain.coherent * self.len() as f64
    }
}

pub fn rectangular(n: usize) -> Window {
    Window::from_coeffs(vec![1.0; n])
}

/// Symmetric 4-term Blackman-Harris window.
pub fn blackman_harris_4(n: usize) -> Result<Window> {
    if n < 4 {
        return Err(Error::TooShort { min: 4, got: n });
    }
    let [a0, a1, a2, a3] = BLACKMAN_HARRIS_4;
    let denom = (n - 1) as f64;
    let coeffs = (0..n)
        .map(|m| {
            let x = TAU * m as f64 / denom;
            a0 - a1 * x.cos() + a2 * (2.0 * x).cos() - a3 * (3.0 * x).cos()
        })
        .collect();
    Ok(Window::from_coeffs(coeffs))
}

impl WindowKind {
    pub fn build(self, n: usize) -> Result<Window> {
        match self {
            WindowKind::Rectangular => Ok(rectangular(n)),
            WindowKind::BlackmanHarris4 => blackman_harris_4(n),
        }
    }
}

/// Windowed, zero-padded periodogram over `M = N·zero_pad` bins ordered by
/// increasing frequency on `[-π/ts, π/ts)`.
///
/// Normalization: `power[b] = |DFT(w·x)[b]|² / (N·Σw²/N) = |DFT(w·x)[b]|² / Σw²`,
/// so for white `CN(0, σ²)` noise every bin has expectation `σ²`. A
/// rectangular-window tone of amplitude `a` on a bin center reads `N·a²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub power: Vec<f64>,
    /// Bin centers in rad/s, strictly increasing.
    pub bin_omega: Vec<f64>,
    pub window_gain: WindowGain,
    pub n: usize,
    pub zero_pad: usize,
    pub ts: f64,
}

impl Periodogram {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Signed frequency index of bin `b` on the zero-padded grid.
    pub fn padded_index(&self, b: usize) -> i64 {
        b as i64 - (self.len() / 2) as i64
    }

    /// Nearest bin on the unpadded `N`-point grid.
    pub fn coarse_bin(&self, b: usize) -> i64 {
        (self.padded_index(b) as f64 / self.zero_pad as f64).round() as i64
    }

    /// `Σ|w·x|²` recovered from the spectrum via Parseval.
    pub fn windowed_energy(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.window_gain.incoherent * self.n as f64
            / self.len() as f64
    }

    /// Power-weighted centroid of `(power − floor)₊` over bins with
    /// `lo ≤ ω < hi`; `None` if no bin rises above the floor.
    pub fn centroid(&self, floor: f64, lo: f64, hi: f64) -> Option<f64> {
        let (num, den) = self
            .bin_omega
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| **w >= lo && **w < hi)
            .fold((0.0, 0.0), |(num, den), (w, p)| {
                let excess = (p - floor).max(0.0);
                (num + w * excess, den + excess)
            });
        (den > 0.0).then(|| num / den)
    }
}

pub fn periodogram(
    signal: &SampledSignal,
    window: WindowKind,
    zero_pad_factor: usize,
) -> Result<Periodogram> {
    if ![1, 2, 4, 8].contains(&zero_pad_factor) {
        return Err(Error::InvalidInput(format!(
            "zero_pad_factor must be 1, 2, 4 or 8, got {zero_pad_factor}"
        )));
    }
    let n = signal.len();
    let win = window.build(n)?;
    let m = n * zero_pad_factor;
    let mut buf: Vec<Complex64> = signal
        .samples()
        .iter()
        .zip(&win.coeffs)
        .map(|(x, w)| x * w)
        .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), m - n))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let norm = win.gain.incoherent * n as f64;
    let half = (m / 2) as i64;
    let ts = signal.ts();
    let (power, bin_omega) = (0..m)
        .map(|b| {
            let k = b as i64 - half;
            let idx = k.rem_euclid(m as i64) as usize;
            (buf[idx].norm_sqr() / norm, TAU * k as f64 / (m as f64 * ts))
        })
        .unzip();
    Ok(Periodogram {
        power,
        bin_omega,
        window_gain: win.gain,
        n,
        zero_pad: zero_pad_factor,
        ts,
    })
}

/// A closed frequency interval in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// `[0, π/ts]`; excluding it leaves the negative-frequency half-spectrum.
    pub fn non_negative(ts: f64) -> Self {
        Self {
            lo: 0.0,
            hi: PI / ts,
        }
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.lo && omega <= self.hi
    }
}

const MIN_NOISE_BINS: usize = 16;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

/// Median-of-tail noise estimate `median(power) / ln 2`.
///
/// With `Some(band)` the bins inside `band` are excluded; the usual choice is
/// [`Band::non_negative`], leaving the signal-free negative half. With
/// `None` the lowest-power half of all bins is used, which biases the
/// estimate low and serves only as a fallback.
pub fn noise_floor_estimate(pgram: &Periodogram, exclusion: Option<Band>) -> Result<f64> {
    let mut values: Vec<f64> = match exclusion {
        Some(band) => pgram
            .bin_omega
            .iter()
            .zip(&pgram.power)
            .filter(|(w, _)| !band.contains(**w))
            .map(|(_, p)| *p)
            .collect(),
        None => {
            let mut all = pgram.power.clone();
            all.sort_by(f64::total_cmp);
            all.truncate(all.len() / 2);
            all
        }
    };
    if values.len() < MIN_NOISE_BINS {
        return Err(Error::TooFewBins {
            min: MIN_NOISE_BINS,
            got: values.len(),
        });
    }
    Ok(median(&mut values) / LN_2)
}

/// Local maxima (circular neighbours) with `power ≥ threshold`, strongest first.
pub fn find_peaks(pgram: &Periodogram, threshold: f64) -> Vec<usize> {
    let m = pgram.len();
    let p = &pgram.power;
    let mut peaks: Vec<usize> = (0..m)
        .filter(|&b| {
            let left = p[(b + m - 1) % m];
            let right = p[(b + 1) % m];
            p[b] >= threshold && p[b] > left && p[b] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    peaks
}

/// One refined spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// rad/s
    pub omega_hat: f64,
    pub amp_hat: f64,
    /// Phase at `n = 0`, radians.
    pub phase_hat: f64,
    /// Coarse bin on the `N`-point grid the refinement started from.
    pub bin_index: i64,
}

/// Signal multiplied sample-wise by the window.
pub(crate) fn windowed(signal: &SampledSignal, window: &Window) -> Vec<Complex64> {
    signal
        .samples()
        .iter()
        .zip(&window.coeffs)
        .map(|(x, w)| x * w)
        .collect()
}

/// `Σₙ x(n)·exp(−jωn)` for `ω` in rad/sample.
///
/// The rotating phasor is re-anchored every 64 samples to bound round-off.
pub(crate) fn dtft(x: &[Complex64], omega: f64) -> Complex64 {
    const ANCHOR: usize = 64;
    let step = Complex64::from_polar(1.0, -omega);
    let mut acc = Complex64::new(0.0, 0.0);
    for (block, chunk) in x.chunks(ANCHOR).enumerate() {
        let mut rot = Complex64::from_polar(1.0, -omega * (block * ANCHOR) as f64);
        for s in chunk {
            acc += s * rot;
            rot *= step;
        }
    }
    acc
}

fn coarse_omega(bin: i64, n: usize) -> f64 {
    TAU * bin as f64 / n as f64
}

/// Walks from `bin` to the nearest local maximum of the `N`-point windowed
/// periodogram.
pub fn climb_to_local_max(signal: &SampledSignal, bin: i64, window: WindowKind) -> Result<i64> {
    let n = signal.len();
    let x = windowed(signal, &window.build(n)?);
    let power = |b: i64| dtft(&x, coarse_omega(b, n)).norm_sqr();
    let mut b = bin;
    let mut here = power(b);
    for _ in 0..n {
        let (l, r) = (power(b - 1), power(b + 1));
        if l > here && l >= r {
            b -= 1;
            here = l;
        } else if r > here {
            b += 1;
            here = r;
        } else {
            break;
        }
    }
    Ok(b)
}

/// Zoom-interpolated refinement of a coarse peak with the default 64-point grid.
pub fn zoom_refine_peak(
    signal: &SampledSignal,
    coarse_bin: i64,
    window: WindowKind,
) -> Result<SpectralPeak> {
    zoom_refine_peak_with_grid(signal, coarse_bin, window, ZOOM_GRID_POINTS)
}

/// Evaluates the windowed transform on `grid_points` frequencies spanning
/// ±1 coarse bin around `coarse_bin`, takes the arg-max, and applies one
/// parabolic step on log-power. Amplitude and phase are then read from the
/// transform evaluated at the refined frequency itself, so no rolloff
/// correction is left to apply; the symmetric window is real and positive at
/// zero offset so the phase needs no window correction either.
pub fn zoom_refine_peak_with_grid(
    signal: &SampledSignal,
    coarse_bin: i64,
    window: WindowKind,
    grid_points: usize,
) -> Result<SpectralPeak> {
    if grid_points < 3 {
        return Err(Error::InvalidInput("zoom grid needs ≥ 3 points".into()));
    }
    let n = signal.len();
    let win = window.build(n)?;
    let x = windowed(signal, &win);
    let bin_width = TAU / n as f64;
    let center = coarse_omega(coarse_bin, n);

    let here = dtft(&x, center).norm_sqr();
    let left = dtft(&x, center - bin_width).norm_sqr();
    let right = dtft(&x, center + bin_width).norm_sqr();
    if !(here > 0.0) || here < left || here < right {
        return Err(Error::NotAPeak { bin: coarse_bin });
    }

    let step = 2.0 * bin_width / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|g| center - bin_width + g as f64 * step)
        .collect();
    let power: Vec<f64> = grid.iter().map(|&w| dtft(&x, w).norm_sqr()).collect();
    let best = (0..grid_points)
        .max_by(|&a, &b| power[a].total_cmp(&power[b]).then(b.cmp(&a)))
        .expect("non-empty grid");

    let mut omega = grid[best];
    if best > 0 && best + 1 < grid_points {
        let (l, c, r) = (power[best - 1].ln(), power[best].ln(), power[best + 1].ln());
        let curvature = l - 2.0 * c + r;
        if curvature < 0.0 && curvature.is_finite() {
            omega += 0.5 * (l - r) / curvature * step;
        }
    }

    let value = dtft(&x, omega);
    Ok(SpectralPeak {
        omega_hat: omega / signal.ts(),
        amp_hat: value.norm() / win.sum(),
        phase_hat: value.arg(),
        bin_index: coarse_bin,
    })
}
