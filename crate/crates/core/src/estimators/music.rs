//! Root-MUSIC baseline.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{assemble, ls_amp_phase, EstimationResult};
use crate::signal::SampledSignal;
use crate::{Complex64, Error, Result};

/// A frequency recovered from a noise-subspace polynomial root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicRoot {
    /// rad/s
    pub omega: f64,
    /// `1 − |z|` of the (inward-reflected) root.
    pub circle_distance: f64,
}

/// `min(round(N/3), 64)`.
pub fn default_subarray_len(n: usize) -> usize {
    ((n as f64 / 3.0).round() as usize).min(64)
}

/// Forward-backward averaged sample covariance of length-`m` snapshots.
fn fb_covariance(x: &[Complex64], m: usize) -> DMatrix<Complex64> {
    let snapshots = x.len() - m + 1;
    let data = DMatrix::from_fn(m, snapshots, |i, s| x[s + i]);
    let r = &data * data.adjoint() / Complex64::from(snapshots as f64);
    let flipped = DMatrix::from_fn(m, m, |i, j| r[(m - 1 - i, m - 1 - j)].conj());
    (r + flipped) * Complex64::from(0.5)
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of `Σ coeffs[i]·z^i` via eigenvalues of the companion matrix, with
/// an Aberth-Ehrlich fallback when the Schur iteration does not converge.
fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    if lead.norm() == 0.0 {
        return Err(Error::Degenerate("vanishing leading coefficient".into()));
    }
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -coeffs[deg - 1 - j] / lead
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let roots = match nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 100 * deg) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..deg).map(|i| t[(i, i)]).collect()
        }
        None => aberth(coeffs)?,
    };
    Ok(roots
        .into_iter()
        .map(|mut z: Complex64| {
            for _ in 0..3 {
                let (p, dp) = horner(coeffs, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !(step.norm() < 1e-3 * z.norm().max(1e-3)) {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect())
}

fn aberth(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for k in 0..deg {
            let (p, dp) = horner(coeffs, z[k]);
            let ratio = p / dp;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != k)
                .map(|j| 1.0 / (z[k] - z[j]))
                .sum();
            let w = ratio / (1.0 - ratio * repulsion);
            if w.is_finite() {
                z[k] -= w;
                worst = worst.max(w.norm() / z[k].norm().max(1e-12));
            }
        }
        if worst < 1e-14 {
            return Ok(z);
        }
    }
    Err(Error::Degenerate(
        "polynomial root iteration did not converge".into(),
    ))
}

/// Root-MUSIC frequencies, closest to the unit circle first.
///
/// Roots outside the circle are reflected to `1/z̄`; a conjugate-reciprocal
/// pair then collapses onto one point, so roots closer than `1e-3` are
/// averaged into a single candidate before the `model_order` candidates
/// nearest the circle are kept.
pub fn root_music_frequencies(
    signal: &SampledSignal,
    model_order: usize,
    subarray_len: usize,
) -> Result<Vec<MusicRoot>> {
    let n = signal.len();
    if model_order == 0 || model_order >= subarray_len {
        return Err(Error::InvalidInput(format!(
            "model order {model_order} must be in 1..{subarray_len}"
        )));
    }
    if 2 * subarray_len > n {
        return Err(Error::InvalidInput(format!(
            "subarray length {subarray_len} exceeds N/2 = {}",
            n / 2
        )));
    }
    let m = subarray_len;
    let r = fb_covariance(signal.samples(), m);
    let eig = SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate(
            "non-finite covariance eigenvalues".into(),
        ));
    }
    let noise_dim = m - model_order;
    let en = DMatrix::from_fn(m, noise_dim, |i, j| eig.eigenvectors[(i, order[j])]);
    let c = &en * en.adjoint();

    // Σ_l b_l z^(l + m − 1) with b_l = Σ_{j − i = l} C_ij.
    let coeffs: Vec<Complex64> = (0..2 * m - 1)
        .map(|p| {
            let l = p as i64 - (m as i64 - 1);
            (0..m as i64)
                .filter_map(|i| {
                    let j = i + l;
                    (0..m as i64)
                        .contains(&j)
                        .then(|| c[(i as usize, j as usize)])
                })
                .sum()
        })
        .collect();
    let roots = poly_roots(&coeffs)?;

    let inside: Vec<Complex64> = roots
        .into_iter()
        .filter(|z| z.norm() > 0.0 && z.is_finite())
        .map(|z| if z.norm() > 1.0 { 1.0 / z.conj() } else { z })
        .collect();
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for z in inside {
        match clusters
            .iter_mut()
            .find(|(c, k)| (*c / *k as f64 - z).norm() < 1e-3)
        {
            Some((sum, k)) => {
                *sum += z;
                *k += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    let mut candidates: Vec<Complex64> = clusters.iter().map(|(s, k)| s / *k as f64).collect();
    candidates.sort_by(|a, b| (1.0 - a.norm()).total_cmp(&(1.0 - b.norm())));
    if candidates.len() < model_order {
        return Err(Error::Degenerate(format!(
            "only {} distinct roots for model order {model_order}",
            candidates.len()
        )));
    }
    let ts = signal.ts();
    Ok(candidates
        .into_iter()
        .take(model_order)
        .map(|z| MusicRoot {
            omega: z.arg() / ts,
            circle_distance: 1.0 - z.norm(),
        })
        .collect())
}

/// Noise variance as the mean of the `m − K` smallest covariance eigenvalues.
fn noise_eigen_mean(signal: &SampledSignal, model_order: usize, m: usize) -> f64 {
    let r = fb_covariance(signal.samples(), m);
    let mut ev: Vec<f64> = r.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[..m - model_order].iter().sum::<f64>() / (m - model_order) as f64
}

/// Root-MUSIC frequencies plus least-squares amplitudes and phases.
pub fn root_music_estimate(signal: &SampledSignal, model_order: usize) -> Result<EstimationResult> {
    let m = default_subarray_len(signal.len());
    let roots = root_music_frequencies(signal, model_order, m)?;
    let freqs: Vec<f64> = roots.iter().map(|r| r.omega).collect();
    let fit = ls_amp_phase(signal, &freqs)?;
    let p_hat = fit.iter().map(|(a, _)| a * a).sum();
    let theta_hat = assemble(
        fit.iter()
            .zip(&freqs)
            .map(|(&(a, phi), &w)| (a, w, phi))
            .collect(),
    );
    Ok(EstimationResult {
        theta_hat,
        p_hat,
        sigma2_hat: noise_eigen_mean(signal, model_order, m),
        iterations: 1,
        converged: true,
        per_iteration_trace: None,
    })
}
