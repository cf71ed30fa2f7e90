//! Least-squares amplitude and phase fit on known frequencies.

use nalgebra::{DMatrix, DVector};

use crate::signal::SampledSignal;
use crate::{Complex64, Error, Result};

/// Largest accepted condition number of the steering matrix.
pub const STEERING_CONDITION_LIMIT: f64 = 1e10;

const MIN_FREQ_GAP: f64 = 1e-6;

/// Fits `x(n) ≈ Σ_k c_k exp(jω_k n ts)` by least squares and returns
/// `(|c_k|, arg c_k)` in the order of `freqs`.
pub fn ls_amp_phase(signal: &SampledSignal, freqs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = signal.len();
    let k = freqs.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if 4 * k > n {
        return Err(Error::InvalidInput(format!(
            "{k} frequencies need at least {} samples, got {n}",
            4 * k
        )));
    }
    let ts = signal.ts();
    let mut sorted: Vec<f64> = freqs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(gap) = sorted
        .windows(2)
        .map(|w| (w[1] - w[0]) * ts)
        .reduce(f64::min)
    {
        if gap < MIN_FREQ_GAP {
            return Err(Error::IllConditioned {
                what: "steering matrix",
                condition: f64::INFINITY,
                limit: STEERING_CONDITION_LIMIT,
            });
        }
    }

    let v = DMatrix::from_fn(n, k, |row, col| {
        Complex64::from_polar(1.0, freqs[col] * ts * row as f64)
    });
    let x = DVector::from_column_slice(signal.samples());
    let svd = v.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(condition <= STEERING_CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            what: "steering matrix",
            condition,
            limit: STEERING_CONDITION_LIMIT,
        });
    }
    let c = svd
        .solve(&x, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(c.iter().map(|c| (c.norm(), c.arg())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::test_util::signal;
    use crate::signal::{random_ensemble, synthesize, ScenarioConfig};

    #[test]
    fn exact_fit_on_true_frequencies() {
        let parts = [(1.0, 0.4, 0.3), (0.2, 1.1, -2.0), (3.0, -0.7, 1.0)];
        let s = signal(&parts, 200, 0.0, 0);
        let fit = ls_amp_phase(&s, &[0.4, 1.1, -0.7]).unwrap();
        for ((a, p), &(ta, _, tp)) in fit.iter().zip(&parts) {
            assert!((a - ta).abs() < 1e-10);
            assert!((p - tp).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_frequency_is_ill_conditioned() {
        let s = signal(&[(1.0, 0.4, 0.0)], 64, 0.0, 0);
        assert!(matches!(
            ls_amp_phase(&s, &[0.4, 0.4]),
            Err(Error::IllConditioned { .. })
        ));
        assert!(ls_amp_phase(&s, &[0.1; 17]).is_err());
        assert!(ls_amp_phase(&s, &[]).unwrap().is_empty());
    }

    #[test]
    fn perturbed_frequencies_at_30_db() {
        let cfg = ScenarioConfig {
            snr_db: 30.0,
            min_separation: Some(4.0 / 2000.0),
            seed: 5,
            ..ScenarioConfig::default()
        };
        let e = random_ensemble(&cfg).unwrap();
        let s = synthesize(&e, cfg.n, cfg.noise(), 17).unwrap();
        let bin = std::f64::consts::TAU / cfg.n as f64;
        let freqs: Vec<f64> = e.components().iter().map(|c| c.omega + 0.1 * bin).collect();
        let fit = ls_amp_phase(&s, &freqs).unwrap();
        for ((a, _), c) in fit.iter().zip(e.components()) {
            assert!(
                (a / c.amplitude - 1.0).abs() <= 0.05,
                "{a} vs {}",
                c.amplitude
            );
        }
    }
}
