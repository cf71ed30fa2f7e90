//! Cramér-Rao bounds for the sum-parameters.
//!
//! Two routes are provided and deliberately kept independent:
//!
//! * closed forms in `σ²`, `P_sig`, `ts` and `N` ([`ClosedFormCrb`]),
//! * a numerical oracle that builds the exact `3K×3K` Fisher information of
//!   the deterministic model ([`fim_full`]), inverts it and maps the result
//!   through the Jacobian of `(Σ, Ω, Re Φ, Im Φ)` ([`crb_numerical`]).
//!
//! [`crb_audit`] puts the two side by side. The closed forms are not expected
//! to agree with the oracle in general; the audit reports the ratios rather
//! than asserting them.
//!
//! Noise convention: `w ~ CN(0, σ²)` with `σ²` the total complex variance, so
//! the Fisher information is `J = (2/σ²)·Re(Dᴴ D)` with `D` the `N×3K`
//! derivative matrix of the noiseless signal.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::signal::{total_power, CisoidEnsemble};
use crate::{Error, Result};

/// Largest admissible condition number of the (equilibrated) FIM.
pub const FIM_CONDITION_LIMIT: f64 = 1e12;

/// Ratios of closed form to oracle outside this band are flagged by the audit.
pub const AUDIT_RATIO_BAND: (f64, f64) = (0.95, 1.05);

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn check_len(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::TooShort { min, got: n })
    } else {
        Ok(())
    }
}

/// `σ² / (2·P_sig)`
pub fn crb_sigma_closed(sigma2: f64, p_sig: f64) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("p_sig", p_sig)?;
    Ok(sigma2 / (2.0 * p_sig))
}

/// `12σ² / (P_sig·ts²·N·(N²−1))`; the `1 + O(N⁻²)` factor is taken as exactly 1.
pub fn crb_omega_closed(sigma2: f64, p_sig: f64, ts: f64, n: usize) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("p_sig", p_sig)?;
    check_positive("ts", ts)?;
    check_len(n, 2)?;
    let n = n as f64;
    Ok(12.0 * sigma2 / (p_sig * ts * ts * n * (n * n - 1.0)))
}

/// `2σ²(2N+1) / (P_sig·N·(N+1))`
pub fn crb_phi_closed(sigma2: f64, p_sig: f64, n: usize) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("p_sig", p_sig)?;
    check_len(n, 1)?;
    let n = n as f64;
    Ok(2.0 * sigma2 * (2.0 * n + 1.0) / (p_sig * n * (n + 1.0)))
}

/// Large-`N` form `4σ² / (P_sig·N)` of [`crb_phi_closed`].
pub fn crb_phi_closed_approx(sigma2: f64, p_sig: f64, n: usize) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("p_sig", p_sig)?;
    check_len(n, 1)?;
    Ok(4.0 * sigma2 / (p_sig * n as f64))
}

/// Classical single-tone frequency bound `12σ² / (a²·ts²·N·(N²−1))`.
pub fn crb_single_tone(sigma2: f64, a_k: f64, ts: f64, n: usize) -> Result<f64> {
    check_positive("a_k", a_k)?;
    crb_omega_closed(sigma2, a_k * a_k, ts, n)
}

/// The three closed-form bounds evaluated together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCrb {
    pub crb_sigma: f64,
    pub crb_omega: f64,
    /// Scalar bound for the complex `Φ`; compare with the trace of the
    /// `(Re Φ, Im Φ)` block of the oracle.
    pub crb_phi: f64,
}

impl ClosedFormCrb {
    pub fn evaluate(sigma2: f64, p_sig: f64, ts: f64, n: usize) -> Result<Self> {
        Ok(Self {
            crb_sigma: crb_sigma_closed(sigma2, p_sig)?,
            crb_omega: crb_omega_closed(sigma2, p_sig, ts, n)?,
            crb_phi: crb_phi_closed(sigma2, p_sig, n)?,
        })
    }

    pub fn for_ensemble(ensemble: &CisoidEnsemble, sigma2: f64, n: usize) -> Result<Self> {
        Self::evaluate(sigma2, total_power(ensemble), ensemble.ts(), n)
    }
}

/// Which of a component's three parameters a FIM row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Amplitude,
    Frequency,
    Phase,
}

/// Fisher information of `α = [a₁, ω₁, φ₁, …, a_K, ω_K, φ_K]`, components in
/// canonical order.
#[derive(Debug, Clone)]
pub struct FimMatrix {
    pub entries: DMatrix<f64>,
    /// Row index → (component index in canonical order, parameter kind).
    pub param_layout: Vec<(usize, ParamKind)>,
}

fn layout(k: usize) -> Vec<(usize, ParamKind)> {
    (0..k)
        .flat_map(|i| {
            [
                (i, ParamKind::Amplitude),
                (i, ParamKind::Frequency),
                (i, ParamKind::Phase),
            ]
        })
        .collect()
}

/// Exact FIM `(2/σ²)·Re Σₙ (∂s/∂αᵢ)* (∂s/∂αⱼ)` of the deterministic model.
/// No frequency-separation approximation is made.
pub fn fim_full(ensemble: &CisoidEnsemble, sigma2: f64, n: usize) -> Result<FimMatrix> {
    check_positive("sigma2", sigma2)?;
    check_len(n, 2)?;
    let comps = ensemble.canonical();
    let ts = ensemble.ts();
    let dim = 3 * comps.len();

    let mut deriv = DMatrix::<Complex64>::zeros(n, dim);
    for (k, c) in comps.iter().enumerate() {
        for i in 0..n {
            let t = i as f64 * ts;
            let e = Complex64::from_polar(1.0, c.omega * t + c.phase);
            let je = Complex64::new(0.0, 1.0) * e * c.amplitude;
            deriv[(i, 3 * k)] = e;
            deriv[(i, 3 * k + 1)] = je * t;
            deriv[(i, 3 * k + 2)] = je;
        }
    }
    let gram = deriv.adjoint() * &deriv;
    let scale = 2.0 / sigma2;
    let mut entries = DMatrix::<f64>::from_fn(dim, dim, |i, j| scale * gram[(i, j)].re);
    // Re(DᴴD) is symmetric up to rounding; make it exact.
    entries = (&entries + entries.transpose()) * 0.5;
    Ok(FimMatrix {
        entries,
        param_layout: layout(comps.len()),
    })
}

/// `∂(Σ, Ω, Re Φ, Im Φ) / ∂α`, a `4×3K` matrix with columns in canonical order.
#[derive(Debug, Clone)]
pub struct SumParamJacobian {
    pub entries: DMatrix<f64>,
}

pub fn jacobian_sum_params(ensemble: &CisoidEnsemble) -> SumParamJacobian {
    let comps = ensemble.canonical();
    let mut j = DMatrix::<f64>::zeros(4, 3 * comps.len());
    for (k, c) in comps.iter().enumerate() {
        let (a, w) = (c.amplitude, c.omega);
        let (sin, cos) = c.phase.sin_cos();
        let (ca, cw, cp) = (3 * k, 3 * k + 1, 3 * k + 2);
        j[(0, ca)] = 1.0;
        j[(1, ca)] = 2.0 * a * w;
        j[(1, cw)] = a * a;
        j[(2, ca)] = 2.0 * a * cos;
        j[(2, cp)] = -a * a * sin;
        j[(3, ca)] = 2.0 * a * sin;
        j[(3, cp)] = a * a * cos;
    }
    SumParamJacobian { entries: j }
}

/// Inverse of a FIM together with the condition number it was judged by.
#[derive(Debug, Clone)]
pub struct FimInverse {
    pub inverse: DMatrix<f64>,
    /// Condition number of the diagonally equilibrated FIM `D⁻½ J D⁻½`.
    pub condition_number: f64,
}

/// Inverts a FIM after Jacobi equilibration.
///
/// Amplitude, frequency and phase rows differ in scale by roughly `N²`, so
/// the raw condition number says little about solvability; the guard is
/// applied to the equilibrated matrix instead. Inversion is by Cholesky and
/// fails (rather than falling back to a pseudo-inverse) above
/// [`FIM_CONDITION_LIMIT`].
pub fn invert_fim(fim: &DMatrix<f64>) -> Result<FimInverse> {
    let dim = fim.nrows();
    let d: Vec<f64> = (0..dim).map(|i| fim[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::IllConditioned {
            what: "Fisher information matrix",
            condition: f64::INFINITY,
            limit: FIM_CONDITION_LIMIT,
        });
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let scaled = DMatrix::from_fn(dim, dim, |i, j| fim[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);

    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= FIM_CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            what: "Fisher information matrix",
            condition,
            limit: FIM_CONDITION_LIMIT,
        });
    }
    let chol = scaled.cholesky().ok_or(Error::IllConditioned {
        what: "Fisher information matrix",
        condition,
        limit: FIM_CONDITION_LIMIT,
    })?;
    let scaled_inv = chol.inverse();
    let inverse = DMatrix::from_fn(dim, dim, |i, j| {
        scaled_inv[(i, j)] * inv_sqrt[i] * inv_sqrt[j]
    });
    Ok(FimInverse {
        inverse: (&inverse + inverse.transpose()) * 0.5,
        condition_number: condition,
    })
}

/// Oracle covariance bound for `θ = (Σ, Ω, Re Φ, Im Φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalCrb {
    pub covariance: Matrix4<f64>,
    pub condition_number: f64,
    /// Numerical rank of `covariance`; below 4 when `3K < 4`.
    pub rank: usize,
}

impl NumericalCrb {
    /// Diagonal `(Σ, Ω, Re Φ, Im Φ)`.
    pub fn diagonal(&self) -> [f64; 4] {
        [
            self.covariance[(0, 0)],
            self.covariance[(1, 1)],
            self.covariance[(2, 2)],
            self.covariance[(3, 3)],
        ]
    }

    /// Trace of the `(Re Φ, Im Φ)` block, the scalar bound for complex `Φ`.
    pub fn phi_trace(&self) -> f64 {
        self.covariance[(2, 2)] + self.covariance[(3, 3)]
    }
}

/// `J_θα · FIM(α)⁻¹ · J_θαᵀ`.
pub fn crb_numerical(ensemble: &CisoidEnsemble, sigma2: f64, n: usize) -> Result<NumericalCrb> {
    let fim = fim_full(ensemble, sigma2, n)?;
    let inv = invert_fim(&fim.entries)?;
    let jac = jacobian_sum_params(ensemble).entries;
    let cov = &jac * &inv.inverse * jac.transpose();
    let covariance = Matrix4::from_fn(|i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
    let eig = covariance.symmetric_eigenvalues();
    let top = eig.amax();
    let rank = eig.iter().filter(|&&v| v > 1e-10 * top).count();
    Ok(NumericalCrb {
        covariance,
        condition_number: inv.condition_number,
        rank,
    })
}

/// Closed-form over oracle ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbRatios {
    pub sigma: f64,
    pub omega: f64,
    /// `crb_phi` over the trace of the oracle `(Re Φ, Im Φ)` block.
    pub phi: f64,
}

/// Side-by-side comparison of the closed forms with the numerical oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    pub closed_form: ClosedFormCrb,
    /// Oracle covariance bound, row-major, order `(Σ, Ω, Re Φ, Im Φ)`.
    pub numerical: [[f64; 4]; 4],
    pub ratios: CrbRatios,
    /// `min |ωᵢ − ωⱼ|·ts·N`; `None` when `K = 1`.
    pub separation_metric: Option<f64>,
    pub rank: usize,
    pub condition_number: f64,
    /// Names of the ratios outside [`AUDIT_RATIO_BAND`].
    pub flagged: Vec<String>,
}

pub fn crb_audit(ensemble: &CisoidEnsemble, sigma2: f64, n: usize) -> Result<CrbReport> {
    let closed_form = ClosedFormCrb::for_ensemble(ensemble, sigma2, n)?;
    let num = crb_numerical(ensemble, sigma2, n)?;
    let ratios = CrbRatios {
        sigma: closed_form.crb_sigma / num.covariance[(0, 0)],
        omega: closed_form.crb_omega / num.covariance[(1, 1)],
        phi: closed_form.crb_phi / num.phi_trace(),
    };
    let (lo, hi) = AUDIT_RATIO_BAND;
    let flagged = [
        ("sigma", ratios.sigma),
        ("omega", ratios.omega),
        ("phi", ratios.phi),
    ]
    .into_iter()
    .filter(|(_, r)| !(lo..=hi).contains(r))
    .map(|(name, _)| name.to_string())
    .collect();
    let mut numerical = [[0.0; 4]; 4];
    for (i, row) in numerical.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = num.covariance[(i, j)];
        }
    }
    Ok(CrbReport {
        closed_form,
        numerical,
        ratios,
        separation_metric: ensemble.separation_metric(n),
        rank: num.rank,
        condition_number: num.condition_number,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ground_truth_sum_params, Cisoid, SumParams};
    use proptest::prelude::*;
    use std::f64::consts::PI;

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

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// Negative expected log-likelihood `‖s(α) − s(α')‖²/σ²` (up to a constant).
    fn expected_nll(truth: &[f64], probe: &[f64], ts: f64, n: usize, sigma2: f64) -> f64 {
        let signal = |p: &[f64], i: usize| -> Complex64 {
            p.chunks(3)
                .map(|c| Complex64::from_polar(c[0], c[1] * i as f64 * ts + c[2]))
                .sum()
        };
        (0..n)
            .map(|i| (signal(truth, i) - signal(probe, i)).norm_sqr())
            .sum::<f64>()
            / sigma2
    }

    /// Brute-force FIM: central second differences of the expected NLL.
    fn fd_fim(alpha: &[f64], ts: f64, n: usize, sigma2: f64) -> DMatrix<f64> {
        let h = 1e-4;
        let dim = alpha.len();
        DMatrix::from_fn(dim, dim, |i, j| {
            let eval = |si: f64, sj: f64| {
                let mut p = alpha.to_vec();
                p[i] += si * h;
                p[j] += sj * h;
                expected_nll(alpha, &p, ts, n, sigma2)
            };
            (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
        })
    }

    #[test]
    fn closed_form_sigma_examples() {
        assert_eq!(crb_sigma_closed(1.0, 2.0).unwrap(), 0.25);
        assert_eq!(crb_sigma_closed(2.0, 1.0).unwrap(), 1.0);
        for s2 in [0.1, 1.0, 7.0] {
            let a = crb_sigma_closed(s2, 3.0).unwrap();
            let b = crb_sigma_closed(s2, 6.0).unwrap();
            assert!((a / b - 2.0).abs() < 1e-15);
        }
        assert!(crb_sigma_closed(0.0, 1.0).is_err());
        assert!(crb_sigma_closed(1.0, -1.0).is_err());
    }

    #[test]
    fn closed_form_omega_examples() {
        let v = crb_omega_closed(1.0, 1.0, 1.0, 100).unwrap();
        assert_eq!(v, 12.0 / 999_900.0);
        assert!(rel(v, 1.20012e-5) < 1e-5);
        let v4 = crb_omega_closed(1.0, 4.0, 1.0, 100).unwrap();
        assert!(rel(v4, 3.0003e-6) < 1e-4);
        let big = crb_omega_closed(1.0, 1.0, 1.0, 10_000).unwrap();
        let bigger = crb_omega_closed(1.0, 1.0, 1.0, 20_000).unwrap();
        assert!((big / bigger - 8.0).abs() < 1e-6);
        assert!(crb_omega_closed(1.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn closed_form_phi_examples() {
        let v = crb_phi_closed(1.0, 1.0, 100).unwrap();
        assert_eq!(v, 402.0 / 10_100.0);
        assert!(rel(v, 0.039802) < 1e-5);
        assert!(rel(crb_phi_closed_approx(1.0, 1.0, 100).unwrap(), 0.04) < 1e-15);
        for n in [100usize, 1000, 12345] {
            let ratio =
                crb_phi_closed(1.0, 1.0, n).unwrap() / crb_phi_closed_approx(1.0, 1.0, n).unwrap();
            assert!((ratio - 1.0).abs() <= 1.0 / n as f64);
        }
        assert!(crb_phi_closed(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn single_tone_examples() {
        let v = crb_single_tone(1.0, 1.0, 1.0, 100).unwrap();
        assert!(rel(v, 1.20012e-5) < 1e-5);
        for a in [0.3, 1.0, 2.5] {
            assert_eq!(
                crb_single_tone(1.3, a, 0.1, 64).unwrap(),
                crb_omega_closed(1.3, a * a, 0.1, 64).unwrap()
            );
            let r = crb_single_tone(1.0, a, 1.0, 50).unwrap()
                / crb_single_tone(1.0, 2.0 * a, 1.0, 50).unwrap();
            assert!((r - 4.0).abs() < 1e-12);
        }
        assert!(crb_single_tone(1.0, 0.0, 1.0, 10).is_err());
    }

    proptest! {
        #[test]
        fn closed_forms_are_monotone_and_linear(
            s2 in 0.01f64..100.0, p in 0.01f64..100.0, n in 2usize..5000
        ) {
            let c = ClosedFormCrb::evaluate(s2, p, 1.0, n).unwrap();
            let c2 = ClosedFormCrb::evaluate(2.0 * s2, p, 1.0, n).unwrap();
            prop_assert!(rel(c2.crb_sigma, 2.0 * c.crb_sigma) < 1e-14);
            prop_assert!(rel(c2.crb_omega, 2.0 * c.crb_omega) < 1e-14);
            prop_assert!(rel(c2.crb_phi, 2.0 * c.crb_phi) < 1e-14);
            let cn = ClosedFormCrb::evaluate(s2, p, 1.0, n + 1).unwrap();
            prop_assert!(cn.crb_omega < c.crb_omega && cn.crb_phi < c.crb_phi);
            let cp = ClosedFormCrb::evaluate(s2, 1.5 * p, 1.0, n).unwrap();
            prop_assert!(cp.crb_sigma < c.crb_sigma && cp.crb_omega < c.crb_omega && cp.crb_phi < c.crb_phi);
        }
    }

    // Oracle for the hand case: K=1, a=1, ts=1, σ²=2, N=2.
    #[test]
    fn fim_hand_case_matches_finite_difference_oracle() {
        let alpha = [1.0, 0.4, 0.2];
        let fd = fd_fim(&alpha, 1.0, 2, 2.0);
        let expected = [
            (0, 0, 2.0),
            (1, 1, 1.0),
            (2, 2, 2.0),
            (1, 2, 1.0),
            (0, 1, 0.0),
            (0, 2, 0.0),
        ];
        for &(i, j, v) in &expected {
            assert!(
                (fd[(i, j)] - v).abs() < 1e-6,
                "oracle ({i},{j}) = {}",
                fd[(i, j)]
            );
        }
        let fim = fim_full(&ens(&[(1.0, 0.4, 0.2)], 1.0), 2.0, 2).unwrap();
        for &(i, j, v) in &expected {
            assert!((fim.entries[(i, j)] - v).abs() < 1e-12);
            assert!((fim.entries[(j, i)] - v).abs() < 1e-12);
        }
        assert_eq!(fim.param_layout[1], (0, ParamKind::Frequency));
    }

    #[test]
    fn fim_matches_oracle_for_two_components() {
        let e = ens(&[(1.0, 0.4, 0.2), (0.7, 1.1, -2.0)], 0.5);
        let alpha: Vec<f64> = e
            .canonical()
            .iter()
            .flat_map(|c| [c.amplitude, c.omega, c.phase])
            .collect();
        let fd = fd_fim(&alpha, 0.5, 12, 0.8);
        let fim = fim_full(&e, 0.8, 12).unwrap();
        let scale = fim.entries.amax();
        assert!((&fd - &fim.entries).amax() < 1e-5 * scale);
    }

    #[test]
    fn well_separated_cross_blocks_are_small() {
        let n = 256;
        // |ω₁ − ω₂|·N = 0.5·256 = 128 ≥ 100
        let e = ens(&[(1.0, 0.5, 0.3), (0.8, 1.0, -1.0)], 1.0);
        let f = fim_full(&e, 1.0, n).unwrap().entries;
        for r in 0..3 {
            for c in 0..3 {
                let cross = f[(r, 3 + c)].abs();
                let gm = (f[(r, r)] * f[(3 + c, 3 + c)]).sqrt();
                assert!(cross <= 0.05 * gm, "block ({r},{c}): {cross} vs {gm}");
            }
        }
    }

    #[test]
    fn jacobian_single_component() {
        let j = jacobian_sum_params(&ens(&[(2.0, 0.3, 0.0)], 1.0)).entries;
        assert!((j[(1, 0)] - 1.2).abs() < 1e-15);
        assert_eq!(j[(1, 1)], 4.0);
        assert_eq!(j[(3, 2)], 4.0);
        assert_eq!(j[(2, 2)], 0.0);
        assert_eq!(
            j.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0]
        );
    }

    fn fd_jacobian(e: &CisoidEnsemble) -> DMatrix<f64> {
        let comps = e.canonical();
        let mut out = DMatrix::zeros(4, 3 * comps.len());
        for (k, c) in comps.iter().enumerate() {
            for p in 0..3 {
                let h = 1e-6 * [c.amplitude, c.omega.abs().max(1.0), 1.0][p];
                let eval = |s: f64| -> [f64; 4] {
                    let mut cs = comps.clone();
                    let mut v = [cs[k].amplitude, cs[k].omega, cs[k].phase];
                    v[p] += s * h;
                    cs[k] = Cisoid {
                        amplitude: v[0],
                        omega: v[1],
                        phase: v[2],
                    };
                    let sp: SumParams = SumParams::from_components(
                        cs.iter().map(|c| (c.amplitude, c.omega, c.phase)),
                    );
                    sp.as_array()
                };
                let (up, dn) = (eval(1.0), eval(-1.0));
                for r in 0..4 {
                    out[(r, 3 * k + p)] = (up[r] - dn[r]) / (2.0 * h);
                }
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let e = ens(&[(1.5, 0.3, 2.0), (0.2, -1.0, -0.5), (3.0, 2.0, 3.0)], 1.0);
        let an = jacobian_sum_params(&e).entries;
        let fd = fd_jacobian(&e);
        for r in 0..4 {
            let scale = an.row(r).amax();
            for c in 0..an.ncols() {
                assert!((an[(r, c)] - fd[(r, c)]).abs() <= 1e-6 * scale, "({r},{c})");
            }
        }
        // the finite-difference oracle must see the same function
        let g = ground_truth_sum_params(&e).as_array();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_component_sigma_bound_is_sigma2_over_2n() {
        for (n, s2) in [(16usize, 1.0), (100, 0.3), (1000, 2.0)] {
            let e = ens(&[(1.0, 0.7, 0.4)], 1.0);
            let num = crb_numerical(&e, s2, n).unwrap();
            assert!(rel(num.covariance[(0, 0)], s2 / (2.0 * n as f64)) < 1e-9);
            assert!(num.rank < 4);
        }
    }

    #[test]
    fn single_component_omega_entry_matches_hand_chain_rule() {
        let (a, w, p, s2, n) = (1.3, 0.9, 0.2, 0.5, 64usize);
        let e = ens(&[(a, w, p)], 1.0);
        let num = crb_numerical(&e, s2, n).unwrap();
        // Block inverse by hand: a is decoupled; the (ω, φ) block is
        // (2a²/σ²)·[[Σn², Σn], [Σn, N]].
        let nf = n as f64;
        let s1 = nf * (nf - 1.0) / 2.0;
        let s2n = nf * (nf - 1.0) * (2.0 * nf - 1.0) / 6.0;
        let g = 2.0 * a * a / s2;
        let det = g * g * (s2n * nf - s1 * s1);
        let var_a = s2 / (2.0 * nf);
        let var_w = g * nf / det;
        let grad = [2.0 * a * w, a * a];
        let hand = grad[0] * grad[0] * var_a + grad[1] * grad[1] * var_w;
        assert!(rel(num.covariance[(1, 1)], hand) < 1e-9);
    }

    /// With complex noise of total variance σ², the single-tone frequency
    /// bound from the exact FIM is 6σ²/(a²ts²N(N²−1)), half the classical
    /// expression quoted for [`crb_single_tone`].
    #[test]
    fn oracle_single_tone_frequency_bound_is_half_the_classical_form() {
        for n in [16usize, 128, 1024] {
            let e = ens(&[(0.8, 0.3, 1.0)], 0.5);
            let fim = fim_full(&e, 1.7, n).unwrap();
            let inv = invert_fim(&fim.entries).unwrap();
            let classical = crb_single_tone(1.7, 0.8, 0.5, n).unwrap();
            assert!(rel(inv.inverse[(1, 1)], 0.5 * classical) < 1e-8);
        }
    }

    #[test]
    fn coincident_frequencies_are_ill_conditioned() {
        let e = ens(&[(1.0, 0.5, 0.0), (1.0, 0.5, 1.0)], 1.0);
        assert!(matches!(
            crb_numerical(&e, 1.0, 64),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn audit_report_schema() {
        let e = ens(&[(1.0, 0.5, 0.0), (0.5, 1.5, 1.0)], 1.0);
        let r = crb_audit(&e, 1.0, 128).unwrap();
        assert!(r.separation_metric.is_some());
        assert!(
            r.ratios.sigma.is_finite() && r.ratios.omega.is_finite() && r.ratios.phi.is_finite()
        );
        let single = crb_audit(&ens(&[(1.0, 0.5, 0.0)], 1.0), 1.0, 128).unwrap();
        assert_eq!(single.separation_metric, None);
        let num = crb_numerical(&ens(&[(1.0, 0.5, 0.0)], 1.0), 1.0, 128).unwrap();
        assert_eq!(
            single.ratios.omega,
            single.closed_form.crb_omega / num.covariance[(1, 1)]
        );
    }

    #[test]
    fn audit_ratios_invariant_to_noise_rescaling() {
        let e = ens(&[(1.0, 0.5, 0.0), (0.5, 1.5, 1.0), (2.0, -1.0, -2.0)], 1.0);
        let r = crb_audit(&e, 0.7, 200).unwrap();
        for c in [0.1f64, 3.0] {
            let rs = crb_audit(&e, 0.7 * c, 200).unwrap();
            assert!(rel(rs.ratios.sigma, r.ratios.sigma) < 1e-8);
            assert!(rel(rs.ratios.phi, r.ratios.phi) < 1e-8);
            assert!(rel(rs.ratios.omega, r.ratios.omega) < 1e-8);
        }
    }

    /// Scaling all amplitudes by c and σ² by c² leaves the closed forms
    /// unchanged but scales the oracle variances by c² (Σ) and c⁴ (Ω, Φ).
    #[test]
    fn audit_ratios_under_common_amplitude_rescaling() {
        let e = ens(&[(1.0, 0.5, 0.0), (0.5, 1.5, 1.0), (2.0, -1.0, -2.0)], 1.0);
        let r = crb_audit(&e, 0.7, 200).unwrap();
        for c in [0.1f64, 3.0] {
            let rs = crb_audit(&e.scaled(c).unwrap(), 0.7 * c * c, 200).unwrap();
            assert!(rel(rs.closed_form.crb_sigma, r.closed_form.crb_sigma) < 1e-12);
            assert!(rel(rs.ratios.sigma * c.powi(2), r.ratios.sigma) < 1e-8);
            assert!(rel(rs.ratios.omega * c.powi(4), r.ratios.omega) < 1e-8);
            assert!(rel(rs.ratios.phi * c.powi(4), r.ratios.phi) < 1e-8);
        }
    }

    fn arb_ensemble() -> impl Strategy<Value = CisoidEnsemble> {
        prop::collection::vec((0.05f64..5.0, -3.0f64..3.0, -PI..PI), 1..6).prop_map(|parts| {
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
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fim_is_symmetric_psd(e in arb_ensemble(), n in 2usize..200, s2 in 0.01f64..10.0) {
            let f = fim_full(&e, s2, n).unwrap().entries;
            let scale = f.amax();
            prop_assert!((&f - f.transpose()).amax() <= 1e-12 * scale);
            let eig = SymmetricEigen::new(f).eigenvalues;
            prop_assert!(eig.min() >= -1e-9 * eig.max());
        }
    }
}
