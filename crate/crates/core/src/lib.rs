//! Estimation of global "sum-parameters" of multi-component complex
//! exponential (cisoid) signals.
//!
//! For a signal `x(n) = Σ a_k exp(j(ω_k n Ts + φ_k)) + w(n)` the toolkit
//! works with the permutation-invariant vector
//!
//! * `Σ = Σ a_k` (amplitude sum),
//! * `Ω = Σ a_k² ω_k` (power-weighted frequency sum),
//! * `Φ = Σ a_k² exp(jφ_k)` (power-weighted phasor sum),
//!
//! and provides
//!
//! * [`signal`]: the signal model, random scenarios and ground truth,
//! * [`bounds`]: closed-form bounds, the full Fisher information matrix and
//!   the Jacobian transform used as a numerical oracle,
//! * [`spectrum`]: windows, periodograms, noise floor and zoom refinement,
//! * [`estimators`]: EGEM plus the Zoom-IpFFT and Root-MUSIC baselines,
//! * [`bench`]: the seeded Monte-Carlo harness,
//! * [`io`]: CSV/JSON readers and writers shared with the CLI.

pub mod bench;
pub mod bounds;
mod error;
pub mod estimators;
pub mod io;
pub mod signal;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
