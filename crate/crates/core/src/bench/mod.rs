//! Seeded Monte-Carlo harness: scenario grid, per-trial records, NRMSE
//! summaries and their CSV forms.
//!
//! NRMSE is `RMSE / √(mean CRB)` over the trials of a cell, with the mean
//! taken over the per-trial numerical oracle bounds. A closed-form
//! normalized column is emitted alongside; for `Re Φ` and `Im Φ` it uses half
//! the scalar `Φ` bound.

mod report;

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{crb_numerical, ClosedFormCrb};
use crate::estimators::{
    egem_estimate, root_music_estimate, zoom_ipfft_estimate, EgemConfig, Method,
};
use crate::signal::{
    ground_truth_sum_params, random_ensemble, synthesize, ScenarioConfig, SumParams,
};
use crate::{Error, Result};

pub use report::{paper_table_repro, ClaimRow, ClaimsReport, CONFIDENCE};

/// Parameter labels in `(Σ, Ω, Re Φ, Im Φ)` order.
pub const PARAMETERS: [&str; 4] = SumParams::PARAMETER_NAMES;

pub const TRIALS_HEADER: [&str; 21] = [
    "trial_index",
    "seed",
    "n",
    "snr_db",
    "method",
    "true_sigma",
    "true_omega",
    "true_re_phi",
    "true_im_phi",
    "hat_sigma",
    "hat_omega",
    "hat_re_phi",
    "hat_im_phi",
    "crb_sigma",
    "crb_omega",
    "crb_re_phi",
    "crb_im_phi",
    "crb_closed_sigma",
    "crb_closed_omega",
    "crb_closed_phi",
    "failure",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "n",
    "snr_db",
    "method",
    "parameter",
    "rmse",
    "mean_crb",
    "nrmse",
    "nrmse_closed",
    "trials_used",
    "failures",
];

pub const TIMING_HEADER: [&str; 5] = ["trial_index", "n", "snr_db", "method", "elapsed_s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub k: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Template for frequency range, dynamic range and `ts`; `k`, `n`,
    /// `snr_db` and `seed` are overwritten per cell and trial.
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    /// Draw a new ensemble every trial; otherwise one ensemble per cell.
    pub redraw_per_trial: bool,
    /// Disable the default `4/N` minimum frequency gap.
    pub raw: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub egem: EgemConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![125, 250, 500, 1000, 2000, 4000],
            k: 12,
            snr_grid_db: (0..=12).map(|i| -10.0 + 5.0 * i as f64).collect(),
            trials: 200,
            base_seed: 0,
            scenario: ScenarioConfig::default(),
            methods: Method::ALL.to_vec(),
            redraw_per_trial: true,
            raw: false,
            threads: None,
            egem: EgemConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be ≥ 1".into()));
        }
        if self.n_values.is_empty() || self.snr_grid_db.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidInput(
                "n_values, snr_grid_db and methods must be non-empty".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be ≥ 1".into()));
        }
        self.egem.validate()?;
        for &n in &self.n_values {
            for &snr in &self.snr_grid_db {
                self.cell_scenario(n, snr, 0).validate()?;
            }
        }
        Ok(())
    }

    fn cell_scenario(&self, n: usize, snr_db: f64, seed: u64) -> ScenarioConfig {
        let min_separation = match (self.raw, self.scenario.min_separation) {
            (true, _) => None,
            (false, Some(gap)) => Some(gap),
            (false, None) => Some(4.0 / n as f64),
        };
        ScenarioConfig {
            k: self.k,
            n,
            snr_db,
            seed,
            min_separation,
            ..self.scenario.clone()
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `base_seed ⊕ mix(trial, n index, snr index)`.
pub fn trial_seed(base_seed: u64, trial_index: usize, n_index: usize, snr_index: usize) -> u64 {
    let key = ((n_index as u64) << 48) ^ ((snr_index as u64) << 32) ^ trial_index as u64;
    base_seed ^ splitmix64(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub seed: u64,
    pub n: usize,
    pub snr_db: f64,
    pub method: Method,
    pub theta_true: SumParams,
    /// `None` when the estimator failed.
    pub theta_hat: Option<SumParams>,
    pub crb_numerical_diag: [f64; 4],
    /// `(Σ, Ω, Φ)` closed forms.
    pub crb_closed: [f64; 3],
    /// Kept out of `trials.csv` so that file is reproducible; see
    /// [`write_timing_csv`].
    #[serde(skip)]
    pub elapsed: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub snr_db: f64,
    pub method: Method,
    pub parameter: String,
    pub rmse: f64,
    pub mean_crb: f64,
    pub nrmse: f64,
    pub nrmse_closed: f64,
    pub trials_used: usize,
    pub failures: usize,
}

/// `√(mean(e²)) / √crb`.
pub fn nrmse(errors: &[f64], crb: f64) -> Result<f64> {
    if !(crb > 0.0) {
        return Err(Error::InvalidInput(format!(
            "crb must be positive, got {crb}"
        )));
    }
    if errors.is_empty() {
        return Err(Error::InvalidInput("no errors to summarize".into()));
    }
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok((mse / crb).sqrt())
}

#[derive(Debug, Clone, Copy)]
struct WorkItem {
    n_index: usize,
    snr_index: usize,
    trial_index: usize,
}

fn run_method(
    method: Method,
    signal: &crate::signal::SampledSignal,
    k: usize,
    egem: &EgemConfig,
) -> Result<SumParams> {
    let r = match method {
        Method::Egem => egem_estimate(signal, egem)?,
        Method::Ipfft => zoom_ipfft_estimate(signal, k)?,
        Method::Rootmusic => root_music_estimate(signal, k)?,
    };
    let v = r.theta_hat.as_array();
    if v.iter().all(|x| x.is_finite()) {
        Ok(r.theta_hat)
    } else {
        Err(Error::Degenerate("non-finite estimate".into()))
    }
}

fn run_trial(config: &ExperimentConfig, item: WorkItem) -> Result<Vec<TrialRecord>> {
    let n = config.n_values[item.n_index];
    let snr_db = config.snr_grid_db[item.snr_index];
    let seed = trial_seed(
        config.base_seed,
        item.trial_index,
        item.n_index,
        item.snr_index,
    );
    let ensemble_seed = if config.redraw_per_trial {
        seed
    } else {
        trial_seed(config.base_seed, 0, item.n_index, item.snr_index)
    };
    let scenario = config.cell_scenario(n, snr_db, ensemble_seed);
    let ensemble = random_ensemble(&scenario)?;
    let noise = scenario.noise();
    let signal = synthesize(&ensemble, n, noise, splitmix64(seed))?;
    let theta_true = ground_truth_sum_params(&ensemble);
    let closed = ClosedFormCrb::for_ensemble(&ensemble, noise.sigma2, n)?;
    let crb_closed = [closed.crb_sigma, closed.crb_omega, closed.crb_phi];
    let crb = crb_numerical(&ensemble, noise.sigma2, n);

    Ok(config
        .methods
        .iter()
        .map(|&method| {
            let base = TrialRecord {
                trial_index: item.trial_index,
                seed,
                n,
                snr_db,
                method,
                theta_true,
                theta_hat: None,
                crb_numerical_diag: [f64::NAN; 4],
                crb_closed,
                elapsed: 0.0,
                failure: None,
            };
            let crb = match &crb {
                Ok(c) => c.diagonal(),
                Err(e) => {
                    return TrialRecord {
                        failure: Some(format!("crb: {e}")),
                        ..base
                    }
                }
            };
            let start = Instant::now();
            let outcome = run_method(method, &signal, config.k, &config.egem);
            let elapsed = start.elapsed().as_secs_f64();
            match outcome {
                Ok(theta) => TrialRecord {
                    theta_hat: Some(theta),
                    crb_numerical_diag: crb,
                    elapsed,
                    ..base
                },
                Err(e) => TrialRecord {
                    crb_numerical_diag: crb,
                    elapsed,
                    failure: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect())
}

/// Runs every `(n, snr, trial)` unit, in parallel, and reduces in trial
/// order. Output is independent of thread count and scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Vec<SummaryRow>)> {
    config.validate()?;
    let items: Vec<WorkItem> = (0..config.n_values.len())
        .flat_map(|n_index| {
            (0..config.snr_grid_db.len()).flat_map(move |snr_index| {
                (0..config.trials).map(move |trial_index| WorkItem {
                    n_index,
                    snr_index,
                    trial_index,
                })
            })
        })
        .collect();

    let work = || -> Result<Vec<Vec<TrialRecord>>> {
        items
            .par_iter()
            .map(|&item| run_trial(config, item))
            .collect()
    };
    let per_item = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    // par_iter().collect() preserves input order, which is the grid order.
    let records: Vec<TrialRecord> = per_item.into_iter().flatten().collect();
    let summary = summarize(config, &records)?;
    Ok((records, summary))
}

/// Aggregates records into one row per `(n, snr, method, parameter)`.
pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &n in &config.n_values {
        for &snr_db in &config.snr_grid_db {
            for &method in &config.methods {
                let cell: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| r.n == n && r.snr_db == snr_db && r.method == method)
                    .collect();
                let ok: Vec<&TrialRecord> = cell
                    .iter()
                    .copied()
                    .filter(|r| r.theta_hat.is_some())
                    .collect();
                let failures = cell.len() - ok.len();
                for (p, name) in PARAMETERS.iter().enumerate() {
                    let errors: Vec<f64> = ok
                        .iter()
                        .map(|r| r.theta_hat.unwrap().as_array()[p] - r.theta_true.as_array()[p])
                        .collect();
                    let closed_index = [0, 1, 2, 2][p];
                    let closed_scale = if p >= 2 { 0.5 } else { 1.0 };
                    let (rmse, mean_crb, nrmse_v, nrmse_closed) = if ok.is_empty() {
                        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                    } else {
                        let used = ok.len() as f64;
                        let mean_crb =
                            ok.iter().map(|r| r.crb_numerical_diag[p]).sum::<f64>() / used;
                        let mean_closed = ok
                            .iter()
                            .map(|r| r.crb_closed[closed_index] * closed_scale)
                            .sum::<f64>()
                            / used;
                        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / used).sqrt();
                        (
                            rmse,
                            mean_crb,
                            nrmse(&errors, mean_crb).unwrap_or(f64::NAN),
                            nrmse(&errors, mean_closed).unwrap_or(f64::NAN),
                        )
                    };
                    rows.push(SummaryRow {
                        n,
                        snr_db,
                        method,
                        parameter: (*name).to_string(),
                        rmse,
                        mean_crb,
                        nrmse: nrmse_v,
                        nrmse_closed,
                        trials_used: ok.len(),
                        failures,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "unexpected CSV header {:?}, expected {expected:?}",
            found.iter().collect::<Vec<_>>()
        )))
    }
}

pub fn write_trials_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for r in records {
        let hat = r
            .theta_hat
            .map(|t| t.as_array().map(fmt))
            .unwrap_or_else(|| std::array::from_fn(|_| String::new()));
        let mut row = vec![
            r.trial_index.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            fmt(r.snr_db),
            r.method.to_string(),
        ];
        row.extend(r.theta_true.as_array().map(fmt));
        row.extend(hat);
        row.extend(r.crb_numerical_diag.map(fmt));
        row.extend(r.crb_closed.map(fmt));
        row.push(r.failure.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &TRIALS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| parse_f64(&rec[i]);
        let four = |start: usize| -> Result<[f64; 4]> {
            Ok([f(start)?, f(start + 1)?, f(start + 2)?, f(start + 3)?])
        };
        let theta_hat = if rec[9].is_empty() {
            None
        } else {
            Some(SumParams::from_array(four(9)?))
        };
        out.push(TrialRecord {
            trial_index: parse_usize(&rec[0])?,
            seed: rec[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
            n: parse_usize(&rec[2])?,
            snr_db: f(3)?,
            method: rec[4].parse()?,
            theta_true: SumParams::from_array(four(5)?),
            theta_hat,
            crb_numerical_diag: four(13)?,
            crb_closed: [f(17)?, f(18)?, f(19)?],
            elapsed: 0.0,
            failure: (!rec[20].is_empty()).then(|| rec[20].to_string()),
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt(r.snr_db),
            r.method.to_string(),
            r.parameter.clone(),
            fmt(r.rmse),
            fmt(r.mean_crb),
            fmt(r.nrmse),
            fmt(r.nrmse_closed),
            r.trials_used.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &SUMMARY_HEADER)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                n: parse_usize(&rec[0])?,
                snr_db: parse_f64(&rec[1])?,
                method: rec[2].parse()?,
                parameter: rec[3].to_string(),
                rmse: parse_f64(&rec[4])?,
                mean_crb: parse_f64(&rec[5])?,
                nrmse: parse_f64(&rec[6])?,
                nrmse_closed: parse_f64(&rec[7])?,
                trials_used: parse_usize(&rec[8])?,
                failures: parse_usize(&rec[9])?,
            })
        })
        .collect()
}

/// Per-trial estimator wall time, kept apart from the reproducible CSVs.
pub fn write_timing_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMING_HEADER)?;
    for r in records {
        w.write_record([
            r.trial_index.to_string(),
            r.n.to_string(),
            fmt(r.snr_db),
            r.method.to_string(),
            fmt(r.elapsed),
        ])?;
    }
    w.flush()?;
    Ok(())
}
