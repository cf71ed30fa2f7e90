use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use sumparam::bench::{
    paper_table_repro, read_summary_csv, run_experiment, write_summary_csv, write_timing_csv,
    write_trials_csv, ExperimentConfig,
};
use sumparam::bounds::{crb_audit, crb_numerical, ClosedFormCrb};
use sumparam::estimators::{
    egem_estimate, root_music_estimate, zoom_ipfft_estimate, EgemConfig, EstimationResult, Method,
};
use sumparam::io::{
    read_ensemble_json, read_signal_csv, write_periodogram_csv, write_signal_csv, SignalMeta,
};
use sumparam::signal::{
    ground_truth_sum_params, random_ensemble, snr_db, synthesize, total_power, Cisoid,
    CisoidEnsemble, NoiseModel, ScenarioConfig,
};
use sumparam::spectrum::{periodogram, WindowKind};

#[derive(Parser)]
#[command(
    name = "sumparam",
    version,
    about = "Sum-parameter estimation and Cramér-Rao bounds for multi-cisoid signals",
    after_help = "Frequencies on the command line are in cycles/sample (normalized); \
                  files store rad/s. Exit codes: 0 success, 1 usage or input error, \
                  2 numerical failure (JSON error on stderr)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable JSON to stdout.
    #[arg(long)]
    json: bool,
    /// Output file (or directory for `bench`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a signal from explicit components or a random scenario.
    Synth(SynthArgs),
    /// Estimate the sum-parameters of a signal CSV.
    Estimate(EstimateArgs),
    /// Closed-form (and optionally numerical) bounds.
    Crb(CrbArgs),
    /// Compare closed-form bounds with the Fisher-information oracle.
    Audit(AuditArgs),
    /// Run a Monte-Carlo experiment.
    Bench(BenchArgs),
    /// Rebuild the claims table from a summary CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Number of components (random mode, or a check on the explicit lists).
    #[arg(long)]
    k: Option<usize>,
    /// Amplitudes, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    amp: Vec<f64>,
    /// Frequencies in cycles/sample, comma separated.
    #[arg(
        long = "freq",
        visible_alias = "freq-cycles",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    freq: Vec<f64>,
    /// Phases in radians, comma separated (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phase: Vec<f64>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Total complex noise variance.
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    ts: f64,
    /// Random mode: SNR in dB (noise variance 1).
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    /// Random mode: log-normal amplitude dynamic range in dB (±2 standard deviations).
    #[arg(long, default_value_t = 40.0)]
    dynamic_range_db: f64,
    /// Random mode: disable the 4/N minimum frequency gap.
    #[arg(long)]
    raw: bool,
    /// Also write the ensemble and its ground-truth sum-parameters as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write the Blackman-Harris periodogram (2x zero-pad) as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Signal CSV (n,re,im).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "egem")]
    method: Method,
    /// Model order (required by rootmusic, peak cap for ipfft).
    #[arg(long)]
    order: Option<usize>,
    /// Write EGEM per-iteration snapshots to this CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Known noise variance for EGEM.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 8)]
    max_iter: usize,
}

#[derive(Args)]
struct CrbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    p_sig: Option<f64>,
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    ts: f64,
    /// Ensemble JSON; adds the numerical oracle bounds.
    #[arg(long)]
    ensemble: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// Ensemble JSON; a random scenario is drawn when absent.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    /// Noise variance (defaults to 1, the random-scenario reference).
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Experiment JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (alias of --out).
    #[arg(long, env = "SUMPARAM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Disable the 4/N minimum frequency gap.
    #[arg(long)]
    raw: bool,
    /// Keep one ensemble per (N, SNR) cell.
    #[arg(long)]
    fixed_scenario: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// summary.csv produced by `bench`.
    #[arg(long)]
    summary: PathBuf,
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let c = &args.common;
    let explicit = !args.freq.is_empty() || !args.amp.is_empty();
    let (ensemble, noise) = if explicit {
        let k = args.freq.len();
        if args.amp.len() != k {
            bail!("--amp has {} values but --freq has {k}", args.amp.len());
        }
        if !args.phase.is_empty() && args.phase.len() != k {
            bail!("--phase has {} values but --freq has {k}", args.phase.len());
        }
        if let Some(expected) = args.k {
            if expected != k {
                bail!("--k {expected} does not match {k} components");
            }
        }
        let components = (0..k)
            .map(|i| {
                let omega = std::f64::consts::TAU * args.freq[i] / args.ts;
                Cisoid::new(
                    args.amp[i],
                    omega,
                    args.phase.get(i).copied().unwrap_or(0.0),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        (
            CisoidEnsemble::new(components, args.ts)?,
            NoiseModel::new(args.sigma2)?,
        )
    } else {
        let scenario = ScenarioConfig {
            k: args.k.unwrap_or(12),
            n: args.n,
            snr_db: args.snr_db,
            amp_dynamic_range_db: args.dynamic_range_db,
            min_separation: (!args.raw).then(|| 4.0 / args.n as f64),
            seed: c.seed,
            ts: args.ts,
            ..ScenarioConfig::default()
        };
        (random_ensemble(&scenario)?, scenario.noise())
    };
    let signal = synthesize(&ensemble, args.n, noise, c.seed)?;
    let meta = SignalMeta {
        ts: ensemble.ts(),
        seed: Some(c.seed),
        sigma2: Some(noise.sigma2),
    };
    let truth = ground_truth_sum_params(&ensemble);

    match &c.out {
        Some(path) => write_atomic(path, |w| Ok(write_signal_csv(&signal, &meta, w)?))?,
        None if !c.json => write_signal_csv(&signal, &meta, io::stdout().lock())?,
        None => {}
    }
    if let Some(path) = &args.truth {
        let doc = json!({ "ensemble": ensemble, "ground_truth": truth });
        write_atomic(path, |w| Ok(serde_json::to_writer_pretty(w, &doc)?))?;
    }
    if let Some(path) = &args.spectrum {
        let pgram = periodogram(&signal, WindowKind::BlackmanHarris4, 2)?;
        write_atomic(path, |w| Ok(write_periodogram_csv(&pgram, w)?))?;
    }
    if c.json {
        print_json(&json!({
            "ensemble": ensemble,
            "ground_truth": truth,
            "p_sig": total_power(&ensemble),
            "sigma2": noise.sigma2,
            "snr_db": snr_db(&ensemble, noise),
            "n": args.n,
            "seed": c.seed,
        }))?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let (signal, _) = read_signal_csv(file)?;
    let result: EstimationResult = match args.method {
        Method::Egem => egem_estimate(
            &signal,
            &EgemConfig {
                noise_sigma2: args.sigma2,
                max_iter: args.max_iter,
                trace: args.trace.is_some(),
                ..EgemConfig::default()
            },
        )?,
        Method::Ipfft => zoom_ipfft_estimate(&signal, args.order.unwrap_or(usize::MAX))?,
        Method::Rootmusic => {
            let Some(k) = args.order else {
                bail!("--order is required for rootmusic");
            };
            root_music_estimate(&signal, k)?
        }
    };
    if let Some(path) = &args.trace {
        let rows = result.per_iteration_trace.clone().unwrap_or_default();
        write_atomic(path, |w| {
            writeln!(w, "iteration,omega_hat,re_phi,im_phi,sigma_hat")?;
            for s in rows {
                writeln!(
                    w,
                    "{},{:?},{:?},{:?},{:?}",
                    s.iteration, s.omega_hat, s.phi_hat.re, s.phi_hat.im, s.sigma_hat
                )?;
            }
            Ok(())
        })?;
    }
    let doc = json!({ "method": args.method, "result": result });
    if let Some(path) = &args.common.out {
        write_atomic(path, |w| Ok(serde_json::to_writer_pretty(w, &doc)?))?;
    }
    print_json(&doc)
}

fn crb(args: CrbArgs) -> Result<()> {
    let ensemble = match &args.ensemble {
        Some(p) => Some(read_ensemble_json(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )?),
        None => None,
    };
    let (p_sig, ts) = match (&ensemble, args.p_sig) {
        (_, Some(p)) => (p, ensemble.as_ref().map_or(args.ts, |e| e.ts())),
        (Some(e), None) => (total_power(e), e.ts()),
        (None, None) => bail!("give --p-sig or --ensemble"),
    };
    let closed = ClosedFormCrb::evaluate(args.sigma2, p_sig, ts, args.n)?;
    let numerical = match &ensemble {
        Some(e) => Some(crb_numerical(e, args.sigma2, args.n)?),
        None => None,
    };
    let doc = json!({
        "sigma2": args.sigma2,
        "p_sig": p_sig,
        "n": args.n,
        "ts": ts,
        "closed_form": closed,
        "numerical_diagonal": numerical.as_ref().map(|c| c.diagonal()),
        "numerical_phi_trace": numerical.as_ref().map(|c| c.phi_trace()),
    });
    if let Some(path) = &args.common.out {
        write_atomic(path, |w| Ok(serde_json::to_writer_pretty(w, &doc)?))?;
    }
    if args.common.json {
        return print_json(&doc);
    }
    println!(
        "{:<10} {:>16} {:>16}",
        "parameter", "closed-form", "numerical"
    );
    let num = numerical.as_ref().map(|c| c.diagonal());
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    println!(
        "{:<10} {:>16} {:>16}",
        "Sigma",
        format!("{:.6e}", closed.crb_sigma),
        cell(num.map(|d| d[0]))
    );
    println!(
        "{:<10} {:>16} {:>16}",
        "Omega",
        format!("{:.6e}", closed.crb_omega),
        cell(num.map(|d| d[1]))
    );
    println!(
        "{:<10} {:>16} {:>16}",
        "Phi",
        format!("{:.6e}", closed.crb_phi),
        cell(numerical.as_ref().map(|c| c.phi_trace()))
    );
    Ok(())
}

fn audit(args: AuditArgs) -> Result<()> {
    let ensemble = match &args.ensemble {
        Some(p) => {
            read_ensemble_json(File::open(p).with_context(|| format!("opening {}", p.display()))?)?
        }
        None => random_ensemble(&ScenarioConfig {
            k: args.k,
            n: args.n,
            snr_db: args.snr_db,
            min_separation: Some(4.0 / args.n as f64),
            seed: args.common.seed,
            ..ScenarioConfig::default()
        })?,
    };
    let report = crb_audit(&ensemble, args.sigma2, args.n)?;
    if let Some(path) = &args.common.out {
        write_atomic(path, |w| Ok(serde_json::to_writer_pretty(w, &report)?))?;
    }
    if args.common.json {
        return print_json(&report);
    }
    println!(
        "K = {}, N = {}, sigma2 = {}",
        ensemble.len(),
        args.n,
        args.sigma2
    );
    println!(
        "separation metric: {}",
        report
            .separation_metric
            .map_or_else(|| "n/a (K = 1)".to_string(), |s| format!("{s:.4}"))
    );
    println!(
        "rank {}, condition number {:.3e}",
        report.rank, report.condition_number
    );
    println!(
        "{:<8} {:>14} {:>14} {:>12}",
        "param", "closed", "numerical", "ratio"
    );
    let n = &report.numerical;
    let rows = [
        (
            "Sigma",
            report.closed_form.crb_sigma,
            n[0][0],
            report.ratios.sigma,
        ),
        (
            "Omega",
            report.closed_form.crb_omega,
            n[1][1],
            report.ratios.omega,
        ),
        (
            "Phi",
            report.closed_form.crb_phi,
            n[2][2] + n[3][3],
            report.ratios.phi,
        ),
    ];
    for (name, c, v, r) in rows {
        println!("{name:<8} {c:>14.6e} {v:>14.6e} {r:>12.4e}");
    }
    if !report.flagged.is_empty() {
        println!("outside [0.95, 1.05]: {}", report.flagged.join(", "));
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening config {}", p.display()))?;
            serde_json::from_reader(file).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if args.common.seed != 0 || args.config.is_none() {
        config.base_seed = args.common.seed;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(v) = args.n_values {
        config.n_values = v;
    }
    if let Some(v) = args.snr_grid {
        config.snr_grid_db = v;
    }
    if let Some(v) = args.methods {
        config.methods = v;
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    config.raw |= args.raw;
    if args.fixed_scenario {
        config.redraw_per_trial = false;
    }
    let dir = args
        .common
        .out
        .or(args.out_dir)
        .unwrap_or_else(|| PathBuf::from("bench_out"));

    let (records, summary) = run_experiment(&config)?;
    let claims = paper_table_repro(&summary);
    write_atomic(&dir.join("trials.csv"), |w| {
        Ok(write_trials_csv(&records, w)?)
    })?;
    write_atomic(&dir.join("summary.csv"), |w| {
        Ok(write_summary_csv(&summary, w)?)
    })?;
    write_atomic(&dir.join("timing.csv"), |w| {
        Ok(write_timing_csv(&records, w)?)
    })?;
    write_atomic(&dir.join("claims.txt"), |w| Ok(write!(w, "{claims}")?))?;
    write_atomic(&dir.join("config.json"), |w| {
        Ok(serde_json::to_writer_pretty(w, &config)?)
    })?;
    if args.common.json {
        print_json(&json!({ "out_dir": dir, "trials": records.len(), "claims": claims }))
    } else {
        print!("{claims}");
        println!("wrote {}", dir.display());
        Ok(())
    }
}

fn report(args: ReportArgs) -> Result<()> {
    let file =
        File::open(&args.summary).with_context(|| format!("opening {}", args.summary.display()))?;
    let claims = paper_table_repro(&read_summary_csv(file)?);
    if let Some(path) = &args.common.out {
        write_atomic(path, |w| Ok(write!(w, "{claims}")?))?;
    }
    if args.common.json {
        print_json(&claims)
    } else {
        print!("{claims}");
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Estimate(a) => estimate(a),
        Command::Crb(a) => crb(a),
        Command::Audit(a) => audit(a),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => match err.downcast_ref::<sumparam::Error>() {
            Some(e) if e.is_numerical() => {
                let doc = json!({ "error": "numerical", "message": e.to_string() });
                eprintln!("{doc}");
                ExitCode::from(2)
            }
            _ => {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        },
    }
}
