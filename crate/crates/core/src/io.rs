//! File formats shared by the library and the CLI.
//!
//! Signal CSV:
//!
//! ```text
//! # ts=1.0
//! # seed=7
//! # sigma2=0.5
//! n,re,im
//! 0,1.0,0.0
//! ```
//!
//! Comment lines are optional on input; a missing `ts` defaults to 1.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::signal::{CisoidEnsemble, SampledSignal};
use crate::spectrum::Periodogram;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub ts: f64,
    pub seed: Option<u64>,
    pub sigma2: Option<f64>,
}

pub fn write_signal_csv<W: Write>(
    signal: &SampledSignal,
    meta: &SignalMeta,
    mut out: W,
) -> Result<()> {
    writeln!(out, "# ts={:?}", meta.ts)?;
    if let Some(seed) = meta.seed {
        writeln!(out, "# seed={seed}")?;
    }
    if let Some(s2) = meta.sigma2 {
        writeln!(out, "# sigma2={s2:?}")?;
    }
    writeln!(out, "n,re,im")?;
    for (i, x) in signal.samples().iter().enumerate() {
        writeln!(out, "{i},{:?},{:?}", x.re, x.im)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_num<T: std::str::FromStr>(what: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad {what} {s:?}: {e}")))
}

pub fn read_signal_csv<R: Read>(input: R) -> Result<(SampledSignal, SignalMeta)> {
    let mut meta = SignalMeta {
        ts: 1.0,
        seed: None,
        sigma2: None,
    };
    let mut body = String::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        match line.trim().strip_prefix('#') {
            Some(comment) => {
                if let Some((key, value)) = comment.split_once('=') {
                    match key.trim() {
                        "ts" => meta.ts = parse_num("ts", value)?,
                        "seed" => meta.seed = Some(parse_num("seed", value)?),
                        "sigma2" => meta.sigma2 = Some(parse_num("sigma2", value)?),
                        _ => {}
                    }
                }
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    if !header.iter().map(str::trim).eq(["n", "re", "im"]) {
        return Err(Error::Parse(format!(
            "signal CSV header must be n,re,im, got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let idx: usize = parse_num("index", &rec[0])?;
        if idx != i {
            return Err(Error::Parse(format!("row {i} has index {idx}")));
        }
        samples.push(Complex64::new(
            parse_num("re", &rec[1])?,
            parse_num("im", &rec[2])?,
        ));
    }
    Ok((SampledSignal::new(samples, meta.ts)?, meta))
}

pub fn write_ensemble_json<W: Write>(ensemble: &CisoidEnsemble, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, ensemble)?;
    Ok(())
}

pub fn read_ensemble_json<R: Read>(input: R) -> Result<CisoidEnsemble> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_periodogram_csv<W: Write>(pgram: &Periodogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_omega", "power"])?;
    for (omega, p) in pgram.bin_omega.iter().zip(&pgram.power) {
        w.write_record([format!("{omega:?}"), format!("{p:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `(bin_omega, power)` pairs.
pub fn read_periodogram_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok((
                parse_num("bin_omega", &rec[0])?,
                parse_num("power", &rec[1])?,
            ))
        })
        .collect()
}
