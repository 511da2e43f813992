//! Trace CSV (`t_s,power_w`) and its JSON metadata sidecar.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! trace read back from disk is bit-identical to the one written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{add_noise, synthesize_trace, NoiseSpec, PowerTrace, Sample, SamplingSpec};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::geometry::Scenario;

pub const TRACE_HEADER: [&str; 2] = ["t_s", "power_w"];

/// Everything needed to regenerate a trace bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub version: String,
    pub scenario: Scenario,
    pub channel: ChannelModel,
    pub sampling: SamplingSpec,
    pub noise: Option<NoiseSpec>,
    pub noise_sigma: f64,
    pub clipped_count: usize,
    pub samples: usize,
}

impl TraceMetadata {
    pub fn regenerate(&self) -> Result<PowerTrace> {
        let clean = synthesize_trace(&self.scenario, &self.channel, &self.sampling)?;
        match &self.noise {
            Some(n) => add_noise(&clean, n),
            None => Ok(clean),
        }
    }
}

/// Builds a trace and the metadata describing it.
pub fn simulate(
    scenario: &Scenario,
    channel: &ChannelModel,
    sampling: &SamplingSpec,
    noise: Option<&NoiseSpec>,
) -> Result<(PowerTrace, TraceMetadata)> {
    let meta = TraceMetadata {
        version: crate::VERSION.to_string(),
        scenario: *scenario,
        channel: *channel,
        sampling: *sampling,
        noise: noise.copied(),
        noise_sigma: 0.0,
        clipped_count: 0,
        samples: 0,
    };
    let trace = meta.regenerate()?;
    let meta = TraceMetadata {
        noise_sigma: trace.noise_sigma,
        clipped_count: trace.clipped_count,
        samples: trace.len(),
        ..meta
    };
    Ok((trace, meta))
}

/// `trace.csv` -> `trace.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_trace_csv(path: &Path, trace: &PowerTrace) -> Result<()> {
    let mut out = String::with_capacity(32 * trace.len());
    out.push_str("t_s,power_w\n");
    for s in &trace.samples {
        out.push_str(&format!("{},{}\n", s.t, s.power));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<PowerTrace> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(parse_err(1, "expected header `t_s,power_w`".into()));
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| parse_err(line, format!("`{name}`: cannot parse {:?}", &rec[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("`{name}` is not finite")))
            }
        };
        samples.push(Sample {
            t: num(0, "t_s")?,
            power: num(1, "power_w")?,
        });
    }
    PowerTrace::from_samples(samples, 0.0, 0).map_err(|e| match e {
        // Row index -> file line (header is line 1).
        Error::BadSample { index, reason } => parse_err(index as u64 + 2, reason),
        other => Error::InFile {
            path: path.to_path_buf(),
            source: Box::new(other),
        },
    })
}

pub fn write_metadata(path: &Path, meta: &TraceMetadata) -> Result<()> {
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_metadata(path: &Path) -> Result<TraceMetadata> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}
