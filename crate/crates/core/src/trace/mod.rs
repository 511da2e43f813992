//! Sampled received-power traces.
//!
//! A trace is the photodetector's view of one pass: uniformly spaced power
//! samples over an estimation window. Noise is additive white Gaussian with a
//! standard deviation fixed by the SNR at the window's first (weakest)
//! sample, so the per-sample SNR improves as the vehicle closes in.

pub mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{ensure, Error, Result};
use crate::geometry::Scenario;

/// Detector sampling interval.
pub const DEFAULT_DT: f64 = 1e-3;
/// Estimation window length.
pub const DEFAULT_DURATION: f64 = 0.3;

/// Noisy samples that land at or below zero are replaced by this fraction of sigma.
const CLAMP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Sample interval, s.
    pub dt: f64,
    /// Time of the first sample, s.
    pub t_start: f64,
    /// Window length, s. The window holds `round(duration / dt)` samples.
    pub duration: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_start: 0.0,
            duration: DEFAULT_DURATION,
        }
    }
}

impl SamplingSpec {
    pub fn new(dt: f64, t_start: f64, duration: f64) -> Result<Self> {
        let s = Self {
            dt,
            t_start,
            duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dt > 0.0, "dt", self.dt, "must be > 0")?;
        ensure(self.t_start >= 0.0, "t_start", self.t_start, "must be >= 0")?;
        ensure(
            self.duration.is_finite() && self.duration / self.dt >= 2.0 - 1e-9,
            "duration",
            self.duration,
            "must cover at least two samples",
        )
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Time of the last sample.
    pub fn t_end(&self) -> f64 {
        self.time(self.sample_count() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// SNR at the first sample, `20 log10(P0 / sigma)`, dB.
    pub snr0_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// s
    pub t: f64,
    /// W
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub dt: f64,
    pub samples: Vec<Sample>,
    /// Standard deviation of the injected noise, W. Zero for clean traces.
    pub noise_sigma: f64,
    /// Samples clamped to a small positive value during noise injection.
    pub clipped_count: usize,
}

impl PowerTrace {
    /// Wraps externally produced samples, checking uniform spacing.
    pub fn from_samples(
        samples: Vec<Sample>,
        noise_sigma: f64,
        clipped_count: usize,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::EmptyInput("a trace needs at least two samples"));
        }
        ensure(
            noise_sigma >= 0.0,
            "noise_sigma",
            noise_sigma,
            "must be >= 0",
        )?;
        let dt = samples[1].t - samples[0].t;
        if !(dt > 0.0) {
            return Err(Error::BadSample {
                index: 1,
                reason: "sample times must be strictly increasing".into(),
            });
        }
        for (i, w) in samples.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-6 * dt {
                return Err(Error::BadSample {
                    index: i + 1,
                    reason: format!("non-uniform spacing {step} s (expected {dt} s)"),
                });
            }
        }
        Ok(Self {
            dt,
            samples,
            noise_sigma,
            clipped_count,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.power)
    }
}

/// Noiseless trace of `channel` along `scenario` over the sampling window.
pub fn synthesize_trace(
    scenario: &Scenario,
    channel: &ChannelModel,
    sampling: &SamplingSpec,
) -> Result<PowerTrace> {
    scenario.validate()?;
    channel.validate()?;
    sampling.validate()?;
    let samples = (0..sampling.sample_count())
        .map(|i| {
            let t = sampling.time(i);
            let pose = scenario.pose(t)?;
            Ok(Sample {
                t,
                power: channel.power(&pose)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTrace {
        dt: sampling.dt,
        samples,
        noise_sigma: 0.0,
        clipped_count: 0,
    })
}

/// Noise standard deviation giving `snr0_db` against a signal of power `p0`.
pub fn snr_to_sigma(p0: f64, snr0_db: f64) -> Result<f64> {
    if !(p0 > 0.0) {
        return Err(Error::Domain(format!(
            "reference power must be > 0, got {p0}"
        )));
    }
    ensure(snr0_db.is_finite(), "snr0_db", snr0_db, "must be finite")?;
    Ok(p0 * 10f64.powf(-snr0_db / 20.0))
}

/// Adds white Gaussian noise anchored at the first sample's SNR.
pub fn add_noise(trace: &PowerTrace, noise: &NoiseSpec) -> Result<PowerTrace> {
    if trace.noise_sigma > 0.0 {
        return Err(Error::AlreadyNoisy {
            sigma: trace.noise_sigma,
        });
    }
    let first = trace
        .samples
        .first()
        .ok_or(Error::EmptyInput("cannot add noise to an empty trace"))?;
    let sigma = snr_to_sigma(first.power, noise.snr0_db)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let floor = sigma * CLAMP_FRACTION;
    let mut clipped = 0;
    let samples = trace
        .samples
        .iter()
        .map(|s| {
            let mut power = s.power + normal.sample(&mut rng);
            if power <= 0.0 {
                power = floor;
                clipped += 1;
            }
            Sample { t: s.t, power }
        })
        .collect();
    Ok(PowerTrace {
        dt: trace.dt,
        samples,
        noise_sigma: sigma,
        clipped_count: clipped,
    })
}
