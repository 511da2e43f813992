//! Monte Carlo accuracy sweeps.
//!
//! A sweep fixes a scenario, channel and estimation window, varies one
//! quantity over a list of values and, for each value, runs independent
//! noisy trials through the estimator. Trials run in parallel; results are
//! collected in trial order and reduced sequentially so the output does not
//! depend on thread scheduling.

mod figures;
mod svg;

pub use figures::{
    reproduce_figure, FigureData, FigureId, FigureOptions, FigureSeries, ANGLE_GRID_DEG,
    TIME_GRID_S,
};
pub use svg::render_svg;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, LambertianParams, LogDistanceParams};
use crate::error::{ensure, Error, Result};
use crate::estimator::{
    estimate_curved, estimate_straight, estimate_straight_lambertian, LambertianMode, SpeedEstimate,
};
use crate::geometry::{CurvedScenario, Scenario};
use crate::trace::{add_noise, synthesize_trace, NoiseSpec, PowerTrace, SamplingSpec};

pub const DEFAULT_TRIALS: usize = 500;

/// Percentage accuracy `100 max(0, 1 - |v_hat - v| / v)`.
pub fn accuracy(v_hat: f64, v_true: f64) -> Result<f64> {
    if !(v_true > 0.0) {
        return Err(Error::Domain(format!(
            "true speed must be > 0, got {v_true}"
        )));
    }
    if !v_hat.is_finite() {
        return Ok(0.0);
    }
    Ok(100.0 * (1.0 - (v_hat - v_true).abs() / v_true).max(0.0))
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise seed for one trial: `mix64(base ^ mix64(sweep_index << 32 | trial))`.
///
/// The seed depends only on its coordinates, so two sweeps sharing a base
/// seed draw identical noise sequences at matching points.
pub fn trial_seed(base_seed: u64, sweep_index: usize, trial: usize) -> u64 {
    mix64(base_seed ^ mix64(((sweep_index as u64) << 32) | trial as u64))
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Straight-road incidence angle at the anchored sample, degrees.
    Angle,
    /// Time of the anchored sample, s.
    Time,
    /// SNR at the first sample, dB.
    Snr,
    /// Estimation window length, s.
    Duration,
    /// Vehicle speed, m/s.
    Speed,
    /// Headlamp half-power semi-angle with the gain constant held fixed, degrees.
    PhiHalf,
}

/// Which sample of the estimation window an angle or time label refers to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowAnchor {
    #[default]
    Start,
    Mid,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub channel: ChannelModel,
    #[serde(default)]
    pub mode: LambertianMode,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub sampling: SamplingSpec,
    /// SNR at the first sample of each window; `None` runs noiseless trials.
    pub snr0_db: Option<f64>,
    #[serde(default)]
    pub anchor: WindowAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub sweep_value: f64,
    pub mean_accuracy_pct: f64,
    pub std_accuracy_pct: f64,
    pub trials: usize,
    /// Fraction of samples clipped by noise injection or clamped by the estimator.
    pub clamp_rate: f64,
}

/// Estimator matched to a scenario and channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Straight {
        k: LogDistanceParams,
        offset: f64,
    },
    StraightLambertian {
        lam: LambertianParams,
        offset: f64,
        mode: LambertianMode,
    },
    Curved {
        lam: LambertianParams,
        k: LogDistanceParams,
        radius: f64,
    },
}

impl Estimator {
    pub fn estimate(&self, trace: &PowerTrace) -> Result<SpeedEstimate> {
        match *self {
            Estimator::Straight { k, offset } => estimate_straight(trace, &k, offset),
            Estimator::StraightLambertian { lam, offset, mode } => {
                estimate_straight_lambertian(trace, &lam, offset, mode)
            }
            Estimator::Curved { lam, k, radius } => estimate_curved(trace, &lam, &k, radius),
        }
    }
}

/// Channel actually used to synthesise a trace for `scenario`.
///
/// The curved-road model carries the headlamp's angular pattern, so a
/// log-distance channel is promoted to a default headlamp with the same gain
/// and exponent.
pub fn synthesis_channel(scenario: &Scenario, channel: &ChannelModel) -> ChannelModel {
    match (scenario, channel) {
        (Scenario::Curved(_), ChannelModel::Simulated(k)) => {
            ChannelModel::Lambertian(LambertianParams::headlamp(*k))
        }
        _ => *channel,
    }
}

/// Estimator that inverts `channel` on `scenario`.
pub fn estimator_for(
    scenario: &Scenario,
    channel: &ChannelModel,
    mode: LambertianMode,
) -> Estimator {
    match (scenario, channel) {
        (Scenario::Straight(s), ChannelModel::Simulated(k)) => Estimator::Straight {
            k: *k,
            offset: s.offset,
        },
        (Scenario::Straight(s), ChannelModel::Lambertian(lam)) => Estimator::StraightLambertian {
            lam: *lam,
            offset: s.offset,
            mode,
        },
        (Scenario::Curved(c), ch) => {
            let ChannelModel::Lambertian(lam) = synthesis_channel(scenario, ch) else {
                unreachable!("curved channels are always Lambertian")
            };
            Estimator::Curved {
                lam,
                k: lam.as_log_distance(),
                radius: c.radius,
            }
        }
    }
}

/// Fully resolved settings for one sweep value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub scenario: Scenario,
    pub channel: ChannelModel,
    pub sampling: SamplingSpec,
    pub snr0_db: Option<f64>,
    pub estimator: Estimator,
}

/// Start time of a window whose anchored sample falls at `t_label`.
pub fn anchored_start(t_label: f64, sampling: &SamplingSpec, anchor: WindowAnchor) -> f64 {
    let span = (sampling.sample_count() - 1) as f64 * sampling.dt;
    match anchor {
        WindowAnchor::Start => t_label,
        WindowAnchor::Mid => t_label - 0.5 * span,
        WindowAnchor::End => t_label - span,
    }
}

fn place_window(
    scenario: &Scenario,
    sampling: SamplingSpec,
    t_label: f64,
    anchor: WindowAnchor,
) -> Result<SamplingSpec> {
    let t_start = anchored_start(t_label, &sampling, anchor);
    // Absorb rounding so a window ending exactly on the segment end is accepted.
    let t_start = if t_start < 0.0 && t_start > -1e-9 {
        0.0
    } else {
        t_start
    };
    let span = (sampling.sample_count() - 1) as f64 * sampling.dt;
    let end = scenario.end_time();
    if t_start < 0.0 || t_start + span > end + 1e-9 {
        return Err(Error::OutOfSegment {
            t: if t_start < 0.0 {
                t_start
            } else {
                t_start + span
            },
            detail: format!(
                "window [{t_start}, {}] s does not fit the segment [0, {end}] s",
                t_start + span
            ),
        });
    }
    Ok(SamplingSpec {
        t_start,
        ..sampling
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if self.values.is_empty() {
            return Err(Error::EmptyInput("sweep values"));
        }
        for w in self.values.windows(2) {
            ensure(
                w[1] > w[0],
                "values",
                w[1],
                "sweep values must be strictly increasing",
            )?;
        }
        for &v in &self.values {
            ensure(v.is_finite(), "values", v, "must be finite")?;
        }
        if let Some(snr) = self.snr0_db {
            ensure(snr.is_finite(), "snr0_db", snr, "must be finite")?;
        }
        self.scenario.validate()?;
        self.channel.validate()?;
        self.sampling.validate()
    }

    /// Resolves the scenario, channel and window for one sweep value.
    pub fn point(&self, value: f64) -> Result<SweepPoint> {
        let mut scenario = self.scenario;
        let mut channel = self.channel;
        let mut sampling = self.sampling;
        let mut snr0_db = self.snr0_db;
        match self.axis {
            SweepAxis::Angle => {
                let Scenario::Straight(s) = scenario else {
                    return Err(Error::Unsupported("angle sweeps need a straight road"));
                };
                let t = s.time_at_angle(value.to_radians())?;
                sampling = place_window(&scenario, sampling, t, self.anchor)?;
            }
            SweepAxis::Time => {
                sampling = place_window(&scenario, sampling, value, self.anchor)?;
            }
            SweepAxis::Snr => snr0_db = Some(value),
            SweepAxis::Duration => {
                sampling = SamplingSpec::new(sampling.dt, sampling.t_start, value)?;
            }
            SweepAxis::Speed => {
                ensure(value > 0.0, "speed", value, "must be > 0")?;
                scenario = match scenario {
                    Scenario::Straight(s) => {
                        Scenario::Straight(crate::geometry::StraightScenario { speed: value, ..s })
                    }
                    Scenario::Curved(c) => Scenario::Curved(CurvedScenario {
                        angular_speed: value / c.radius,
                        ..c
                    }),
                };
            }
            SweepAxis::PhiHalf => {
                let base = match channel {
                    ChannelModel::Lambertian(lam) => lam,
                    ChannelModel::Simulated(k) => LambertianParams::headlamp(k),
                };
                channel = ChannelModel::Lambertian(LambertianParams::with_gain(
                    value.to_radians(),
                    10.0 * base.gain().log10(),
                    base.gamma,
                    base.fov,
                    base.aperture,
                )?);
            }
        }
        scenario.validate()?;
        sampling.validate()?;
        let estimator = estimator_for(&scenario, &channel, self.mode);
        Ok(SweepPoint {
            scenario,
            channel: synthesis_channel(&scenario, &channel),
            sampling,
            snr0_db,
            estimator,
        })
    }
}

struct TrialOutcome {
    accuracy: f64,
    clamped: usize,
    samples: usize,
}

fn run_trial(point: &SweepPoint, clean: &PowerTrace, seed: u64) -> Result<TrialOutcome> {
    let noisy;
    let trace = match point.snr0_db {
        Some(snr0_db) => {
            noisy = add_noise(clean, &NoiseSpec { snr0_db, seed })?;
            &noisy
        }
        None => clean,
    };
    let est = point.estimator.estimate(trace)?;
    Ok(TrialOutcome {
        accuracy: accuracy(est.v_hat, point.scenario.speed())?,
        clamped: est.clamped + trace.clipped_count,
        samples: trace.len(),
    })
}

/// Accuracy statistics for one sweep value.
pub fn run_point(cfg: &ExperimentConfig, index: usize, value: f64) -> Result<AccuracyCurve> {
    let wrap = |trial: usize, e: Error| Error::Trial {
        sweep_value: value,
        trial,
        source: Box::new(e),
    };
    let point = cfg.point(value).map_err(|e| wrap(0, e))?;
    let clean = synthesize_trace(&point.scenario, &point.channel, &point.sampling)
        .map_err(|e| wrap(0, e))?;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(&point, &clean, trial_seed(cfg.base_seed, index, trial))
                .map_err(|e| wrap(trial, e))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.accuracy).sum::<f64>() / n;
    let var = if outcomes.len() > 1 {
        outcomes
            .iter()
            .map(|o| (o.accuracy - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let clamped: usize = outcomes.iter().map(|o| o.clamped).sum();
    let samples: usize = outcomes.iter().map(|o| o.samples).sum();
    Ok(AccuracyCurve {
        sweep_value: value,
        mean_accuracy_pct: mean,
        std_accuracy_pct: var.sqrt(),
        trials: cfg.trials,
        clamp_rate: clamped as f64 / samples as f64,
    })
}

/// Runs every sweep value in order. The first failing trial aborts the sweep.
pub fn run_accuracy_sweep(cfg: &ExperimentConfig) -> Result<Vec<AccuracyCurve>> {
    cfg.validate()?;
    cfg.values
        .iter()
        .enumerate()
        .map(|(i, &v)| run_point(cfg, i, v))
        .collect()
}
