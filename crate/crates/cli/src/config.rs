//! JSON configuration files.
//!
//! Angles are degrees. Speeds take a number (m/s) or a string with an
//! explicit unit, e.g. `"72 km/h"`, `"20 m/s"`, `"1 rad/s"`, `"57.3 deg/s"`.
//!
//! ```json
//! {
//!   "scenario": { "kind": "straight", "d": 0.5, "r_o": 15, "speed": "72 km/h" },
//!   "channel":  { "model": "simulated", "k_db": -49.32, "gamma": 1.21 },
//!   "sampling": { "dt_s": 0.001, "t_start_s": 0, "duration_s": 0.3 },
//!   "noise":    { "snr0_db": 30, "seed": 1 },
//!   "estimator": { "mode": "exact" },
//!   "figure":   { "trials": 500, "seed": 42 }
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;
use vlspeed_core::channel::{
    ChannelModel, LambertianParams, LogDistanceParams, DEFAULT_APERTURE_M2, DEFAULT_FOV_DEG,
    DEFAULT_PHI_HALF_DEG, LAMBERTIAN_FIT, SIMULATED_FIT,
};
use vlspeed_core::geometry::{CurvedScenario, Scenario, StraightScenario};
use vlspeed_core::harness::FigureOptions;
use vlspeed_core::trace::{NoiseSpec, SamplingSpec, DEFAULT_DT, DEFAULT_DURATION};
use vlspeed_core::LambertianMode;

use crate::CliError;

/// A number in base units or a string carrying its unit.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

fn split_unit(s: &str) -> Option<(f64, String)> {
    let s = s.trim();
    let end = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(s.len());
    let value = s[..end].trim().parse().ok()?;
    Some((value, s[end..].trim().to_ascii_lowercase().replace(' ', "")))
}

impl Quantity {
    fn convert(&self, field: &str, units: &[(&str, f64)]) -> Result<f64, CliError> {
        let v = match self {
            Quantity::Number(v) => *v,
            Quantity::Text(s) => {
                let (value, unit) = split_unit(s)
                    .ok_or_else(|| CliError::input(format!("{field}: cannot parse {s:?}")))?;
                let scale = units
                    .iter()
                    .find(|(u, _)| *u == unit)
                    .map(|(_, f)| *f)
                    .ok_or_else(|| {
                        let known: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
                        CliError::input(format!(
                            "{field}: unknown unit {unit:?} (expected one of {})",
                            known.join(", ")
                        ))
                    })?;
                value * scale
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::input(format!("{field}: must be finite")))
        }
    }

    /// Linear speed in m/s.
    pub fn speed(&self, field: &str) -> Result<f64, CliError> {
        self.convert(
            field,
            &[("m/s", 1.0), ("km/h", 1.0 / 3.6), ("km/hr", 1.0 / 3.6)],
        )
    }

    /// Angular speed in rad/s.
    pub fn angular_speed(&self, field: &str) -> Result<f64, CliError> {
        self.convert(
            field,
            &[("rad/s", 1.0), ("deg/s", std::f64::consts::PI / 180.0)],
        )
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub kind: Option<String>,
    /// Straight road: lateral offset, m.
    pub d: Option<f64>,
    /// Straight road: start range, m. Curved road: along-road offset of the detector, m.
    pub r_o: Option<f64>,
    pub speed: Option<Quantity>,
    /// Curved road: radius, m.
    pub r_c: Option<f64>,
    /// Curved road: angular speed.
    pub w: Option<Quantity>,
    pub beta_o_deg: Option<f64>,
    /// Curved road: across-road offset of the detector, m.
    pub d_o: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChannel {
    pub model: Option<String>,
    pub k_db: Option<f64>,
    pub gamma: Option<f64>,
    pub phi_half_deg: Option<f64>,
    pub fov_deg: Option<f64>,
    pub area_m2: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    pub dt_s: Option<f64>,
    pub t_start_s: Option<f64>,
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    pub snr0_db: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEstimator {
    pub mode: Option<LambertianMode>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFigure {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub angles_deg: Option<Vec<f64>>,
    pub times_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Option<RawScenario>,
    pub channel: Option<RawChannel>,
    pub sampling: Option<RawSampling>,
    pub noise: Option<RawNoise>,
    pub estimator: Option<RawEstimator>,
    pub figure: Option<RawFigure>,
}

fn require<T: Clone>(v: &Option<T>, path: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::input(format!("missing required field `{path}`")))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError {
            message: format!("{}: {}", path.display(), e.message),
            ..e
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            // Missing fields are reported against the enclosing object; name the field itself.
            let field = message
                .strip_prefix("missing field `")
                .and_then(|m| m.split('`').next());
            match field {
                Some(f) if path == "." => CliError::input(format!("missing required field `{f}`")),
                Some(f) => CliError::input(format!("missing required field `{path}.{f}`")),
                None => CliError::input(format!("at `{path}`: {message}")),
            }
        })
    }

    pub fn scenario(&self) -> Result<Option<Scenario>, CliError> {
        self.scenario.as_ref().map(build_scenario).transpose()
    }

    pub fn channel_for(&self, scenario: Option<&Scenario>) -> Result<ChannelModel, CliError> {
        build_channel(
            self.channel.as_ref().unwrap_or(&RawChannel::default()),
            scenario,
        )
    }

    pub fn sampling(&self) -> Result<SamplingSpec, CliError> {
        let s = self.sampling.clone().unwrap_or_default();
        SamplingSpec::new(
            s.dt_s.unwrap_or(DEFAULT_DT),
            s.t_start_s.unwrap_or(0.0),
            s.duration_s.unwrap_or(DEFAULT_DURATION),
        )
        .map_err(|e| CliError::input(format!("sampling: {e}")))
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        self.noise.as_ref().map(|n| NoiseSpec {
            snr0_db: n.snr0_db,
            seed: n.seed,
        })
    }

    pub fn mode(&self) -> Option<LambertianMode> {
        self.estimator.as_ref().and_then(|e| e.mode)
    }

    /// Figure options: defaults overridden by whatever sections are present.
    pub fn figure_options(&self) -> Result<FigureOptions, CliError> {
        let mut o = FigureOptions::default();
        match self.scenario()? {
            Some(Scenario::Straight(s)) => o.straight = s,
            Some(Scenario::Curved(c)) => o.curved = c,
            None => {}
        }
        if let Some(ch) = &self.channel {
            let model = ch.model.as_deref().unwrap_or("simulated");
            let row = match model {
                "simulated" => &mut o.simulated,
                "lambertian" => &mut o.lambertian,
                other => return Err(unknown_model(other)),
            };
            *row =
                LogDistanceParams::new(ch.k_db.unwrap_or(row.k_db), ch.gamma.unwrap_or(row.gamma))
                    .map_err(|e| CliError::input(format!("channel: {e}")))?;
            o.phi_half_deg = ch.phi_half_deg.unwrap_or(o.phi_half_deg);
            o.fov_deg = ch.fov_deg.unwrap_or(o.fov_deg);
            o.aperture = ch.area_m2.unwrap_or(o.aperture);
        }
        if let Some(s) = &self.sampling {
            o.dt = s.dt_s.unwrap_or(o.dt);
            o.duration = s.duration_s.unwrap_or(o.duration);
        }
        if let Some(n) = &self.noise {
            o.snr0_db = n.snr0_db;
            o.base_seed = n.seed;
        }
        if let Some(m) = self.mode() {
            o.mode = m;
        }
        if let Some(f) = &self.figure {
            o.trials = f.trials.unwrap_or(o.trials);
            o.base_seed = f.seed.unwrap_or(o.base_seed);
            if let Some(a) = &f.angles_deg {
                o.angles_deg = a.clone();
            }
            if let Some(t) = &f.times_s {
                o.times_s = t.clone();
            }
        }
        Ok(o)
    }
}

fn unknown_model(other: &str) -> CliError {
    CliError::input(format!(
        "channel.model: unknown model {other:?} (expected simulated or lambertian)"
    ))
}

fn build_scenario(s: &RawScenario) -> Result<Scenario, CliError> {
    let kind = require(&s.kind, "scenario.kind")?;
    let invalid = |e: vlspeed_core::Error| CliError::input(format!("scenario: {e}"));
    match kind.as_str() {
        "straight" => {
            let speed = require(&s.speed, "scenario.speed")?.speed("scenario.speed")?;
            StraightScenario::new(
                require(&s.d, "scenario.d")?,
                require(&s.r_o, "scenario.r_o")?,
                speed,
            )
            .map(Scenario::Straight)
            .map_err(invalid)
        }
        "curved" => {
            let radius = require(&s.r_c, "scenario.r_c")?;
            let w = match (&s.w, &s.speed) {
                (Some(w), _) => w.angular_speed("scenario.w")?,
                (None, Some(v)) => v.speed("scenario.speed")? / radius,
                (None, None) => return Err(CliError::input("missing required field `scenario.w`")),
            };
            let beta = s.beta_o_deg.unwrap_or(90.0).to_radians();
            CurvedScenario::new(radius, w, beta)
                .and_then(|c| c.with_offsets(s.r_o.unwrap_or(0.0), s.d_o.unwrap_or(0.0)))
                .map(Scenario::Curved)
                .map_err(invalid)
        }
        other => Err(CliError::input(format!(
            "scenario.kind: unknown kind {other:?} (expected straight or curved)"
        ))),
    }
}

/// Channel for a section, with constants defaulting to the fitted row of the
/// chosen model. Curved roads always use the headlamp pattern.
pub fn build_channel(
    c: &RawChannel,
    scenario: Option<&Scenario>,
) -> Result<ChannelModel, CliError> {
    let model = c.model.as_deref().unwrap_or("simulated");
    let row = match model {
        "simulated" => SIMULATED_FIT,
        "lambertian" => LAMBERTIAN_FIT,
        other => return Err(unknown_model(other)),
    };
    let fit = LogDistanceParams::new(c.k_db.unwrap_or(row.k_db), c.gamma.unwrap_or(row.gamma))
        .map_err(|e| CliError::input(format!("channel: {e}")))?;
    let curved = matches!(scenario, Some(Scenario::Curved(_)));
    if model == "simulated" && !curved {
        return Ok(ChannelModel::Simulated(fit));
    }
    LambertianParams::with_gain(
        c.phi_half_deg.unwrap_or(DEFAULT_PHI_HALF_DEG).to_radians(),
        fit.k_db,
        fit.gamma,
        c.fov_deg.unwrap_or(DEFAULT_FOV_DEG).to_radians(),
        c.area_m2.unwrap_or(DEFAULT_APERTURE_M2),
    )
    .map(ChannelModel::Lambertian)
    .map_err(|e| CliError::input(format!("channel: {e}")))
}
