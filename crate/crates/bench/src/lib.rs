//! Shared fixtures for the benchmarks: the reference straight and curved
//! passes with 30 dB noise.

use vlspeed_core::channel::{LambertianParams, LAMBERTIAN_FIT, SIMULATED_FIT};
use vlspeed_core::trace::{add_noise, synthesize_trace};
use vlspeed_core::{
    ChannelModel, CurvedScenario, NoiseSpec, PowerTrace, SamplingSpec, Scenario, StraightScenario,
};

pub const OFFSET: f64 = 0.5;
pub const RADIUS: f64 = 40.0;

pub fn straight() -> Scenario {
    Scenario::Straight(StraightScenario::new(OFFSET, 15.0, 20.0).expect("valid"))
}

pub fn curved() -> Scenario {
    Scenario::Curved(CurvedScenario::new(RADIUS, 1.0, std::f64::consts::FRAC_PI_2).expect("valid"))
}

pub fn lambertian() -> LambertianParams {
    LambertianParams::headlamp(LAMBERTIAN_FIT)
}

pub fn curved_headlamp() -> LambertianParams {
    LambertianParams::headlamp(SIMULATED_FIT)
}

/// Noisy 300-sample trace of `channel` along `scenario`, window starting at `t_start`.
pub fn noisy_trace(scenario: &Scenario, channel: &ChannelModel, t_start: f64) -> PowerTrace {
    let sampling = SamplingSpec::new(1e-3, t_start, 0.3).expect("valid");
    let clean = synthesize_trace(scenario, channel, &sampling).expect("window fits");
    add_noise(
        &clean,
        &NoiseSpec {
            snr0_db: 30.0,
            seed: 1,
        },
    )
    .expect("noise")
}
