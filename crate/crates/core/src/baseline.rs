//! Single-antenna RADAR reference.
//!
//! A Doppler RADAR measures only the velocity component along its line of
//! sight, so the reading is scaled by the cosine of the angle between the
//! vehicle's heading and the beam.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{ensure, Error, Result};
use crate::geometry::CurvedScenario;

/// Straight-road RADAR reading `v cos(theta)`; `theta` in rad.
pub fn radar_measured_straight(speed: f64, theta: f64) -> Result<f64> {
    ensure(speed.is_finite(), "speed", speed, "must be finite")?;
    ensure(
        (0.0..=FRAC_PI_2).contains(&theta),
        "theta",
        theta,
        "must lie in [0, pi/2]",
    )?;
    Ok(speed * theta.cos())
}

/// Curved-road RADAR reading with the RADAR displaced `offset_long` along
/// and `offset_lat` across the road from the curve end, vehicle at arc
/// angle `beta`.
pub fn radar_measured_curved(
    speed: f64,
    radius: f64,
    beta: f64,
    offset_long: f64,
    offset_lat: f64,
) -> Result<f64> {
    ensure(speed.is_finite(), "speed", speed, "must be finite")?;
    ensure(radius > 0.0, "radius", radius, "must be > 0")?;
    if !(beta > 0.0 && beta <= PI) {
        return Err(Error::Domain(format!(
            "arc angle {beta} rad is outside (0, pi]"
        )));
    }
    let los = (offset_lat + radius * (1.0 - beta.cos())).atan2(offset_long + radius * beta.sin());
    Ok(speed * (FRAC_PI_2 - beta + los).sin())
}

/// RADAR reading for a curved scenario at time `t`.
pub fn radar_for_scenario(c: &CurvedScenario, t: f64) -> Result<f64> {
    radar_measured_curved(
        c.speed(),
        c.radius,
        c.angle_at(t),
        c.offset_long,
        c.offset_lat,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn straight_reading() {
        assert_eq!(radar_measured_straight(20.0, 0.0).unwrap(), 20.0);
        let v = radar_measured_straight(20.0, 60f64.to_radians()).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
        assert!(radar_measured_straight(20.0, -0.1).is_err());
        assert!(radar_measured_straight(20.0, 1.6).is_err());
    }

    #[test]
    fn curved_reading_at_curve_end_is_half_angle_cosine() {
        let v = radar_measured_curved(20.0, 40.0, FRAC_PI_2, 0.0, 0.0).unwrap();
        assert!((v - 20.0 * (PI / 4.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn curved_rejects_bad_angle() {
        assert!(radar_measured_curved(20.0, 40.0, 0.0, 0.0, 0.0).is_err());
        assert!(radar_measured_curved(20.0, 0.0, 1.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn zero_offset_matches_closed_form(beta in 1e-3f64..PI, r in 1.0f64..500.0) {
            let v = radar_measured_curved(1.0, r, beta, 0.0, 0.0).unwrap();
            prop_assert!((v - (0.5 * beta).cos()).abs() < 1e-12);
        }
    }
}
