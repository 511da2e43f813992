//! Vehicle kinematics relative to a roadside photodetector.
//!
//! Two road layouts are modelled. On the straight road the vehicle drives
//! along a line offset laterally by `offset` from the detector and the
//! segment ends when the vehicle is abeam of it. On the curved road the
//! vehicle follows a circular arc of radius `radius`; the arc angle `beta`
//! shrinks linearly in time and reaches zero at the end of the curve, where
//! the detector sits (optionally displaced by `offset_long`, `offset_lat`).
//!
//! All angles are radians. Time is continuous; sampling is the caller's job.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Tolerance on the segment bounds for sample times of the form `t0 + i * dt`.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightScenario {
    /// Perpendicular offset between the detector and the line of motion, m.
    pub offset: f64,
    /// Range along the road at t = 0, m.
    pub start_range: f64,
    /// Vehicle speed, m/s.
    pub speed: f64,
}

impl StraightScenario {
    pub fn new(offset: f64, start_range: f64, speed: f64) -> Result<Self> {
        let s = Self {
            offset,
            start_range,
            speed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.offset > 0.0, "offset", self.offset, "must be > 0")?;
        ensure(
            self.start_range > 0.0,
            "start_range",
            self.start_range,
            "must be > 0",
        )?;
        ensure(self.speed > 0.0, "speed", self.speed, "must be > 0")
    }

    /// Time at which the vehicle is abeam of the detector.
    pub fn end_time(&self) -> f64 {
        self.start_range / self.speed
    }

    /// Time at which the incidence angle reaches `theta`.
    pub fn time_at_angle(&self, theta: f64) -> Result<f64> {
        ensure(
            theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2,
            "theta",
            theta,
            "must lie in (0, pi/2]",
        )?;
        let range = self.offset / theta.tan();
        if range > self.start_range {
            return Err(Error::Domain(format!(
                "incidence angle {:.4} deg is reached before the segment starts",
                theta.to_degrees()
            )));
        }
        Ok((self.start_range - range.max(0.0)) / self.speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedScenario {
    /// Radius of curvature, m.
    pub radius: f64,
    /// Angular speed along the arc, rad/s.
    pub angular_speed: f64,
    /// Arc angle at t = 0, rad.
    pub start_angle: f64,
    /// Detector displacement from the curve end along the exit direction, m.
    #[serde(default)]
    pub offset_long: f64,
    /// Detector displacement from the curve end across the exit direction, m.
    #[serde(default)]
    pub offset_lat: f64,
}

impl CurvedScenario {
    pub fn new(radius: f64, angular_speed: f64, start_angle: f64) -> Result<Self> {
        let s = Self {
            radius,
            angular_speed,
            start_angle,
            offset_long: 0.0,
            offset_lat: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_offsets(mut self, offset_long: f64, offset_lat: f64) -> Result<Self> {
        self.offset_long = offset_long;
        self.offset_lat = offset_lat;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.radius > 0.0, "radius", self.radius, "must be > 0")?;
        ensure(
            self.angular_speed > 0.0,
            "angular_speed",
            self.angular_speed,
            "must be > 0",
        )?;
        ensure(
            self.start_angle > 0.0 && self.start_angle <= std::f64::consts::PI,
            "start_angle",
            self.start_angle,
            "must lie in (0, pi]",
        )?;
        ensure(
            self.offset_long >= 0.0,
            "offset_long",
            self.offset_long,
            "must be >= 0",
        )?;
        ensure(
            self.offset_lat >= 0.0,
            "offset_lat",
            self.offset_lat,
            "must be >= 0",
        )
    }

    /// Tangential speed `angular_speed * radius`, m/s.
    pub fn speed(&self) -> f64 {
        self.angular_speed * self.radius
    }

    pub fn angle_at(&self, t: f64) -> f64 {
        self.start_angle - self.angular_speed * t
    }

    /// Time at which the arc angle collapses to zero.
    pub fn end_time(&self) -> f64 {
        self.start_angle / self.angular_speed
    }
}

/// Either road layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Straight(StraightScenario),
    Curved(CurvedScenario),
}

impl Scenario {
    pub fn pose(&self, t: f64) -> Result<Pose> {
        match self {
            Scenario::Straight(s) => straight_pose(s, t),
            Scenario::Curved(c) => curved_pose(c, t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Straight(s) => s.validate(),
            Scenario::Curved(c) => c.validate(),
        }
    }

    /// Linear speed of the vehicle, m/s.
    pub fn speed(&self) -> f64 {
        match self {
            Scenario::Straight(s) => s.speed,
            Scenario::Curved(c) => c.speed(),
        }
    }

    pub fn end_time(&self) -> f64 {
        match self {
            Scenario::Straight(s) => s.end_time(),
            Scenario::Curved(c) => c.end_time(),
        }
    }
}

/// Vehicle position relative to the detector at one instant.
///
/// `distance² = range² + lateral²` holds for both layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pose {
    pub t: f64,
    /// Transmitter to detector distance, m.
    pub distance: f64,
    /// Projection of the separation on the detector's along-road axis, m.
    pub range: f64,
    /// Projection across the road, m.
    pub lateral: f64,
    /// Incidence angle, rad.
    pub theta: f64,
    /// Arc angle, rad. Curved road only.
    pub beta: Option<f64>,
}

pub fn straight_pose(s: &StraightScenario, t: f64) -> Result<Pose> {
    let end = s.end_time();
    if !(t >= -TIME_SLACK && t <= end + TIME_SLACK) {
        return Err(Error::OutOfSegment {
            t,
            detail: format!("straight segment spans [0, {end}] s"),
        });
    }
    let range = (s.start_range - s.speed * t).max(0.0);
    let lateral = s.offset;
    Ok(Pose {
        t,
        distance: range.hypot(lateral),
        range,
        lateral,
        // Same angle as acos(range / distance) without the loss of precision near 0.
        theta: lateral.atan2(range),
        beta: None,
    })
}

pub fn curved_pose(c: &CurvedScenario, t: f64) -> Result<Pose> {
    let beta = c.angle_at(t);
    if !(beta > 0.0 && beta <= std::f64::consts::PI + TIME_SLACK * c.angular_speed) {
        return Err(Error::OutOfSegment {
            t,
            detail: format!("arc angle {beta} rad is outside (0, pi]"),
        });
    }
    let beta = beta.min(std::f64::consts::PI);
    let half = 0.5 * beta;
    let along = c.radius * beta.sin();
    // r(1 - cos b) rewritten as 2 r sin^2(b/2) to avoid cancellation at small b.
    let across = 2.0 * c.radius * half.sin() * half.sin();
    let range = along + c.offset_long;
    let lateral = across + c.offset_lat;
    Ok(Pose {
        t,
        distance: range.hypot(lateral),
        range,
        lateral,
        theta: lateral.atan2(range),
        beta: Some(beta),
    })
}
