//! Speed estimation from received-power traces.
//!
//! Every estimator follows the same pattern: invert the channel model sample
//! by sample into a quantity that is linear in time (along-road range on a
//! straight road, arc angle on a curve), then fit a line by least squares.

mod curved;
mod linear;
mod straight;

use serde::{Deserialize, Serialize};

pub use curved::{estimate_beta, estimate_curved, BetaEstimate};
pub use linear::{fit_linear_ls, LineFit};
pub use straight::{
    estimate_straight, estimate_straight_lambertian, invert_lambertian_range,
    invert_lambertian_range_near, invert_log_distance, lambertian_peak_range, range_transform,
    RangeSeries,
};

/// How the Lambertian channel is inverted on a straight road.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambertianMode {
    /// Invert the full `D^-gamma cos^(n+1)(theta)` expression.
    #[default]
    Exact,
    /// Ignore the cosine factor and invert `C D^-gamma`.
    Shortcut,
}

impl std::str::FromStr for LambertianMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "shortcut" => Ok(Self::Shortcut),
            other => Err(format!(
                "unknown mode `{other}` (expected exact or shortcut)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Estimated speed, m/s. Negative for a receding vehicle.
    pub v_hat: f64,
    /// Fitted value at the first sample: range in m on a straight road,
    /// arc angle in rad on a curve.
    pub intercept_hat: f64,
    /// Angular speed, rad/s (curved road only).
    pub w_hat: Option<f64>,
    /// RMS residual of the line fit, in units of the intercept.
    pub rms_residual: f64,
    pub samples_used: usize,
    /// Samples whose inversion hit a domain boundary and were clamped.
    pub clamped: usize,
}
