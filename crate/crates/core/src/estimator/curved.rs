//! Curved-road estimation.
//!
//! Received power falls strictly with the remaining arc angle `beta`, so each
//! sample has a unique `beta` found by bisection. The angles fall linearly at
//! the angular speed `w`, and `v = w r_c`.

use std::f64::consts::PI;

use crate::channel::{LambertianParams, LogDistanceParams};
use crate::error::{ensure, Error, Result};
use crate::trace::PowerTrace;

use super::{fit_linear_ls, SpeedEstimate};

/// Smallest arc angle searched, rad.
const BETA_MIN: f64 = 1e-6;
const BETA_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEstimate {
    pub beta: f64,
    /// The power lay outside the attainable range and `beta` sits on a bound.
    pub clamped: bool,
}

fn ln_power(ln_gain: f64, m: f64, gamma: f64, radius: f64, beta: f64) -> f64 {
    let half = 0.5 * beta;
    ln_gain + m * half.cos().ln() - gamma * (2.0 * radius * half.sin()).ln()
}

/// Arc angle at which the curved-road channel delivers `power`.
pub fn estimate_beta(
    power: f64,
    lam: &LambertianParams,
    k: &LogDistanceParams,
    radius: f64,
) -> Result<BetaEstimate> {
    ensure(radius > 0.0, "radius", radius, "must be > 0")?;
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::Domain(format!(
            "cannot invert received power {power}"
        )));
    }
    let m = lam.order + 1.0;
    let ln_gain = k.gain().ln();
    let target = power.ln();
    let f = |b: f64| ln_power(ln_gain, m, k.gamma, radius, b);
    if target >= f(BETA_MIN) {
        return Ok(BetaEstimate {
            beta: BETA_MIN,
            clamped: true,
        });
    }
    let (mut lo, mut hi) = (BETA_MIN, PI);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BETA_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaEstimate {
        beta: 0.5 * (lo + hi),
        clamped: false,
    })
}

/// Speed from a curved-road trace. The line fit of `beta` against time gives
/// `-w` as slope and the window-start angle as intercept.
pub fn estimate_curved(
    trace: &PowerTrace,
    lam: &LambertianParams,
    k: &LogDistanceParams,
    radius: f64,
) -> Result<SpeedEstimate> {
    ensure(radius > 0.0, "radius", radius, "must be > 0")?;
    let t0 = trace.t_start();
    let mut clamped = 0;
    let points = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !(s.power > 0.0) || !s.power.is_finite() {
                return Err(Error::BadSample {
                    index: i,
                    reason: format!("received power {} must be > 0", s.power),
                });
            }
            let b = estimate_beta(s.power, lam, k, radius)?;
            clamped += b.clamped as usize;
            Ok((s.t - t0, b.beta))
        })
        .collect::<Result<Vec<_>>>()?;
    if clamped == points.len() {
        return Err(Error::DegenerateWindow {
            clamped,
            total: points.len(),
        });
    }
    let line = fit_linear_ls(&points)?;
    let w = -line.slope;
    Ok(SpeedEstimate {
        v_hat: w * radius,
        intercept_hat: line.intercept,
        w_hat: Some(w),
        rms_residual: line.rms_residual,
        samples_used: points.len(),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{curved_power, ChannelModel, LAMBERTIAN_FIT, SIMULATED_FIT};
    use crate::geometry::{CurvedScenario, Scenario};
    use crate::trace::{add_noise, synthesize_trace, NoiseSpec, SamplingSpec};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn lam() -> LambertianParams {
        LambertianParams::headlamp(SIMULATED_FIT)
    }

    fn curved_trace(sampling: SamplingSpec) -> PowerTrace {
        let s = CurvedScenario::new(40.0, 0.5, FRAC_PI_2).unwrap();
        synthesize_trace(
            &Scenario::Curved(s),
            &ChannelModel::Lambertian(lam()),
            &sampling,
        )
        .unwrap()
    }

    #[test]
    fn beta_round_trip_at_quarter_turn() {
        let p = curved_power(&lam(), &SIMULATED_FIT, 40.0, FRAC_PI_2).unwrap();
        let b = estimate_beta(p, &lam(), &SIMULATED_FIT, 40.0).unwrap();
        assert!(!b.clamped);
        assert!((b.beta - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn saturated_power_clamps() {
        let b = estimate_beta(1e6, &lam(), &SIMULATED_FIT, 40.0).unwrap();
        assert!(b.clamped);
        assert_eq!(b.beta, BETA_MIN);
    }

    #[test]
    fn invalid_inputs() {
        assert!(estimate_beta(0.0, &lam(), &SIMULATED_FIT, 40.0).is_err());
        assert!(estimate_beta(1e-6, &lam(), &SIMULATED_FIT, 0.0).is_err());
    }

    #[test]
    fn noiseless_curved_recovery() {
        let tr = curved_trace(SamplingSpec::default());
        let est = estimate_curved(&tr, &lam(), &SIMULATED_FIT, 40.0).unwrap();
        assert!((est.v_hat - 20.0).abs() < 1e-6, "{}", est.v_hat);
        assert!((est.w_hat.unwrap() - 0.5).abs() < 1e-8);
        assert!((est.intercept_hat - FRAC_PI_2).abs() < 1e-9);
        assert_eq!(est.clamped, 0);
    }

    #[test]
    fn zero_radius_rejected() {
        let tr = curved_trace(SamplingSpec::default());
        assert!(matches!(
            estimate_curved(&tr, &lam(), &SIMULATED_FIT, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn fully_saturated_window_is_degenerate() {
        let mut tr = curved_trace(SamplingSpec::default());
        for s in &mut tr.samples {
            s.power = 1e6;
        }
        assert!(matches!(
            estimate_curved(&tr, &lam(), &SIMULATED_FIT, 40.0),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn noisy_curved_is_close_at_high_snr() {
        let clean = curved_trace(SamplingSpec::default());
        let noisy = add_noise(
            &clean,
            &NoiseSpec {
                snr0_db: 60.0,
                seed: 1,
            },
        )
        .unwrap();
        let est = estimate_curved(&noisy, &lam(), &SIMULATED_FIT, 40.0).unwrap();
        assert!((est.v_hat - 20.0).abs() < 1.0, "{}", est.v_hat);
    }

    proptest! {
        #[test]
        fn beta_inversion_round_trip(beta in 0.01f64..3.0, r in 5.0f64..200.0) {
            let lam = LambertianParams::headlamp(LAMBERTIAN_FIT);
            let p = curved_power(&lam, &LAMBERTIAN_FIT, r, beta).unwrap();
            let b = estimate_beta(p, &lam, &LAMBERTIAN_FIT, r).unwrap();
            prop_assert!((b.beta - beta).abs() < 1e-9);
        }
    }
}
