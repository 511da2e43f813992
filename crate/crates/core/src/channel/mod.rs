//! Received optical power as a function of vehicle pose.
//!
//! Two models are provided:
//!
//! * the Lambertian line-of-sight model, `C * D^-gamma * cos^(n+1)(theta)`,
//!   with `C = (n+1) A_R P_t / (2 pi)` and equal emitter/detector heights so
//!   that the irradiance and incidence angles coincide;
//! * the log-distance model `K * D^-gamma` fitted to ray-traced path loss.
//!
//! Ray-trace ingestion and the `(K, gamma)` curve fit live in [`rays`] and
//! [`fit_log_distance`].

pub mod rays;

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::estimator::fit_linear_ls;
use crate::geometry::Pose;

/// Fitted constants for the ray-traced road environment.
pub const SIMULATED_FIT: LogDistanceParams = LogDistanceParams {
    k_db: -49.32,
    gamma: 1.210,
};

/// Fitted constants for the idealised Lambertian emitter.
pub const LAMBERTIAN_FIT: LogDistanceParams = LogDistanceParams {
    k_db: -41.39,
    gamma: 1.673,
};

/// Detector field of view.
pub const DEFAULT_FOV_DEG: f64 = 70.0;
/// Headlamp half-power semi-angle.
pub const DEFAULT_PHI_HALF_DEG: f64 = 40.0;
/// Photodetector area, 1 cm².
pub const DEFAULT_APERTURE_M2: f64 = 1e-4;

/// Lambertian order `n = -ln 2 / ln(cos phi_half)`.
pub fn lambertian_order(phi_half: f64) -> Result<f64> {
    ensure(
        phi_half > 0.0 && phi_half < FRAC_PI_2,
        "phi_half",
        phi_half,
        "must lie in (0, pi/2)",
    )?;
    Ok(-LN_2 / phi_half.cos().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambertianParams {
    /// Half-power semi-angle of the headlamp, rad.
    pub phi_half: f64,
    /// Lambertian order, derived from `phi_half`.
    pub order: f64,
    /// Detector aperture, m².
    pub aperture: f64,
    /// Transmitted optical power, W.
    pub tx_power: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Detector field of view, rad.
    pub fov: f64,
}

impl LambertianParams {
    pub fn new(phi_half: f64, aperture: f64, tx_power: f64, gamma: f64, fov: f64) -> Result<Self> {
        let p = Self {
            phi_half,
            order: lambertian_order(phi_half)?,
            aperture,
            tx_power,
            gamma,
            fov,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters whose gain constant `C` equals `10^(gain_db/10)`,
    /// solving for the transmit power that produces it.
    pub fn with_gain(
        phi_half: f64,
        gain_db: f64,
        gamma: f64,
        fov: f64,
        aperture: f64,
    ) -> Result<Self> {
        let order = lambertian_order(phi_half)?;
        let gain = 10f64.powf(gain_db / 10.0);
        let tx_power = gain * 2.0 * PI / ((order + 1.0) * aperture);
        Self::new(phi_half, aperture, tx_power, gamma, fov)
    }

    /// Default headlamp (40° half-power angle, 70° FOV, 1 cm² detector) with
    /// the gain and exponent of `fit`.
    pub fn headlamp(fit: LogDistanceParams) -> Self {
        Self::with_gain(
            DEFAULT_PHI_HALF_DEG.to_radians(),
            fit.k_db,
            fit.gamma,
            DEFAULT_FOV_DEG.to_radians(),
            DEFAULT_APERTURE_M2,
        )
        .expect("default headlamp parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let n = lambertian_order(self.phi_half)?;
        ensure(
            (self.order - n).abs() <= 1e-12 * n.max(1.0),
            "order",
            self.order,
            "must equal -ln2 / ln(cos phi_half)",
        )?;
        ensure(
            self.aperture > 0.0,
            "aperture",
            self.aperture,
            "must be > 0",
        )?;
        ensure(
            self.tx_power > 0.0,
            "tx_power",
            self.tx_power,
            "must be > 0",
        )?;
        ensure(self.gamma > 0.0, "gamma", self.gamma, "must be > 0")?;
        ensure(
            self.fov > 0.0 && self.fov <= FRAC_PI_2,
            "fov",
            self.fov,
            "must lie in (0, pi/2]",
        )
    }

    /// `C = (n+1) A_R P_t / (2 pi)`.
    pub fn gain(&self) -> f64 {
        (self.order + 1.0) * self.aperture * self.tx_power / (2.0 * PI)
    }

    /// Gain constant and exponent viewed as a log-distance model.
    pub fn as_log_distance(&self) -> LogDistanceParams {
        LogDistanceParams {
            k_db: 10.0 * self.gain().log10(),
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDistanceParams {
    /// Channel gain at 1 m, dB.
    pub k_db: f64,
    /// Path-loss exponent.
    pub gamma: f64,
}

impl LogDistanceParams {
    pub fn new(k_db: f64, gamma: f64) -> Result<Self> {
        let p = Self { k_db, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.k_db.is_finite(), "k_db", self.k_db, "must be finite")?;
        ensure(self.gamma > 0.0, "gamma", self.gamma, "must be > 0")
    }

    /// Linear gain `K`.
    pub fn gain(&self) -> f64 {
        10f64.powf(self.k_db / 10.0)
    }

    /// Received power in dB at `distance`.
    pub fn power_db(&self, distance: f64) -> f64 {
        self.k_db - 10.0 * self.gamma * distance.log10()
    }

    /// Path loss (positive number) at `distance`, dB.
    pub fn loss_db(&self, distance: f64) -> f64 {
        -self.power_db(distance)
    }

    /// The model was fitted for distances of at least one metre; shorter
    /// distances still evaluate but lie outside the fitted range.
    pub fn is_valid_distance(distance: f64) -> bool {
        distance >= 1.0
    }
}

/// Lambertian received power, zero outside the detector's field of view.
pub fn lambertian_power(p: &LambertianParams, pose: &Pose) -> Result<f64> {
    if !(pose.distance > 0.0) {
        return Err(Error::Domain(format!(
            "Lambertian power is singular at distance {}",
            pose.distance
        )));
    }
    if pose.theta > p.fov {
        return Ok(0.0);
    }
    Ok(p.gain() * pose.distance.powf(-p.gamma) * pose.theta.cos().powf(p.order + 1.0))
}

/// Log-distance received power `K * D^-gamma`, watts.
pub fn log_distance_power(p: &LogDistanceParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "log-distance power needs a positive distance, got {distance}"
        )));
    }
    Ok(p.gain() * distance.powf(-p.gamma))
}

/// Received power on the curved road with the detector at the curve end:
/// `K cos^(n+1)(beta/2) / (2 r_c sin(beta/2))^gamma`.
///
/// The Lambertian order comes from `lam`, the gain and exponent from `k`.
pub fn curved_power(
    lam: &LambertianParams,
    k: &LogDistanceParams,
    radius: f64,
    beta: f64,
) -> Result<f64> {
    ensure(radius > 0.0, "radius", radius, "must be > 0")?;
    if !(beta > 0.0 && beta <= PI) {
        return Err(Error::Domain(format!(
            "arc angle {beta} rad is outside (0, pi]"
        )));
    }
    let half = 0.5 * beta;
    let chord = 2.0 * radius * half.sin();
    Ok(k.gain() * half.cos().powf(lam.order + 1.0) / chord.powf(k.gamma))
}

/// Channel used to synthesise a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ChannelModel {
    /// Log-distance fit of the ray-traced environment.
    Simulated(LogDistanceParams),
    /// Lambertian line-of-sight emitter.
    Lambertian(LambertianParams),
}

impl ChannelModel {
    pub fn power(&self, pose: &Pose) -> Result<f64> {
        match self {
            ChannelModel::Simulated(k) => log_distance_power(k, pose.distance),
            ChannelModel::Lambertian(lam) => lambertian_power(lam, pose),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelModel::Simulated(k) => k.validate(),
            ChannelModel::Lambertian(lam) => lam.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelModel::Simulated(_) => "simulated",
            ChannelModel::Lambertian(_) => "lambertian",
        }
    }

    /// Gain and exponent as a log-distance pair.
    pub fn log_distance(&self) -> LogDistanceParams {
        match self {
            ChannelModel::Simulated(k) => *k,
            ChannelModel::Lambertian(lam) => lam.as_log_distance(),
        }
    }
}

/// One point of a path-loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    /// Distance, m.
    pub distance: f64,
    /// Path loss, dB (positive means loss).
    pub loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathLossFit {
    pub params: LogDistanceParams,
    /// RMS of the loss residuals, dB.
    pub rms_residual_db: f64,
    pub samples: usize,
}

/// Least-squares fit of `loss = -K_dB + 10 gamma log10(D)`.
pub fn fit_log_distance(samples: &[PathLossSample]) -> Result<PathLossFit> {
    for (i, s) in samples.iter().enumerate() {
        if !(s.distance > 0.0) || !s.loss_db.is_finite() {
            return Err(Error::BadSample {
                index: i,
                reason: format!("distance {} / loss {} dB", s.distance, s.loss_db),
            });
        }
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.distance).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Underdetermined {
            distinct: distinct.len(),
        });
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.distance.log10(), s.loss_db))
        .collect();
    let line = fit_linear_ls(&points)?;
    Ok(PathLossFit {
        params: LogDistanceParams {
            k_db: -line.intercept,
            gamma: line.slope / 10.0,
        },
        rms_residual_db: line.rms_residual,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{straight_pose, StraightScenario};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    #[test]
    fn order_closed_forms() {
        assert!((lambertian_order(60f64.to_radians()).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambertian_order(45f64.to_radians()).unwrap() - 2.0).abs() < 1e-12);
        assert!((lambertian_order(40f64.to_radians()).unwrap() - 2.600780).abs() < 1e-6);
    }

    #[test]
    fn order_rejects_out_of_range() {
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(FRAC_PI_2).is_err());
        assert!(lambertian_order(-0.1).is_err());
    }

    fn table_lambertian() -> LambertianParams {
        LambertianParams::new(40f64.to_radians(), 1e-4, 1.0, 1.673, 70f64.to_radians()).unwrap()
    }

    #[test]
    fn head_on_power_is_gain_over_distance() {
        let lam = table_lambertian();
        let pose = Pose {
            t: 0.0,
            distance: 7.0,
            range: 7.0,
            lateral: 0.0,
            theta: 0.0,
            beta: None,
        };
        let p = lambertian_power(&lam, &pose).unwrap();
        assert_eq!(p, lam.gain() * 7f64.powf(-1.673));
    }

    #[test]
    fn power_gated_outside_fov() {
        let lam = table_lambertian();
        let s = StraightScenario::new(0.5, 15.0, 20.0).unwrap();
        let t = s.time_at_angle(75f64.to_radians()).unwrap();
        let pose = straight_pose(&s, t).unwrap();
        assert_eq!(lambertian_power(&lam, &pose).unwrap(), 0.0);
    }

    #[test]
    fn power_singular_at_zero_distance() {
        let pose = Pose {
            t: 0.0,
            distance: 0.0,
            range: 0.0,
            lateral: 0.0,
            theta: 0.0,
            beta: None,
        };
        assert!(lambertian_power(&table_lambertian(), &pose).is_err());
    }

    // Lambertian power written with cos(theta) = sqrt(D² - d²) / D.
    fn lambertian_by_offset(lam: &LambertianParams, distance: f64, offset: f64) -> f64 {
        let c = (lam.order + 1.0) * lam.aperture * lam.tx_power / (2.0 * PI);
        let cos = (distance * distance - offset * offset).sqrt() / distance;
        c / distance.powf(lam.gamma) * cos.powf(lam.order + 1.0)
    }

    #[test]
    fn both_lambertian_forms_agree_at_window_start() {
        let lam = table_lambertian();
        let s = StraightScenario::new(0.5, 15.0, 20.0).unwrap();
        let pose = straight_pose(&s, 0.0).unwrap();
        let direct = lambertian_power(&lam, &pose).unwrap();
        let oracle = lambertian_by_offset(&lam, pose.distance, 0.5);
        assert!((direct - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn log_distance_reference_values() {
        let p = log_distance_power(&SIMULATED_FIT, 1.0).unwrap();
        assert!((db(p) + 49.32).abs() < 1e-12);
        let p = log_distance_power(&SIMULATED_FIT, 10.0).unwrap();
        assert!((db(p) + 61.42).abs() < 1e-12);
        let p = log_distance_power(&LAMBERTIAN_FIT, 100.0).unwrap();
        assert!((db(p) + 74.85).abs() < 1e-12);
        assert!(log_distance_power(&SIMULATED_FIT, 0.0).is_err());
        assert!(!LogDistanceParams::is_valid_distance(0.5));
    }

    #[test]
    fn curved_power_quarter_arc() {
        let lam = LambertianParams::headlamp(SIMULATED_FIT);
        let p = curved_power(&lam, &SIMULATED_FIT, 40.0, FRAC_PI_2).unwrap();
        assert!((db(p) + 75.945872).abs() < 1e-6);
        let near_pi = curved_power(&lam, &SIMULATED_FIT, 40.0, PI).unwrap();
        assert!(near_pi < 1e-30);
        assert!(curved_power(&lam, &SIMULATED_FIT, 40.0, 0.0).is_err());
        assert!(curved_power(&lam, &SIMULATED_FIT, 0.0, 1.0).is_err());
    }

    #[test]
    fn with_gain_reproduces_requested_constant() {
        let lam = LambertianParams::headlamp(LAMBERTIAN_FIT);
        assert!((lam.as_log_distance().k_db - LAMBERTIAN_FIT.k_db).abs() < 1e-12);
        assert_eq!(lam.gamma, LAMBERTIAN_FIT.gamma);
    }

    #[test]
    fn lambertian_fit_loses_less_than_simulated_below_crossover() {
        for d in 2..=50 {
            let d = d as f64;
            assert!(
                LAMBERTIAN_FIT.loss_db(d) < SIMULATED_FIT.loss_db(d),
                "D = {d}"
            );
        }
        // Equal-loss distance of the two dB lines.
        let crossover = 10f64.powf(
            (LAMBERTIAN_FIT.k_db - SIMULATED_FIT.k_db)
                / (10.0 * (LAMBERTIAN_FIT.gamma - SIMULATED_FIT.gamma)),
        );
        assert!((crossover - 51.611).abs() < 1e-3);
    }

    fn exact_samples(k: LogDistanceParams) -> Vec<PathLossSample> {
        (1..=10)
            .map(|d| PathLossSample {
                distance: d as f64,
                loss_db: k.loss_db(d as f64),
            })
            .collect()
    }

    #[test]
    fn fit_recovers_noiseless_constants() {
        let fit = fit_log_distance(&exact_samples(LAMBERTIAN_FIT)).unwrap();
        assert!((fit.params.k_db - LAMBERTIAN_FIT.k_db).abs() < 1e-9);
        assert!((fit.params.gamma - LAMBERTIAN_FIT.gamma).abs() < 1e-9);
        assert!(fit.rms_residual_db < 1e-9);
    }

    #[test]
    fn fit_needs_two_distances() {
        let one = vec![
            PathLossSample {
                distance: 3.0,
                loss_db: 50.0,
            };
            4
        ];
        assert!(matches!(
            fit_log_distance(&one),
            Err(Error::Underdetermined { distinct: 1 })
        ));
        assert!(fit_log_distance(&[]).is_err());
    }

    // With 0.1 dB jitter on the 1..10 m grid the exponent estimate has a
    // standard deviation of 0.01 / sqrt(Sxx) with Sxx = sum (log10 D - mean)².
    // The fraction of seeds inside 1 % must match the Gaussian prediction.
    #[test]
    fn fit_spread_matches_closed_form_variance() {
        let base = exact_samples(LAMBERTIAN_FIT);
        let xs: Vec<f64> = base.iter().map(|s| s.distance.log10()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let sd_gamma = 0.1 / 10.0 / sxx.sqrt();

        let jitter = Normal::new(0.0, 0.1).unwrap();
        let mut errs = Vec::new();
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<_> = base
                .iter()
                .map(|s| PathLossSample {
                    loss_db: s.loss_db + jitter.sample(&mut rng),
                    ..*s
                })
                .collect();
            let fit = fit_log_distance(&noisy).unwrap();
            errs.push(fit.params.gamma - LAMBERTIAN_FIT.gamma);
            assert!((fit.params.k_db / LAMBERTIAN_FIT.k_db - 1.0).abs() < 0.01);
        }
        let n = errs.len() as f64;
        let m = errs.iter().sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(m.abs() < 4.0 * sd_gamma / n.sqrt());
        assert!((sd / sd_gamma - 1.0).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn lambertian_forms_agree(
            d in 0.05f64..3.0,
            extra in 0.01f64..50.0,
            phi_deg in 10.0f64..80.0,
            gamma in 0.5f64..3.0,
        ) {
            let lam = LambertianParams::new(phi_deg.to_radians(), 1e-4, 1.0, gamma, FRAC_PI_2).unwrap();
            let distance = d + extra;
            let range = (distance * distance - d * d).sqrt();
            let pose = Pose { t: 0.0, distance, range, lateral: d, theta: d.atan2(range), beta: None };
            let direct = lambertian_power(&lam, &pose).unwrap();
            let oracle = lambertian_by_offset(&lam, distance, d);
            prop_assert!((direct - oracle).abs() <= 1e-12 * oracle);
        }

        #[test]
        fn curved_power_decreases_in_arc_angle(b1 in 1e-3f64..3.1, db_ in 1e-4f64..0.04) {
            let lam = LambertianParams::headlamp(SIMULATED_FIT);
            let p1 = curved_power(&lam, &SIMULATED_FIT, 40.0, b1).unwrap();
            let p2 = curved_power(&lam, &SIMULATED_FIT, 40.0, b1 + db_).unwrap();
            prop_assert!(p2 < p1);
        }

        #[test]
        fn fit_is_exact_without_noise(k_db in -80.0f64..-10.0, gamma in 0.5f64..4.0) {
            let truth = LogDistanceParams::new(k_db, gamma).unwrap();
            let fit = fit_log_distance(&exact_samples(truth)).unwrap();
            prop_assert!((fit.params.k_db - k_db).abs() < 1e-9);
            prop_assert!((fit.params.gamma - gamma).abs() < 1e-9);
        }
    }
}
