//! Straight-road estimation.
//!
//! Each power sample is mapped back to a range along the road; the ranges
//! fall linearly at the vehicle speed, so a least-squares line through
//! `(t - t0, range)` yields `-V` as slope and the window-start range as
//! intercept.

use crate::channel::{LambertianParams, LogDistanceParams};
use crate::error::{Error, Result};
use crate::trace::PowerTrace;

use super::{fit_linear_ls, LambertianMode, SpeedEstimate};

/// Absolute bracket width at which range bisection stops, m.
const RANGE_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

/// Distance at which the log-distance model yields power `power`.
pub fn invert_log_distance(power: f64, k: &LogDistanceParams) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Domain(format!(
            "cannot invert non-positive power {power}"
        )));
    }
    Ok((power / k.gain()).powf(-1.0 / k.gamma))
}

/// Range samples derived from a trace, with abscissae rebased to the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSeries {
    pub points: Vec<(f64, f64)>,
    /// Samples whose implied distance fell below the lateral offset (or above
    /// the model maximum) and were clamped.
    pub clamped: usize,
}

fn check_power(index: usize, power: f64) -> Result<()> {
    if power > 0.0 && power.is_finite() {
        Ok(())
    } else {
        Err(Error::BadSample {
            index,
            reason: format!("received power {power} must be > 0"),
        })
    }
}

/// Range from the power ratio `P / K`: `sqrt(max(ratio^(-2/gamma) - d², 0))`.
pub(crate) fn range_from_ratio(ratio: f64, gamma: f64, offset: f64) -> (f64, bool) {
    let sq = ratio.powf(-2.0 / gamma) - offset * offset;
    if sq < 0.0 {
        (0.0, true)
    } else {
        (sq.sqrt(), false)
    }
}

pub(crate) fn range_transform_linear(
    trace: &PowerTrace,
    gain: f64,
    gamma: f64,
    offset: f64,
) -> Result<RangeSeries> {
    let t0 = trace.t_start();
    let mut clamped = 0;
    let points = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            check_power(i, s.power)?;
            let (y, hit) = range_from_ratio(s.power / gain, gamma, offset);
            clamped += hit as usize;
            Ok((s.t - t0, y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RangeSeries { points, clamped })
}

/// Linearising transform for the log-distance channel.
pub fn range_transform(
    trace: &PowerTrace,
    k: &LogDistanceParams,
    offset: f64,
) -> Result<RangeSeries> {
    range_transform_linear(trace, k.gain(), k.gamma, offset)
}

fn estimate_from_ranges(series: RangeSeries) -> Result<SpeedEstimate> {
    let line = fit_linear_ls(&series.points)?;
    Ok(SpeedEstimate {
        v_hat: -line.slope,
        intercept_hat: line.intercept,
        w_hat: None,
        rms_residual: line.rms_residual,
        samples_used: series.points.len(),
        clamped: series.clamped,
    })
}

/// Speed from a straight-road trace under the log-distance channel.
pub fn estimate_straight(
    trace: &PowerTrace,
    k: &LogDistanceParams,
    offset: f64,
) -> Result<SpeedEstimate> {
    estimate_from_ranges(range_transform(trace, k, offset)?)
}

/// Lambertian received power as a function of along-road range:
/// `C R^(n+1) / (R² + d²)^((gamma+n+1)/2)`, evaluated in log space.
fn ln_lambertian_at_range(ln_gain: f64, m: f64, gamma: f64, offset: f64, range: f64) -> f64 {
    ln_gain + m * range.ln() - 0.5 * (gamma + m) * (range * range + offset * offset).ln()
}

/// Range at which the Lambertian power peaks, `d sqrt((n+1)/gamma)`.
///
/// Beyond it the power rises as the vehicle approaches; inside it the
/// cosine factor dominates and the power falls again.
pub fn lambertian_peak_range(lam: &LambertianParams, offset: f64) -> f64 {
    offset * ((lam.order + 1.0) / lam.gamma).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Far,
    Near,
}

/// Root of the Lambertian range equation on one branch. `Ok(None)` means the
/// power exceeds the attainable maximum.
fn lambertian_root(
    power: f64,
    lam: &LambertianParams,
    gain: f64,
    offset: f64,
    branch: Branch,
) -> Result<Option<f64>> {
    if !(power > 0.0) {
        return Err(Error::Domain(format!(
            "cannot invert non-positive power {power}"
        )));
    }
    let m = lam.order + 1.0;
    if offset == 0.0 {
        return Ok(Some((power / gain).powf(-1.0 / lam.gamma)));
    }
    let ln_gain = gain.ln();
    let target = power.ln();
    let f = |r: f64| ln_lambertian_at_range(ln_gain, m, lam.gamma, offset, r);
    let peak = lambertian_peak_range(lam, offset);
    if target > f(peak) {
        return Ok(None);
    }
    // Bracket [lo, hi] with f(lo) >= target >= f(hi) on the far branch and the
    // reverse on the near branch.
    let (mut lo, mut hi) = match branch {
        Branch::Far => {
            let mut hi = 2.0 * peak;
            while f(hi) > target {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Domain("range bracket overflowed".into()));
                }
            }
            (peak, hi)
        }
        Branch::Near => (0.0, peak),
    };
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= RANGE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let above = f(mid) > target;
        match (branch, above) {
            (Branch::Far, true) | (Branch::Near, false) => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Along-road range `R >= R*` (the far side of the power peak) at which the
/// Lambertian channel with gain `gain` delivers `power`.
pub fn invert_lambertian_range(
    power: f64,
    lam: &LambertianParams,
    gain: f64,
    offset: f64,
) -> Result<f64> {
    lambertian_root(power, lam, gain, offset, Branch::Far)?.ok_or_else(|| {
        let peak = lambertian_peak_range(lam, offset);
        let m = lam.order + 1.0;
        let max = ln_lambertian_at_range(gain.ln(), m, lam.gamma, offset, peak).exp();
        Error::NoSolution { power, max }
    })
}

/// Range `0 <= R <= R*` on the near side of the power peak.
pub fn invert_lambertian_range_near(
    power: f64,
    lam: &LambertianParams,
    gain: f64,
    offset: f64,
) -> Result<f64> {
    lambertian_root(power, lam, gain, offset, Branch::Near)?.ok_or_else(|| {
        let peak = lambertian_peak_range(lam, offset);
        let m = lam.order + 1.0;
        let max = ln_lambertian_at_range(gain.ln(), m, lam.gamma, offset, peak).exp();
        Error::NoSolution { power, max }
    })
}

/// Exact Lambertian inversion of every sample.
///
/// The vehicle approaches monotonically, so the window visits the far branch
/// first and may cross the power peak once. The crossing is located at the
/// maximum of the smoothed power; split points near it are scored by the
/// residual of the resulting line fit and the best one is kept.
fn lambertian_exact_series(
    trace: &PowerTrace,
    lam: &LambertianParams,
    offset: f64,
) -> Result<RangeSeries> {
    let gain = lam.gain();
    let peak = lambertian_peak_range(lam, offset);
    let t0 = trace.t_start();
    let mut clamped = 0;
    let mut far = Vec::with_capacity(trace.len());
    let mut near = Vec::with_capacity(trace.len());
    for (i, s) in trace.samples.iter().enumerate() {
        check_power(i, s.power)?;
        let x = s.t - t0;
        match lambertian_root(s.power, lam, gain, offset, Branch::Far)? {
            Some(r) => {
                far.push((x, r));
                near.push((
                    x,
                    lambertian_root(s.power, lam, gain, offset, Branch::Near)?.unwrap_or(peak),
                ));
            }
            None => {
                clamped += 1;
                far.push((x, peak));
                near.push((x, peak));
            }
        }
    }
    if offset == 0.0 {
        return Ok(RangeSeries {
            points: far,
            clamped,
        });
    }

    let powers: Vec<f64> = trace.powers().collect();
    let split = best_split(&far, &near, &powers);
    let points = far[..split].iter().chain(&near[split..]).copied().collect();
    Ok(RangeSeries { points, clamped })
}

#[derive(Clone, Copy, Default)]
struct Sums {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Sums {
    fn add(&mut self, (x, y): (f64, f64)) {
        self.n += 1.0;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.xy += x * y;
        self.yy += y * y;
    }

    fn merged(&self, o: &Sums) -> Sums {
        Sums {
            n: self.n + o.n,
            x: self.x + o.x,
            y: self.y + o.y,
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    /// Residual sum of squares of the least-squares line.
    fn sse(&self) -> f64 {
        let sxx = self.xx - self.x * self.x / self.n;
        let sxy = self.xy - self.x * self.y / self.n;
        let syy = self.yy - self.y * self.y / self.n;
        if sxx > 0.0 {
            syy - sxy * sxy / sxx
        } else {
            syy
        }
    }
}

/// Index of the maximum of a centred moving average of half-width `h`.
fn smoothed_argmax(powers: &[f64], h: usize) -> usize {
    let n = powers.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, p) in powers.iter().enumerate() {
        prefix[i + 1] = prefix[i] + p;
    }
    (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(h), (i + h + 1).min(n));
            (i, (prefix[hi] - prefix[lo]) / (hi - lo) as f64)
        })
        .fold((0, f64::NEG_INFINITY), |best, (i, m)| {
            if m > best.1 {
                (i, m)
            } else {
                best
            }
        })
        .0
}

/// Index `s` such that samples `< s` use the far root and `>= s` the near
/// root. Candidates lie around the smoothed power peak; the one minimising
/// the line-fit residual wins.
fn best_split(far: &[(f64, f64)], near: &[(f64, f64)], powers: &[f64]) -> usize {
    let n = far.len();
    let h = (n / 50).max(1);
    let peak = smoothed_argmax(powers, h);
    let (first, last) = (peak.saturating_sub(h), (peak + h + 1).min(n));
    // Shift ordinates to keep the running sums well conditioned.
    let shift = far[0].1;
    let shifted = |p: (f64, f64)| (p.0, p.1 - shift);
    let mut prefix = vec![Sums::default(); n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i];
        prefix[i + 1].add(shifted(far[i]));
    }
    let mut suffix = vec![Sums::default(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1];
        suffix[i].add(shifted(near[i]));
    }
    (first..=last)
        .map(|s| (s, prefix[s].merged(&suffix[s]).sse()))
        .fold((last, f64::INFINITY), |best, (s, sse)| {
            if sse < best.1 {
                (s, sse)
            } else {
                best
            }
        })
        .0
}

/// Speed from a straight-road trace under the Lambertian channel.
///
/// `Exact` inverts the full `cos^(n+1)` dependence per sample. `Shortcut`
/// treats the channel as log-distance with the same gain and exponent,
/// i.e. assumes `cos(theta) = 1`.
pub fn estimate_straight_lambertian(
    trace: &PowerTrace,
    lam: &LambertianParams,
    offset: f64,
    mode: LambertianMode,
) -> Result<SpeedEstimate> {
    let series = match mode {
        LambertianMode::Exact => lambertian_exact_series(trace, lam, offset)?,
        LambertianMode::Shortcut => range_transform_linear(trace, lam.gain(), lam.gamma, offset)?,
    };
    estimate_from_ranges(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        lambertian_power, log_distance_power, ChannelModel, LAMBERTIAN_FIT, SIMULATED_FIT,
    };
    use crate::geometry::{straight_pose, Scenario, StraightScenario};
    use crate::trace::{add_noise, synthesize_trace, NoiseSpec, Sample, SamplingSpec};
    use proptest::prelude::*;

    fn scenario() -> StraightScenario {
        StraightScenario::new(0.5, 15.0, 20.0).unwrap()
    }

    fn trace(channel: ChannelModel, sampling: SamplingSpec) -> PowerTrace {
        synthesize_trace(&Scenario::Straight(scenario()), &channel, &sampling).unwrap()
    }

    #[test]
    fn unit_distance_at_gain() {
        let d = invert_log_distance(SIMULATED_FIT.gain(), &SIMULATED_FIT).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let p = 10f64.powf(-61.42 / 10.0);
        assert!((invert_log_distance(p, &SIMULATED_FIT).unwrap() - 10.0).abs() < 1e-10);
        assert!(invert_log_distance(0.0, &SIMULATED_FIT).is_err());
    }

    #[test]
    fn noiseless_ranges_are_linear() {
        let tr = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        let series = range_transform(&tr, &SIMULATED_FIT, 0.5).unwrap();
        assert_eq!(series.clamped, 0);
        for (i, &(x, y)) in series.points.iter().enumerate() {
            let expect = 15.0 - 20.0 * tr.samples[i].t;
            assert!((y - expect).abs() <= 1e-9 * expect, "{i}");
            assert_eq!(x, tr.samples[i].t);
        }
    }

    #[test]
    fn implied_distance_inside_offset_clamps() {
        let k = SIMULATED_FIT;
        // Power at 0.4 m, closer than the 0.5 m offset allows.
        let p = log_distance_power(&k, 0.4).unwrap();
        let tr = PowerTrace::from_samples(
            vec![Sample { t: 0.0, power: p }, Sample { t: 0.001, power: p }],
            0.0,
            0,
        )
        .unwrap();
        let series = range_transform(&tr, &k, 0.5).unwrap();
        assert_eq!(series.clamped, 2);
        assert_eq!(series.points[0].1, 0.0);
    }

    #[test]
    fn zero_power_names_sample() {
        let mut tr = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        tr.samples[17].power = 0.0;
        match range_transform(&tr, &SIMULATED_FIT, 0.5) {
            Err(Error::BadSample { index, .. }) => assert_eq!(index, 17),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn later_samples_are_more_accurate() {
        let clean = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        let mut early = 0.0;
        let mut late = 0.0;
        for seed in 0..200 {
            let noisy = add_noise(
                &clean,
                &NoiseSpec {
                    snr0_db: 30.0,
                    seed,
                },
            )
            .unwrap();
            let series = range_transform(&noisy, &SIMULATED_FIT, 0.5).unwrap();
            for (i, &(x, y)) in series.points.iter().enumerate() {
                let err = (y - (15.0 - 20.0 * x)).abs();
                if i < 100 {
                    early += err;
                } else if i >= 200 {
                    late += err;
                }
            }
        }
        assert!(late < 0.5 * early, "late {late} early {early}");
    }

    #[test]
    fn noiseless_straight_recovery() {
        let tr = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        let est = estimate_straight(&tr, &SIMULATED_FIT, 0.5).unwrap();
        assert!((est.v_hat - 20.0).abs() < 1e-9);
        assert!((est.intercept_hat - 15.0).abs() < 1e-9);
        assert_eq!(est.samples_used, 300);
    }

    #[test]
    fn intercept_is_range_at_window_start() {
        let sampling = SamplingSpec::new(1e-3, 0.2, 0.3).unwrap();
        let tr = trace(ChannelModel::Simulated(SIMULATED_FIT), sampling);
        let est = estimate_straight(&tr, &SIMULATED_FIT, 0.5).unwrap();
        assert!((est.intercept_hat - 11.0).abs() < 1e-9);
    }

    #[test]
    fn mostly_accurate_at_30_db() {
        let clean = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        let good = (0..500)
            .filter(|&seed| {
                let noisy = add_noise(
                    &clean,
                    &NoiseSpec {
                        snr0_db: 30.0,
                        seed,
                    },
                )
                .unwrap();
                let v = estimate_straight(&noisy, &SIMULATED_FIT, 0.5)
                    .unwrap()
                    .v_hat;
                (v - 20.0).abs() / 20.0 < 0.1
            })
            .count();
        assert!(good > 250, "{good}");
    }

    #[test]
    fn receding_vehicle_gives_negative_speed() {
        let k = SIMULATED_FIT;
        let samples = (0..100)
            .map(|i| {
                let t = i as f64 * 1e-3;
                let r = 5.0 + 20.0 * t;
                Sample {
                    t,
                    power: log_distance_power(&k, r.hypot(0.5)).unwrap(),
                }
            })
            .collect();
        let tr = PowerTrace::from_samples(samples, 0.0, 0).unwrap();
        let est = estimate_straight(&tr, &k, 0.5).unwrap();
        assert!((est.v_hat + 20.0).abs() < 1e-9);
    }

    #[test]
    fn scale_equivariance_is_bit_exact() {
        let tr = trace(
            ChannelModel::Simulated(SIMULATED_FIT),
            SamplingSpec::default(),
        );
        let noisy = add_noise(
            &tr,
            &NoiseSpec {
                snr0_db: 30.0,
                seed: 5,
            },
        )
        .unwrap();
        let mut scaled = noisy.clone();
        for s in &mut scaled.samples {
            s.power *= 4.0;
        }
        let gain = SIMULATED_FIT.gain();
        let a =
            estimate_from_ranges(range_transform_linear(&noisy, gain, 1.21, 0.5).unwrap()).unwrap();
        let b =
            estimate_from_ranges(range_transform_linear(&scaled, 4.0 * gain, 1.21, 0.5).unwrap())
                .unwrap();
        assert_eq!(a.v_hat.to_bits(), b.v_hat.to_bits());

        // Through the dB-parameterised API the shift is exact only to rounding.
        let shifted =
            LogDistanceParams::new(SIMULATED_FIT.k_db + 10.0 * 4f64.log10(), 1.21).unwrap();
        let c = estimate_straight(&scaled, &shifted, 0.5).unwrap();
        assert!((c.v_hat - a.v_hat).abs() <= 1e-12 * a.v_hat.abs());
    }

    fn lam() -> LambertianParams {
        LambertianParams::headlamp(LAMBERTIAN_FIT)
    }

    #[test]
    fn lambertian_round_trip() {
        let lam = lam();
        let s = scenario();
        for r in [1.0, 5.0, 14.9] {
            let t = (15.0 - r) / 20.0;
            let p = lambertian_power(&lam, &straight_pose(&s, t).unwrap()).unwrap();
            let back = invert_lambertian_range(p, &lam, lam.gain(), 0.5).unwrap();
            assert!((back - r).abs() <= 1e-6, "{r} -> {back}");
        }
    }

    #[test]
    fn lambertian_near_branch_round_trip() {
        let lam = lam();
        let peak = lambertian_peak_range(&lam, 0.5);
        let r = 0.3 * peak;
        let p = lam.gain() * r.powf(lam.order + 1.0)
            / (r * r + 0.25).powf(0.5 * (lam.gamma + lam.order + 1.0));
        let back = invert_lambertian_range_near(p, &lam, lam.gain(), 0.5).unwrap();
        assert!((back - r).abs() < 1e-8);
    }

    #[test]
    fn lambertian_on_axis_matches_log_distance() {
        let lam = lam();
        let p = 3.0e-6;
        let a = invert_lambertian_range(p, &lam, lam.gain(), 0.0).unwrap();
        let b = invert_log_distance(p, &lam.as_log_distance()).unwrap();
        assert!((a - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn lambertian_above_peak_has_no_solution() {
        let lam = lam();
        let peak = lambertian_peak_range(&lam, 0.5);
        let m = lam.order + 1.0;
        let max = lam.gain() * peak.powf(m) / (peak * peak + 0.25).powf(0.5 * (lam.gamma + m));
        assert!(matches!(
            invert_lambertian_range(2.0 * max, &lam, lam.gain(), 0.5),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn lambertian_exact_recovers_speed_across_the_peak() {
        // Window from R = 3 m down to R = 0.2 m crosses the peak at ~0.73 m.
        let sampling = SamplingSpec::new(1e-3, 0.6, 0.14).unwrap();
        let tr = trace(ChannelModel::Lambertian(lam()), sampling);
        let est = estimate_straight_lambertian(&tr, &lam(), 0.5, LambertianMode::Exact).unwrap();
        assert!((est.v_hat - 20.0).abs() < 1e-6, "{}", est.v_hat);
        assert!((est.intercept_hat - 3.0).abs() < 1e-6);
    }

    #[test]
    fn lambertian_shortcut_is_biased_near_the_detector() {
        let sampling = SamplingSpec::new(1e-3, 0.5, 0.2).unwrap();
        let tr = trace(ChannelModel::Lambertian(lam()), sampling);
        let exact = estimate_straight_lambertian(&tr, &lam(), 0.5, LambertianMode::Exact).unwrap();
        let short =
            estimate_straight_lambertian(&tr, &lam(), 0.5, LambertianMode::Shortcut).unwrap();
        assert!((exact.v_hat - 20.0).abs() < 1e-6);
        assert!((short.v_hat - 20.0).abs() > 0.1);
    }

    #[test]
    fn lambertian_exact_far_window_under_noise() {
        // Window ends about 8.6 m before the detector, far from the power peak.
        let tr = trace(ChannelModel::Lambertian(lam()), SamplingSpec::default());
        let mean: f64 = (0..100)
            .map(|seed| {
                let noisy = add_noise(
                    &tr,
                    &NoiseSpec {
                        snr0_db: 30.0,
                        seed,
                    },
                )
                .unwrap();
                let v = estimate_straight_lambertian(&noisy, &lam(), 0.5, LambertianMode::Exact)
                    .unwrap()
                    .v_hat;
                100.0 * (1.0 - (v - 20.0).abs() / 20.0).max(0.0)
            })
            .sum::<f64>()
            / 100.0;
        assert!(mean > 95.0, "{mean}");
    }

    proptest! {
        #[test]
        fn log_distance_inversion_round_trip(d in 1.0f64..100.0) {
            let p = log_distance_power(&SIMULATED_FIT, d).unwrap();
            let back = invert_log_distance(p, &SIMULATED_FIT).unwrap();
            prop_assert!((back - d).abs() <= 1e-12 * d);
        }
    }
}
