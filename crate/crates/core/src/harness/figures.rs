//! Figure datasets.
//!
//! Each figure is a table: one or two axis columns followed by one column
//! per series. Series share the base seed and sweep index, so matching
//! points of different series see identical noise draws. Points whose
//! window does not fit the road segment are left empty.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{run_point, AccuracyCurve, ExperimentConfig, SweepAxis, WindowAnchor, DEFAULT_TRIALS};
use crate::baseline::{radar_measured_curved, radar_measured_straight};
use crate::channel::{
    ChannelModel, LambertianParams, LogDistanceParams, DEFAULT_APERTURE_M2, DEFAULT_FOV_DEG,
    DEFAULT_PHI_HALF_DEG, LAMBERTIAN_FIT, SIMULATED_FIT,
};
use crate::error::{Error, Result};
use crate::estimator::LambertianMode;
use crate::geometry::{straight_pose, CurvedScenario, Scenario, StraightScenario};
use crate::trace::SamplingSpec;

/// Incidence angles (degrees) at which straight-road windows end.
pub const ANGLE_GRID_DEG: [f64; 15] = [
    4.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 49.0, 55.0, 60.0, 65.0, 69.0,
];

/// Times (s) at which curved-road windows end.
pub const TIME_GRID_S: [f64; 13] = [
    0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FigureId {
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    F12,
    F13,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::F6,
        FigureId::F7,
        FigureId::F8,
        FigureId::F9,
        FigureId::F10,
        FigureId::F11,
        FigureId::F12,
        FigureId::F13,
    ];

    pub fn number(self) -> u8 {
        match self {
            FigureId::F6 => 6,
            FigureId::F7 => 7,
            FigureId::F8 => 8,
            FigureId::F9 => 9,
            FigureId::F10 => 10,
            FigureId::F11 => 11,
            FigureId::F12 => 12,
            FigureId::F13 => 13,
        }
    }

    /// Base file name, e.g. `fig7`.
    pub fn stem(self) -> String {
        format!("fig{}", self.number())
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let digits = s.trim_start_matches(['F', 'f']);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|n| FigureId::ALL.into_iter().find(|f| f.number() == n))
            .ok_or_else(|| format!("unknown figure `{s}` (expected 6 to 13)"))
    }
}

/// Parameters shared by all figures. Defaults are the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureOptions {
    pub trials: usize,
    pub base_seed: u64,
    pub straight: StraightScenario,
    pub curved: CurvedScenario,
    /// Fitted constants of the ray-traced environment.
    pub simulated: LogDistanceParams,
    /// Fitted constants of the idealised Lambertian emitter.
    pub lambertian: LogDistanceParams,
    /// Half-power semi-angle, degrees.
    pub phi_half_deg: f64,
    /// Detector field of view, degrees.
    pub fov_deg: f64,
    /// Detector area, m².
    pub aperture: f64,
    pub dt: f64,
    /// Estimation window for figures with a single window length, s.
    pub duration: f64,
    pub snr0_db: f64,
    pub mode: LambertianMode,
    pub angles_deg: Vec<f64>,
    pub times_s: Vec<f64>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            straight: StraightScenario {
                offset: 0.5,
                start_range: 15.0,
                speed: 20.0,
            },
            curved: CurvedScenario {
                radius: 40.0,
                angular_speed: 1.0,
                start_angle: std::f64::consts::FRAC_PI_2,
                offset_long: 0.0,
                offset_lat: 0.0,
            },
            simulated: SIMULATED_FIT,
            lambertian: LAMBERTIAN_FIT,
            phi_half_deg: DEFAULT_PHI_HALF_DEG,
            fov_deg: DEFAULT_FOV_DEG,
            aperture: DEFAULT_APERTURE_M2,
            dt: crate::trace::DEFAULT_DT,
            duration: crate::trace::DEFAULT_DURATION,
            snr0_db: 30.0,
            mode: LambertianMode::Exact,
            angles_deg: ANGLE_GRID_DEG.to_vec(),
            times_s: TIME_GRID_S.to_vec(),
        }
    }
}

impl FigureOptions {
    fn headlamp(&self, fit: LogDistanceParams, phi_half_deg: f64) -> Result<LambertianParams> {
        LambertianParams::with_gain(
            phi_half_deg.to_radians(),
            fit.k_db,
            fit.gamma,
            self.fov_deg.to_radians(),
            self.aperture,
        )
    }

    fn sampling(&self, duration: f64) -> Result<SamplingSpec> {
        SamplingSpec::new(self.dt, 0.0, duration)
    }

    fn straight_cfg(
        &self,
        channel: ChannelModel,
        duration: f64,
        snr0_db: f64,
    ) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            scenario: Scenario::Straight(self.straight),
            channel,
            mode: self.mode,
            axis: SweepAxis::Angle,
            values: self.angles_deg.clone(),
            trials: self.trials,
            base_seed: self.base_seed,
            sampling: self.sampling(duration)?,
            snr0_db: Some(snr0_db),
            anchor: WindowAnchor::End,
        })
    }

    fn curved_cfg(&self, duration: f64, snr0_db: f64) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            scenario: Scenario::Curved(self.curved),
            channel: ChannelModel::Lambertian(self.headlamp(self.simulated, self.phi_half_deg)?),
            mode: self.mode,
            axis: SweepAxis::Time,
            values: self.times_s.clone(),
            trials: self.trials,
            base_seed: self.base_seed,
            sampling: self.sampling(duration)?,
            snr0_db: Some(snr0_db),
            anchor: WindowAnchor::End,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        self.straight.validate()?;
        self.curved.validate()?;
        self.simulated.validate()?;
        self.lambertian.validate()?;
        self.headlamp(self.simulated, self.phi_half_deg)?;
        self.sampling(self.duration)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSeries {
    pub label: String,
    pub config: ExperimentConfig,
    /// One entry per feasible sweep value.
    pub curve: Vec<AccuracyCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureData {
    pub id: FigureId,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Column plotted on the horizontal axis.
    pub x_column: usize,
    /// Columns plotted as lines.
    pub y_columns: Vec<usize>,
    pub series: Vec<FigureSeries>,
}

impl FigureData {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV with a header row; infeasible points are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Metadata sidecar: options, per-series curves, version and generation time.
    pub fn metadata(&self, options: &FigureOptions) -> serde_json::Value {
        let generated_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        serde_json::json!({
            "figure": self.id.number(),
            "title": self.title,
            "version": crate::VERSION,
            "base_seed": options.base_seed,
            "trials": options.trials,
            "options": options,
            "columns": self.columns,
            "series": self.series,
            "timestamp": generated_at,
        })
    }

    /// Writes `figN.csv`, `figN.json` and optionally `figN.svg` into `dir`.
    pub fn write(&self, dir: &Path, options: &FigureOptions, svg: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = self.id.stem();
        let mut written = Vec::new();
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        written.push(csv);
        let meta = dir.join(format!("{stem}.json"));
        let json = serde_json::to_string_pretty(&self.metadata(options))? + "\n";
        fs::write(&meta, json).map_err(|e| Error::io(&meta, e))?;
        written.push(meta);
        if svg {
            let path = dir.join(format!("{stem}.svg"));
            fs::write(&path, super::render_svg(self)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

const ACCURACY_LABEL: &str = "Speed estimation accuracy (%)";
const ANGLE_LABEL: &str = "Incidence angle at window end (deg)";
const TIME_LABEL: &str = "Time at window end (s)";

/// Runs a series over every axis value, leaving infeasible points empty.
fn run_series(label: String, config: ExperimentConfig) -> Result<(FigureSeries, Vec<Option<f64>>)> {
    config.validate()?;
    let mut curve = Vec::new();
    let mut cells = Vec::new();
    for (i, &v) in config.values.iter().enumerate() {
        if config.point(v).is_err() {
            cells.push(None);
            continue;
        }
        let c = run_point(&config, i, v)?;
        cells.push(Some(c.mean_accuracy_pct));
        curve.push(c);
    }
    Ok((
        FigureSeries {
            label,
            config,
            curve,
        },
        cells,
    ))
}

struct Builder {
    columns: Vec<String>,
    cols: Vec<Vec<Option<f64>>>,
    series: Vec<FigureSeries>,
    axis_columns: usize,
}

impl Builder {
    fn new(axes: Vec<(&str, Vec<f64>)>) -> Self {
        let axis_columns = axes.len();
        let (columns, cols) = axes
            .into_iter()
            .map(|(n, v)| (n.to_string(), v.into_iter().map(Some).collect()))
            .unzip();
        Self {
            columns,
            cols,
            series: Vec::new(),
            axis_columns,
        }
    }

    fn series(&mut self, label: String, config: ExperimentConfig) -> Result<()> {
        let (s, cells) = run_series(label.clone(), config)?;
        self.columns.push(label);
        self.cols.push(cells);
        self.series.push(s);
        Ok(())
    }

    fn column(&mut self, name: &str, values: Vec<Option<f64>>) {
        self.columns.push(name.to_string());
        self.cols.push(values);
    }

    fn finish(self, id: FigureId, title: &str, x_label: &str, y_label: &str) -> FigureData {
        let n = self.cols.first().map_or(0, Vec::len);
        let rows = (0..n)
            .map(|r| self.cols.iter().map(|c| c[r]).collect())
            .collect();
        FigureData {
            id,
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            y_columns: (self.axis_columns..self.columns.len()).collect(),
            columns: self.columns,
            rows,
            x_column: 0,
            series: self.series,
        }
    }
}

fn kinematics(id: FigureId, o: &FigureOptions) -> Result<FigureData> {
    let s = o.straight;
    s.validate()?;
    let n = (s.end_time() / o.dt).round() as usize + 1;
    let mut cols: Vec<Vec<Option<f64>>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        let t = (i as f64 * o.dt).min(s.end_time());
        let pose = straight_pose(&s, t)?;
        for (c, v) in cols
            .iter_mut()
            .zip([t, pose.range, pose.distance, pose.theta.to_degrees()])
        {
            c.push(Some(v));
        }
    }
    let columns = ["t_s", "range_m", "distance_m", "theta_deg"]
        .map(String::from)
        .to_vec();
    let rows = (0..n)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect();
    Ok(FigureData {
        id,
        title: "Incidence angle and range of the vehicle".into(),
        x_label: "Time (s)".into(),
        y_label: "Range (m) / incidence angle (deg)".into(),
        columns,
        rows,
        x_column: 0,
        y_columns: vec![1, 3],
        series: Vec::new(),
    })
}

const DURATIONS: [f64; 3] = [0.1, 0.2, 0.3];

fn radar_straight(o: &FigureOptions) -> Result<Vec<Option<f64>>> {
    o.angles_deg
        .iter()
        .map(|a| Ok(Some(100.0 * radar_measured_straight(1.0, a.to_radians())?)))
        .collect()
}

/// Builds the dataset for one figure.
pub fn reproduce_figure(id: FigureId, o: &FigureOptions) -> Result<FigureData> {
    o.validate()?;
    let sim = ChannelModel::Simulated(o.simulated);
    let angle_axis = || vec![("theta_deg", o.angles_deg.clone())];
    Ok(match id {
        FigureId::F6 => kinematics(id, o)?,
        FigureId::F7 => {
            let mut b = Builder::new(angle_axis());
            for d in DURATIONS {
                b.series(
                    format!("estimate_dt_{d}s"),
                    o.straight_cfg(sim, d, o.snr0_db)?,
                )?;
            }
            b.column("radar", radar_straight(o)?);
            b.finish(
                id,
                "Speed estimation accuracy compared to RADAR",
                ANGLE_LABEL,
                ACCURACY_LABEL,
            )
        }
        FigureId::F8 => {
            let mut b = Builder::new(angle_axis());
            for snr in [20.0, 30.0, 40.0] {
                b.series(
                    format!("snr_{snr}db"),
                    o.straight_cfg(sim, o.duration, snr)?,
                )?;
            }
            b.finish(
                id,
                "Accuracy for different initial SNR values",
                ANGLE_LABEL,
                ACCURACY_LABEL,
            )
        }
        FigureId::F9 => {
            let mut b = Builder::new(angle_axis());
            for v in [10.0, 20.0, 30.0] {
                for d in [0.1, 0.3] {
                    let mut cfg = o.straight_cfg(sim, d, o.snr0_db)?;
                    cfg.scenario = Scenario::Straight(StraightScenario {
                        speed: v,
                        ..o.straight
                    });
                    b.series(format!("v_{v}_dt_{d}s"), cfg)?;
                }
            }
            b.finish(
                id,
                "Accuracy for different actual speed values",
                ANGLE_LABEL,
                ACCURACY_LABEL,
            )
        }
        FigureId::F10 => {
            let mut b = Builder::new(angle_axis());
            for phi in [20.0, 40.0, 60.0] {
                let lam = o.headlamp(o.lambertian, phi)?;
                b.series(
                    format!("phi_half_{phi}deg"),
                    o.straight_cfg(ChannelModel::Lambertian(lam), o.duration, o.snr0_db)?,
                )?;
            }
            b.finish(
                id,
                "Accuracy for different half viewing angles",
                ANGLE_LABEL,
                ACCURACY_LABEL,
            )
        }
        FigureId::F11 => {
            let lam = ChannelModel::Lambertian(o.headlamp(o.lambertian, o.phi_half_deg)?);
            let mut b = Builder::new(angle_axis());
            for (name, ch) in [("simulated", sim), ("lambertian", lam)] {
                for d in DURATIONS {
                    b.series(format!("{name}_dt_{d}s"), o.straight_cfg(ch, d, o.snr0_db)?)?;
                }
            }
            b.finish(
                id,
                "Lambertian and simulated channel models",
                ANGLE_LABEL,
                ACCURACY_LABEL,
            )
        }
        FigureId::F12 | FigureId::F13 => {
            let c = o.curved;
            let betas: Vec<f64> = o.times_s.iter().map(|&t| c.angle_at(t)).collect();
            let mut b = Builder::new(vec![
                ("t_end_s", o.times_s.clone()),
                (
                    "beta_end_deg",
                    betas.iter().map(|x| x.to_degrees()).collect(),
                ),
            ]);
            if id == FigureId::F12 {
                for d in DURATIONS {
                    b.series(format!("estimate_dt_{d}s"), o.curved_cfg(d, o.snr0_db)?)?;
                }
                let radar = betas
                    .iter()
                    .map(|&beta| {
                        let v = radar_measured_curved(
                            1.0,
                            c.radius,
                            beta,
                            c.offset_long,
                            c.offset_lat,
                        )?;
                        Ok(Some(100.0 * v))
                    })
                    .collect::<Result<Vec<_>>>()?;
                b.column("radar", radar);
                b.finish(
                    id,
                    "Speed estimation accuracy on a curved road compared to RADAR",
                    TIME_LABEL,
                    ACCURACY_LABEL,
                )
            } else {
                for snr in [20.0, 30.0, 40.0, 50.0] {
                    b.series(format!("snr_{snr}db"), o.curved_cfg(o.duration, snr)?)?;
                }
                b.finish(
                    id,
                    "Accuracy for different initial SNR values on a curved road",
                    TIME_LABEL,
                    ACCURACY_LABEL,
                )
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FigureOptions {
        FigureOptions {
            trials: 10,
            base_seed: 3,
            ..FigureOptions::default()
        }
    }

    #[test]
    fn figure_ids_parse() {
        assert_eq!("7".parse::<FigureId>().unwrap(), FigureId::F7);
        assert_eq!("F13".parse::<FigureId>().unwrap(), FigureId::F13);
        assert!("5".parse::<FigureId>().is_err());
        assert!("14".parse::<FigureId>().is_err());
    }

    #[test]
    fn kinematics_row_at_300_ms() {
        let f = reproduce_figure(FigureId::F6, &quick()).unwrap();
        assert_eq!(f.rows.len(), 751);
        let row = &f.rows[300];
        assert!((row[0].unwrap() - 0.3).abs() < 1e-12);
        assert!((row[1].unwrap() - 9.0).abs() < 1e-9);
        assert!((row[3].unwrap() - 3.179830).abs() < 1e-6);
    }

    #[test]
    fn fig7_layout() {
        let f = reproduce_figure(FigureId::F7, &quick()).unwrap();
        assert_eq!(
            f.columns,
            [
                "theta_deg",
                "estimate_dt_0.1s",
                "estimate_dt_0.2s",
                "estimate_dt_0.3s",
                "radar"
            ]
        );
        assert_eq!(f.rows.len(), ANGLE_GRID_DEG.len());
        let radar = f.column("radar").unwrap();
        assert!((radar[6].unwrap() - 100.0 * 30f64.to_radians().cos()).abs() < 1e-12);
        assert!(f.to_csv().starts_with("theta_deg,"));
    }

    #[test]
    fn infeasible_points_are_blank() {
        let f = reproduce_figure(FigureId::F9, &quick()).unwrap();
        let col = f.column("v_30_dt_0.3s").unwrap();
        assert!(col[0].is_none());
        assert!(col.last().unwrap().is_some());
    }

    #[test]
    fn fig12_radar_is_half_angle_cosine() {
        let f = reproduce_figure(FigureId::F12, &quick()).unwrap();
        let beta = f.column("beta_end_deg").unwrap();
        let radar = f.column("radar").unwrap();
        for (b, r) in beta.iter().zip(&radar) {
            let expect = 100.0 * (0.5 * b.unwrap().to_radians()).cos();
            assert!((r.unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn figures_are_reproducible() {
        let a = reproduce_figure(FigureId::F13, &quick()).unwrap();
        let b = reproduce_figure(FigureId::F13, &quick()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn zero_trials_rejected() {
        let o = FigureOptions {
            trials: 0,
            ..FigureOptions::default()
        };
        assert!(matches!(
            reproduce_figure(FigureId::F7, &o),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
