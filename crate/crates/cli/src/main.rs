//! `vlspeed`: simulate traces, estimate speeds, fit ray-traced path loss and
//! regenerate figure datasets.
//!
//! Exit codes: 0 success, 2 invalid input, 3 domain or estimation failure,
//! 4 I/O failure. Results go to stdout as JSON, diagnostics to stderr.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use vlspeed_core::channel::{
    fit_log_distance, rays::path_loss_from_manifest, ChannelModel, LogDistanceParams,
};
use vlspeed_core::geometry::Scenario;
use vlspeed_core::harness::{
    estimator_for, reproduce_figure, synthesis_channel, Estimator, FigureId,
};
use vlspeed_core::trace::io::{
    read_metadata, read_trace_csv, sidecar_path, simulate, write_metadata, write_trace_csv,
};
use vlspeed_core::{ErrorKind, LambertianMode};

use config::{build_channel, Config, RawChannel};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<vlspeed_core::Error> for CliError {
    fn from(e: vlspeed_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Domain => 3,
            ErrorKind::Io => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vlspeed",
    version,
    about = "Vehicle speed from headlamp received power"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Simulated,
    Lambertian,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a received-power trace and its metadata.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; receives trace.csv and trace.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the speed from a trace file.
    Estimate {
        trace: PathBuf,
        /// Metadata sidecar; defaults to the trace path with a .json extension.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// Lambertian inversion on a straight road.
        #[arg(long)]
        mode: Option<LambertianMode>,
        #[arg(long, allow_hyphen_values = true)]
        k_db: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Straight road: lateral offset of the detector, m.
        #[arg(long)]
        offset: Option<f64>,
        /// Curved road: radius, m.
        #[arg(long)]
        radius: Option<f64>,
        /// Headlamp half-power semi-angle, degrees.
        #[arg(long)]
        phi_half: Option<f64>,
    },
    /// Fit log-distance constants to a manifest of ray files.
    Fit { manifest: PathBuf },
    /// Regenerate the dataset behind a figure (6 to 13).
    Figure {
        id: FigureId,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Estimate {
            trace,
            meta,
            config,
            model,
            mode,
            k_db,
            gamma,
            offset,
            radius,
            phi_half,
        } => cmd_estimate(EstimateArgs {
            trace,
            meta,
            config,
            model,
            mode,
            k_db,
            gamma,
            offset,
            radius,
            phi_half,
        }),
        Command::Fit { manifest } => cmd_fit(&manifest),
        Command::Figure {
            id,
            trials,
            seed,
            out,
            svg,
            config,
        } => cmd_figure(id, trials, seed, &out, svg, config.as_deref()),
    };
    match result {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

type CmdResult = Result<serde_json::Value, CliError>;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let cfg = Config::load(config)?;
    let scenario = cfg
        .scenario()?
        .ok_or_else(|| CliError::input("missing required field `scenario`"))?;
    let channel = cfg.channel_for(Some(&scenario))?;
    let sampling = cfg.sampling()?;
    let mut noise = cfg.noise();
    if let (Some(n), Some(s)) = (noise.as_mut(), seed) {
        n.seed = s;
    }
    let (trace, meta) = simulate(&scenario, &channel, &sampling, noise.as_ref())?;
    create_dir(out)?;
    let csv = out.join("trace.csv");
    write_trace_csv(&csv, &trace)?;
    let json = sidecar_path(&csv);
    write_metadata(&json, &meta)?;
    Ok(json!({
        "trace": csv,
        "metadata": json,
        "samples": trace.len(),
        "noise_sigma": trace.noise_sigma,
        "clipped_count": trace.clipped_count,
    }))
}

struct EstimateArgs {
    trace: PathBuf,
    meta: Option<PathBuf>,
    config: Option<PathBuf>,
    model: Option<Model>,
    mode: Option<LambertianMode>,
    k_db: Option<f64>,
    gamma: Option<f64>,
    offset: Option<f64>,
    radius: Option<f64>,
    phi_half: Option<f64>,
}

fn cmd_estimate(a: EstimateArgs) -> CmdResult {
    let trace = read_trace_csv(&a.trace)?;

    // Scenario and channel from, in order of preference: explicit metadata,
    // config file, sidecar next to the trace.
    let mut base: Option<(Scenario, ChannelModel)> = None;
    let mut mode = None;
    if let Some(meta) = &a.meta {
        let m = read_metadata(meta)?;
        base = Some((m.scenario, m.channel));
    } else if let Some(path) = &a.config {
        let cfg = Config::load(path)?;
        mode = cfg.mode();
        if let Some(s) = cfg.scenario()? {
            base = Some((s, cfg.channel_for(Some(&s))?));
        }
    } else {
        let side = sidecar_path(&a.trace);
        if side.exists() {
            let m = read_metadata(&side)?;
            base = Some((m.scenario, m.channel));
        }
    }
    let mode = a.mode.or(mode).unwrap_or_default();

    let scenario = match (base.map(|b| b.0), a.offset, a.radius) {
        (_, Some(_), Some(_)) => {
            return Err(CliError::input(
                "--offset and --radius are mutually exclusive",
            ))
        }
        (Some(Scenario::Straight(mut s)), Some(d), None) => {
            s.offset = d;
            Scenario::Straight(s)
        }
        (Some(Scenario::Curved(mut c)), None, Some(r)) => {
            c.radius = r;
            Scenario::Curved(c)
        }
        (Some(s), None, None) => s,
        // Only the geometry enters the estimator; the remaining fields are placeholders.
        (_, Some(d), None) => Scenario::Straight(vlspeed_core::StraightScenario {
            offset: d,
            start_range: f64::MAX,
            speed: 1.0,
        }),
        (_, None, Some(r)) => Scenario::Curved(vlspeed_core::CurvedScenario {
            radius: r,
            angular_speed: 1.0,
            start_angle: std::f64::consts::PI,
            offset_long: 0.0,
            offset_lat: 0.0,
        }),
        (None, None, None) => {
            return Err(CliError::input(
                "no trace metadata found: pass --meta, --config, --offset or --radius",
            ))
        }
    };
    scenario
        .validate()
        .map_err(|e| CliError::input(e.to_string()))?;

    let base_channel = base.map(|b| b.1);
    let overridden =
        a.model.is_some() || a.k_db.is_some() || a.gamma.is_some() || a.phi_half.is_some();
    let channel = if let (Some(c), false) = (base_channel, overridden) {
        synthesis_channel(&scenario, &c)
    } else {
        let fit = base_channel.map(|c: ChannelModel| c.log_distance());
        let model = match (a.model, base_channel) {
            (Some(Model::Simulated), _) => "simulated",
            (Some(Model::Lambertian), _) => "lambertian",
            (None, Some(c)) => c.name(),
            (None, None) => "simulated",
        };
        // Fitted constants of the source are kept unless the model changes.
        let same = base_channel.is_some_and(|c| c.name() == model);
        let (k_db, gamma) = match (same, fit) {
            (true, Some(LogDistanceParams { k_db, gamma })) => (Some(k_db), Some(gamma)),
            _ => (None, None),
        };
        let phi = match base_channel {
            Some(ChannelModel::Lambertian(l)) => Some(l.phi_half.to_degrees()),
            _ => None,
        };
        build_channel(
            &RawChannel {
                model: Some(model.into()),
                k_db: a.k_db.or(k_db),
                gamma: a.gamma.or(gamma),
                phi_half_deg: a.phi_half.or(phi),
                fov_deg: None,
                area_m2: None,
            },
            Some(&scenario),
        )?
    };

    let estimator = estimator_for(&scenario, &channel, mode);
    let est = estimator.estimate(&trace)?;
    let (kind, mode_used) = match estimator {
        Estimator::Straight { .. } => ("straight", None),
        Estimator::StraightLambertian { mode, .. } => ("straight", Some(mode)),
        Estimator::Curved { .. } => ("curved", None),
    };
    let mut out = serde_json::to_value(est).expect("estimate serialises");
    let obj = out.as_object_mut().expect("object");
    obj.insert("scenario".into(), json!(kind));
    obj.insert("model".into(), json!(channel.name()));
    obj.insert("mode".into(), json!(mode_used.unwrap_or(mode)));
    Ok(out)
}

fn cmd_fit(manifest: &Path) -> CmdResult {
    let samples = path_loss_from_manifest(manifest)?;
    let fit = fit_log_distance(&samples)?;
    Ok(json!({
        "k_db": fit.params.k_db,
        "gamma": fit.params.gamma,
        "rms_residual_db": fit.rms_residual_db,
        "samples": fit.samples,
    }))
}

fn cmd_figure(
    id: FigureId,
    trials: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    svg: bool,
    config: Option<&Path>,
) -> CmdResult {
    let mut options = match config {
        Some(p) => Config::load(p)?.figure_options()?,
        None => Default::default(),
    };
    if let Some(t) = trials {
        options.trials = t;
    }
    if let Some(s) = seed {
        options.base_seed = s;
    }
    let data = reproduce_figure(id, &options)?;
    create_dir(out)?;
    let written = data.write(out, &options, svg)?;
    Ok(json!({ "figure": id.number(), "files": written }))
}
