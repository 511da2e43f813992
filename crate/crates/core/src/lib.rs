//! Vehicle speed estimation from the received power of a headlamp at a
//! roadside photodetector.
//!
//! * [`geometry`]: vehicle pose on straight and curved roads.
//! * [`channel`]: Lambertian and log-distance channel models, ray-trace
//!   ingestion and path-loss fitting.
//! * [`trace`]: sampled power traces, noise injection and trace files.
//! * [`estimator`]: per-sample channel inversion followed by a line fit.
//! * [`baseline`]: Doppler RADAR cosine-effect reference.
//! * [`harness`]: Monte Carlo accuracy sweeps and figure datasets.

// Negated comparisons below deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod trace;

pub use channel::{ChannelModel, LambertianParams, LogDistanceParams, PathLossFit, PathLossSample};
pub use error::{Error, ErrorKind, Result};
pub use estimator::{LambertianMode, SpeedEstimate};
pub use geometry::{CurvedScenario, Pose, Scenario, StraightScenario};
pub use harness::{
    AccuracyCurve, ExperimentConfig, FigureId, FigureOptions, SweepAxis, WindowAnchor,
};
pub use trace::{NoiseSpec, PowerTrace, Sample, SamplingSpec};

/// Crate version recorded in every metadata file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
