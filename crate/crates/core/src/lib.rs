//! Simulator and estimator for a single ceiling-mounted scanning emitter.
//!
//! The emitter sweeps a narrow beam over an azimuth/elevation grid; a
//! photodetector records one power sample per beam. The receiver position
//! is recovered from the strongest beam's direction and a closed-form
//! inversion of the received power for distance.

pub mod channel;
pub mod cli;
pub mod config;
pub mod estimator;
pub mod experiments;
pub mod geometry;
pub mod orientation;
pub mod output;
pub mod scan;
pub mod stats;

pub use channel::ChannelParams;
pub use config::{ConfigFile, ResolvedConfig};
pub use estimator::{EstimateStatus, PositionEstimate};
pub use experiments::{ExperimentConfig, ExperimentMode, RunResult};
pub use geometry::{BeamGrid, ReceiverState, Room, Vec3};
pub use orientation::{OrientationConfig, OrientationMode};
pub use scan::{MeasurementTrace, ScanPlan};
