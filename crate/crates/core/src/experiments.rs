//! Monte Carlo harness: position-grid CDF runs, SNR sweeps, the
//! synchronization check and the single-scan demo.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the master seed and the stream id is `(block << 40) | trial`, where
//! `trial = point_index * trials_per_point + repetition` and `block`
//! identifies the (SNR, orientation-mode) cell. Results are collected in
//! trial order, so thread count never changes the output.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{noise_power, noise_sigma_for_snr, received_power_on_axis, ChannelError, ChannelParams};
use crate::estimator::{
    estimate_position, position_error, EstimateError, EstimateStatus, PositionError, PositionEstimate,
};
use crate::geometry::{in_fov, incidence_cosine, BeamGrid, GeometryError, ReceiverState, Room, Vec3};
use crate::orientation::{sample_normal, OrientationConfig, OrientationMode};
use crate::scan::{
    apply_timing_offset, default_pilot, hit_signal, realign_with_pilot, run_scan, MeasurementTrace, ScanError,
    ScanPlan,
};
use crate::stats::{mean, EmpiricalCdf, StatsError};

/// Recorded in every result so the noise convention travels with the data.
pub const SNR_DEFINITION: &str = "SNR_dB = 20*log10(P_signal/sigma_noise); P_signal is the noiseless peak \
received power at the true receiver position and orientation (on-axis power with cos(psi)=1 when the receiver \
is outside its FoV); sigma_noise is the std of i.i.d. zero-mean Gaussian noise added to every sample";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::Geometry(_) | ExperimentError::Channel(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    Cdf,
    SnrSweep,
    SyncTest,
    ScanDemo,
}

impl ExperimentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentMode::Cdf => "cdf",
            ExperimentMode::SnrSweep => "snr-sweep",
            ExperimentMode::SyncTest => "sync-test",
            ExperimentMode::ScanDemo => "scan-demo",
        }
    }
}

/// How the per-sample noise standard deviation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// σ from the target SNR (see [`SNR_DEFINITION`]).
    Snr,
    /// σ = 𝒩 / B.
    Absolute,
    /// σ = 0.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub azimuth_step_deg: f64,
    pub elevation_step_deg: f64,
    pub dwell_s: f64,
    pub pilot_len: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            azimuth_step_deg: 1.0,
            elevation_step_deg: 1.0,
            dwell_s: crate::scan::DEFAULT_DWELL_S,
            pilot_len: crate::scan::DEFAULT_PILOT_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub room: Room,
    pub channel: ChannelParams,
    pub scan: ScanSettings,
    /// Full FoV cone angle, degrees.
    pub fov_deg: f64,
    /// Normal the estimator assumes for the receiver.
    pub assumed_normal: Vec3,
    pub grid_spacing_m: f64,
    pub h_min_m: f64,
    pub h_max_m: f64,
    /// Heights closer than this to the ceiling are not sampled.
    pub ceiling_margin_m: f64,
    pub snr_list_db: Vec<f64>,
    pub noise_model: NoiseModel,
    pub trials_per_point: usize,
    pub sync_trials: usize,
    pub orientation: OrientationConfig,
    /// Orientation modes compared side by side in a sweep; empty means
    /// `orientation.mode` only.
    pub compare_modes: Vec<OrientationMode>,
    pub master_seed: u64,
    /// Receiver position for `scan-demo`.
    pub demo_position: Vec3,
    /// Timing offset applied in `scan-demo`.
    pub demo_offset_steps: i64,
}

impl ExperimentConfig {
    pub fn new(mode: ExperimentMode) -> Self {
        Self {
            mode,
            room: Room::default(),
            channel: ChannelParams::default(),
            scan: ScanSettings::default(),
            fov_deg: 120.0,
            assumed_normal: Vec3::UP,
            grid_spacing_m: 0.1,
            h_min_m: 0.0,
            h_max_m: 2.5,
            ceiling_margin_m: 0.5,
            snr_list_db: match mode {
                ExperimentMode::SnrSweep => vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
                ExperimentMode::SyncTest => vec![20.0],
                _ => vec![40.0],
            },
            noise_model: NoiseModel::Snr,
            trials_per_point: default_trials(mode),
            sync_trials: 1000,
            orientation: OrientationConfig::default(),
            compare_modes: Vec::new(),
            master_seed: 0,
            demo_position: Vec3::new(0.25, 0.75, 1.0),
            demo_offset_steps: 0,
        }
    }

    pub fn sweep_modes(&self) -> Vec<OrientationMode> {
        if self.compare_modes.is_empty() {
            vec![self.orientation.mode]
        } else {
            self.compare_modes.clone()
        }
    }

    /// Top of the sampled height range.
    pub fn height_cutoff_m(&self) -> f64 {
        self.h_max_m.min(self.room.height_m() - self.ceiling_margin_m)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        self.channel.validate()?;
        BeamGrid::build(self.scan.azimuth_step_deg, self.scan.elevation_step_deg)?;
        if !(self.scan.dwell_s > 0.0) {
            return bad(format!("dwell time must be positive, got {}", self.scan.dwell_s));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 180.0) {
            return bad(format!("fov_deg must be in (0, 180], got {}", self.fov_deg));
        }
        if self.assumed_normal.normalized().is_none() {
            return bad("assumed normal must be nonzero".into());
        }
        if !(0.0 <= self.h_min_m && self.h_min_m < self.h_max_m && self.h_max_m <= self.room.height_m()) {
            return bad(format!(
                "need 0 <= h_min < h_max <= room height, got h_min={} h_max={} height={}",
                self.h_min_m,
                self.h_max_m,
                self.room.height_m()
            ));
        }
        if !(self.ceiling_margin_m >= 0.0) {
            return bad(format!("ceiling margin must be >= 0, got {}", self.ceiling_margin_m));
        }
        if self.height_cutoff_m() < self.h_min_m {
            return bad("ceiling margin leaves no sampled heights".into());
        }
        if !(self.grid_spacing_m > 0.0) {
            return bad(format!("grid spacing must be positive, got {}", self.grid_spacing_m));
        }
        for (name, span) in [("width", self.room.width_m()), ("depth", self.room.depth_m())] {
            let ratio = span / self.grid_spacing_m;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return bad(format!(
                    "grid spacing {} m does not divide room {name} {span} m",
                    self.grid_spacing_m
                ));
            }
        }
        if self.trials_per_point == 0 {
            return bad("trials_per_point must be >= 1".into());
        }
        if self.mode == ExperimentMode::SyncTest && self.sync_trials == 0 {
            return bad("sync_trials must be >= 1".into());
        }
        if self.noise_model == NoiseModel::Snr && self.snr_list_db.is_empty() {
            return bad("noise model `snr` needs at least one SNR value".into());
        }
        if self.snr_list_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        if self.mode == ExperimentMode::Cdf && self.noise_model == NoiseModel::Snr && self.snr_list_db.len() != 1 {
            return bad("a CDF run takes exactly one SNR value".into());
        }
        if self.mode != ExperimentMode::SnrSweep && self.compare_modes.len() > 1 {
            return bad("comparing several orientation modes is only supported by snr-sweep".into());
        }
        if matches!(self.mode, ExperimentMode::SyncTest | ExperimentMode::ScanDemo) && self.scan.pilot_len == 0 {
            return bad("this mode needs a pilot (pilot_len >= 1)".into());
        }
        Ok(())
    }

    /// Receiver grid: `x`, `y` over the floor plan at `grid_spacing_m`,
    /// heights from `h_min` up to [`Self::height_cutoff_m`] at the same
    /// spacing. Ordered x, then y, then z.
    pub fn grid_points(&self) -> Vec<Vec3> {
        let count = |span: f64| (span / self.grid_spacing_m + 1e-9).floor() as usize + 1;
        let nx = count(self.room.width_m());
        let ny = count(self.room.depth_m());
        let nz = count(self.height_cutoff_m() - self.h_min_m);
        let mut pts = Vec::with_capacity(nx * ny * nz);
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    pts.push(Vec3::new(
                        ix as f64 * self.grid_spacing_m,
                        iy as f64 * self.grid_spacing_m,
                        self.h_min_m + iz as f64 * self.grid_spacing_m,
                    ));
                }
            }
        }
        pts
    }
}

pub fn default_trials(mode: ExperimentMode) -> usize {
    match mode {
        ExperimentMode::SnrSweep => 20,
        ExperimentMode::Cdf => 5,
        _ => 1,
    }
}

/// Deterministic per-trial generator.
pub fn trial_rng(master_seed: u64, block: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((block << 40) | trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub point_index: usize,
    pub trial: usize,
    pub snr_db: Option<f64>,
    pub orientation_mode: OrientationMode,
    pub true_position: Vec3,
    pub true_normal: Vec3,
    /// Ground truth: the receiver's FoV contains the emitter.
    pub in_fov: bool,
    pub noise_sigma: f64,
    pub estimate: PositionEstimate,
    pub error: PositionError,
}

impl SampleRecord {
    pub fn is_outage(&self) -> bool {
        self.estimate.status == EstimateStatus::OutOfFovSuspected
    }

    pub fn is_clamped(&self) -> bool {
        self.estimate.status == EstimateStatus::ClampedRadicand
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSet {
    pub total: EmpiricalCdf,
    pub x: EmpiricalCdf,
    pub y: EmpiricalCdf,
    pub z: EmpiricalCdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub orientation_mode: OrientationMode,
    pub mean_error_m: f64,
    pub outage_frac: f64,
    pub clamp_frac: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncTrial {
    pub trial: usize,
    pub offset_steps: i64,
    /// Offset left over after realignment; 0 when the pilot was found.
    pub residual_steps: i64,
    pub mismatch: bool,
    pub error_synced_m: f64,
    pub error_realigned_m: f64,
    pub error_unaligned_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncSummary {
    pub trials: usize,
    pub mismatches: usize,
    pub mismatch_rate: f64,
    pub mean_error_synced_m: f64,
    pub mean_error_realigned_m: f64,
    pub mean_error_unaligned_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanDemo {
    pub trace: MeasurementTrace,
    /// `(azimuth, elevation)` of every beam, in trace order after the pilot.
    pub beam_angles: Vec<(f64, f64)>,
    pub true_position: Vec3,
    pub noise_sigma: f64,
    pub estimate: PositionEstimate,
    pub error: PositionError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub samples: usize,
    pub outage_frac: f64,
    pub clamp_frac: f64,
    /// Fraction of samples whose receiver truly had the emitter outside its FoV.
    pub true_out_of_fov_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub records: Vec<SampleRecord>,
    pub aggregates: Aggregates,
    pub cdf: Option<CdfSet>,
    pub sweep: Vec<SweepRow>,
    pub sync_trials: Vec<SyncTrial>,
    pub sync: Option<SyncSummary>,
    pub demo: Option<ScanDemo>,
}

impl RunResult {
    fn empty(config: ExperimentConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
            aggregates: Aggregates {
                samples: 0,
                outage_frac: 0.0,
                clamp_frac: 0.0,
                true_out_of_fov_frac: 0.0,
            },
            cdf: None,
            sweep: Vec::new(),
            sync_trials: Vec::new(),
            sync: None,
            demo: None,
        }
    }

    /// Errors of samples that were not flagged as outages.
    pub fn usable_errors(&self) -> impl Iterator<Item = &PositionError> {
        self.records.iter().filter(|r| !r.is_outage()).map(|r| &r.error)
    }
}

/// Everything a single trial needs, shared across threads.
struct TrialContext {
    plan: ScanPlan,
    room: Room,
    channel: ChannelParams,
    fov_deg: f64,
    assumed_normal: Vec3,
    noise_model: NoiseModel,
}

impl TrialContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let grid = Arc::new(BeamGrid::build(cfg.scan.azimuth_step_deg, cfg.scan.elevation_step_deg)?);
        Ok(Self {
            plan: ScanPlan::new(grid, cfg.scan.dwell_s, Vec::new())?,
            room: cfg.room,
            channel: cfg.channel,
            fov_deg: cfg.fov_deg,
            assumed_normal: cfg.assumed_normal.normalized().expect("validated nonzero"),
            noise_model: cfg.noise_model,
        })
    }

    fn grid(&self) -> &BeamGrid {
        self.plan.grid()
    }

    /// Noiseless reference power used to turn an SNR into a σ.
    fn reference_signal(&self, rx: &ReceiverState) -> Result<f64, ExperimentError> {
        let s = hit_signal(&self.room, rx, &self.channel)?;
        if s > 0.0 {
            return Ok(s);
        }
        let d = (rx.position - self.room.emitter_pos()).norm();
        Ok(received_power_on_axis(d, 1.0, &self.channel, 0.0))
    }

    fn sigma(&self, rx: &ReceiverState, snr_db: Option<f64>) -> Result<f64, ExperimentError> {
        Ok(match (self.noise_model, snr_db) {
            (NoiseModel::Snr, Some(snr)) => noise_sigma_for_snr(self.reference_signal(rx)?, snr),
            (NoiseModel::Snr, None) => {
                return Err(ExperimentError::Config("SNR noise model without an SNR".into()))
            }
            (NoiseModel::Absolute, _) => noise_power(&self.channel),
            (NoiseModel::None, _) => 0.0,
        })
    }

    fn estimate(&self, y: &[f64], sigma: f64) -> Result<PositionEstimate, ExperimentError> {
        Ok(estimate_position(
            self.room.emitter_pos(),
            y,
            self.grid(),
            &self.channel,
            self.assumed_normal,
            sigma,
        )?)
    }

    fn receiver<R: Rng>(&self, position: Vec3, orientation: &OrientationConfig, rng: &mut R) -> ReceiverState {
        ReceiverState {
            position,
            normal: sample_normal(orientation, rng),
            fov_deg: self.fov_deg,
        }
    }

    fn truly_in_fov(&self, rx: &ReceiverState) -> Result<bool, ExperimentError> {
        Ok(in_fov(incidence_cosine(self.room.emitter_pos(), rx)?, rx.fov_deg))
    }

    fn run_trial<R: Rng>(
        &self,
        position: Vec3,
        orientation: &OrientationConfig,
        snr_db: Option<f64>,
        rng: &mut R,
    ) -> Result<(ReceiverState, f64, PositionEstimate), ExperimentError> {
        let rx = self.receiver(position, orientation, rng);
        let sigma = self.sigma(&rx, snr_db)?;
        let trace = run_scan(&self.plan, &self.room, &rx, &self.channel, sigma, rng)?;
        let est = self.estimate(trace.beam_samples(), sigma)?;
        Ok((rx, sigma, est))
    }
}

fn snr_for(cfg: &ExperimentConfig, idx: usize) -> Option<f64> {
    match cfg.noise_model {
        NoiseModel::Snr => cfg.snr_list_db.get(idx).copied(),
        _ => None,
    }
}

fn simulate_block(
    ctx: &TrialContext,
    cfg: &ExperimentConfig,
    points: &[Vec3],
    orientation: &OrientationConfig,
    snr_db: Option<f64>,
    block: u64,
) -> Result<Vec<SampleRecord>, ExperimentError> {
    let trials = cfg.trials_per_point;
    (0..points.len() * trials)
        .into_par_iter()
        .map(|t| {
            let point_index = t / trials;
            let position = points[point_index];
            let mut rng = trial_rng(cfg.master_seed, block, t as u64);
            let (rx, sigma, estimate) = ctx.run_trial(position, orientation, snr_db, &mut rng)?;
            Ok(SampleRecord {
                point_index,
                trial: t % trials,
                snr_db,
                orientation_mode: orientation.mode,
                true_position: position,
                true_normal: rx.normal,
                in_fov: ctx.truly_in_fov(&rx)?,
                noise_sigma: sigma,
                estimate,
                error: position_error(position, estimate.position),
            })
        })
        .collect()
}

fn aggregate(records: &[SampleRecord]) -> Aggregates {
    let n = records.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    Aggregates {
        samples: n,
        outage_frac: frac(records.iter().filter(|r| r.is_outage()).count()),
        clamp_frac: frac(records.iter().filter(|r| r.is_clamped()).count()),
        true_out_of_fov_frac: frac(records.iter().filter(|r| !r.in_fov).count()),
    }
}

/// Error CDFs over every grid point and trial at a single SNR.
pub fn run_cdf_experiment(cfg: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    if cfg.mode != ExperimentMode::Cdf {
        return Err(ExperimentError::Config(format!("expected mode cdf, got {}", cfg.mode.as_str())));
    }
    let ctx = TrialContext::new(cfg)?;
    let points = cfg.grid_points();
    let records = simulate_block(&ctx, cfg, &points, &cfg.orientation, snr_for(cfg, 0), 0)?;

    let mut result = RunResult::empty(cfg.clone());
    result.aggregates = aggregate(&records);
    result.records = records;
    let usable: Vec<&PositionError> = result.usable_errors().collect();
    if !usable.is_empty() {
        let col = |f: fn(&PositionError) -> f64| -> Result<EmpiricalCdf, StatsError> {
            EmpiricalCdf::new(usable.iter().map(|e| f(e)).collect())
        };
        result.cdf = Some(CdfSet {
            total: col(|e| e.total_m)?,
            x: col(|e| e.dx_m)?,
            y: col(|e| e.dy_m)?,
            z: col(|e| e.dz_m)?,
        });
    }
    Ok(result)
}

/// Mean 3D error per SNR for each configured orientation mode. Outages are
/// excluded from the means; clamped estimates are included.
pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    if cfg.mode != ExperimentMode::SnrSweep {
        return Err(ExperimentError::Config(format!(
            "expected mode snr-sweep, got {}",
            cfg.mode.as_str()
        )));
    }
    if cfg.snr_list_db.is_empty() {
        return Err(ExperimentError::Config("snr-sweep needs at least one SNR value".into()));
    }
    let ctx = TrialContext::new(cfg)?;
    let points = cfg.grid_points();
    let mut result = RunResult::empty(cfg.clone());

    for (mode_idx, mode) in cfg.sweep_modes().into_iter().enumerate() {
        let orientation = cfg.orientation.with_mode(mode);
        let snrs: Vec<Option<f64>> = match cfg.noise_model {
            NoiseModel::Snr => cfg.snr_list_db.iter().map(|s| Some(*s)).collect(),
            _ => vec![None],
        };
        for (snr_idx, snr) in snrs.into_iter().enumerate() {
            let block = ((mode_idx as u64) << 16) | snr_idx as u64;
            let records = simulate_block(&ctx, cfg, &points, &orientation, snr, block)?;
            let agg = aggregate(&records);
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| !r.is_outage())
                .map(|r| r.error.total_m)
                .collect();
            result.sweep.push(SweepRow {
                snr_db: snr.unwrap_or(f64::INFINITY),
                orientation_mode: mode,
                mean_error_m: mean(&errs).unwrap_or(f64::NAN),
                outage_frac: agg.outage_frac,
                clamp_frac: agg.clamp_frac,
                samples: records.len(),
            });
            result.records.extend(records);
        }
    }
    result.aggregates = aggregate(&result.records);
    Ok(result)
}

/// Compares estimates from synchronized traces with estimates from the
/// same traces after a random cyclic offset and pilot realignment.
pub fn run_sync_test(cfg: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    if cfg.mode != ExperimentMode::SyncTest {
        return Err(ExperimentError::Config(format!(
            "expected mode sync-test, got {}",
            cfg.mode.as_str()
        )));
    }
    let ctx = TrialContext::new(cfg)?;
    let points = cfg.grid_points();
    let m = ctx.grid().len() as i64;
    let snr = snr_for(cfg, 0);

    let outcomes: Vec<(SampleRecord, SyncTrial)> = (0..cfg.sync_trials)
        .into_par_iter()
        .map(|t| -> Result<_, ExperimentError> {
            let mut rng = trial_rng(cfg.master_seed, 0, t as u64);
            let point_index = rng.random_range(0..points.len());
            let position = points[point_index];
            let rx = ctx.receiver(position, &cfg.orientation, &mut rng);
            let sigma = ctx.sigma(&rx, snr)?;
            // Pilot chips at the receiver's peak signal level, so the pilot
            // SNR equals the scan SNR.
            let level = ctx.reference_signal(&rx)?;
            let pilot = default_pilot(cfg.scan.pilot_len, level);
            let plan = ctx.plan.clone().with_pilot(pilot.clone())?;
            let trace = run_scan(&plan, &ctx.room, &rx, &ctx.channel, sigma, &mut rng)?;
            let offset = rng.random_range(-(m / 2)..=m / 2);
            let shifted = apply_timing_offset(&trace, offset);
            let realigned = realign_with_pilot(&shifted, &pilot)?;

            let synced = ctx.estimate(trace.beam_samples(), sigma)?;
            let recovered = ctx.estimate(realigned.samples(), sigma)?;
            let unaligned = ctx.estimate(shifted.beam_samples(), sigma)?;
            let err = |e: &PositionEstimate| position_error(position, e.position);
            let mismatch = realigned.offset_steps() != 0
                || recovered.beam_index != synced.beam_index
                || recovered.position != synced.position;

            let record = SampleRecord {
                point_index,
                trial: t,
                snr_db: snr,
                orientation_mode: cfg.orientation.mode,
                true_position: position,
                true_normal: rx.normal,
                in_fov: ctx.truly_in_fov(&rx)?,
                noise_sigma: sigma,
                estimate: recovered,
                error: err(&recovered),
            };
            let trial = SyncTrial {
                trial: t,
                offset_steps: offset,
                residual_steps: realigned.offset_steps(),
                mismatch,
                error_synced_m: err(&synced).total_m,
                error_realigned_m: err(&recovered).total_m,
                error_unaligned_m: err(&unaligned).total_m,
            };
            Ok((record, trial))
        })
        .collect::<Result<_, _>>()?;

    let (records, trials): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let mismatches = trials.iter().filter(|t| t.mismatch).count();
    let column = |f: fn(&SyncTrial) -> f64| mean(&trials.iter().map(f).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    let summary = SyncSummary {
        trials: trials.len(),
        mismatches,
        mismatch_rate: mismatches as f64 / trials.len() as f64,
        mean_error_synced_m: column(|t| t.error_synced_m),
        mean_error_realigned_m: column(|t| t.error_realigned_m),
        mean_error_unaligned_m: column(|t| t.error_unaligned_m),
    };

    let mut result = RunResult::empty(cfg.clone());
    result.aggregates = aggregate(&records);
    result.records = records;
    result.sync_trials = trials;
    result.sync = Some(summary);
    Ok(result)
}

/// One sweep at `cfg.demo_position`, with a pilot prefix and the configured
/// timing offset, realigned and estimated.
pub fn run_scan_demo(cfg: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    if cfg.mode != ExperimentMode::ScanDemo {
        return Err(ExperimentError::Config(format!(
            "expected mode scan-demo, got {}",
            cfg.mode.as_str()
        )));
    }
    let ctx = TrialContext::new(cfg)?;
    let mut rng = trial_rng(cfg.master_seed, 0, 0);
    let rx = ctx.receiver(cfg.demo_position, &cfg.orientation, &mut rng);
    let sigma = ctx.sigma(&rx, snr_for(cfg, 0))?;
    let pilot = default_pilot(cfg.scan.pilot_len, cfg.channel.p_opt);
    let plan = ctx.plan.clone().with_pilot(pilot.clone())?;
    let trace = run_scan(&plan, &ctx.room, &rx, &ctx.channel, sigma, &mut rng)?;
    let shifted = apply_timing_offset(&trace, cfg.demo_offset_steps);
    let realigned = realign_with_pilot(&shifted, &pilot)?;
    let estimate = ctx.estimate(realigned.samples(), sigma)?;
    let error = position_error(rx.position, estimate.position);

    let grid = ctx.grid();
    let record = SampleRecord {
        point_index: 0,
        trial: 0,
        snr_db: snr_for(cfg, 0),
        orientation_mode: cfg.orientation.mode,
        true_position: rx.position,
        true_normal: rx.normal,
        in_fov: ctx.truly_in_fov(&rx)?,
        noise_sigma: sigma,
        estimate,
        error,
    };
    let mut result = RunResult::empty(cfg.clone());
    result.aggregates = aggregate(std::slice::from_ref(&record));
    result.records = vec![record];
    result.demo = Some(ScanDemo {
        trace: shifted,
        beam_angles: (0..grid.len()).map(|j| grid.angles(j)).collect(),
        true_position: rx.position,
        noise_sigma: sigma,
        estimate,
        error,
    });
    Ok(result)
}

/// Dispatches on `cfg.mode`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    match cfg.mode {
        ExperimentMode::Cdf => run_cdf_experiment(cfg),
        ExperimentMode::SnrSweep => run_snr_sweep(cfg),
        ExperimentMode::SyncTest => run_sync_test(cfg),
        ExperimentMode::ScanDemo => run_scan_demo(cfg),
    }
}
