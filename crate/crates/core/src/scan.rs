//! The timed beam sweep, timing offsets and pilot-based realignment.
//!
//! A trace is laid out as `[pilot (K samples) | beam 0 .. beam M-1]`. A
//! desynchronized receiver sees the same samples cyclically rotated; the
//! pilot is located again by cyclic cross-correlation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{received_power_on_axis, sample_noise, ChannelParams};
use crate::geometry::{in_fov, incidence_cosine, BeamGrid, GeometryError, ReceiverState, Room};

/// Dwell per beam; a full 1° sweep takes 0.972 s.
pub const DEFAULT_DWELL_S: f64 = 30e-6;
pub const DEFAULT_PILOT_LEN: usize = 64;
const PILOT_SEED: u64 = 0x5ca9_1107;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("receiver at ({0:.3}, {1:.3}, {2:.3}) m is outside the room")]
    ReceiverOutsideRoom(f64, f64, f64),
    #[error("dwell time must be positive, got {0} s")]
    InvalidDwell(f64),
    #[error("pilot levels must be finite and non-negative")]
    InvalidPilot,
    #[error("cannot realign without a pilot sequence")]
    EmptyPilot,
    #[error("trace of {trace} samples is shorter than the {pilot}-sample pilot")]
    TraceTooShort { trace: usize, pilot: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone)]
pub struct ScanPlan {
    grid: Arc<BeamGrid>,
    t_step_s: f64,
    pilot: Vec<f64>,
}

impl ScanPlan {
    pub fn new(grid: Arc<BeamGrid>, t_step_s: f64, pilot: Vec<f64>) -> Result<Self, ScanError> {
        if !(t_step_s > 0.0 && t_step_s.is_finite()) {
            return Err(ScanError::InvalidDwell(t_step_s));
        }
        if pilot.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(ScanError::InvalidPilot);
        }
        Ok(Self {
            grid,
            t_step_s,
            pilot,
        })
    }

    /// Plan with no pilot, for receivers assumed to be synchronized.
    pub fn synchronized(grid: Arc<BeamGrid>) -> Self {
        Self::new(grid, DEFAULT_DWELL_S, Vec::new()).expect("valid defaults")
    }

    pub fn grid(&self) -> &BeamGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<BeamGrid> {
        &self.grid
    }

    pub fn t_step_s(&self) -> f64 {
        self.t_step_s
    }

    pub fn pilot(&self) -> &[f64] {
        &self.pilot
    }

    pub fn with_pilot(mut self, pilot: Vec<f64>) -> Result<Self, ScanError> {
        if pilot.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(ScanError::InvalidPilot);
        }
        self.pilot = pilot;
        Ok(self)
    }
}

/// Fixed pseudo-random on/off pilot with levels `{0, level}`. The first
/// chip is always on.
pub fn default_pilot(len: usize, level: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED);
    (0..len)
        .map(|i| {
            if i == 0 || rng.random::<bool>() {
                level
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTrace {
    samples: Vec<f64>,
    pilot_len: usize,
    /// Ground-truth rotation applied to the sample indexing, in dwell steps.
    offset_steps: i64,
    sample_period_s: f64,
}

impl MeasurementTrace {
    pub fn from_parts(samples: Vec<f64>, pilot_len: usize, sample_period_s: f64) -> Self {
        Self {
            samples,
            pilot_len,
            offset_steps: 0,
            sample_period_s,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Samples after the pilot prefix, indexed by beam (when synchronized).
    pub fn beam_samples(&self) -> &[f64] {
        &self.samples[self.pilot_len.min(self.samples.len())..]
    }

    pub fn pilot_len(&self) -> usize {
        self.pilot_len
    }

    pub fn offset_steps(&self) -> i64 {
        self.offset_steps
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Noiseless power delivered to `rx` by the beam that hits it, or zero if
/// the receiver is outside its field of view.
pub fn hit_signal(room: &Room, rx: &ReceiverState, params: &ChannelParams) -> Result<f64, ScanError> {
    let cos_psi = incidence_cosine(room.emitter_pos(), rx)?;
    if !in_fov(cos_psi, rx.fov_deg) {
        return Ok(0.0);
    }
    let d = (rx.position - room.emitter_pos()).norm();
    Ok(received_power_on_axis(d, cos_psi, params, 0.0))
}

/// Simulates one sweep. Beam `j` delivers the on-axis power when the
/// receiver lies in its angular cell and within the FoV; every sample,
/// pilot included, carries an independent noise draw of std `sigma`.
pub fn run_scan<R: Rng + ?Sized>(
    plan: &ScanPlan,
    room: &Room,
    rx: &ReceiverState,
    params: &ChannelParams,
    sigma: f64,
    rng: &mut R,
) -> Result<MeasurementTrace, ScanError> {
    let p = rx.position;
    if !room.contains(p) {
        return Err(ScanError::ReceiverOutsideRoom(p.x, p.y, p.z));
    }
    let signal = hit_signal(room, rx, params)?;
    let grid = plan.grid();
    let k = plan.pilot.len();

    let mut samples = Vec::with_capacity(k + grid.len());
    samples.extend(plan.pilot.iter().map(|&level| level + sample_noise(sigma, rng)));
    samples.extend((0..grid.len()).map(|_| sample_noise(sigma, rng)));
    if signal > 0.0 {
        for j in grid.cells_containing(p - room.emitter_pos()) {
            samples[k + j] += signal;
        }
    }
    Ok(MeasurementTrace {
        samples,
        pilot_len: k,
        offset_steps: 0,
        sample_period_s: plan.t_step_s,
    })
}

/// Rotates the sample indexing right by `offset_steps`, so that received
/// sample `i` holds transmitted sample `i - offset_steps` (mod length).
pub fn apply_timing_offset(trace: &MeasurementTrace, offset_steps: i64) -> MeasurementTrace {
    let len = trace.samples.len();
    let mut samples = trace.samples.clone();
    if len > 0 {
        let shift = offset_steps.rem_euclid(len as i64) as usize;
        samples.rotate_right(shift);
    }
    MeasurementTrace {
        samples,
        pilot_len: trace.pilot_len,
        offset_steps: trace.offset_steps + offset_steps,
        sample_period_s: trace.sample_period_s,
    }
}

/// `|Δt| < T_step / 2`.
pub fn is_synchronized(delta_t: f64, t_step: f64) -> bool {
    delta_t.abs() < 0.5 * t_step
}

/// Cyclic shift `s` maximizing `Σ pilot[i]·samples[(i + s) mod L]`; ties go
/// to the smallest shift.
pub fn estimate_shift(trace: &MeasurementTrace, pilot: &[f64]) -> Result<usize, ScanError> {
    if pilot.is_empty() {
        return Err(ScanError::EmptyPilot);
    }
    let len = trace.samples.len();
    if len < pilot.len() {
        return Err(ScanError::TraceTooShort {
            trace: len,
            pilot: pilot.len(),
        });
    }
    let taps: Vec<(usize, f64)> = pilot
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, p)| *p != 0.0)
        .collect();
    let samples = &trace.samples;
    let mut best = (0usize, f64::NEG_INFINITY);
    for s in 0..len {
        let mut acc = 0.0;
        for &(i, p) in &taps {
            let mut idx = i + s;
            if idx >= len {
                idx -= len;
            }
            acc += p * samples[idx];
        }
        if acc > best.1 {
            best = (s, acc);
        }
    }
    Ok(best.0)
}

/// Undoes an unknown rotation by locating `pilot`, then strips the pilot.
/// The returned trace keeps any residual (mis-estimated) offset as its
/// hidden `offset_steps`.
pub fn realign_with_pilot(trace: &MeasurementTrace, pilot: &[f64]) -> Result<MeasurementTrace, ScanError> {
    let shift = estimate_shift(trace, pilot)?;
    let len = trace.samples.len();
    let k = pilot.len();
    let samples: Vec<f64> = (k..len).map(|i| trace.samples[(i + shift) % len]).collect();
    let residual = (trace.offset_steps - shift as i64).rem_euclid(len as i64);
    let residual = if residual > len as i64 / 2 {
        residual - len as i64
    } else {
        residual
    };
    Ok(MeasurementTrace {
        samples,
        pilot_len: 0,
        offset_steps: residual,
        sample_period_s: trace.sample_period_s,
    })
}
