//! Position reconstruction from a synchronized trace: strongest beam,
//! closed-form distance inversion, position assembly and error metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::geometry::{BeamGrid, Vec3};

/// Estimates whose peak sample is below this many noise standard
/// deviations are flagged as probable out-of-FoV outages.
pub const OUTAGE_SIGMA_FACTOR: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("measurement vector is empty")]
    EmptyTrace,
    #[error("measurement vector has {got} samples, grid has {expected} beams")]
    LengthMismatch { got: usize, expected: usize },
    #[error("no invertible signal: selected power {0} W is not positive")]
    NonPositivePower(f64),
    #[error("assumed incidence cosine {0} outside (0, 1]")]
    IncidenceOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateStatus {
    Ok,
    /// Noise pushed the peak above the zero-distance power; distance set to 0.
    ClampedRadicand,
    /// Peak sample indistinguishable from noise.
    OutOfFovSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub beam_index: usize,
    pub distance_m: f64,
    pub position: Vec3,
    pub status: EstimateStatus,
    pub assumed_cos_psi: f64,
}

/// Smallest index attaining the maximum. NaN samples never win.
pub fn select_beam(y: &[f64]) -> Result<usize, EstimateError> {
    if y.is_empty() {
        return Err(EstimateError::EmptyTrace);
    }
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in y.iter().enumerate() {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    Ok(best)
}

/// Inverts the on-axis received power for distance:
///
/// ```text
/// d = √( π w₀² / (y λ²) · (2 A_PD P_opt cos ψ − y π w₀²) )
/// ```
///
/// A negative radicand is clamped to `d = 0`.
pub fn invert_distance(
    y_k: f64,
    cos_psi_hat: f64,
    p: &ChannelParams,
) -> Result<(f64, EstimateStatus), EstimateError> {
    if !(y_k > 0.0) {
        return Err(EstimateError::NonPositivePower(y_k));
    }
    if !(cos_psi_hat > 0.0 && cos_psi_hat <= 1.0) {
        return Err(EstimateError::IncidenceOutOfRange(cos_psi_hat));
    }
    let area = p.waist_area();
    let radicand =
        area / (y_k * p.lambda_m * p.lambda_m) * (2.0 * p.a_pd_m2 * p.p_opt * cos_psi_hat - y_k * area);
    if radicand < 0.0 {
        Ok((0.0, EstimateStatus::ClampedRadicand))
    } else {
        Ok((radicand.sqrt(), EstimateStatus::Ok))
    }
}

/// `p̂ = p_s + d̂ û_k̂` with `k̂ = argmax y`. The incidence cosine is computed
/// from the selected beam and `assumed_normal`, since the true receiver
/// orientation is not observable. `noise_sigma` sets the outage threshold.
pub fn estimate_position(
    p_s: Vec3,
    y: &[f64],
    grid: &BeamGrid,
    p: &ChannelParams,
    assumed_normal: Vec3,
    noise_sigma: f64,
) -> Result<PositionEstimate, EstimateError> {
    if y.len() != grid.len() {
        return Err(EstimateError::LengthMismatch {
            got: y.len(),
            expected: grid.len(),
        });
    }
    let k = select_beam(y)?;
    let u = grid.column(k);
    let y_k = y[k];
    // receiver -> transmitter is -û
    let cos_psi_hat = (-u).dot(assumed_normal).clamp(-1.0, 1.0);

    let suspected = y_k < OUTAGE_SIGMA_FACTOR * noise_sigma || y_k <= 0.0;
    if suspected {
        let distance_m = invert_distance(y_k, cos_psi_hat, p).map_or(0.0, |(d, _)| d);
        return Ok(PositionEstimate {
            beam_index: k,
            distance_m,
            position: p_s + u * distance_m,
            status: EstimateStatus::OutOfFovSuspected,
            assumed_cos_psi: cos_psi_hat,
        });
    }

    let (distance_m, status) = invert_distance(y_k, cos_psi_hat, p)?;
    Ok(PositionEstimate {
        beam_index: k,
        distance_m,
        position: p_s + u * distance_m,
        status,
        assumed_cos_psi: cos_psi_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionError {
    pub total_m: f64,
    pub dx_m: f64,
    pub dy_m: f64,
    pub dz_m: f64,
}

pub fn position_error(p_true: Vec3, p_hat: Vec3) -> PositionError {
    let d = p_true - p_hat;
    PositionError {
        total_m: d.norm(),
        dx_m: d.x.abs(),
        dy_m: d.y.abs(),
        dz_m: d.z.abs(),
    }
}
