//! Receiver orientation: Laplace-distributed angles and the two
//! normal-vector parameterizations (roll/pitch/yaw and azimuth/elevation).
//!
//! All angles are degrees at the interface.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrientationError {
    #[error("inverse-transform input {0} outside the open interval (-0.5, 0.5)")]
    UniformDomain(f64),
    #[error("standard deviation must be finite and non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("orientation mode `{0}` cannot sample azimuth/elevation angles")]
    WrongMode(OrientationMode),
    #[error("unknown orientation mode `{0}` (expected fixed, random-euler or random-spherical)")]
    UnknownMode(String),
}

/// Laplace location/scale, parameterized by its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaplaceSpec", into = "LaplaceSpec")]
pub struct LaplaceParams {
    mu: f64,
    sigma: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct LaplaceSpec {
    mu: f64,
    sigma: f64,
}

impl TryFrom<LaplaceSpec> for LaplaceParams {
    type Error = OrientationError;
    fn try_from(s: LaplaceSpec) -> Result<Self, Self::Error> {
        LaplaceParams::new(s.mu, s.sigma)
    }
}

impl From<LaplaceParams> for LaplaceSpec {
    fn from(p: LaplaceParams) -> Self {
        LaplaceSpec {
            mu: p.mu,
            sigma: p.sigma,
        }
    }
}

impl LaplaceParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, OrientationError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(OrientationError::NegativeSigma(sigma));
        }
        Ok(Self {
            mu,
            sigma,
            b: sigma / std::f64::consts::SQRT_2,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Scale `b = σ/√2`.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.b == 0.0 {
            return if x < self.mu { 0.0 } else { 1.0 };
        }
        let z = (x - self.mu) / self.b;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }
}

/// Inverse transform `r = μ − b·sign(u)·ln(1 − 2|u|)` with `sign(0) = 0`.
pub fn laplace_sample(p: &LaplaceParams, u: f64) -> Result<f64, OrientationError> {
    if !(u > -0.5 && u < 0.5) {
        return Err(OrientationError::UniformDomain(u));
    }
    let sign = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(p.mu - p.b * sign * (1.0 - 2.0 * u.abs()).ln())
}

/// Uniform draw on the open interval `(-0.5, 0.5)`.
pub fn centered_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return u;
        }
    }
}

fn draw<R: Rng + ?Sized>(p: &LaplaceParams, rng: &mut R) -> f64 {
    laplace_sample(p, centered_uniform(rng)).expect("centered_uniform stays in the open interval")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha_roll: f64,
    pub beta_pitch: f64,
    pub gamma_yaw: f64,
}

/// Photodetector normal from roll α, pitch β and yaw γ:
///
/// ```text
/// n = (cos γ sin α sin β + cos α sin γ,
///      sin α sin γ − cos α cos γ sin β,
///      cos γ cos β)
/// ```
pub fn normal_from_euler(e: EulerAngles) -> Vec3 {
    let (sa, ca) = e.alpha_roll.to_radians().sin_cos();
    let (sb, cb) = e.beta_pitch.to_radians().sin_cos();
    let (sg, cg) = e.gamma_yaw.to_radians().sin_cos();
    Vec3::new(cg * sa * sb + ca * sg, sa * sg - ca * cg * sb, cg * cb)
}

/// `n = (cos θ cos φ, cos θ sin φ, sin θ)`; θ = 90° faces straight up.
pub fn normal_from_spherical(phi: f64, theta: f64) -> Vec3 {
    let (sp, cp) = phi.to_radians().sin_cos();
    let (st, ct) = theta.to_radians().sin_cos();
    Vec3::new(ct * cp, ct * sp, st)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    /// Normal from the roll/pitch/yaw means, no randomness.
    Fixed,
    /// Laplace-distributed roll/pitch/yaw.
    RandomEuler,
    /// Laplace-distributed azimuth/elevation of the normal.
    RandomSpherical,
}

impl OrientationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrientationMode::Fixed => "fixed",
            OrientationMode::RandomEuler => "random-euler",
            OrientationMode::RandomSpherical => "random-spherical",
        }
    }
}

impl fmt::Display for OrientationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrientationMode {
    type Err = OrientationError;

    /// Accepts `random` as shorthand for `random-euler`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(OrientationMode::Fixed),
            "random" | "random-euler" => Ok(OrientationMode::RandomEuler),
            "random-spherical" => Ok(OrientationMode::RandomSpherical),
            other => Err(OrientationError::UnknownMode(other.to_string())),
        }
    }
}

/// Per-angle statistics and the sampling mode.
///
/// In `random-spherical` mode the default elevation mean is 90° so a
/// zero-variance configuration faces upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationConfig {
    pub mode: OrientationMode,
    pub roll: LaplaceParams,
    pub pitch: LaplaceParams,
    pub yaw: LaplaceParams,
    pub azimuth: LaplaceParams,
    pub elevation: LaplaceParams,
}

impl Default for OrientationConfig {
    fn default() -> Self {
        let lp = |mu, sigma| LaplaceParams::new(mu, sigma).expect("valid defaults");
        Self {
            mode: OrientationMode::Fixed,
            roll: lp(0.0, 10.0),
            pitch: lp(0.0, 30.0),
            yaw: lp(0.0, 10.0),
            azimuth: lp(0.0, 0.0),
            elevation: lp(90.0, 0.0),
        }
    }
}

impl OrientationConfig {
    pub fn with_mode(mut self, mode: OrientationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mean_euler(&self) -> EulerAngles {
        EulerAngles {
            alpha_roll: self.roll.mu(),
            beta_pitch: self.pitch.mu(),
            gamma_yaw: self.yaw.mu(),
        }
    }
}

/// Independent `(φ, θ)` draws for the azimuth/elevation parameterization.
pub fn sample_orientation_angles<R: Rng + ?Sized>(
    cfg: &OrientationConfig,
    rng: &mut R,
) -> Result<(f64, f64), OrientationError> {
    if cfg.mode != OrientationMode::RandomSpherical {
        return Err(OrientationError::WrongMode(cfg.mode));
    }
    let phi = draw(&cfg.azimuth, rng);
    let theta = draw(&cfg.elevation, rng);
    Ok((phi, theta))
}

pub fn sample_euler<R: Rng + ?Sized>(cfg: &OrientationConfig, rng: &mut R) -> EulerAngles {
    EulerAngles {
        alpha_roll: draw(&cfg.roll, rng),
        beta_pitch: draw(&cfg.pitch, rng),
        gamma_yaw: draw(&cfg.yaw, rng),
    }
}

/// Draws one receiver normal according to `cfg.mode`. `Fixed` consumes no
/// randomness.
pub fn sample_normal<R: Rng + ?Sized>(cfg: &OrientationConfig, rng: &mut R) -> Vec3 {
    match cfg.mode {
        OrientationMode::Fixed => normal_from_euler(cfg.mean_euler()),
        OrientationMode::RandomEuler => normal_from_euler(sample_euler(cfg, rng)),
        OrientationMode::RandomSpherical => {
            let (phi, theta) =
                sample_orientation_angles(cfg, rng).expect("mode checked by the match arm");
            normal_from_spherical(phi, theta)
        }
    }
}
