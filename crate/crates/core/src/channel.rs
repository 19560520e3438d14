//! Gaussian-beam propagation, received optical power and noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel parameter `{0}` must be strictly positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("intensity is undefined at zero distance")]
    ZeroDistance,
}

/// Link parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmitted optical power, W.
    pub p_opt: f64,
    /// Wavelength, m.
    pub lambda_m: f64,
    /// Beam waist radius, m.
    pub w0_m: f64,
    /// Photodetector active area, m².
    pub a_pd_m2: f64,
    /// Noise variance.
    pub noise_variance: f64,
    /// System bandwidth, Hz.
    pub bandwidth_hz: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            p_opt: 1e-3,
            lambda_m: 950e-9,
            w0_m: 5.9e-6,
            a_pd_m2: 1e-4,
            noise_variance: 5e-14,
            bandwidth_hz: 2e9,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let fields = [
            ("p_opt", self.p_opt),
            ("lambda", self.lambda_m),
            ("w0", self.w0_m),
            ("a_pd", self.a_pd_m2),
            ("noise_variance", self.noise_variance),
            ("bandwidth", self.bandwidth_hz),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChannelError::NonPositive(name, v));
            }
        }
        Ok(())
    }

    /// `π w₀²`, the waist cross-section.
    pub(crate) fn waist_area(&self) -> f64 {
        PI * self.w0_m * self.w0_m
    }

    /// Received power at `d = 0` with `cos ψ = 1`.
    pub fn peak_power(&self) -> f64 {
        2.0 * self.p_opt * self.a_pd_m2 / self.waist_area()
    }
}

/// `w(d) = w₀ √(1 + (λ d cos φ / (π w₀²))²)`.
pub fn beam_radius(d: f64, phi: f64, p: &ChannelParams) -> f64 {
    let x = p.lambda_m * d * phi.cos() / p.waist_area();
    p.w0_m * (1.0 + x * x).sqrt()
}

/// Gaussian intensity at distance `d` and radiance angle `phi` (radians).
pub fn intensity(d: f64, phi: f64, p: &ChannelParams) -> Result<f64, ChannelError> {
    if d == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    let w = beam_radius(d, phi, p);
    let w2 = w * w;
    let s = phi.sin();
    Ok(2.0 * p.p_opt / (PI * w2) * (-2.0 * d * d * s * s / w2).exp())
}

/// `N_p = 𝒩 / B`.
pub fn noise_power(p: &ChannelParams) -> f64 {
    p.noise_variance / p.bandwidth_hz
}

/// On-axis (`φ = 0`) received power plus an additive noise sample.
pub fn received_power_on_axis(d: f64, cos_psi: f64, p: &ChannelParams, noise_sample: f64) -> f64 {
    let x = p.lambda_m * d / p.waist_area();
    p.peak_power() * cos_psi / (1.0 + x * x) + noise_sample
}

/// Noise standard deviation giving `20·log10(signal / σ) = snr_db`.
pub fn noise_sigma_for_snr(signal_watts: f64, snr_db: f64) -> f64 {
    signal_watts / 10f64.powf(snr_db / 20.0)
}

/// Zero-mean Gaussian draw with standard deviation `sigma`. Does not touch
/// the stream when `sigma == 0`.
pub fn sample_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Far-field radius λd/(πw₀) for d = 3 m with the default parameters:
    // 950e-9 * 3 / (π * 5.9e-6) = 0.15376...
    fn far_field_radius(d: f64, p: &ChannelParams) -> f64 {
        p.lambda_m * d / (PI * p.w0_m)
    }

    #[test]
    fn defaults_are_valid() {
        let p = ChannelParams::default();
        p.validate().unwrap();
        let bad = ChannelParams {
            bandwidth_hz: 0.0,
            ..p
        };
        assert_eq!(
            bad.validate(),
            Err(ChannelError::NonPositive("bandwidth", 0.0))
        );
    }

    #[test]
    fn beam_radius_examples() {
        let p = ChannelParams::default();
        assert_eq!(beam_radius(0.0, 0.0, &p), p.w0_m);
        assert_eq!(beam_radius(2.0, std::f64::consts::FRAC_PI_2, &p), p.w0_m);
        let w = beam_radius(3.0, 0.0, &p);
        let oracle = far_field_radius(3.0, &p);
        assert!(rel(w, oracle) < 1e-6);
        assert!((w - 0.153_760).abs() < 1e-5);
    }

    #[test]
    fn beam_radius_far_field_and_monotone() {
        let p = ChannelParams::default();
        let mut prev = 0.0;
        for i in 0..=500 {
            let d = i as f64 * 0.01;
            let w = beam_radius(d, 0.3, &p);
            assert!(w >= prev);
            prev = w;
            if d >= 0.1 {
                let ff = p.lambda_m * d / p.waist_area() * p.w0_m;
                let w0 = beam_radius(d, 0.0, &p);
                assert!((w0 - ff).abs() / w0 < 1e-6, "d = {d}");
            }
        }
    }

    #[test]
    fn intensity_examples() {
        let p = ChannelParams::default();
        let w = beam_radius(3.0, 0.0, &p);
        let on_axis = intensity(3.0, 0.0, &p).unwrap();
        assert!(rel(on_axis, 2.0 * p.p_opt / (PI * w * w)) < 1e-15);
        // 2e-3 / (π · 0.153760²)
        assert!(rel(on_axis, 2.692_74e-2) < 1e-4);
        assert_eq!(intensity(0.0, 0.0, &p), Err(ChannelError::ZeroDistance));

        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let phi = i as f64 * 3e-3;
            let v = intensity(3.0, phi, &p).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn on_axis_power_matches_general_intensity() {
        let p = ChannelParams::default();
        for i in 1..=50 {
            let d = i as f64 * 0.1;
            for cos_psi in [0.2, 0.7, 1.0] {
                let general = intensity(d, 0.0, &p).unwrap() * p.a_pd_m2 * cos_psi;
                let simple = received_power_on_axis(d, cos_psi, &p, 0.0);
                assert!(rel(simple, general) < 1e-12);
            }
        }
    }

    #[test]
    fn received_power_examples() {
        let p = ChannelParams::default();
        assert_eq!(received_power_on_axis(1.0, 0.0, &p, 0.0), 0.0);
        let at3 = received_power_on_axis(3.0, 1.0, &p, 0.0);
        assert!(rel(at3, 2.692_74e-2 * 1e-4) < 1e-4);
        assert_eq!(received_power_on_axis(0.0, 1.0, &p, 0.0), p.peak_power());

        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let v = received_power_on_axis(i as f64 * 0.05, 1.0, &p, 0.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn noise_power_examples() {
        let p = ChannelParams::default();
        assert!(rel(noise_power(&p), 2.5e-23) < 1e-12);
        let doubled = ChannelParams {
            bandwidth_hz: 4e9,
            ..p
        };
        assert!(rel(noise_power(&doubled), 0.5 * noise_power(&p)) < 1e-15);
        let silent = ChannelParams {
            noise_variance: 0.0,
            ..p
        };
        assert_eq!(noise_power(&silent), 0.0);
    }

    #[test]
    fn snr_sigma_examples() {
        assert_eq!(noise_sigma_for_snr(1e-6, 0.0), 1e-6);
        assert!(rel(noise_sigma_for_snr(1e-6, 40.0), 1e-8) < 1e-12);
        assert!(rel(noise_sigma_for_snr(1e-6, 20.0), 1e-7) < 1e-12);
    }

    #[test]
    fn gaussian_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_noise(0.0, &mut rng), 0.0);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_noise(1.0, &mut rng);
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((std - 1.0).abs() < 0.01, "std {std}");
    }

    #[test]
    fn noise_is_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(sample_noise(0.3, &mut a), sample_noise(0.3, &mut b));
        }
    }
}
