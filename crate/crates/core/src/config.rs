//! Configuration files.
//!
//! A config is a TOML document (or the `config` object of a previously
//! written `meta.json`) whose keys carry their units: degrees for angles,
//! nanometers for the wavelength, micrometers for the beam waist, cm² for
//! the detector area, GHz for the bandwidth and µs for the dwell time.
//! Unknown keys are errors. Missing keys take their defaults and are listed
//! in [`ResolvedConfig::applied_defaults`].
//!
//! ```toml
//! [experiment]
//! snr_db = [20, 30, 40]
//! trials_per_point = 10
//!
//! [orientation]
//! mode = "random-euler"
//! pitch_std_deg = 30
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::experiments::{default_trials, ExperimentConfig, ExperimentMode, NoiseModel, ScanSettings};
use crate::geometry::{GeometryError, Room, Vec3};
use crate::orientation::{LaplaceParams, OrientationConfig, OrientationError, OrientationMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<GeometryError> for ConfigError {
    fn from(e: GeometryError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl From<OrientationError> for ConfigError {
    fn from(e: OrientationError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_spacing_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_min_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ceiling_margin_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_model: Option<NoiseModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_per_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sync_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_opt_watts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_waist_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_area_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_ghz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_normal: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<OrientationMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_modes: Option<Vec<OrientationMode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roll_mean_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roll_std_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_mean_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_std_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_mean_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_std_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth_mean_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth_std_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation_mean_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation_std_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth_step_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation_step_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dwell_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_len: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_m: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_steps: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub room: RoomSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub receiver: ReceiverSection,
    #[serde(default)]
    pub orientation: OrientationSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub demo: DemoSection,
}

/// A config with every key filled in, plus the experiment built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub file: ConfigFile,
    pub applied_defaults: Vec<String>,
    pub experiment: ExperimentConfig,
}

fn fill<T>(slot: &mut Option<T>, default: T, key: &str, applied: &mut Vec<String>) {
    if slot.is_none() {
        *slot = Some(default);
        applied.push(key.to_string());
    }
}

fn get<T: Clone>(slot: &Option<T>) -> T {
    slot.clone().expect("filled by fill_defaults")
}

impl ConfigFile {
    pub fn parse_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Accepts a bare config object or a `meta.json` carrying one under
    /// `config`.
    pub fn parse_json(text: &str) -> Result<Self, String> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::parse_json(&text)
        } else {
            Self::parse_toml(&text)
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Fills every missing key with its default, returning the dotted names
    /// of the keys that were filled.
    pub fn fill_defaults(&mut self, mode: ExperimentMode) -> Vec<String> {
        let mut a = Vec::new();
        let base = ExperimentConfig::new(mode);

        let e = &mut self.experiment;
        fill(&mut e.grid_spacing_m, 0.1, "experiment.grid_spacing_m", &mut a);
        fill(&mut e.h_min_m, 0.0, "experiment.h_min_m", &mut a);
        fill(&mut e.h_max_m, 2.5, "experiment.h_max_m", &mut a);
        fill(&mut e.ceiling_margin_m, 0.5, "experiment.ceiling_margin_m", &mut a);
        fill(&mut e.snr_db, base.snr_list_db.clone(), "experiment.snr_db", &mut a);
        fill(&mut e.noise_model, NoiseModel::Snr, "experiment.noise_model", &mut a);
        fill(&mut e.trials_per_point, default_trials(mode), "experiment.trials_per_point", &mut a);
        fill(&mut e.sync_trials, 1000, "experiment.sync_trials", &mut a);
        fill(&mut e.master_seed, 0, "experiment.master_seed", &mut a);

        let r = &mut self.room;
        fill(&mut r.width_m, 1.0, "room.width_m", &mut a);
        fill(&mut r.depth_m, 1.0, "room.depth_m", &mut a);
        fill(&mut r.height_m, 3.0, "room.height_m", &mut a);

        let c = &mut self.channel;
        fill(&mut c.p_opt_watts, 1e-3, "channel.p_opt_watts", &mut a);
        fill(&mut c.wavelength_nm, 950.0, "channel.wavelength_nm", &mut a);
        fill(&mut c.beam_waist_um, 5.9, "channel.beam_waist_um", &mut a);
        fill(&mut c.pd_area_cm2, 1.0, "channel.pd_area_cm2", &mut a);
        fill(&mut c.noise_variance, 5e-14, "channel.noise_variance", &mut a);
        fill(&mut c.bandwidth_ghz, 2.0, "channel.bandwidth_ghz", &mut a);

        let rx = &mut self.receiver;
        fill(&mut rx.fov_deg, 120.0, "receiver.fov_deg", &mut a);
        fill(&mut rx.assumed_normal, [0.0, 0.0, 1.0], "receiver.assumed_normal", &mut a);

        let o = &mut self.orientation;
        fill(&mut o.mode, OrientationMode::Fixed, "orientation.mode", &mut a);
        fill(&mut o.compare_modes, Vec::new(), "orientation.compare_modes", &mut a);
        fill(&mut o.roll_mean_deg, 0.0, "orientation.roll_mean_deg", &mut a);
        fill(&mut o.roll_std_deg, 10.0, "orientation.roll_std_deg", &mut a);
        fill(&mut o.pitch_mean_deg, 0.0, "orientation.pitch_mean_deg", &mut a);
        fill(&mut o.pitch_std_deg, 30.0, "orientation.pitch_std_deg", &mut a);
        fill(&mut o.yaw_mean_deg, 0.0, "orientation.yaw_mean_deg", &mut a);
        fill(&mut o.yaw_std_deg, 10.0, "orientation.yaw_std_deg", &mut a);
        fill(&mut o.azimuth_mean_deg, 0.0, "orientation.azimuth_mean_deg", &mut a);
        fill(&mut o.azimuth_std_deg, 0.0, "orientation.azimuth_std_deg", &mut a);
        fill(&mut o.elevation_mean_deg, 90.0, "orientation.elevation_mean_deg", &mut a);
        fill(&mut o.elevation_std_deg, 0.0, "orientation.elevation_std_deg", &mut a);

        let s = &mut self.scan;
        fill(&mut s.azimuth_step_deg, 1.0, "scan.azimuth_step_deg", &mut a);
        fill(&mut s.elevation_step_deg, 1.0, "scan.elevation_step_deg", &mut a);
        fill(&mut s.dwell_us, 30.0, "scan.dwell_us", &mut a);
        fill(&mut s.pilot_len, 64, "scan.pilot_len", &mut a);

        let d = &mut self.demo;
        fill(&mut d.position_m, base.demo_position.to_array(), "demo.position_m", &mut a);
        fill(&mut d.offset_steps, 0, "demo.offset_steps", &mut a);
        a
    }

    /// Fills defaults, converts to SI and validates.
    pub fn resolve(mut self, mode: ExperimentMode) -> Result<ResolvedConfig, ConfigError> {
        let applied_defaults = self.fill_defaults(mode);
        let f = &self;
        let lp = |mu: &Option<f64>, sigma: &Option<f64>| LaplaceParams::new(get(mu), get(sigma));
        let o = &f.orientation;
        let orientation = OrientationConfig {
            mode: get(&o.mode),
            roll: lp(&o.roll_mean_deg, &o.roll_std_deg)?,
            pitch: lp(&o.pitch_mean_deg, &o.pitch_std_deg)?,
            yaw: lp(&o.yaw_mean_deg, &o.yaw_std_deg)?,
            azimuth: lp(&o.azimuth_mean_deg, &o.azimuth_std_deg)?,
            elevation: lp(&o.elevation_mean_deg, &o.elevation_std_deg)?,
        };
        let c = &f.channel;
        let channel = ChannelParams {
            p_opt: get(&c.p_opt_watts),
            lambda_m: get(&c.wavelength_nm) / 1e9,
            w0_m: get(&c.beam_waist_um) / 1e6,
            a_pd_m2: get(&c.pd_area_cm2) / 1e4,
            noise_variance: get(&c.noise_variance),
            bandwidth_hz: get(&c.bandwidth_ghz) * 1e9,
        };
        let e = &f.experiment;
        let experiment = ExperimentConfig {
            mode,
            room: Room::new(get(&f.room.width_m), get(&f.room.depth_m), get(&f.room.height_m))?,
            channel,
            scan: ScanSettings {
                azimuth_step_deg: get(&f.scan.azimuth_step_deg),
                elevation_step_deg: get(&f.scan.elevation_step_deg),
                dwell_s: get(&f.scan.dwell_us) / 1e6,
                pilot_len: get(&f.scan.pilot_len),
            },
            fov_deg: get(&f.receiver.fov_deg),
            assumed_normal: Vec3::from(get(&f.receiver.assumed_normal)),
            grid_spacing_m: get(&e.grid_spacing_m),
            h_min_m: get(&e.h_min_m),
            h_max_m: get(&e.h_max_m),
            ceiling_margin_m: get(&e.ceiling_margin_m),
            snr_list_db: get(&e.snr_db),
            noise_model: get(&e.noise_model),
            trials_per_point: get(&e.trials_per_point),
            sync_trials: get(&e.sync_trials),
            orientation,
            compare_modes: get(&o.compare_modes),
            master_seed: get(&e.master_seed),
            demo_position: Vec3::from(get(&f.demo.position_m)),
            demo_offset_steps: get(&f.demo.offset_steps),
        };
        experiment
            .validate()
            .map_err(|err| ConfigError::Invalid(err.to_string()))?;
        Ok(ResolvedConfig {
            file: self,
            applied_defaults,
            experiment,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let r = ConfigFile::default().resolve(ExperimentMode::Cdf).unwrap();
        let base = ExperimentConfig::new(ExperimentMode::Cdf);
        let e = &r.experiment;
        assert_eq!(e.trials_per_point, 5);
        assert_eq!(e.snr_list_db, vec![40.0]);
        assert_eq!(e.orientation, base.orientation);
        assert_eq!(e.room, base.room);
        assert!((e.channel.w0_m - 5.9e-6).abs() < 1e-20);
        assert_eq!(e.channel.lambda_m, 950e-9);
        assert_eq!(e.channel.a_pd_m2, 1e-4);
        assert_eq!(e.channel.bandwidth_hz, 2e9);
        assert!(r.applied_defaults.contains(&"channel.wavelength_nm".to_string()));
        assert_eq!(r.applied_defaults.len(), 38);

        let sweep = ConfigFile::default().resolve(ExperimentMode::SnrSweep).unwrap();
        assert_eq!(sweep.experiment.trials_per_point, 20);
    }

    #[test]
    fn explicit_keys_are_not_reported_as_defaults() {
        let text = r#"
            [experiment]
            snr_db = [30.0]
            master_seed = 9
            [channel]
            wavelength_nm = 850
            [orientation]
            mode = "random-euler"
        "#;
        let r = ConfigFile::parse_toml(text)
            .unwrap()
            .resolve(ExperimentMode::Cdf)
            .unwrap();
        assert_eq!(r.experiment.master_seed, 9);
        assert_eq!(r.experiment.channel.lambda_m, 850e-9);
        assert_eq!(r.experiment.orientation.mode, OrientationMode::RandomEuler);
        assert!(!r.applied_defaults.iter().any(|k| k == "experiment.master_seed"));
        assert!(r.applied_defaults.iter().any(|k| k == "channel.p_opt_watts"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse_toml("[channel]\nwavelenght_nm = 950\n").is_err());
        assert!(ConfigFile::parse_toml("[chanel]\nwavelength_nm = 950\n").is_err());
        assert!(ConfigFile::parse_json(r#"{"config": {"room": {"width": 1}}}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cases = [
            "[experiment]\nh_min_m = 2.6\n",
            "[room]\nwidth_m = -1\n",
            "[orientation]\npitch_std_deg = -3\n",
            "[scan]\nazimuth_step_deg = 7\n",
            "[experiment]\ngrid_spacing_m = 0.3\n",
        ];
        for text in cases {
            let parsed = ConfigFile::parse_toml(text).unwrap();
            assert!(
                matches!(parsed.resolve(ExperimentMode::Cdf), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn filled_config_round_trips_through_json() {
        let text = "[experiment]\nsnr_db = [33.3]\n[channel]\nbeam_waist_um = 6.1\n";
        let r = ConfigFile::parse_toml(text)
            .unwrap()
            .resolve(ExperimentMode::Cdf)
            .unwrap();
        let meta = serde_json::json!({ "mode": "cdf", "config": r.file });
        let back = ConfigFile::parse_json(&meta.to_string()).unwrap();
        assert_eq!(back, r.file);
        let again = back.resolve(ExperimentMode::Cdf).unwrap();
        assert_eq!(again.experiment, r.experiment);
        assert!(again.applied_defaults.is_empty());
    }
}
