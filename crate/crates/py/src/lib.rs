//! Python bindings for `scanvlp`.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scanvlp::config::ConfigFile;
use scanvlp::estimator::{self, EstimateStatus};
use scanvlp::experiments::{self, ExperimentMode};
use scanvlp::geometry::{self, Room, Vec3};
use scanvlp::orientation::{self, EulerAngles, LaplaceParams};
use scanvlp::output::{self, RunMetadata};
use scanvlp::scan;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn vec3(v: (f64, f64, f64)) -> Vec3 {
    Vec3::new(v.0, v.1, v.2)
}

fn tuple(v: Vec3) -> (f64, f64, f64) {
    (v.x, v.y, v.z)
}

fn status_str(s: EstimateStatus) -> &'static str {
    match s {
        EstimateStatus::Ok => "ok",
        EstimateStatus::ClampedRadicand => "clamped-radicand",
        EstimateStatus::OutOfFovSuspected => "out-of-fov-suspected",
    }
}

fn parse_mode(mode: &str) -> PyResult<ExperimentMode> {
    match mode {
        "cdf" => Ok(ExperimentMode::Cdf),
        "snr-sweep" => Ok(ExperimentMode::SnrSweep),
        "sync-test" => Ok(ExperimentMode::SyncTest),
        "scan-demo" => Ok(ExperimentMode::ScanDemo),
        other => Err(value_err(format!("unknown mode {other:?}"))),
    }
}

#[pyclass(frozen, module = "pyscanvlp")]
struct BeamGrid {
    inner: Arc<geometry::BeamGrid>,
}

impl BeamGrid {
    fn check(&self, j: usize) -> PyResult<()> {
        if j < self.inner.len() {
            Ok(())
        } else {
            Err(value_err(format!("beam {j} out of range for {} beams", self.inner.len())))
        }
    }
}

#[pymethods]
impl BeamGrid {
    #[new]
    #[pyo3(signature = (azimuth_step_deg = 1.0, elevation_step_deg = 1.0))]
    fn new(azimuth_step_deg: f64, elevation_step_deg: f64) -> PyResult<Self> {
        let inner = geometry::BeamGrid::build(azimuth_step_deg, elevation_step_deg).map_err(value_err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn column(&self, j: usize) -> PyResult<(f64, f64, f64)> {
        self.check(j)?;
        Ok(tuple(self.inner.column(j)))
    }

    /// `(azimuth_deg, elevation_deg)` of beam `j`.
    fn angles(&self, j: usize) -> PyResult<(f64, f64)> {
        self.check(j)?;
        Ok(self.inner.angles(j))
    }

    fn index(&self, elevation_idx: usize, azimuth_idx: usize) -> PyResult<usize> {
        if elevation_idx >= self.inner.n_elevation() || azimuth_idx >= self.inner.n_azimuth() {
            return Err(value_err("ring or azimuth index out of range"));
        }
        Ok(self.inner.index(elevation_idx, azimuth_idx))
    }

    fn cells_containing(&self, direction: (f64, f64, f64)) -> Vec<usize> {
        self.inner.cells_containing(vec3(direction))
    }

    fn __repr__(&self) -> String {
        let (az, el) = (self.inner.azimuth_step_deg(), self.inner.elevation_step_deg());
        format!("BeamGrid(azimuth_step_deg={az}, elevation_step_deg={el}, beams={})", self.inner.len())
    }
}

#[pyclass(frozen, from_py_object, module = "pyscanvlp")]
#[derive(Clone)]
struct ChannelParams {
    inner: scanvlp::ChannelParams,
}

#[pymethods]
impl ChannelParams {
    #[new]
    #[pyo3(signature = (p_opt_watts = 1e-3, wavelength_m = 950e-9, beam_waist_m = 5.9e-6,
                        pd_area_m2 = 1e-4, noise_variance = 5e-14, bandwidth_hz = 2e9))]
    fn new(
        p_opt_watts: f64,
        wavelength_m: f64,
        beam_waist_m: f64,
        pd_area_m2: f64,
        noise_variance: f64,
        bandwidth_hz: f64,
    ) -> PyResult<Self> {
        let inner = scanvlp::ChannelParams {
            p_opt: p_opt_watts,
            lambda_m: wavelength_m,
            w0_m: beam_waist_m,
            a_pd_m2: pd_area_m2,
            noise_variance,
            bandwidth_hz,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn p_opt_watts(&self) -> f64 {
        self.inner.p_opt
    }

    #[getter]
    fn wavelength_m(&self) -> f64 {
        self.inner.lambda_m
    }

    #[getter]
    fn beam_waist_m(&self) -> f64 {
        self.inner.w0_m
    }

    #[getter]
    fn pd_area_m2(&self) -> f64 {
        self.inner.a_pd_m2
    }

    fn beam_radius(&self, distance_m: f64) -> f64 {
        scanvlp::channel::beam_radius(distance_m, 0.0, &self.inner)
    }

    fn received_power(&self, distance_m: f64, cos_psi: f64) -> f64 {
        scanvlp::channel::received_power_on_axis(distance_m, cos_psi, &self.inner, 0.0)
    }

    /// `(distance_m, status)` from an on-axis power sample.
    fn invert_distance(&self, power_watts: f64, cos_psi: f64) -> PyResult<(f64, &'static str)> {
        let (d, s) = estimator::invert_distance(power_watts, cos_psi, &self.inner).map_err(value_err)?;
        Ok((d, status_str(s)))
    }

    fn noise_sigma_for_snr(&self, signal_watts: f64, snr_db: f64) -> f64 {
        scanvlp::channel::noise_sigma_for_snr(signal_watts, snr_db)
    }
}

#[pyfunction]
fn laplace_sample(mu: f64, sigma: f64, u: f64) -> PyResult<f64> {
    let p = LaplaceParams::new(mu, sigma).map_err(value_err)?;
    orientation::laplace_sample(&p, u).map_err(value_err)
}

#[pyfunction]
fn laplace_cdf(mu: f64, sigma: f64, x: f64) -> PyResult<f64> {
    Ok(LaplaceParams::new(mu, sigma).map_err(value_err)?.cdf(x))
}

#[pyfunction]
fn normal_from_euler(roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> (f64, f64, f64) {
    tuple(orientation::normal_from_euler(EulerAngles {
        alpha_roll: roll_deg,
        beta_pitch: pitch_deg,
        gamma_yaw: yaw_deg,
    }))
}

#[pyfunction]
fn normal_from_spherical(azimuth_deg: f64, elevation_deg: f64) -> (f64, f64, f64) {
    tuple(orientation::normal_from_spherical(azimuth_deg, elevation_deg))
}

/// One synchronized sweep; returns the per-beam power samples.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (grid, position, normal = (0.0, 0.0, 1.0), fov_deg = 120.0, noise_sigma = 0.0, seed = 0, params = None))]
fn simulate_scan(
    py: Python<'_>,
    grid: &BeamGrid,
    position: (f64, f64, f64),
    normal: (f64, f64, f64),
    fov_deg: f64,
    noise_sigma: f64,
    seed: u64,
    params: Option<ChannelParams>,
) -> PyResult<Vec<f64>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    let normal = vec3(normal).normalized().ok_or_else(|| value_err("normal must be nonzero"))?;
    let rx = geometry::ReceiverState {
        position: vec3(position),
        normal,
        fov_deg,
    };
    let plan = scan::ScanPlan::synchronized(grid.inner.clone());
    let room = Room::default();
    py.detach(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        scan::run_scan(&plan, &room, &rx, &params, noise_sigma, &mut rng).map(|t| t.samples().to_vec())
    })
    .map_err(value_err)
}

/// Position estimate from a synchronized sweep, as a dict.
#[pyfunction]
#[pyo3(signature = (grid, samples, noise_sigma = 0.0, assumed_normal = (0.0, 0.0, 1.0), params = None))]
fn estimate<'py>(
    py: Python<'py>,
    grid: &BeamGrid,
    samples: Vec<f64>,
    noise_sigma: f64,
    assumed_normal: (f64, f64, f64),
    params: Option<ChannelParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = params.map(|p| p.inner).unwrap_or_default();
    let emitter = Room::default().emitter_pos();
    let est = estimator::estimate_position(emitter, &samples, &grid.inner, &params, vec3(assumed_normal), noise_sigma)
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("beam_index", est.beam_index)?;
    d.set_item("distance_m", est.distance_m)?;
    d.set_item("position", tuple(est.position))?;
    d.set_item("status", status_str(est.status))?;
    d.set_item("assumed_cos_psi", est.assumed_cos_psi)?;
    Ok(d)
}

fn resolve(mode: &str, config_toml: &str) -> PyResult<scanvlp::ResolvedConfig> {
    let file = ConfigFile::parse_toml(config_toml).map_err(value_err)?;
    file.resolve(parse_mode(mode)?).map_err(value_err)
}

fn execute(py: Python<'_>, resolved: &scanvlp::ResolvedConfig) -> PyResult<(scanvlp::RunResult, f64)> {
    py.detach(|| {
        let start = std::time::Instant::now();
        experiments::run(&resolved.experiment).map(|r| (r, start.elapsed().as_secs_f64()))
    })
    .map_err(|e| if e.is_config() { value_err(e) } else { runtime_err(e) })
}

/// Runs an experiment and returns the metadata document as a JSON string.
///
/// `config_toml` uses the same keys as the command-line config files.
#[pyfunction]
#[pyo3(signature = (mode, config_toml = ""))]
fn run_experiment(py: Python<'_>, mode: &str, config_toml: &str) -> PyResult<String> {
    let resolved = resolve(mode, config_toml)?;
    let (result, wall_time_s) = execute(py, &resolved)?;
    let meta = RunMetadata {
        config: &resolved.file,
        applied_defaults: &resolved.applied_defaults,
        wall_time_s,
    };
    let files = output::render_results(&result, meta).map_err(runtime_err)?;
    Ok(files.into_iter().last().map(|(_, text)| text).unwrap_or_default())
}

/// Runs an experiment and writes its file set; returns the written paths.
#[pyfunction]
#[pyo3(signature = (mode, out_dir, config_toml = ""))]
fn write_experiment(py: Python<'_>, mode: &str, out_dir: PathBuf, config_toml: &str) -> PyResult<Vec<PathBuf>> {
    let resolved = resolve(mode, config_toml)?;
    let (result, wall_time_s) = execute(py, &resolved)?;
    let meta = RunMetadata {
        config: &resolved.file,
        applied_defaults: &resolved.applied_defaults,
        wall_time_s,
    };
    output::write_results(&result, meta, &out_dir).map_err(runtime_err)
}

#[pymodule]
fn pyscanvlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SNR_DEFINITION", experiments::SNR_DEFINITION)?;
    m.add_class::<BeamGrid>()?;
    m.add_class::<ChannelParams>()?;
    m.add_function(wrap_pyfunction!(laplace_sample, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_from_euler, m)?)?;
    m.add_function(wrap_pyfunction!(normal_from_spherical, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scan, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(write_experiment, m)?)?;
    Ok(())
}
