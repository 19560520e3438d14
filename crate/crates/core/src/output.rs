//! Result files: CSV data plus a `meta.json` that is enough to rerun.
//!
//! Every file is rendered in memory first, so a run that cannot produce a
//! complete set writes nothing. Each file is then written to a temp file in
//! the output directory and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::ConfigFile;
use crate::experiments::{ExperimentMode, RunResult, SNR_DEFINITION};
use crate::stats::EmpiricalCdf;

pub const META_FILE: &str = "meta.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("nothing to write: {0}")]
    EmptySample(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize metadata: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Run context that is not part of [`RunResult`].
#[derive(Debug, Clone, Copy)]
pub struct RunMetadata<'a> {
    /// Fully filled config; echoed verbatim so the run can be reproduced.
    pub config: &'a ConfigFile,
    pub applied_defaults: &'a [String],
    pub wall_time_s: f64,
}

/// Formats with 9 significant digits, `%g` style: plain notation for
/// exponents in `[-5, 9)`, scientific otherwise, trailing zeros dropped.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cdf_csv(cdf: &EmpiricalCdf) -> String {
    let mut out = String::from("error_m,cdf\n");
    for (x, f) in cdf.rows() {
        writeln!(out, "{},{}", fmt_sig(x), fmt_sig(f)).unwrap();
    }
    out
}

fn summary(result: &RunResult) -> Result<(Value, Vec<(String, String)>), OutputError> {
    let agg = json!({
        "samples": result.aggregates.samples,
        "outage_frac": result.aggregates.outage_frac,
        "clamp_frac": result.aggregates.clamp_frac,
        "true_out_of_fov_frac": result.aggregates.true_out_of_fov_frac,
    });
    let mut files = Vec::new();
    let summary = match result.config.mode {
        ExperimentMode::Cdf => {
            let cdf = result.cdf.as_ref().ok_or_else(|| {
                OutputError::EmptySample("every sample was flagged as an outage".into())
            })?;
            files.push(("cdf_3d.csv".to_string(), cdf_csv(&cdf.total)));
            files.push(("cdf_x.csv".to_string(), cdf_csv(&cdf.x)));
            files.push(("cdf_y.csv".to_string(), cdf_csv(&cdf.y)));
            files.push(("cdf_z.csv".to_string(), cdf_csv(&cdf.z)));
            let pct = |q| cdf.total.percentile(q).expect("q in range");
            json!({
                "aggregates": agg,
                "usable_samples": cdf.total.len(),
                "mean_error_3d_m": crate::stats::mean(cdf.total.sorted()),
                "p50_error_3d_m": pct(0.5),
                "p90_error_3d_m": pct(0.9),
                "p95_error_3d_m": pct(0.95),
                "sub_cm_frac_x": cdf.x.fraction_below(0.01),
                "sub_cm_frac_y": cdf.y.fraction_below(0.01),
                "sub_cm_frac_z": cdf.z.fraction_below(0.01),
            })
        }
        ExperimentMode::SnrSweep => {
            if result.sweep.is_empty() {
                return Err(OutputError::EmptySample("sweep produced no rows".into()));
            }
            if let Some(row) = result.sweep.iter().find(|r| !r.mean_error_m.is_finite()) {
                return Err(OutputError::EmptySample(format!(
                    "every sample at {} dB ({}) was flagged as an outage",
                    row.snr_db, row.orientation_mode
                )));
            }
            let mut csv = String::from("snr_db,mean_error_m,outage_frac,clamp_frac,orientation_mode\n");
            for r in &result.sweep {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    fmt_sig(r.snr_db),
                    fmt_sig(r.mean_error_m),
                    fmt_sig(r.outage_frac),
                    fmt_sig(r.clamp_frac),
                    r.orientation_mode
                )
                .unwrap();
            }
            files.push(("mean_error_vs_snr.csv".to_string(), csv));
            json!({ "aggregates": agg, "rows": result.sweep })
        }
        ExperimentMode::SyncTest => {
            let sync = result
                .sync
                .as_ref()
                .ok_or_else(|| OutputError::EmptySample("sync test produced no trials".into()))?;
            let mut csv = String::from(
                "trial,offset_steps,residual_steps,mismatch,error_synced_m,error_realigned_m,error_unaligned_m\n",
            );
            for t in &result.sync_trials {
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    t.trial,
                    t.offset_steps,
                    t.residual_steps,
                    u8::from(t.mismatch),
                    fmt_sig(t.error_synced_m),
                    fmt_sig(t.error_realigned_m),
                    fmt_sig(t.error_unaligned_m)
                )
                .unwrap();
            }
            files.push(("sync_trials.csv".to_string(), csv));
            json!({ "aggregates": agg, "sync": sync })
        }
        ExperimentMode::ScanDemo => {
            let demo = result
                .demo
                .as_ref()
                .ok_or_else(|| OutputError::EmptySample("scan demo produced no trace".into()))?;
            let k = demo.trace.pilot_len();
            let mut csv = String::from("index,beam_azimuth_deg,beam_elevation_deg,power_watts\n");
            for (i, &p) in demo.trace.samples().iter().enumerate() {
                if i < k {
                    writeln!(csv, "{i},,,{}", fmt_sig(p)).unwrap();
                } else {
                    let (az, el) = demo.beam_angles[i - k];
                    writeln!(csv, "{i},{},{},{}", fmt_sig(az), fmt_sig(el), fmt_sig(p)).unwrap();
                }
            }
            files.push(("trace.csv".to_string(), csv));
            json!({
                "true_position_m": demo.true_position,
                "noise_sigma_watts": demo.noise_sigma,
                "offset_steps": demo.trace.offset_steps(),
                "estimate": demo.estimate,
                "error": demo.error,
            })
        }
    };
    Ok((summary, files))
}

/// Renders every output file as `(name, contents)`, `meta.json` last.
pub fn render_results(result: &RunResult, meta: RunMetadata<'_>) -> Result<Vec<(String, String)>, OutputError> {
    let (summary, mut files) = summary(result)?;
    let cfg = &result.config;
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    let doc = json!({
        "mode": cfg.mode.as_str(),
        "code_version": CODE_VERSION,
        "seed": cfg.master_seed,
        "snr_definition": SNR_DEFINITION,
        "config": meta.config,
        "applied_defaults": meta.applied_defaults,
        "heights": {
            "h_min_m": cfg.h_min_m,
            "h_cutoff_m": cfg.height_cutoff_m(),
            "grid_points": cfg.grid_points().len(),
        },
        "files": names,
        "summary": summary,
        "wall_time_s": meta.wall_time_s,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    files.push((META_FILE.to_string(), text));
    Ok(files)
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, OutputError> {
    let path = dir.join(name);
    let io = |source| OutputError::Io { path: path.clone(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

/// Writes the full file set into `out_dir`, creating it if needed.
pub fn write_results(result: &RunResult, meta: RunMetadata<'_>, out_dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let files = render_results(result, meta)?;
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    files
        .iter()
        .map(|(name, contents)| write_atomic(out_dir, name, contents))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;
    use crate::experiments::run;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567891.0), "1.23456789e9");
        assert_eq!(fmt_sig(2.69274e-2), "0.0269274");
        assert_eq!(fmt_sig(5e-14), "5e-14");
        assert_eq!(fmt_sig(-0.00012345678912), "-0.000123456789");
        assert_eq!(fmt_sig(0.0099999999996), "0.01");
        assert_eq!(fmt_sig(20.0), "20");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }

    fn small(mode: ExperimentMode, extra: &str) -> (RunResult, crate::config::ResolvedConfig) {
        let text = format!(
            "[experiment]\ngrid_spacing_m = 0.5\nh_max_m = 1.0\ntrials_per_point = 1\nsync_trials = 4\n\
             [scan]\nazimuth_step_deg = 5\nelevation_step_deg = 5\npilot_len = 16\n{extra}"
        );
        let resolved = ConfigFile::parse_toml(&text).unwrap().resolve(mode).unwrap();
        (run(&resolved.experiment).unwrap(), resolved)
    }

    fn meta(r: &crate::config::ResolvedConfig) -> RunMetadata<'_> {
        RunMetadata {
            config: &r.file,
            applied_defaults: &r.applied_defaults,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn cdf_files_end_at_one() {
        let (result, resolved) = small(ExperimentMode::Cdf, "");
        let files = render_results(&result, meta(&resolved)).unwrap();
        let names: Vec<_> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["cdf_3d.csv", "cdf_x.csv", "cdf_y.csv", "cdf_z.csv", "meta.json"]);
        for (_, text) in &files[..4] {
            assert!(text.starts_with("error_m,cdf\n"));
            assert!(text.trim_end().ends_with(",1"));
        }
    }

    #[test]
    fn each_mode_renders_its_schema() {
        let (r, c) = small(ExperimentMode::SnrSweep, "");
        let files = render_results(&r, meta(&c)).unwrap();
        assert!(files[0].1.starts_with("snr_db,mean_error_m,outage_frac,clamp_frac,orientation_mode\n"));
        assert_eq!(files[0].1.lines().count(), 1 + 7);

        let (r, c) = small(ExperimentMode::SyncTest, "");
        let files = render_results(&r, meta(&c)).unwrap();
        assert_eq!(files[0].0, "sync_trials.csv");
        assert_eq!(files[0].1.lines().count(), 1 + 4);

        let (r, c) = small(ExperimentMode::ScanDemo, "");
        let files = render_results(&r, meta(&c)).unwrap();
        let lines: Vec<_> = files[0].1.lines().collect();
        assert_eq!(lines[0], "index,beam_azimuth_deg,beam_elevation_deg,power_watts");
        assert!(lines[1].starts_with("0,,,"));
        assert!(lines[16].starts_with("15,,,"));
        assert!(lines[17].starts_with("16,0,0,"));
        assert_eq!(lines.len(), 1 + 16 + 72 * 18);
    }

    #[test]
    fn all_outage_writes_nothing() {
        // receiver facing the floor never sees the emitter
        let extra = "[orientation]\nmode = \"random-spherical\"\nelevation_mean_deg = -90\n";
        let (result, resolved) = small(ExperimentMode::Cdf, extra);
        assert!(result.cdf.is_none());
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let err = write_results(&result, meta(&resolved), &out).unwrap_err();
        assert!(matches!(err, OutputError::EmptySample(_)));
        assert!(!out.exists());
    }

    #[test]
    fn written_meta_reproduces_config() {
        let (result, resolved) = small(ExperimentMode::Cdf, "[demo]\noffset_steps = 3\n");
        let dir = tempfile::tempdir().unwrap();
        let paths = write_results(&result, meta(&resolved), dir.path()).unwrap();
        assert_eq!(paths.len(), 5);
        let back = ConfigFile::load(&dir.path().join(META_FILE)).unwrap();
        assert_eq!(back, resolved.file);
        let again = back.resolve(ExperimentMode::Cdf).unwrap();
        assert_eq!(again.experiment, resolved.experiment);
        let leftover: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.starts_with(".tmp"))
            .collect();
        assert!(leftover.is_empty());
    }
}
