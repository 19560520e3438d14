//! Command-line front end. Exit codes: 0 success, 1 usage or config error,
//! 2 runtime error. Diagnostics go to stderr, data only to files.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ConfigFile, ResolvedConfig};
use crate::experiments::{run, ExperimentMode};
use crate::orientation::OrientationMode;
use crate::output::{write_results, OutputError, RunMetadata};

pub const THREADS_ENV: &str = "VLP_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "scanvlp", version, about = "Beam-scanning visible light positioning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Error CDFs over the sample-point grid at one SNR.
    Cdf(CommonArgs),
    /// Mean error against SNR.
    SnrSweep(CommonArgs),
    /// Pilot realignment under random timing offsets.
    SyncTest(CommonArgs),
    /// One sweep at a single position, dumped sample by sample.
    ScanDemo(DemoArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config, or a meta.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Orientation mode; a comma list compares modes in snr-sweep.
    #[arg(long, value_delimiter = ',')]
    orientation: Vec<OrientationMode>,
    /// SNR in dB, or a comma list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
    /// Worker threads; falls back to VLP_SIM_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Receiver position as x,y,z in meters.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    position: Vec<f64>,
    /// Timing offset applied to the received trace, in samples.
    #[arg(long, allow_negative_numbers = true)]
    offset: Option<i64>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            Err(_) => return Ok(None),
        },
    };
    if n == 0 {
        return Err(Failure::Config("thread count must be at least 1".into()));
    }
    Ok(Some(n))
}

fn resolve(mode: ExperimentMode, common: &CommonArgs, demo: Option<&DemoArgs>) -> Result<ResolvedConfig, Failure> {
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        file.experiment.master_seed = Some(seed);
    }
    if !common.snr.is_empty() {
        file.experiment.snr_db = Some(common.snr.clone());
    }
    match common.orientation.as_slice() {
        [] => {}
        [one] => {
            file.orientation.mode = Some(*one);
            file.orientation.compare_modes = Some(Vec::new());
        }
        many => {
            file.orientation.mode = Some(many[0]);
            file.orientation.compare_modes = Some(many.to_vec());
        }
    }
    if let Some(d) = demo {
        match d.position.as_slice() {
            [] => {}
            &[x, y, z] => file.demo.position_m = Some([x, y, z]),
            other => {
                return Err(Failure::Config(format!(
                    "--position takes x,y,z, got {} values",
                    other.len()
                )))
            }
        }
        if let Some(off) = d.offset {
            file.demo.offset_steps = Some(off);
        }
    }
    Ok(file.resolve(mode)?)
}

fn execute(mode: ExperimentMode, common: &CommonArgs, demo: Option<&DemoArgs>) -> Result<(), Failure> {
    let resolved = resolve(mode, common, demo)?;
    let threads = thread_count(common.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(format!("cannot start worker pool: {e}")))?;

    let cfg = &resolved.experiment;
    eprintln!(
        "scanvlp {}: seed {}, {} threads",
        mode.as_str(),
        cfg.master_seed,
        pool.current_num_threads()
    );
    let start = Instant::now();
    let result = pool.install(|| run(cfg)).map_err(|e| {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    })?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let meta = RunMetadata {
        config: &resolved.file,
        applied_defaults: &resolved.applied_defaults,
        wall_time_s,
    };
    let written = write_results(&result, meta, &common.out)?;
    let a = &result.aggregates;
    eprintln!(
        "done in {wall_time_s:.1} s: {} samples, outage {:.4}, clamped {:.4}",
        a.samples, a.outage_frac, a.clamp_frac
    );
    for p in written {
        eprintln!("  wrote {}", p.display());
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the chosen subcommand.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            return 1;
        }
    };
    let outcome = match &cli.command {
        Command::Cdf(c) => execute(ExperimentMode::Cdf, c, None),
        Command::SnrSweep(c) => execute(ExperimentMode::SnrSweep, c, None),
        Command::SyncTest(c) => execute(ExperimentMode::SyncTest, c, None),
        Command::ScanDemo(d) => execute(ExperimentMode::ScanDemo, &d.common, Some(d)),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            f.code()
        }
    }
}
