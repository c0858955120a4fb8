//! Argument parsing and subcommand dispatch for the `mfi` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mfi_core::signal::simulate_link_with;
use mfi_core::{
    compensate_cd, derive_seed, identify, to_symbol_rate, Decision, ImpairmentSpec, LinkConfig,
    ModFormat, SampleFrame,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::{self, write_csv};
use crate::sample_io::SampleFile;

/// Exit status for a rejected (unclassifiable) input.
pub const EXIT_REJECT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mfi",
    version,
    about = "Clustering-based modulation format identification"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for trial matrices (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Restrict to these formats (repeatable).
    #[arg(long = "format", global = true)]
    pub formats: Vec<ModFormat>,
    /// OSNR values in dB (repeatable). Replaces the OSNR grid, or sets every
    /// format's operating OSNR for cd-tolerance and complexity.
    #[arg(long = "osnr", global = true, allow_negative_numbers = true)]
    pub osnr: Vec<f64>,
    /// Dispersion values in ps/nm (repeatable). Replaces the residual grid for
    /// cd-tolerance; for classify and simulate, the single value to compensate
    /// or apply.
    #[arg(long = "cd", global = true, allow_negative_numbers = true)]
    pub cd: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify the format of a sample file; prints JSON.
    Classify {
        input: PathBuf,
        /// Also write the (k, f) curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// k* for every format, OSNR and trial.
    Ksweep,
    /// Identification accuracy against OSNR.
    Accuracy,
    /// Identification accuracy against residual dispersion.
    CdTolerance,
    /// Runtime of the proposed method against DBSCAN. `--out` names the
    /// summary CSV; per-trial and scaling tables go next to it.
    Complexity,
    /// Write a simulated frame to a sample file.
    Simulate {
        #[arg(long)]
        n_symbols: Option<usize>,
        /// Store symbol-rate samples instead of the oversampled frame.
        #[arg(long)]
        symbol_rate: bool,
    },
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.formats.is_empty() {
        cfg.formats = common.formats.clone();
    }
    if !common.osnr.is_empty() {
        match command {
            Command::CdTolerance | Command::Complexity | Command::Simulate { .. } => {
                let [osnr] = common.osnr[..] else {
                    bail!("{} takes a single --osnr", command_name(command));
                };
                cfg.operating_osnr_db = ModFormat::ALL.into_iter().map(|f| (f, osnr)).collect();
            }
            _ => cfg.osnr_grid_db = common.osnr.clone(),
        }
    }
    if !common.cd.is_empty() && matches!(command, Command::CdTolerance) {
        cfg.cd_grid_ps_nm = common.cd.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Classify { .. } => "classify",
        Command::Ksweep => "ksweep",
        Command::Accuracy => "accuracy",
        Command::CdTolerance => "cd-tolerance",
        Command::Complexity => "complexity",
        Command::Simulate { .. } => "simulate",
    }
}

fn single_cd(common: &Common) -> Result<f64> {
    match common.cd[..] {
        [] => Ok(0.0),
        [cd] => Ok(cd),
        _ => bail!("expected a single --cd value"),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// `dir/stem.csv` becomes `dir/stem_<suffix>.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}{ext}"))
}

#[derive(Debug, Serialize)]
struct ClassifyOutput {
    format: Decision,
    k_star: usize,
    f_max: Option<f64>,
    key_blocks: usize,
}

/// Identifies a sample file. Returns the decision JSON and whether it was a
/// rejection.
pub fn classify_file(
    cfg: &ExperimentConfig,
    input: &Path,
    cd: f64,
    curve: Option<&Path>,
) -> Result<(String, bool)> {
    let file = SampleFile::read(input)?;
    if file.samples.is_empty() {
        bail!("{} holds no samples", input.display());
    }
    let sps = file.samples_per_symbol()?;
    let frame = SampleFrame::new(file.samples, file.symbol_rate, sps)?;
    let frame = if cd != 0.0 {
        compensate_cd(&frame, cd)?
    } else {
        frame
    };
    let symbols = to_symbol_rate(&frame, cfg.rolloff, 0)?;
    let mfi = cfg
        .pipeline
        .to_mfi()?
        .with_seed(derive_seed(cfg.seed, &[3]));
    let d = identify(&symbols, &mfi)?;
    if let (Some(path), Some(sweep)) = (curve, &d.sweep) {
        std::fs::write(path, sweep.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let out = ClassifyOutput {
        format: d.format,
        k_star: d.k_star,
        f_max: d.f_max,
        key_blocks: d.key_blocks.len(),
    };
    Ok((serde_json::to_string(&out)?, d.format.is_reject()))
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let common = &cli.common;
    let cfg = resolve_config(common, &cli.command)?;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Classify { input, curve } => {
            let (json, reject) = classify_file(&cfg, input, single_cd(common)?, curve.as_deref())?;
            writeln!(output(out)?, "{json}")?;
            return Ok(if reject {
                ExitCode::from(EXIT_REJECT)
            } else {
                ExitCode::SUCCESS
            });
        }
        Command::Ksweep => write_csv(&experiments::run_ksweep(&cfg, common.jobs)?, output(out)?)?,
        Command::Accuracy => {
            write_csv(&experiments::run_accuracy(&cfg, common.jobs)?, output(out)?)?
        }
        Command::CdTolerance => write_csv(
            &experiments::run_cd_tolerance(&cfg, common.jobs)?,
            output(out)?,
        )?,
        Command::Complexity => {
            let report = experiments::run_complexity(&cfg)?;
            write_csv(&report.summary, output(out)?)?;
            if let Some(path) = out {
                write_csv(&report.trials, output(Some(&sibling(path, "trials")))?)?;
                write_csv(&report.scaling, output(Some(&sibling(path, "scaling")))?)?;
            }
        }
        Command::Simulate {
            n_symbols,
            symbol_rate,
        } => {
            let Some(path) = out else {
                bail!("simulate needs --out")
            };
            let [format] = cfg.formats[..] else {
                bail!("simulate needs exactly one --format")
            };
            let link = LinkConfig {
                symbol_rate: cfg.symbol_rate,
                samples_per_symbol: cfg.samples_per_symbol,
                rolloff: cfg.rolloff,
            };
            let spec = ImpairmentSpec {
                osnr_db: cfg.operating_osnr(format),
                linewidth_hz: cfg.linewidth_hz,
                applied_cd_ps_nm: single_cd(common)?,
                seed: cfg.seed,
            };
            let frame =
                simulate_link_with(format, n_symbols.unwrap_or(cfg.n_symbols), &spec, &link)?;
            let file = if *symbol_rate {
                let compensated = compensate_cd(&frame, spec.applied_cd_ps_nm)?;
                let samples = to_symbol_rate(&compensated, cfg.rolloff, 0)?;
                SampleFile {
                    sample_rate: cfg.symbol_rate,
                    symbol_rate: cfg.symbol_rate,
                    samples,
                }
            } else {
                SampleFile {
                    sample_rate: frame.sample_rate(),
                    symbol_rate: frame.symbol_rate(),
                    samples: frame.into_samples(),
                }
            };
            file.write(path)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
