use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use conduct::cli::{self, describe_presets, Overrides, OutputFormat, Preset};
use conduct::error::Error;
use conduct::montecarlo::Design;

/// Market equilibrium simulator and conduct-parameter estimation harness.
#[derive(Debug, Parser)]
#[command(name = "conduct", version, after_help = preset_help())]
struct Args {
    /// Experiment preset: table1 | tableA2_ps_replication | tableA3 |
    /// prop1_diagnostic | custom
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,

    /// Error scale σ (repeatable), overrides the preset's grid
    #[arg(long = "sigma", value_name = "SIGMA")]
    sigmas: Vec<f64>,

    /// Markets per dataset T (repeatable), overrides the preset's grid
    #[arg(long = "sample-size", value_name = "T")]
    sample_sizes: Vec<usize>,

    /// Replications per (sigma, T) cell
    #[arg(long)]
    replications: Option<usize>,

    /// Master seed for all random streams
    #[arg(long)]
    seed: Option<u64>,

    /// Data-generating design: with-shifter | without-shifter
    #[arg(long, value_parser = parse_design)]
    design: Option<Design>,

    /// Report format: csv | markdown
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,

    /// Report file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,

    /// Cap on worker threads; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,

    /// Config file with `key = value` lines mirroring the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

fn preset_help() -> String {
    format!("Presets:\n{}", describe_presets())
}

fn parse_preset(text: &str) -> Result<Preset, String> {
    Preset::parse(text).ok_or_else(|| format!("unknown preset `{text}`"))
}

fn parse_design(text: &str) -> Result<Design, String> {
    cli::parse_design(text).ok_or_else(|| format!("expected with-shifter | without-shifter, got `{text}`"))
}

fn parse_format(text: &str) -> Result<OutputFormat, String> {
    OutputFormat::parse(text).ok_or_else(|| format!("expected csv | markdown, got `{text}`"))
}

impl Args {
    fn into_overrides(self) -> (Overrides, Option<PathBuf>) {
        let overrides = Overrides {
            preset: self.preset,
            sigmas: if self.sigmas.is_empty() { None } else { Some(self.sigmas) },
            sample_sizes: if self.sample_sizes.is_empty() { None } else { Some(self.sample_sizes) },
            replications: self.replications,
            seed: self.seed,
            design: self.design,
            format: self.format,
            output: self.output,
            workers: self.workers,
        };
        (overrides, self.config)
    }
}

fn execute() -> Result<(), Error> {
    let (flags, config_path) = Args::parse().into_overrides();
    let merged = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(&path)?;
            flags.or(Overrides::from_config_file(&text)?)
        }
        None => flags,
    };
    cli::run(&merged.into_run_config()?)
}

fn main() -> ExitCode {
    match execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match &err {
                Error::InvalidConfig(_) => "invalid_config",
                Error::Io(_) => "io",
                Error::RankDeficient { .. } => "rank_deficient",
                Error::ThetaUndefined { .. } => "theta_undefined",
                Error::DegenerateDenominator { .. } => "degenerate_denominator",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": err.to_string() })
            );
            ExitCode::from(2)
        }
    }
}
