mod calibrate;
mod generate;
mod lambda;
mod report;
mod serve;
mod simulate;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use venuetrace_core::synth::{read_csv, GeneratorConfig, NoiseMode};
use venuetrace_core::ExposureRecord;

use crate::error::{data, CliResult};

#[derive(Parser, Debug)]
#[command(name = "venuetrace", version, about = "Venue check-in exposure platform tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write synthetic exposure datasets as CSV.
    Generate(generate::GenerateArgs),
    /// Scale the modulation table to a target Bayes-oracle accuracy.
    Calibrate(calibrate::CalibrateArgs),
    /// Split, tune by cross-validation, fit and evaluate classifiers.
    Train(train::TrainArgs),
    /// Grid search of the decay constant.
    Lambda(lambda::LambdaArgs),
    /// Run a consensus fault simulation from a scenario file.
    Simulate(simulate::SimulateArgs),
    /// Start the HTTP service.
    Serve(serve::ServeArgs),
    /// Summarise run manifests and verify their artifact digests.
    Report(report::ReportArgs),
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Calibrate(a) => calibrate::run(a),
        Command::Train(a) => train::run(a),
        Command::Lambda(a) => lambda::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Serve(a) => serve::run(a),
        Command::Report(a) => report::run(a),
    }
}

/// Generator settings; each flag overrides the field of the same name.
#[derive(Args, Debug, Clone, Default)]
pub struct GeneratorFlags {
    /// TOML file with generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub baseline: Option<f64>,
    #[arg(long)]
    pub noise_location: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long, value_parser = parse_noise_mode)]
    pub noise_mode: Option<NoiseMode>,
    #[arg(long)]
    pub noise_weight: Option<f64>,
    #[arg(long)]
    pub n_records: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub balanced: Option<bool>,
    #[arg(long)]
    pub user_pool: Option<usize>,
    #[arg(long)]
    pub horizon_minutes: Option<i64>,
}

fn parse_noise_mode(s: &str) -> Result<NoiseMode, String> {
    match s {
        "scaled" => Ok(NoiseMode::Scaled),
        "raw" => Ok(NoiseMode::Raw),
        "off" => Ok(NoiseMode::Off),
        _ => Err(format!("`{s}` is not one of scaled, raw, off")),
    }
}

impl GeneratorFlags {
    pub fn resolve(&self) -> CliResult<GeneratorConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
                GeneratorConfig::from_toml(&text).map_err(|e| data(format!("{}: {e}", path.display())))?
            }
            None => GeneratorConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            baseline,
            noise_location,
            noise_scale,
            noise_mode,
            noise_weight,
            n_records,
            seed,
            balanced,
            user_pool,
            horizon_minutes
        );
        c.validate().map_err(data)?;
        Ok(c)
    }
}

pub fn load_records(path: &Path) -> CliResult<Vec<ExposureRecord>> {
    let file = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(file)).map_err(|e| data(format!("{}: {e}", path.display())))
}
