use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use venuetrace_core::synth::{
    bayes_oracle_accuracy, calibrate_alpha, shipped_archetypes, CalibrationTarget, ModulationTable,
};

use super::GeneratorFlags;
use crate::error::{usage, CliResult};
use crate::manifest::{ensure_dir, write_json, Recorder};

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub generator: GeneratorFlags,
    /// Bayes-oracle accuracy to reach.
    #[arg(long, default_value_t = CalibrationTarget::default().accuracy)]
    pub target: f64,
    #[arg(long, default_value_t = CalibrationTarget::default().max_alpha)]
    pub max_alpha: f64,
    /// Bisection steps.
    #[arg(long, default_value_t = CalibrationTarget::default().iterations)]
    pub iterations: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: CalibrateArgs) -> CliResult<()> {
    if !(0.5..1.0).contains(&args.target) || args.max_alpha.is_nan() || args.max_alpha <= 0.0 {
        return Err(usage("need 0.5 <= target < 1 and max_alpha > 0"));
    }
    let config = args.generator.resolve()?;
    let target = CalibrationTarget { accuracy: args.target, max_alpha: args.max_alpha, iterations: args.iterations };
    ensure_dir(&args.out_dir)?;
    let mut rec = Recorder::start("calibrate", &json!({"generator": config, "target": target}), Some(config.seed));
    let archetypes = shipped_archetypes();
    let cal = calibrate_alpha(&archetypes, &config, &target);
    let shipped = bayes_oracle_accuracy(&ModulationTable::shipped(), &archetypes, &config);
    let path = args.out_dir.join("calibration.json");
    write_json(&path, &cal)?;
    rec.output(&path)?;
    println!("alpha            {:.6}", cal.alpha);
    println!("oracle accuracy  {:.4}", cal.accuracy);
    println!("worst case       {:.4}", cal.worst_case);
    println!("shipped table    {:.4}", shipped);
    rec.finish(
        &args.out_dir,
        json!({"alpha": cal.alpha, "accuracy": cal.accuracy, "worst_case": cal.worst_case, "shipped_accuracy": shipped}),
    )?;
    Ok(())
}
