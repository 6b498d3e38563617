use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use venuetrace_core::model::RiskProfile;
use venuetrace_core::risk::{
    lambda_grid, lambda_report, select_lambda, DecayParams, ThresholdTable, DEFAULT_LAMBDA, LAMBDA_RANGE,
};
use venuetrace_core::synth::{build_histories, HistoryConfig};

use super::load_records;
use crate::error::{data, usage, CliResult};
use crate::manifest::{ensure_dir, write_json, Recorder};

#[derive(Args, Debug)]
pub struct LambdaArgs {
    /// Dataset CSV with per-record risk scores.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = LAMBDA_RANGE.0)]
    pub lo: f64,
    #[arg(long, default_value_t = LAMBDA_RANGE.1)]
    pub hi: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Explicit comma-separated candidates; replaces lo/hi/step.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<f64>>,
    /// Decay under which test outcomes are simulated.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub true_lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: LambdaArgs) -> CliResult<()> {
    let (lo, hi) = LAMBDA_RANGE;
    let grid = match &args.candidates {
        Some(c) => c.clone(),
        None => {
            if !(args.lo > 0.0 && args.lo <= args.hi && args.step > 0.0) {
                return Err(usage("need 0 < lo <= hi and step > 0"));
            }
            lambda_grid(args.lo, args.hi, args.step)
        }
    };
    if grid.is_empty() || grid.iter().any(|l| !(lo..=hi).contains(l)) {
        return Err(usage(format!("candidates must lie within [{lo}, {hi}]")));
    }
    ensure_dir(&args.out_dir)?;
    let history = HistoryConfig {
        true_lambda: args.true_lambda,
        seed: args.seed,
        profile: RiskProfile::Low,
        ..Default::default()
    };
    let table = ThresholdTable::default();
    let config =
        json!({"data": args.data.display().to_string(), "grid": grid, "history": history, "thresholds": table});
    let mut rec = Recorder::start("lambda", &config, Some(args.seed));
    rec.input(&args.data)?;
    let records = load_records(&args.data)?;
    let histories = build_histories(&records, &history);
    if histories.is_empty() {
        return Err(data("dataset holds no per-record risk scores"));
    }
    let report = lambda_report(&grid, &histories, &DecayParams::default(), &table);
    let scores: Vec<f64> = report.values().map(|(_, s)| *s).collect();
    let best = select_lambda(&grid, |l| {
        let i = grid.iter().position(|g| *g == l).expect("candidate from the grid");
        scores[i]
    })
    .expect("non-empty grid");

    println!("{:>10}  {:>9}", "lambda", "objective");
    for (lambda, score) in report.values() {
        let mark = if *lambda == best { "  <- best" } else { "" };
        println!("{lambda:>10.5}  {score:>9.4}{mark}");
    }
    let rows: Vec<_> = report.values().map(|(l, s)| json!({"lambda": l, "objective": s})).collect();
    let path = args.out_dir.join("lambda.json");
    write_json(&path, &json!({"rows": rows, "best": best, "users": histories.len()}))?;
    rec.output(&path)?;
    rec.finish(&args.out_dir, json!({"best": best, "users": histories.len()}))?;
    Ok(())
}
