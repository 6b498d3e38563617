use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use venuetrace_ledger::sim::{run_scenario, Scenario};

use crate::error::{data, runtime, CliError, CliResult};
use crate::manifest::{ensure_dir, Recorder};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario TOML.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Skip writing the per-message trace.
    #[arg(long)]
    pub no_trace: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.scenario).map_err(|e| data(format!("{}: {e}", args.scenario.display())))?;
    let scenario = Scenario::from_toml(&text).map_err(|e| data(format!("{}: {e}", args.scenario.display())))?;
    ensure_dir(&args.out_dir)?;
    let mut rec = Recorder::start("simulate", &scenario, Some(scenario.net.seed));
    rec.input(&args.scenario)?;
    let (report, trace) = run_scenario(&scenario, !args.no_trace).map_err(data)?;
    if !args.no_trace {
        let path = args.out_dir.join("trace.txt");
        let mut body = trace.join("\n");
        body.push('\n');
        fs::write(&path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        rec.output(&path)?;
    }
    for (tick, view, leader) in &report.leaders {
        println!("tick {tick:>6}: view {view} led by node {leader}");
    }
    println!("committed per node: {:?}", report.committed);
    println!("ticks {}, messages {}, dropped {}", report.ticks, report.messages, report.dropped);
    println!("all commands committed: {}", report.all_committed);
    println!("verdict: {}", report.verdict());
    let summary = json!({
        "verdict": report.verdict(),
        "all_committed": report.all_committed,
        "leader_changes": report.leaders.len().saturating_sub(1),
        "ticks": report.ticks,
    });
    rec.finish(&args.out_dir, summary)?;
    match report.safety {
        Ok(()) => Ok(()),
        Err(d) => Err(CliError::Runtime(format!("safety violated: {d}"))),
    }
}
