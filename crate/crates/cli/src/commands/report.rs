use std::path::PathBuf;

use clap::Args;

use crate::error::{data, CliResult};
use crate::manifest::{file_digest, Manifest};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Manifests to summarise.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
}

pub fn run(args: ReportArgs) -> CliResult<()> {
    let mut mismatches = 0;
    for path in &args.manifests {
        let m = Manifest::load(path)?;
        println!("{}: {} (seed {:?}, {:.2} s)", path.display(), m.command, m.seed, m.wall_clock_secs);
        for (role, list) in [("in ", &m.inputs), ("out", &m.outputs)] {
            for a in list {
                let status = match file_digest(std::path::Path::new(&a.path)) {
                    Ok((d, _)) if d == a.sha256 => "ok",
                    Ok(_) => "MODIFIED",
                    Err(_) => "MISSING",
                };
                if status != "ok" {
                    mismatches += 1;
                }
                println!("  {role} {status:<8} {}  {}", &a.sha256[..16], a.path);
            }
        }
        if !m.summary.is_null() {
            println!("  summary: {}", m.summary);
        }
    }
    if mismatches > 0 {
        return Err(data(format!("{mismatches} artifact(s) no longer match their recorded digest")));
    }
    Ok(())
}
