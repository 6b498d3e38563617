use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use venuetrace_core::synth::{
    generate_dataset, shipped_archetypes, write_csv, DatasetSize, GeneratorConfig, ModulationTable,
};

use super::GeneratorFlags;
use crate::error::{data, runtime, usage, CliResult};
use crate::manifest::{ensure_dir, Manifest, Recorder};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorFlags,
    /// Standard size: 150k, 250k, 500k, 750k or 1m. Overrides n_records.
    #[arg(long)]
    pub preset: Option<String>,
    /// Emit two independently seeded datasets (seeds `seed` and `seed + 1`).
    #[arg(long)]
    pub pairs: bool,
    /// Repeat the run recorded in a generate manifest.
    #[arg(long, conflicts_with_all = ["preset", "pairs"])]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Everything a generate run's output depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratePlan {
    pub generator: GeneratorConfig,
    pub pairs: bool,
    pub label: String,
}

fn plan(args: &GenerateArgs) -> CliResult<GeneratePlan> {
    if let Some(path) = &args.from_manifest {
        let m = Manifest::load(path)?;
        if m.command != "generate" {
            return Err(data(format!("{} records a `{}` run", path.display(), m.command)));
        }
        let plan: GeneratePlan = serde_json::from_value(m.config).map_err(data)?;
        plan.generator.validate().map_err(data)?;
        return Ok(plan);
    }
    let mut generator = args.generator.resolve()?;
    let label = match &args.preset {
        Some(p) => {
            let size = DatasetSize::parse(p).ok_or_else(|| usage(format!("unknown preset `{p}`")))?;
            generator.n_records = size.records();
            size.label().to_owned()
        }
        None => format!("n{}", generator.n_records),
    };
    generator.validate().map_err(data)?;
    Ok(GeneratePlan { generator, pairs: args.pairs, label })
}

pub fn write_dataset(config: &GeneratorConfig, path: &Path) -> CliResult<usize> {
    let d = generate_dataset(config, &shipped_archetypes(), &ModulationTable::shipped()).map_err(data)?;
    let file = fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    write_csv(&d.records, BufWriter::new(file)).map_err(runtime)?;
    Ok(d.positives)
}

pub fn run(args: GenerateArgs) -> CliResult<()> {
    let plan = plan(&args)?;
    ensure_dir(&args.out_dir)?;
    let mut rec = Recorder::start("generate", &plan, Some(plan.generator.seed));
    let seeds: Vec<u64> = if plan.pairs {
        vec![plan.generator.seed, plan.generator.seed.wrapping_add(1)]
    } else {
        vec![plan.generator.seed]
    };
    let mut files = Vec::new();
    for seed in seeds {
        let config = GeneratorConfig { seed, ..plan.generator.clone() };
        let path = args.out_dir.join(format!("dataset-{}-seed{seed}.csv", plan.label));
        let positives = write_dataset(&config, &path)?;
        rec.output(&path)?;
        println!("{}: {} records, {} positive", path.display(), config.n_records, positives);
        files.push(json!({"path": path.display().to_string(), "seed": seed, "positives": positives}));
    }
    let manifest = rec.finish(&args.out_dir, json!({"datasets": files}))?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
