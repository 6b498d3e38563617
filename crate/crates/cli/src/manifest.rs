//! Run manifests: what ran, with which configuration, reading and writing
//! which files.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{data, runtime, CliResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Artifact {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let (sha256, bytes) = file_digest(path)?;
        Ok(Artifact { path: path.display().to_string(), sha256, bytes })
    }
}

pub fn file_digest(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// Everything the command's output depends on.
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub started_at: String,
    pub finished_at: String,
    pub wall_clock_secs: f64,
    /// Command-specific results.
    pub summary: Value,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| data(format!("{}: not a run manifest: {e}", path.display())))
    }
}

/// Collects a manifest while a command runs.
pub struct Recorder {
    command: String,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
    started_at: DateTime<Utc>,
    clock: Instant,
}

impl Recorder {
    pub fn start(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Recorder {
            command: command.to_owned(),
            config: serde_json::to_value(config).expect("config serialises"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: Utc::now(),
            clock: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(Artifact::of(path).map_err(|e| data(format!("{}: {e}", path.display())))?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.push(Artifact::of(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?);
        Ok(())
    }

    /// Writes the manifest to `<out_dir>/<command>.manifest.json`.
    pub fn finish(self, out_dir: &Path, summary: Value) -> CliResult<PathBuf> {
        let finished = Utc::now();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            started_at: self.started_at.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: finished.to_rfc3339_opts(SecondsFormat::Millis, true),
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
            summary,
        };
        let path = out_dir.join(format!("{}.manifest.json", manifest.command));
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = std::env::temp_dir().join(format!("vt-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("abc.txt");
        fs::write(&p, "abc").unwrap();
        let a = Artifact::of(&p).unwrap();
        assert_eq!(a.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(a.bytes, 3);
        fs::remove_dir_all(&dir).unwrap();
    }
}
