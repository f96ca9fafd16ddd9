//! Data output plus the run-metadata JSON written next to it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use qalab_core::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
    pub command: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// `results.csv` → `results.csv.meta.json`.
pub fn metadata_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

impl Sink {
    /// Writes `data` to `--out` (or stdout) and the metadata beside it (or to stderr).
    pub fn emit(&self, data: &str, params: Value) -> Result<()> {
        let meta = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "threads": self.threads,
            "format": self.format,
            "params": params,
            "run": {
                "unix_time": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            },
        });
        let meta = serde_json::to_string_pretty(&meta)?;
        match &self.out {
            Some(path) => {
                std::fs::write(path, data)?;
                std::fs::write(metadata_path(path), meta + "\n")?;
            }
            None => {
                print!("{data}");
                eprintln!("{meta}");
            }
        }
        Ok(())
    }

    pub fn emit_serialized<T: Serialize>(&self, csv: Option<String>, value: &T, params: Value) -> Result<()> {
        match (self.format, csv) {
            (Format::Csv, Some(text)) => self.emit(&text, params),
            _ => self.emit(&(serde_json::to_string_pretty(value)? + "\n"), params),
        }
    }
}
