//! Output files: every file carries the schema version, the configuration
//! hash and the units banner, and is written through a temporary file.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::CliError;

pub const UNITS: &str = "frequencies in GHz (nu = omega/2pi), times in ns";

#[derive(Debug, Clone)]
pub struct Writer {
    dir: PathBuf,
    command: String,
    hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    config_sha256: &'a str,
    command: &'a str,
    seed: u64,
    units: &'a str,
    result: &'a T,
}

/// Write `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl Writer {
    pub fn new(dir: &Path, command: &str, hash: &str, seed: u64) -> Self {
        Self { dir: dir.to_path_buf(), command: command.into(), hash: hash.into(), seed, written: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            config_sha256: &self.hash,
            command: &self.command,
            seed: self.seed,
            units: UNITS,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.finish(name, text.as_bytes())
    }

    /// CSV with a `#` comment preamble.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut out = format!(
            "# rqrsim {}\n# schema_version = {SCHEMA_VERSION}\n# config_sha256 = {}\n# units: {UNITS}\n",
            self.command, self.hash
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(|e| CliError::Numerical(e.to_string()))?;
            for r in rows {
                w.write_record(r).map_err(|e| CliError::Numerical(e.to_string()))?;
            }
            w.flush()?;
        }
        self.finish(name, &out)
    }

    fn finish(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_carry_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Writer::new(dir.path(), "test", "abc123", 7);
        let p = w.csv("t.csv", &["x", "y"], &[vec![num(1.5), num(-2.0)]]).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.contains("config_sha256 = abc123") && text.contains("schema_version = 1"));
        assert!(text.contains("GHz") && text.ends_with("x,y\n1.5,-2\n"));
        let p = w.json("t.json", &serde_json::json!({"F": 1.0})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["config_sha256"], "abc123");
        assert_eq!(v["result"]["F"], 1.0);
        assert_eq!(w.written().len(), 2);
        assert!(!dir.path().join(".t.json.tmp").exists());
    }
}
