use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use qlink::Error;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    /// Size and digest are absent for the report file itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

/// Result of one command. `wall_time_s` is left out of the written report so
/// that report files are reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: String,
    pub inputs_digest: String,
    pub results: serde_json::Value,
    pub manifest: Vec<ManifestEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Accumulates the inputs a command depends on.
#[derive(Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn add(&mut self, label: &str, bytes: &[u8]) {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Writes output files into an optional directory and records each one.
pub struct Outputs {
    dir: Option<PathBuf>,
    pub manifest: Vec<ManifestEntry>,
}

impl Outputs {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, manifest: Vec::new() }
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<Option<PathBuf>, Error> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.manifest.push(ManifestEntry {
            path: path.display().to_string(),
            bytes: Some(contents.len()),
            sha256: Some(sha256_hex(contents)),
        });
        Ok(Some(path))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<Option<PathBuf>, Error> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Path the report for `command` will be written to, if any.
    pub fn report_path(&self, command: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("report-{}.json", command.replace(' ', "-"))))
    }

    /// Writes the report, which lists itself last in its manifest.
    pub fn write_report(&self, report: &mut RunReport) -> Result<(), Error> {
        let (Some(dir), Some(path)) = (&self.dir, self.report_path(&report.command)) else {
            return Ok(());
        };
        report.manifest.push(ManifestEntry {
            path: path.display().to_string(),
            bytes: None,
            sha256: None,
        });
        let mut text = serde_json::to_string_pretty(report).expect("serializable");
        text.push('\n');
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}
