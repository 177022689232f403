//! Run-directory bookkeeping: CSV/JSON emission plus a closing manifest with
//! checksums of everything written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

#[derive(Debug, Clone, Serialize)]
struct FileRecord {
    name: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    artifact_version: &'a str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    config: &'a RunConfig,
    files: &'a [FileRecord],
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl OutputWriter {
    pub fn create(dir: &Path) -> Result<(Self, u128), CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok((
            Self {
                dir: dir.to_path_buf(),
                files: Vec::new(),
            },
            now_ms(),
        ))
    }

    fn record(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(contents);
        self.files.push(FileRecord {
            name: name.to_string(),
            sha256: hex::encode(hasher.finalize()),
            bytes: contents.len(),
        });
        Ok(())
    }

    /// Writes a CSV file from a header and preformatted rows.
    pub fn csv<I: IntoIterator<Item = String>>(
        &mut self,
        name: &str,
        header: &str,
        rows: I,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "{header}").expect("vec write");
        for row in rows {
            writeln!(buf, "{row}").expect("vec write");
        }
        self.record(name, &buf)
    }

    /// Writes pretty-printed JSON; field order follows the struct definition
    /// so identical values serialize byte-identically.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.record(name, text.as_bytes())
    }

    /// Writes `manifest.json` covering every file emitted so far.
    pub fn finish(
        self,
        command: &str,
        config: &RunConfig,
        started_unix_ms: u128,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            command,
            artifact_version: env!("CARGO_PKG_VERSION"),
            started_unix_ms,
            finished_unix_ms: now_ms(),
            config,
            files: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

/// Formats one CSV row of floats with shortest-roundtrip precision.
pub fn row(values: &[f64]) -> String {
    let mut out = String::new();
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
    }
    out
}
