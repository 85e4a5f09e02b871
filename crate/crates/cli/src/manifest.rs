//! Run manifest: configuration snapshot, input digests, per-phase timings,
//! and a digest of every emitted artifact, in the same flat `key = value`
//! text format the configuration files use.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

pub fn sha256_hex(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::Error::from(dsah_core::Error::Io(e)))
        .with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Collects manifest rows as a command runs.
pub struct Manifest {
    rows: Vec<(String, String)>,
    started: Instant,
    last_phase: Instant,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Manifest {
        let now = Instant::now();
        Manifest {
            rows: vec![
                ("toolkit_version".into(), env!("CARGO_PKG_VERSION").into()),
                ("command".into(), command.into()),
                ("seed".into(), seed.to_string()),
            ],
            started: now,
            last_phase: now,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    /// Records an input path together with its content digest.
    pub fn input(&mut self, name: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.rows
            .push((name.to_string(), path.display().to_string()));
        self.rows
            .push((format!("{name}_sha256"), sha256_hex(path)?));
        Ok(())
    }

    /// Closes the current phase, recording its wall-clock duration.
    pub fn phase_done(&mut self, name: &str) {
        let elapsed = self.last_phase.elapsed();
        self.last_phase = Instant::now();
        self.rows
            .push((format!("phase_{name}_ms"), elapsed.as_millis().to_string()));
    }

    /// Records an emitted artifact with its digest.
    pub fn artifact(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.rows
            .push((format!("artifact.{name}"), sha256_hex(path)?));
        Ok(())
    }

    pub fn write(mut self, path: impl AsRef<Path>) -> Result<()> {
        self.rows.push((
            "total_ms".into(),
            self.started.elapsed().as_millis().to_string(),
        ));
        let mut out = String::new();
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
