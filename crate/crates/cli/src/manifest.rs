//! `manifest.txt` (deterministic) and `run.log` (timestamps).

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

/// Key-value record of a run. Outputs are listed with their sizes so a
/// reader can check that every referenced file exists.
pub struct Manifest {
    dir: PathBuf,
    entries: Vec<(String, String)>,
    outputs: Vec<String>,
    log: Vec<String>,
    start: Instant,
}

impl Manifest {
    pub fn new(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut m = Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            outputs: Vec::new(),
            log: vec![format!("started_unix={started}")],
            start: Instant::now(),
        };
        m.set("ssct_version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        Ok(m)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Records `name`, which must already exist in the output directory.
    pub fn output(&mut self, name: &str) -> Result<()> {
        let len = fs::metadata(self.path(name))
            .with_context(|| format!("missing output {name}"))?
            .len();
        self.outputs.push(format!("{name} bytes={len}"));
        Ok(())
    }

    /// Adds a timing line to the log.
    pub fn stage(&mut self, name: &str) {
        self.log.push(format!(
            "{name} elapsed_s={:.3}",
            self.start.elapsed().as_secs_f64()
        ));
    }

    pub fn finish(mut self) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        for o in &self.outputs {
            text.push_str(&format!("output={o}\n"));
        }
        fs::write(self.path("manifest.txt"), text)?;
        self.stage("done");
        let mut log = fs::File::create(self.path("run.log"))?;
        for line in &self.log {
            writeln!(log, "{line}")?;
        }
        Ok(())
    }
}
