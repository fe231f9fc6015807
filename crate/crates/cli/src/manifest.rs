//! Output files of a run and the manifest written next to them.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Creates output files under a common prefix and remembers their paths.
#[derive(Debug)]
pub struct Outputs {
    prefix: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(prefix: impl Into<PathBuf>) -> Self {
        Self {
            prefix: prefix.into(),
            written: Vec::new(),
        }
    }

    /// `<prefix><suffix>`, e.g. suffix `.csv`.
    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }

    fn open(&mut self, suffix: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(suffix);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Writes one file through `fill`, flushing before recording it.
    pub fn write(&mut self, suffix: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let (path, mut w) = self.open(suffix)?;
        fill(&mut w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json(&mut self, suffix: &str, value: &Value) -> Result<()> {
        self.write(suffix, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub bracketflow: &'static str,
    pub cli: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config: Value,
    pub versions: Versions,
    pub wall_time_s: f64,
    /// Pass/fail summary; `null` when the run did not finish.
    pub summary: Value,
    pub outputs: Vec<PathBuf>,
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config: Value::Null,
            versions: Versions {
                bracketflow: bracketflow::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            wall_time_s: 0.0,
            summary: Value::Null,
            outputs: Vec::new(),
            error: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}
