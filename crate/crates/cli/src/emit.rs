//! Output files. Data files are pure functions of the configuration; only the
//! manifest records run-specific facts (elapsed time, worker count).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Collects the files written by one run under a common prefix.
pub struct Emitter {
    prefix: PathBuf,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(prefix: &Path) -> Result<Self, CliError> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        Ok(Emitter { prefix: prefix.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut name = OsString::from(self.prefix.as_os_str());
        name.push(".");
        name.push(suffix);
        PathBuf::from(name)
    }

    /// Streams a file through `body`.
    pub fn write_with<F>(&mut self, suffix: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.path(suffix);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write_with(suffix, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)
        })
    }

    pub fn finish(mut self, config: &RunConfig, elapsed_seconds: f64, jobs: usize) -> Result<Vec<PathBuf>, CliError> {
        let files: Vec<String> = self
            .written
            .iter()
            .map(|p| p.file_name().unwrap_or(p.as_os_str()).to_string_lossy().into_owned())
            .collect();
        let manifest = Manifest {
            config,
            version: env!("CARGO_PKG_VERSION"),
            elapsed_seconds,
            jobs,
            files,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    version: &'static str,
    elapsed_seconds: f64,
    jobs: usize,
    files: Vec<String>,
}
