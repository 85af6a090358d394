//! Output directory bookkeeping and the run manifest.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    /// Bad configuration; nothing has been written.
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "configuration error: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<bohm_decay::Error> for Failure {
    fn from(e: bohm_decay::Error) -> Self {
        match e {
            bohm_decay::Error::InvalidParams(msg) => Failure::Config(msg),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("writing output: {e}"))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    outputs: &'a [String],
    diagnostics: &'a Map<String, Value>,
}

/// Collects the files of one run; the manifest is written last.
pub struct Run<'a> {
    config: &'a RunConfig,
    command: &'a str,
    dir: PathBuf,
    outputs: Vec<String>,
    diagnostics: Map<String, Value>,
}

impl<'a> Run<'a> {
    pub fn new(config: &'a RunConfig, command: &'a str) -> Self {
        Self {
            config,
            command,
            dir: config.out.clone(),
            outputs: Vec::new(),
            diagnostics: Map::new(),
        }
    }

    /// Creates `name` in the output directory and hands a buffered writer to
    /// `fill`.
    pub fn file<F>(&mut self, name: &str, fill: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    {
        std::fs::create_dir_all(&self.dir)?;
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        fill(&mut out)?;
        out.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        let outputs = std::mem::take(&mut self.outputs);
        let diagnostics = std::mem::take(&mut self.diagnostics);
        let manifest = Manifest {
            tool: "bohmdecay",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            outputs: &outputs,
            diagnostics: &diagnostics,
        };
        self.file("manifest.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(|e| Failure::Numerical(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }
}
