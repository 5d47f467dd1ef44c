//! Deterministic CSV and JSON artifacts stamped with the tool version and config hash.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed float format used in every CSV.
pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

pub struct Output {
    pub dir: PathBuf,
    pub meta: Meta,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(cfg: &RunConfig) -> Result<Output, CliError> {
        let dir = PathBuf::from(&cfg.output.dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output {
            dir,
            meta: Meta { tool: "magwell", version: VERSION, config_sha256: cfg.hash(), seed: cfg.oracle.seed },
            written: Vec::new(),
        })
    }

    pub fn header(&self) -> String {
        format!(
            "# magwell {} config_sha256={} seed={}\n",
            self.meta.version, self.meta.config_sha256, self.meta.seed
        )
    }

    fn write(&mut self, name: &str, text: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(self.header().into_bytes());
        w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// `{"meta": ..., "data": ...}`
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<PathBuf, CliError> {
        let v = json!({"meta": self.meta, "data": data});
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut s = self.header();
        s.push_str(body);
        self.write(name, s.as_bytes())
    }
}
