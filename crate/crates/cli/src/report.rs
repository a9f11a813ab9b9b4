use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Model parameters every report carries.
#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub s: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub subcommand: &'a str,
    pub config_hash: String,
    pub params: Params,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn envelope<'a, T: Serialize>(sub: &'a str, cfg: &'a RunConfig, result: T) -> Envelope<'a, T> {
    Envelope {
        subcommand: sub,
        config_hash: cfg.hash(),
        params: Params {
            eta: cfg.eta,
            m: cfg.m,
            s: cfg.s,
            delta: cfg.delta(),
        },
        config: cfg,
        result,
    }
}

/// `<dir>/<subcommand>-<hash>.<ext>`, unless an explicit path is given.
pub fn report_path(cfg: &RunConfig, sub: &str, ext: &str, explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => cfg.out_dir().join(format!("{sub}-{}.{ext}", cfg.hash())),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Long-format rows `run_id, quantity, x, y`.
#[derive(Debug, Default)]
pub struct LongCsv {
    rows: Vec<(String, f64, f64)>,
}

impl LongCsv {
    pub fn push(&mut self, quantity: impl Into<String>, x: f64, y: f64) {
        self.rows.push((quantity.into(), x, y));
    }

    pub fn write(&self, path: &Path, run_id: &str) -> Result<(), CliError> {
        let mut w = create(path)?;
        let e = |err| io_err(path, err);
        writeln!(w, "run_id,quantity,x,y").map_err(e)?;
        for (q, x, y) in &self.rows {
            writeln!(w, "{run_id},{q},{x:e},{y:e}").map_err(e)?;
        }
        w.flush().map_err(e)
    }
}
