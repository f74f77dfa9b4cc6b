//! Result bundle: metrics table, final parameters, config snapshot, log.

use std::fmt::Write as _;
use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::federate::{RoundMetrics, SimulationConfig};

pub const METRICS_FILE: &str = "metrics.csv";
pub const PARAMETERS_FILE: &str = "parameters.json";
pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "run.log";

pub const METRICS_HEADER: &str = "round,test_loss,test_accuracy,mean_client_loss,wall_time_ms";

/// One row per completed round. Floats use the shortest representation
/// that round-trips, so identical runs give identical bytes.
pub fn metrics_csv(history: &[RoundMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in history {
        let mean = m.mean_client_loss.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.round, m.test_loss, m.test_accuracy, mean, m.wall_time_ms
        );
    }
    out
}

/// One human-readable progress line for a round.
pub fn metrics_line(m: &RoundMetrics, total_rounds: usize) -> String {
    let mean = m
        .mean_client_loss
        .map(|v| format!("{v:.6}"))
        .unwrap_or_else(|| "-".into());
    format!(
        "round {}/{} test_loss={:.6} test_accuracy={:.4} mean_client_loss={} wall_time_ms={}",
        m.round, total_rounds, m.test_loss, m.test_accuracy, mean, m.wall_time_ms
    )
}

#[derive(Debug, Serialize)]
struct ParametersDoc<'a> {
    round: usize,
    num_parameters: usize,
    parameters: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportBundle {
    pub metrics_csv: String,
    pub parameters_json: String,
    pub config_json: String,
    pub log: String,
}

impl ExportBundle {
    pub fn new(
        config: &SimulationConfig,
        history: &[RoundMetrics],
        parameters: &[f64],
        log: impl Into<String>,
    ) -> Result<Self> {
        let doc = ParametersDoc {
            round: history.last().map_or(0, |m| m.round),
            num_parameters: parameters.len(),
            parameters,
        };
        Ok(Self {
            metrics_csv: metrics_csv(history),
            parameters_json: serde_json::to_string_pretty(&doc)?,
            config_json: serde_json::to_string_pretty(config)?,
            log: log.into(),
        })
    }

    fn entries(&self) -> [(&'static str, &str); 4] {
        [
            (METRICS_FILE, &self.metrics_csv),
            (PARAMETERS_FILE, &self.parameters_json),
            (CONFIG_FILE, &self.config_json),
            (LOG_FILE, &self.log),
        ]
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in self.entries() {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Zip archive of the four entries (stored, fixed timestamps).
    pub fn to_zip(&self) -> Result<Vec<u8>> {
        let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let opts = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Stored);
        for (name, body) in self.entries() {
            zip.start_file(name, opts).map_err(zip_err)?;
            zip.write_all(body.as_bytes())
                .map_err(|e| Error::io(name, e))?;
        }
        Ok(zip.finish().map_err(zip_err)?.into_inner())
    }
}

fn zip_err(e: zip::result::ZipError) -> Error {
    Error::Io {
        path: "export.zip".into(),
        source: std::io::Error::other(e),
    }
}
