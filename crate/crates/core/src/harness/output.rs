//! Result rows and their CSV/JSON encodings.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed leading columns, followed by [`EXTRA_COLUMNS`].
pub const COLUMNS: [&str; 12] = [
    "experiment",
    "architecture",
    "resolution",
    "m_rf",
    "power_budget_dbw",
    "seed_group",
    "ee_mean_bit_per_j",
    "ee_std",
    "sumrate_mean_bit_s",
    "sumrate_mc_mean_bit_s",
    "residual_frobenius",
    "runtime_s",
];

pub const EXTRA_COLUMNS: [&str; 5] = ["method", "p_rad_w", "p_static_w", "trials", "error"];

/// One grid point, architecture, resolution, method and seed, averaged over
/// trials. Optional fields are empty in CSV and `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub architecture: String,
    pub resolution: String,
    pub m_rf: usize,
    pub power_budget_dbw: f64,
    pub seed_group: u64,
    pub ee_mean_bit_per_j: Option<f64>,
    pub ee_std: Option<f64>,
    pub sumrate_mean_bit_s: Option<f64>,
    pub sumrate_mc_mean_bit_s: Option<f64>,
    pub residual_frobenius: Option<f64>,
    pub runtime_s: f64,
    pub method: String,
    pub p_rad_w: Option<f64>,
    pub p_static_w: Option<f64>,
    pub trials: usize,
    pub error: Option<String>,
}

impl ResultRow {
    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.architecture.clone(),
            self.resolution.clone(),
            self.m_rf.to_string(),
            self.power_budget_dbw.to_string(),
            self.seed_group.to_string(),
            opt(self.ee_mean_bit_per_j),
            opt(self.ee_std),
            opt(self.sumrate_mean_bit_s),
            opt(self.sumrate_mc_mean_bit_s),
            opt(self.residual_frobenius),
            self.runtime_s.to_string(),
            self.method.clone(),
            opt(self.p_rad_w),
            opt(self.p_static_w),
            self.trials.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    /// Writes the header and one line per row. `f64` values use Rust's
    /// shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(COLUMNS.iter().chain(EXTRA_COLUMNS.iter())).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.fields()).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// JSON array of row objects.
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.rows).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let rows = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(ResultTable { rows })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Writes `table` to `path`; an empty table is rejected.
pub fn emit_results(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::Config("refusing to write an empty result table".into()));
    }
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => table.write_csv(&mut out)?,
        OutputFormat::Json => {
            out.write_all(table.to_json_string()?.as_bytes()).map_err(io_err)?;
            out.write_all(b"\n").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}
