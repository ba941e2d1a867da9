use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::{theta_blocks, OutputRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 15] = [
    "sweep_var",
    "sweep_value",
    "scenario_kind",
    "ec_analytic",
    "ec_mc",
    "ec_mc_stderr",
    "p1",
    "p2",
    "p3",
    "p4",
    "p_e1",
    "p_e2",
    "kld",
    "r_star",
    "seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(
                "format",
                format!("expected csv or json, got `{other}`"),
            )),
        }
    }
}

/// Run metadata written alongside the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// `(theta, row_count)` in row order; empty for theta sweeps.
    pub theta_blocks: Vec<(f64, usize)>,
}

impl RunMeta {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        RunMeta {
            tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            theta_blocks: theta_blocks(cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonOutput {
    pub meta: RunMeta,
    pub rows: Vec<OutputRow>,
}

// Debug formatting of f64 is shortest round-trip and switches to exponent
// notation for very small or large magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_record(r: &OutputRow) -> [String; 15] {
    [
        r.sweep_var.as_str().to_string(),
        num(r.sweep_value),
        r.scenario_kind.to_string(),
        num(r.ec_analytic),
        opt(r.ec_mc),
        opt(r.ec_mc_stderr),
        num(r.p1),
        num(r.p2),
        num(r.p3),
        num(r.p4),
        num(r.p_e1),
        num(r.p_e2),
        num(r.kld),
        opt(r.r_star),
        r.seed.to_string(),
    ]
}

fn write_csv<W: Write>(out: &mut W, rows: &[OutputRow], meta: &RunMeta) -> std::io::Result<()> {
    writeln!(out, "# tool: {}", meta.tool_version)?;
    writeln!(out, "# config_sha256: {}", meta.config_hash)?;
    writeln!(out, "# master_seed: {}", meta.master_seed)?;
    if !meta.theta_blocks.is_empty() {
        let blocks: Vec<String> = meta
            .theta_blocks
            .iter()
            .map(|(t, n)| format!("{}x{n}", num(*t)))
            .collect();
        writeln!(out, "# theta_blocks: {}", blocks.join(" "))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(csv_record(r))?;
    }
    w.flush()
}

/// Writes rows to any sink. `label` names the sink in error messages.
pub fn emit<W: Write>(
    out: &mut W,
    rows: &[OutputRow],
    meta: &RunMeta,
    format: OutputFormat,
    label: &Path,
) -> Result<()> {
    let res = match format {
        OutputFormat::Csv => write_csv(out, rows, meta),
        OutputFormat::Json => {
            let doc = JsonOutput {
                meta: meta.clone(),
                rows: rows.to_vec(),
            };
            serde_json::to_writer_pretty(&mut *out, &doc)
                .map_err(std::io::Error::other)
                .and_then(|_| writeln!(out))
        }
    };
    res.and_then(|_| out.flush())
        .map_err(|e| Error::io(label, e))
}

pub fn emit_to_path(
    path: &Path,
    rows: &[OutputRow],
    meta: &RunMeta,
    format: OutputFormat,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    emit(&mut BufWriter::new(file), rows, meta, format, path)
}

pub fn parse_json(text: &str) -> Result<JsonOutput> {
    serde_json::from_str(text).map_err(|e| Error::Numeric(format!("malformed JSON output: {e}")))
}
