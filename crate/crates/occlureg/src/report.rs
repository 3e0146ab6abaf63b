//! Report files: a plot-ready CSV of success rates and a JSON document with
//! every trial record. Both carry the config hash and seed.

use std::path::Path;

use occlureg_core::eval::{
    inlier_rate_stats, Aggregation, InlierRateStats, MapReport, MapRow, Metric, NormConvention, TrialRecord,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{to_json_pretty, write_bytes};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    method: String,
    metric: String,
    aggregation: String,
    threshold: f64,
    value: f64,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::format(Path::new("<csv>"), e.to_string())
}

/// `#` lines hold the metadata; floats use shortest round-trip formatting so
/// [`parse_map_csv`] gives back the identical report.
pub fn format_map_csv(report: &MapReport, meta: &ReportMeta) -> Result<String> {
    let mut out = String::new();
    out.push_str("# value = fraction of trials with error <= threshold (rotation in degrees)\n");
    out.push_str("# pose: ot/softmax solve weighted Procrustes once on the extracted matches; +icp rows are refined\n");
    out.push_str(&format!("# config_hash={}\n", meta.config_hash));
    out.push_str(&format!("# seed={}\n", meta.seed));
    out.push_str(&format!("# trials={}\n", report.trials));
    out.push_str(&format!("# norm={}\n", report.norm.as_str()));
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(CsvRow {
            method: r.method.clone(),
            metric: r.metric.as_str().into(),
            aggregation: r.aggregation.as_str().into(),
            threshold: r.threshold,
            value: r.value,
        })
        .map_err(csv_err)?;
    }
    if report.rows.is_empty() {
        w.write_record(["method", "metric", "aggregation", "threshold", "value"]).map_err(csv_err)?;
    }
    out.push_str(std::str::from_utf8(&w.into_inner().map_err(csv_err)?).expect("csv output is UTF-8"));
    Ok(out)
}

pub fn parse_map_csv(text: &str) -> Result<(MapReport, ReportMeta)> {
    let mut meta = std::collections::BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(c) => {
                if let Some((k, v)) = c.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::format(Path::new("<csv>"), format!("missing {k}")));
    let trials = get("trials")?.parse().map_err(csv_err)?;
    let seed = get("seed")?.parse().map_err(csv_err)?;
    let norm = NormConvention::parse(&get("norm")?)?;
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize::<CsvRow>() {
        let r = row.map_err(csv_err)?;
        rows.push(MapRow {
            method: r.method,
            metric: Metric::parse(&r.metric)?,
            aggregation: Aggregation::parse(&r.aggregation)?,
            threshold: r.threshold,
            value: r.value,
        });
    }
    Ok((MapReport { trials, norm, rows }, ReportMeta { config_hash: get("config_hash")?, seed }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub map: MapReport,
    /// Present for context scenes.
    pub inlier_rates: Option<InlierRateStats>,
    pub records: Vec<TrialRecord>,
}

pub fn format_report_json(report: &MapReport, records: &[TrialRecord], meta: &ReportMeta) -> Result<String> {
    let doc = ReportDocument {
        schema: REPORT_SCHEMA,
        config_hash: meta.config_hash.clone(),
        seed: meta.seed,
        map: report.clone(),
        inlier_rates: inlier_rate_stats(records).ok(),
        records: records.to_vec(),
    };
    to_json_pretty(&doc)
}

/// Writes one report file. Validates before touching the filesystem.
pub fn emit_report(
    report: &MapReport,
    records: &[TrialRecord],
    meta: &ReportMeta,
    format: ReportFormat,
    path: &Path,
) -> Result<()> {
    if records.is_empty() {
        return Err(occlureg_core::Error::EmptyRecords.into());
    }
    let text = match format {
        ReportFormat::Csv => format_map_csv(report, meta)?,
        ReportFormat::Json => format_report_json(report, records, meta)?,
    };
    write_bytes(path, text.as_bytes())
}
