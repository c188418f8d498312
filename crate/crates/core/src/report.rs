//! The master run report and its serialized outputs: one JSON document per
//! run plus CSV files for every time series and table. Each section is
//! either present or explicitly skipped with a reason.
//!
//! The report shape is published as a JSON schema (docs/report.schema.json);
//! [`validate_against_schema`] implements the subset of JSON Schema the file
//! uses, so emitted reports can be checked without external tooling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::data::AdmissibilityReport;
use crate::diagnostics::{BlowupFit, ConstraintSeries, SignatureSeries};
use crate::error::Error;
use crate::io;
use crate::kernel::KernelBoundTable;
use crate::picard::{ContractionRecord, ResidualReport, SweepSummary};
use crate::Result;

/// A report section: present with a value, or skipped with a reason.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Present { value: T },
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn skipped(reason: impl Into<String>) -> Self {
        Section::Skipped {
            reason: reason.into(),
        }
    }

    pub fn present(value: T) -> Self {
        Section::Present { value }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Section::Present { value } => Some(value),
            Section::Skipped { .. } => None,
        }
    }
}

/// Residual section: the run's residual plus the exact-wave baseline at the
/// same resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSection {
    pub run: ResidualReport,
    pub gauge_wave_baseline: ResidualReport,
    /// run residual / baseline residual.
    pub ratio_to_baseline: f64,
}

/// Curve-length section: both integrand conventions.
#[derive(Debug, Clone, Serialize)]
pub struct GapSection {
    pub as_written: f64,
    pub root_squares: f64,
    pub finite: bool,
}

/// The master report of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub admissibility: Section<AdmissibilityReport>,
    pub contraction: Section<ContractionRecord>,
    pub sweep: Section<SweepSummary>,
    pub residual: Section<ResidualSection>,
    pub blowup: Section<BlowupFit>,
    pub constraint: Section<ConstraintSeries>,
    pub signature: Section<SignatureSeries>,
    pub kernel_bounds: Section<KernelBoundTable>,
    pub gap: Section<GapSection>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    /// A report with every section marked skipped; stages fill in what they
    /// actually ran.
    pub fn empty(config: &RunConfig) -> Result<Self> {
        Ok(RunReport {
            config_hash: config.hash()?,
            seed: config.seed,
            config: config.clone(),
            admissibility: Section::skipped("stage not run"),
            contraction: Section::skipped("stage not run"),
            sweep: Section::skipped("stage not run"),
            residual: Section::skipped("stage not run"),
            blowup: Section::skipped("stage not run"),
            constraint: Section::skipped("stage not run"),
            signature: Section::skipped("stage not run"),
            kernel_bounds: Section::skipped("stage not run"),
            gap: Section::skipped("stage not run"),
            timings: BTreeMap::new(),
        })
    }
}

/// Writes the master JSON plus one CSV per present time series / table.
/// Returns the list of files written.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let report_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&report_path, json)
        .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    written.push(report_path);

    if let Some(series) = report.constraint.value() {
        let path = out_dir.join("constraint.csv");
        let dim = series.sup_per_mu.first().map(Vec::len).unwrap_or(0);
        let names: Vec<String> = (0..dim).map(|mu| format!("sup_gamma_{mu}")).collect();
        let mut header: Vec<&str> = vec!["t"];
        header.extend(names.iter().map(String::as_str));
        let rows: Vec<Vec<f64>> = series
            .times
            .iter()
            .zip(&series.sup_per_mu)
            .map(|(t, sups)| {
                let mut row = vec![*t];
                row.extend(sups.iter().copied());
                row
            })
            .collect();
        io::write_csv_table(&path, &header, &rows)?;
        written.push(path);
    }

    if let Some(series) = report.signature.value() {
        let path = out_dir.join("signature.csv");
        let rows: Vec<Vec<f64>> = series
            .times
            .iter()
            .zip(&series.margins)
            .map(|(t, m)| vec![*t, *m])
            .collect();
        io::write_csv_table(&path, &["t", "lorentz_margin"], &rows)?;
        written.push(path);
    }

    if let Some(fit) = report.blowup.value() {
        let path = out_dir.join("curvature_maxima.csv");
        let rows: Vec<Vec<f64>> = fit
            .radii
            .iter()
            .zip(&fit.maxima)
            .map(|(r, m)| vec![*r, *m])
            .collect();
        io::write_csv_table(&path, &["radius", "max_abs_scalar_curvature"], &rows)?;
        written.push(path);
    }

    if let Some(table) = report.kernel_bounds.value() {
        let path = out_dir.join("kernel_bounds.csv");
        let rows: Vec<Vec<f64>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.nu0,
                    r.mass_l1,
                    r.deriv_l1_raw,
                    r.deriv_l1_collapsed,
                    if r.resolved { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        io::write_csv_table(
            &path,
            &[
                "nu0",
                "mass_l1",
                "deriv_l1_raw",
                "deriv_l1_collapsed",
                "resolved",
            ],
            &rows,
        )?;
        written.push(path);
    }

    if let Some(record) = report.contraction.value() {
        let path = out_dir.join("contraction.csv");
        let rows: Vec<Vec<f64>> = record
            .norms
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let ratio = if i == 0 {
                    f64::NAN
                } else {
                    record.ratios.get(i - 1).copied().unwrap_or(f64::NAN)
                };
                vec![(i + 1) as f64, *n, ratio]
            })
            .collect();
        io::write_csv_table(&path, &["iteration", "increment_norm", "ratio"], &rows)?;
        written.push(path);
    }

    Ok(written)
}

/// The JSON schema the reports are published against.
pub fn report_schema() -> &'static str {
    include_str!("../../../docs/report.schema.json")
}

/// Validates a JSON value against the subset of JSON Schema used by the
/// published report schema: type, enum, properties, required,
/// additionalProperties (boolean), items, oneOf.
pub fn validate_against_schema(value: &Value, schema: &Value) -> std::result::Result<(), String> {
    validate_at(value, schema, "$")
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        _ => false,
    }
}

fn validate_at(value: &Value, schema: &Value, path: &str) -> std::result::Result<(), String> {
    let obj = match schema.as_object() {
        Some(o) => o,
        None => return Err(format!("{path}: schema node is not an object")),
    };
    if let Some(one_of) = obj.get("oneOf").and_then(Value::as_array) {
        let mut errors = Vec::new();
        for (i, sub) in one_of.iter().enumerate() {
            match validate_at(value, sub, &format!("{path}<oneOf:{i}>")) {
                Ok(()) => return Ok(()),
                Err(e) => errors.push(e),
            }
        }
        return Err(format!("{path}: no oneOf branch matched ({errors:?})"));
    }
    if let Some(ty) = obj.get("type") {
        let ok = match ty {
            Value::String(s) => type_matches(value, s),
            Value::Array(options) => options
                .iter()
                .filter_map(Value::as_str)
                .any(|s| type_matches(value, s)),
            _ => false,
        };
        if !ok {
            return Err(format!("{path}: expected type {ty}, got {value}"));
        }
    }
    if let Some(allowed) = obj.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }
    if let Some(required) = obj.get("required").and_then(Value::as_array) {
        let map = value
            .as_object()
            .ok_or_else(|| format!("{path}: required fields on non-object"))?;
        for key in required.iter().filter_map(Value::as_str) {
            if !map.contains_key(key) {
                return Err(format!("{path}: missing required field '{key}'"));
            }
        }
    }
    if let Some(props) = obj.get("properties").and_then(Value::as_object) {
        if let Some(map) = value.as_object() {
            for (key, sub) in props {
                if let Some(v) = map.get(key) {
                    validate_at(v, sub, &format!("{path}.{key}"))?;
                }
            }
            if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
                for key in map.keys() {
                    if !props.contains_key(key) {
                        return Err(format!("{path}: unexpected field '{key}'"));
                    }
                }
            }
        }
    }
    if let Some(items) = obj.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate_at(v, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::diagnostics::SignatureSeries;

    fn base_config() -> RunConfig {
        serde_json::from_str(r#"{ "grid": { "n": 2, "points": 64 } }"#).unwrap()
    }

    #[test]
    fn empty_report_validates_against_schema() {
        let report = RunReport::empty(&base_config()).unwrap();
        let value = serde_json::to_value(&report).unwrap();
        let schema: Value = serde_json::from_str(report_schema()).unwrap();
        validate_against_schema(&value, &schema).unwrap();
    }

    #[test]
    fn populated_sections_validate_and_emit_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = RunReport::empty(&base_config()).unwrap();
        report.signature = Section::present(SignatureSeries {
            times: vec![0.0, 0.1],
            margins: vec![1.0, 0.98],
            first_failure: None,
        });
        report.timings.insert("signature".to_string(), 0.01);
        let value = serde_json::to_value(&report).unwrap();
        let schema: Value = serde_json::from_str(report_schema()).unwrap();
        validate_against_schema(&value, &schema).unwrap();

        let files = emit_report(&report, dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("report.json")));
        assert!(files.iter().any(|p| p.ends_with("signature.csv")));
        let csv = std::fs::read_to_string(dir.path().join("signature.csv")).unwrap();
        assert!(csv.starts_with("t,lorentz_margin"));
    }

    #[test]
    fn schema_catches_missing_fields() {
        let schema: Value = serde_json::from_str(report_schema()).unwrap();
        let bogus = serde_json::json!({ "config_hash": "x" });
        assert!(validate_against_schema(&bogus, &schema).is_err());
    }

    #[test]
    fn schema_catches_malformed_section() {
        let report = RunReport::empty(&base_config()).unwrap();
        let mut value = serde_json::to_value(&report).unwrap();
        value["blowup"] = serde_json::json!({ "status": "nonsense" });
        let schema: Value = serde_json::from_str(report_schema()).unwrap();
        assert!(validate_against_schema(&value, &schema).is_err());
    }
}
