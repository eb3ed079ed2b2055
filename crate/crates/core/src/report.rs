//! Machine-readable run reports with a canonical JSON form.
//!
//! Canonical means byte-stable: object keys sorted, floats printed with 17
//! significant digits (exact for f64), no volatile fields. Wall-clock timings
//! are kept on the report struct for diagnostics but excluded from the
//! serialized bytes, so identical runs emit identical reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classify::{ClassificationReport, Period2Report, Verdict, Witness};
use crate::error::{Error, Result};
use crate::solve::{ScheduleSpec, SolveResult, Termination};
use crate::suites::SuiteReport;

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    /// Name of the pseudo-random generator (`chacha8`).
    pub algorithm: String,
    pub seed: u64,
}

/// Enough of the invocation to reproduce the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_fix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub method: String,
    pub result: SolveResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub tool_version: String,
    pub scenario: String,
    pub generator: GeneratorInfo,
    pub invocation: Invocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period2: Option<Period2Report>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solves: Vec<SolveRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<SuiteReport>,
    /// Per-phase wall time; diagnostic only, never serialized.
    #[serde(skip)]
    pub wall_time_ms: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64, invocation: Invocation) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.to_string(),
            generator: GeneratorInfo { algorithm: crate::mapping::GENERATOR.to_string(), seed },
            invocation,
            classification: None,
            period2: None,
            solves: Vec::new(),
            suites: Vec::new(),
            wall_time_ms: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    CsvSummary,
}

/// Serialize a report in the requested format.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_canonical_json(report),
        ReportFormat::CsvSummary => Ok(to_csv_summary(report)),
    }
}

pub fn parse_report(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Canonical JSON: sorted keys, fixed 17-significant-digit floats, trailing
/// newline. Serializing the same value twice yields identical bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("number is one of i64/u64/f64");
                out.push_str(&format_float(f));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"))
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's map is sorted (BTreeMap) with preserve_order off
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("keys always serialize"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

/// 17 significant digits in scientific notation; round-trips every f64.
fn format_float(f: f64) -> String {
    let f = if f == 0.0 { 0.0 } else { f }; // normalize -0.0
    format!("{f:.16e}")
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn csv_row(out: &mut String, fields: &[&str]) {
    let line: Vec<String> = fields.iter().map(|f| csv_quote(f)).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

fn point_brief(p: &crate::geometry::Point) -> String {
    let coords: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
    format!("({})", coords.join(" "))
}

fn witness_brief(w: &Witness) -> String {
    match w {
        Witness::Pair { x, y, input_distance, output_distance } => format!(
            "pair {}->{} in={input_distance} out={output_distance}",
            point_brief(x),
            point_brief(y)
        ),
        Witness::QuasiPair { x, fixed_point, input_distance, output_distance } => format!(
            "x={} fixed={} in={input_distance} out={output_distance}",
            point_brief(x),
            point_brief(fixed_point)
        ),
        Witness::Triple { certificate } => {
            let [x, y, z] = certificate.triple.points();
            format!(
                "triple {} {} {} in={} out={}",
                point_brief(x),
                point_brief(y),
                point_brief(z),
                certificate.input_perimeter,
                certificate.output_perimeter
            )
        }
        Witness::NoFixedPoint => "empty fixed-point set".to_string(),
    }
}

fn termination_str(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "CONVERGED",
        Termination::ResidualFloor => "RESIDUAL_FLOOR",
        Termination::MaxIter => "MAX_ITER",
        Termination::Period2Obstruction => "PERIOD2_OBSTRUCTION",
        Termination::Diverged => "DIVERGED",
    }
}

/// Lossy one-row-per-item summary (no traces; full fidelity is JSON-only).
fn to_csv_summary(report: &RunReport) -> String {
    let mut out = String::new();
    csv_row(&mut out, &["section", "scenario", "item", "status", "value", "detail"]);
    let scen = &report.scenario;
    if let Some(c) = &report.classification {
        for (class, verdict) in &c.verdicts {
            let class_name = serde_json::to_value(class)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let (status, detail) = match verdict {
                Verdict::Holds => ("HOLDS".to_string(), String::new()),
                Verdict::Unknown => ("UNKNOWN".to_string(), String::new()),
                Verdict::Fails { witness } => ("FAILS".to_string(), witness_brief(witness)),
            };
            csv_row(&mut out, &["classification", scen, &class_name, &status, "", &detail]);
        }
        csv_row(
            &mut out,
            &[
                "classification",
                scen,
                "alpha_hat",
                "",
                &format!("{}", c.alpha_hat),
                &format!("triples={} pairs={} exhaustive={}", c.n_triples_checked, c.n_pairs_checked, c.exhaustive),
            ],
        );
    }
    if let Some(p2) = &report.period2 {
        let status = if p2.found { "FOUND" } else { "NOT_FOUND" };
        let value = p2.displacement.map(|d| format!("{d}")).unwrap_or_default();
        let detail = p2.witness.as_ref().map(point_brief).unwrap_or_default();
        csv_row(&mut out, &["period2", scen, "prime_period_2", status, &value, &detail]);
    }
    for solve in &report.solves {
        csv_row(
            &mut out,
            &[
                "solve",
                scen,
                &solve.method,
                termination_str(solve.result.termination),
                &format!("{}", solve.result.residual),
                &format!(
                    "candidate={} outer={} inner={}",
                    point_brief(&solve.result.candidate),
                    solve.result.outer_iterations,
                    solve.result.inner_iterations_total
                ),
            ],
        );
    }
    for suite in &report.suites {
        let status = if suite.n_violations == 0 { "PASS" } else { "FAIL" };
        let value = suite.worst_margin.map(|m| format!("{m}")).unwrap_or_default();
        csv_row(
            &mut out,
            &[
                "suite",
                scen,
                &suite.suite_name,
                status,
                &value,
                &format!("cases={} violations={}", suite.n_cases, suite.n_violations),
            ],
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_is_byte_stable_and_sorted() {
        let report = RunReport::new(
            "demo",
            7,
            Invocation { command: "classify".into(), ..Default::default() },
        );
        let a = emit_report(&report, ReportFormat::Json).unwrap();
        let b = emit_report(&report, ReportFormat::Json).unwrap();
        assert_eq!(a, b);
        // keys of the top-level object appear sorted
        let gen_pos = a.find("\"generator\"").unwrap();
        let inv_pos = a.find("\"invocation\"").unwrap();
        let scen_pos = a.find("\"scenario\"").unwrap();
        assert!(gen_pos < inv_pos && inv_pos < scen_pos);
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn float_formatting_is_fixed_width() {
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        // 17 significant digits round-trip exactly
        let x = 0.1 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn report_json_round_trip() {
        let mut report = RunReport::new(
            "demo",
            7,
            Invocation { command: "solve".into(), method: Some("picard".into()), ..Default::default() },
        );
        report.wall_time_ms.insert("solve".into(), 12.5);
        let json = emit_report(&report, ReportFormat::Json).unwrap();
        let parsed = parse_report(&json).unwrap();
        assert_eq!(parsed.scenario, "demo");
        assert_eq!(parsed.invocation.method.as_deref(), Some("picard"));
        // timing is diagnostic only and does not survive serialization
        assert!(parsed.wall_time_ms.is_empty());
        assert!(!json.contains("wall_time"));
    }

    #[test]
    fn csv_has_header_even_when_empty() {
        let report = RunReport::new("demo", 7, Invocation::default());
        let csv = emit_report(&report, ReportFormat::CsvSummary).unwrap();
        assert_eq!(csv, "section,scenario,item,status,value,detail\n");
    }
}
